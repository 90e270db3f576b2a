#include "vcformer/lagcorr.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace vcformer {

namespace {

void check_pair(const Tensor& q, const Tensor& k) {
    if (q.rank() != 2 || k.rank() != 2 || q.extent(1) != k.extent(1) ||
        q.extent(0) != k.extent(0)) {
        throw ShapeError("lagged_corr: shape mismatch " + q.shape_str() + " vs " +
                         k.shape_str());
    }
}

} // namespace

Tensor lagged_corr_naive(const Tensor& q, const Tensor& k) {
    check_pair(q, k);
    std::size_t n = q.extent(0), L = q.extent(1);
    std::vector<double> out(n * n * L);
    double inv_l = 1.0 / static_cast<double>(L);
    for (std::size_t tau = 1; tau <= L; ++tau) {
        Tensor shifted = roll_last_axis(k, static_cast<std::int64_t>(tau));
        Tensor scores = matmul(q, transpose(shifted)); // [n x n] dot at this lag
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                out[(i * n + j) * L + (tau - 1)] = scores.at2(i, j) * inv_l;
    }
    return Tensor({n, n, L}, std::move(out));
}

Tensor lagged_corr_fft(const Tensor& q, const Tensor& k) {
    check_pair(q, k);
    std::size_t n = q.extent(0), L = q.extent(1);
    ComplexTensor qs = rfft_last_axis(q);
    ComplexTensor ks = rfft_last_axis(k);
    std::size_t bins = L / 2 + 1;
    double inv_l = 1.0 / static_cast<double>(L);

    std::vector<double> out(n * n * L);
    const double* pq = qs.data();
    const double* pk = ks.data();
    parallel_for(n * n, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> spec(bins * 2);
        for (std::size_t p = lo; p < hi; ++p) {
            std::size_t i = p / n, j = p % n;
            const double* qrow = pq + i * bins * 2;
            const double* krow = pk + j * bins * 2;
            for (std::size_t f = 0; f < bins; ++f) {
                double ar = qrow[2 * f], ai = qrow[2 * f + 1];
                double br = krow[2 * f], bi = krow[2 * f + 1];
                spec[2 * f] = ar * br + ai * bi;
                spec[2 * f + 1] = ai * br - ar * bi;
            }
            // c[m] = sum_t q_t k_{(t-m) mod L}; lag tau reads c[tau mod L]
            Tensor c = irfft_last_axis(ComplexTensor({bins}, spec), L);
            double* dst = out.data() + p * L;
            for (std::size_t tau = 1; tau <= L; ++tau)
                dst[tau - 1] = c[tau % L] * inv_l;
        }
    });
    return Tensor({n, n, L}, std::move(out));
}

Tensor aggregate_scores(const Tensor& r, const Tensor& lambda) {
    if (r.rank() != 3 || lambda.rank() != 1 || r.extent(2) != lambda.extent(0)) {
        throw ShapeError("aggregate_scores: shape mismatch " + r.shape_str() +
                         " vs " + lambda.shape_str());
    }
    std::size_t n0 = r.extent(0), n1 = r.extent(1), L = r.extent(2);
    std::vector<double> out(n0 * n1, 0.0);
    for (std::size_t p = 0; p < n0 * n1; ++p) {
        const double* pr = r.data() + p * L;
        double acc = 0.0;
        for (std::size_t tau = 0; tau < L; ++tau) acc += lambda[tau] * pr[tau];
        out[p] = acc;
    }
    return Tensor({n0, n1}, std::move(out));
}

namespace ad {

Var lagged_corr_fft(Tape& t, Var q, Var k) {
    const Tensor& qv = t.value(q);
    check_pair(qv, t.value(k));
    std::size_t n = qv.extent(0), L = qv.extent(1);
    Var qs = rfft(t, q);
    Var ks = rfft(t, k);
    Var cross = cross_spectrum(t, qs, ks);     // [n*n x 2*bins]
    Var c = irfft(t, cross, L);                // [n*n x L], c[m] as above
    Var r = mul_scalar(t, roll_last(t, c, -1), 1.0 / static_cast<double>(L));
    return reshape(t, r, {n, n, L});
}

} // namespace ad

// ============================================================================
// Benchmark
// ============================================================================

namespace {

// Repeats f until it has consumed ~20ms or 5 runs, returns ns per run.
template <typename F>
std::int64_t time_ns(F f) {
    using clock = std::chrono::steady_clock;
    std::int64_t best = -1;
    std::int64_t budget_ns = 20'000'000;
    std::int64_t spent = 0;
    int runs = 0;
    while (runs < 5 && spent < budget_ns) {
        auto t0 = clock::now();
        f();
        auto dt = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0)
                      .count();
        spent += dt;
        ++runs;
        if (best < 0 || dt < best) best = dt;
    }
    return best;
}

} // namespace

std::vector<BenchRow> bench_lagcorr(
    const std::vector<std::pair<std::size_t, std::size_t>>& sizes, std::uint64_t seed) {
    std::vector<BenchRow> rows;
    rows.reserve(sizes.size());
    Rng rng(seed == 0 ? 0x5eed : seed);
    for (auto [n, len] : sizes) {
        Tensor q = Tensor::random_gaussian({n, len}, rng);
        Tensor k = Tensor::random_gaussian({n, len}, rng);
        Tensor naive_out, fft_out;
        BenchRow row;
        row.n = n;
        row.len = len;
        row.naive_ns = time_ns([&] { naive_out = lagged_corr_naive(q, k); });
        row.fft_ns = time_ns([&] { fft_out = lagged_corr_fft(q, k); });
        double worst = 0.0;
        for (std::size_t i = 0; i < naive_out.size(); ++i)
            worst = std::max(worst, std::abs(naive_out[i] - fft_out[i]));
        if (worst > 1e-8) {
            throw NumericError("bench_lagcorr: paths disagree by " +
                               std::to_string(worst) + " at n=" + std::to_string(n) +
                               " len=" + std::to_string(len));
        }
        rows.push_back(row);
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    os << "n,len,naive_ns,fft_ns\n";
    for (const BenchRow& r : rows)
        os << r.n << "," << r.len << "," << r.naive_ns << "," << r.fft_ns << "\n";
    return os.str();
}

} // namespace vcformer
