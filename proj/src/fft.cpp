#include "vcformer/fft.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>

namespace vcformer::fft {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Twiddle table for a power-of-two length: w[j] = exp(-2*pi*i*j/n), j < n/2.
struct Pow2Plan {
    std::size_t n = 0;
    std::vector<std::complex<double>> twiddle;

    explicit Pow2Plan(std::size_t len) : n(len) {
        twiddle.resize(n / 2);
        for (std::size_t j = 0; j < n / 2; ++j) {
            double ang = -2.0 * kPi * static_cast<double>(j) / static_cast<double>(n);
            twiddle[j] = {std::cos(ang), std::sin(ang)};
        }
    }
};

void fft_pow2(std::complex<double>* a, std::size_t n, const Pow2Plan& plan,
              bool inverse) {
    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        std::size_t step = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < len / 2; ++j) {
                std::complex<double> w = plan.twiddle[j * step];
                if (inverse) w = std::conj(w);
                std::complex<double> u = a[i + j];
                std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
            }
        }
    }
    if (inverse) {
        double inv = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) a[i] *= inv;
    }
}

// Bluestein chirp-z plan for arbitrary n. The internal convolution length m
// is a power of two >= 2n-1; only the OUTER transform keeps length n, so
// circular semantics at n are preserved exactly.
struct BluesteinPlan {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<std::complex<double>> chirp;    // w[k] = exp(-i*pi*k^2/n)
    std::vector<std::complex<double>> b_spec;   // FFT of the chirp kernel
    std::shared_ptr<const Pow2Plan> inner;

    explicit BluesteinPlan(std::size_t len) : n(len), m(next_pow2(2 * len - 1)) {
        chirp.resize(n);
        std::uint64_t mod = 2 * static_cast<std::uint64_t>(n);
        for (std::size_t k = 0; k < n; ++k) {
            // k^2 reduced mod 2n before the trig call keeps the phase exact
            // for large k.
            std::uint64_t q = (static_cast<std::uint64_t>(k) * k) % mod;
            double ang = -kPi * static_cast<double>(q) / static_cast<double>(n);
            chirp[k] = {std::cos(ang), std::sin(ang)};
        }
        inner = std::make_shared<Pow2Plan>(m);
        std::vector<std::complex<double>> b(m, {0.0, 0.0});
        b[0] = std::conj(chirp[0]);
        for (std::size_t k = 1; k < n; ++k) {
            b[k] = std::conj(chirp[k]);
            b[m - k] = std::conj(chirp[k]);
        }
        fft_pow2(b.data(), m, *inner, false);
        b_spec = std::move(b);
    }
};

void fft_bluestein(std::complex<double>* x, std::size_t n,
                   const BluesteinPlan& plan, bool inverse) {
    const std::size_t m = plan.m;
    std::vector<std::complex<double>> a(m, {0.0, 0.0});
    if (inverse) {
        // ifft(x) = conj(fft(conj(x))) / n
        for (std::size_t k = 0; k < n; ++k) a[k] = std::conj(x[k]) * plan.chirp[k];
    } else {
        for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * plan.chirp[k];
    }
    fft_pow2(a.data(), m, *plan.inner, false);
    for (std::size_t k = 0; k < m; ++k) a[k] *= plan.b_spec[k];
    fft_pow2(a.data(), m, *plan.inner, true);
    if (inverse) {
        double inv = 1.0 / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k)
            x[k] = std::conj(a[k] * plan.chirp[k]) * inv;
    } else {
        for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * plan.chirp[k];
    }
}

struct PlanEntry {
    std::shared_ptr<const Pow2Plan> pow2;
    std::shared_ptr<const BluesteinPlan> bluestein;
};

PlanEntry plan_for(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, PlanEntry> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    PlanEntry entry;
    if (is_pow2(n)) {
        entry.pow2 = std::make_shared<Pow2Plan>(n);
    } else {
        entry.bluestein = std::make_shared<BluesteinPlan>(n);
    }
    cache.emplace(n, entry);
    return entry;
}

} // namespace

void transform(std::complex<double>* data, std::size_t n, bool inverse) {
    if (n <= 1) return;
    PlanEntry plan = plan_for(n);
    if (plan.pow2) {
        fft_pow2(data, n, *plan.pow2, inverse);
    } else {
        fft_bluestein(data, n, *plan.bluestein, inverse);
    }
}

void transform(std::vector<std::complex<double>>& data, bool inverse) {
    transform(data.data(), data.size(), inverse);
}

} // namespace vcformer::fft
