#include "vcformer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <thread>

#include "vcformer/fft.hpp"

namespace vcformer {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t p = 1;
    for (std::size_t e : shape) p *= e;
    return p;
}

void check_positive_extents(const std::vector<std::size_t>& shape) {
    for (std::size_t e : shape) {
        if (e == 0) throw ShapeError("tensor shape has a zero extent");
    }
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

void quantize_f32(std::vector<double>& data) {
    for (double& v : data) v = static_cast<double>(static_cast<float>(v));
}

DType combine(DType a, DType b) {
    return (a == DType::F32 && b == DType::F32) ? DType::F32 : DType::F64;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
    }
}

} // namespace

// ============================================================================
// Tensor
// ============================================================================

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype) {
    check_positive_extents(shape_);
    if (shape_product(shape_) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_to_string(shape_));
    }
    if (dtype_ == DType::F32) quantize_f32(data);
    data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, DType dtype) {
    std::size_t n = shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), dtype);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, DType dtype) {
    std::size_t n = shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), dtype);
}

Tensor Tensor::scalar(double value) {
    return Tensor({1}, std::vector<double>{value});
}

Tensor Tensor::identity(std::size_t n) {
    std::vector<double> buf(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) buf[i * n + i] = 1.0;
    return Tensor({n, n}, std::move(buf));
}

Tensor Tensor::random_uniform(std::vector<std::size_t> shape, Rng& rng,
                              double lo, double hi, DType dtype) {
    std::size_t n = shape_product(shape);
    std::vector<double> buf(n);
    for (double& v : buf) v = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(buf), dtype);
}

Tensor Tensor::random_gaussian(std::vector<std::size_t> shape, Rng& rng, DType dtype) {
    std::size_t n = shape_product(shape);
    std::vector<double> buf(n);
    for (double& v : buf) v = rng.gaussian();
    return Tensor(std::move(shape), std::move(buf), dtype);
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

bool Tensor::all_finite() const {
    for (double v : *data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

ComplexTensor::ComplexTensor(std::vector<std::size_t> shape,
                             std::vector<double> interleaved)
    : shape_(std::move(shape)) {
    check_positive_extents(shape_);
    if (shape_product(shape_) * 2 != interleaved.size()) {
        throw ShapeError("complex tensor buffer length " +
                         std::to_string(interleaved.size()) +
                         " does not match shape " + shape_to_string(shape_));
    }
    data_ = std::make_shared<const std::vector<double>>(std::move(interleaved));
}

// ============================================================================
// Threading
// ============================================================================

namespace {
int g_num_threads = 1;
}

void set_num_threads(int n) { g_num_threads = n < 1 ? 1 : n; }
int num_threads() { return g_num_threads; }

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& body) {
    int workers = g_num_threads;
    if (workers <= 1 || n < 2) {
        body(0, n);
        return;
    }
    std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::size_t chunk = (n + w - 1) / w;
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t i = 0; i < w; ++i) {
        std::size_t lo = i * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

// ============================================================================
// Elementwise
// ============================================================================

namespace {

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
    require_same_shape(a, b, op);
    std::vector<double> out(a.size());
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(pa[i], pb[i]);
    return Tensor(a.shape(), std::move(out), combine(a.dtype(), b.dtype()));
}

template <typename F>
Tensor map(const Tensor& a, F f) {
    std::vector<double> out(a.size());
    const double* pa = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(pa[i]);
    return Tensor(a.shape(), std::move(out), a.dtype());
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return map(a, [s](double x) { return x + s; });
}

Tensor mul_scalar(const Tensor& a, double s) {
    return map(a, [s](double x) { return x * s; });
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
    if (a.rank() != 2 || row.rank() != 1 || row.extent(0) != a.extent(1)) {
        throw ShapeError("add_rowvec: shape mismatch " + a.shape_str() + " vs " +
                         row.shape_str());
    }
    std::size_t m = a.extent(0), n = a.extent(1);
    std::vector<double> out(m * n);
    const double* pa = a.data();
    const double* pr = row.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = pa[i * n + j] + pr[j];
    return Tensor(a.shape(), std::move(out), combine(a.dtype(), row.dtype()));
}

Tensor relu(const Tensor& a) {
    return map(a, [](double x) { return x > 0.0 ? x : 0.0; });
}

double gelu_scalar(double x) {
    return 0.5 * x * (1.0 + std::erf(x * 0.70710678118654752440));
}

double gelu_grad_scalar(double x) {
    double phi = std::exp(-0.5 * x * x) * 0.39894228040143267794; // pdf
    double cdf = 0.5 * (1.0 + std::erf(x * 0.70710678118654752440));
    return cdf + x * phi;
}

Tensor gelu(const Tensor& a) {
    return map(a, [](double x) { return gelu_scalar(x); });
}

double sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return s;
}

double mean(const Tensor& a) {
    return sum(a) / static_cast<double>(a.size());
}

// ============================================================================
// Linear algebra / shape
// ============================================================================

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
        throw ShapeError("matmul: shape mismatch " + a.shape_str() + " x " +
                         b.shape_str());
    }
    std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    std::vector<double> out(m * n, 0.0);
    const double* pa = a.data();
    const double* pb = b.data();
    parallel_for(m, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* po = out.data() + i * n;
            for (std::size_t kk = 0; kk < k; ++kk) {
                double av = pa[i * k + kk];
                const double* pbk = pb + kk * n;
                for (std::size_t j = 0; j < n; ++j) po[j] += av * pbk[j];
            }
        }
    });
    return Tensor({m, n}, std::move(out), combine(a.dtype(), b.dtype()));
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: need rank 2, got " + a.shape_str());
    std::size_t m = a.extent(0), n = a.extent(1);
    std::vector<double> out(m * n);
    const double* pa = a.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = pa[i * n + j];
    return Tensor({n, m}, std::move(out), a.dtype());
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
    check_positive_extents(shape);
    if (shape_product(shape) != a.size()) {
        throw ShapeError("reshape: cannot view " + a.shape_str() + " as " +
                         shape_to_string(shape));
    }
    std::vector<double> buf(a.values().begin(), a.values().end());
    return Tensor(std::move(shape), std::move(buf), a.dtype());
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
    if (a.rank() != 2 || c0 >= c1 || c1 > a.extent(1)) {
        throw ShapeError("slice_cols: invalid range [" + std::to_string(c0) + ", " +
                         std::to_string(c1) + ") on " + a.shape_str());
    }
    std::size_t m = a.extent(0), n = a.extent(1), w = c1 - c0;
    std::vector<double> out(m * w);
    const double* pa = a.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) out[i * w + j] = pa[i * n + c0 + j];
    return Tensor({m, w}, std::move(out), a.dtype());
}

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
    if (a.rank() != 2 || r0 >= r1 || r1 > a.extent(0)) {
        throw ShapeError("slice_rows: invalid range [" + std::to_string(r0) + ", " +
                         std::to_string(r1) + ") on " + a.shape_str());
    }
    std::size_t n = a.extent(1);
    std::vector<double> out((r1 - r0) * n);
    std::copy(a.data() + r0 * n, a.data() + r1 * n, out.begin());
    return Tensor({r1 - r0, n}, std::move(out), a.dtype());
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty input");
    std::size_t m = parts[0].extent(0);
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != 2 || p.extent(0) != m) {
            throw ShapeError("concat_cols: row mismatch " + parts[0].shape_str() +
                             " vs " + p.shape_str());
        }
        total += p.extent(1);
    }
    std::vector<double> out(m * total);
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        std::size_t w = p.extent(1);
        const double* pp = p.data();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) out[i * total + off + j] = pp[i * w + j];
        off += w;
    }
    return Tensor({m, total}, std::move(out), parts[0].dtype());
}

Tensor roll_last_axis(const Tensor& a, std::int64_t shift) {
    std::size_t L = a.shape().back();
    std::size_t rows = a.size() / L;
    std::int64_t s = shift % static_cast<std::int64_t>(L);
    if (s < 0) s += static_cast<std::int64_t>(L);
    std::vector<double> out(a.size());
    const double* pa = a.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = pa + r * L;
        double* dst = out.data() + r * L;
        for (std::size_t t = 0; t < L; ++t) {
            std::size_t from = (t + L - static_cast<std::size_t>(s)) % L;
            dst[t] = src[from];
        }
    }
    return Tensor(a.shape(), std::move(out), a.dtype());
}

Tensor softmax_rows(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("softmax_rows: need rank 2, got " + a.shape_str());
    if (!a.all_finite()) throw NumericError("softmax_rows: non-finite input");
    std::size_t m = a.extent(0), n = a.extent(1);
    std::vector<double> out(m * n);
    const double* pa = a.data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = pa + i * n;
        double mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = std::exp(row[j] - mx);
            z += out[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
    }
    return Tensor(a.shape(), std::move(out), a.dtype());
}

Tensor layernorm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
    if (a.rank() != 2) throw ShapeError("layernorm: need rank 2, got " + a.shape_str());
    std::size_t m = a.extent(0), n = a.extent(1);
    if (gamma.rank() != 1 || gamma.extent(0) != n || beta.rank() != 1 ||
        beta.extent(0) != n) {
        throw ShapeError("layernorm: affine shape mismatch " + gamma.shape_str() +
                         ", " + beta.shape_str() + " for " + a.shape_str());
    }
    std::vector<double> out(m * n);
    const double* pa = a.data();
    const double* pg = gamma.data();
    const double* pb = beta.data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = pa + i * n;
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += row[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(n);
        double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] = pg[j] * (row[j] - mu) * inv + pb[j];
    }
    return Tensor(a.shape(), std::move(out), a.dtype());
}

// ============================================================================
// FFT wrappers
// ============================================================================

ComplexTensor rfft_last_axis(const Tensor& a) {
    std::size_t t_len = a.shape().back();
    std::size_t rows = a.size() / t_len;
    std::size_t bins = t_len / 2 + 1;
    std::vector<double> out(rows * bins * 2);
    const double* pa = a.data();
    parallel_for(rows, [&](std::size_t lo, std::size_t hi) {
        std::vector<std::complex<double>> buf(t_len);
        for (std::size_t r = lo; r < hi; ++r) {
            for (std::size_t t = 0; t < t_len; ++t) buf[t] = {pa[r * t_len + t], 0.0};
            fft::transform(buf.data(), t_len, false);
            for (std::size_t k = 0; k < bins; ++k) {
                out[(r * bins + k) * 2] = buf[k].real();
                out[(r * bins + k) * 2 + 1] = buf[k].imag();
            }
        }
    });
    std::vector<std::size_t> shape = a.shape();
    shape.back() = bins;
    return ComplexTensor(std::move(shape), std::move(out));
}

Tensor irfft_last_axis(const ComplexTensor& spec, std::size_t t_len) {
    std::size_t bins = spec.shape().back();
    if (bins != t_len / 2 + 1) {
        throw ShapeError("irfft_last_axis: " + std::to_string(bins) +
                         " bins inconsistent with length " + std::to_string(t_len));
    }
    std::size_t rows = spec.size() / bins;
    std::vector<double> out(rows * t_len);
    const double* ps = spec.data();
    parallel_for(rows, [&](std::size_t lo, std::size_t hi) {
        std::vector<std::complex<double>> buf(t_len);
        for (std::size_t r = lo; r < hi; ++r) {
            for (std::size_t k = 0; k < bins; ++k)
                buf[k] = {ps[(r * bins + k) * 2], ps[(r * bins + k) * 2 + 1]};
            // Conjugate-symmetric completion of the spectrum.
            for (std::size_t k = bins; k < t_len; ++k)
                buf[k] = std::conj(buf[t_len - k]);
            fft::transform(buf.data(), t_len, true);
            for (std::size_t t = 0; t < t_len; ++t) out[r * t_len + t] = buf[t].real();
        }
    });
    std::vector<std::size_t> shape = spec.shape();
    shape.back() = t_len;
    return Tensor(std::move(shape), std::move(out));
}

} // namespace vcformer
