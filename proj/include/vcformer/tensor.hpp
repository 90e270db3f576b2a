#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vcformer/errors.hpp"
#include "vcformer/rng.hpp"

namespace vcformer {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

/**
 * Dense row-major numeric array. Immutable after construction: every
 * operation returns a new tensor, so values can be shared freely across
 * threads. The buffer is reference counted, which makes copies cheap.
 *
 * Arithmetic always accumulates in double; a tensor tagged F32 has each
 * stored value rounded through float, and is serialized as 4-byte floats.
 */
class Tensor {
public:
    Tensor() = default;

    Tensor(std::vector<std::size_t> shape, std::vector<double> data,
           DType dtype = DType::F64);

    static Tensor zeros(std::vector<std::size_t> shape, DType dtype = DType::F64);
    static Tensor full(std::vector<std::size_t> shape, double value,
                       DType dtype = DType::F64);
    static Tensor scalar(double value);
    static Tensor identity(std::size_t n);
    // Entries i.i.d. uniform in [lo, hi).
    static Tensor random_uniform(std::vector<std::size_t> shape, Rng& rng,
                                 double lo, double hi, DType dtype = DType::F64);
    static Tensor random_gaussian(std::vector<std::size_t> shape, Rng& rng,
                                  DType dtype = DType::F64);

    bool defined() const { return data_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }
    std::size_t size() const { return data_ ? data_->size() : 0; }
    DType dtype() const { return dtype_; }

    const double* data() const { return data_->data(); }
    double operator[](std::size_t i) const { return (*data_)[i]; }
    double at2(std::size_t i, std::size_t j) const {
        return (*data_)[i * shape_[1] + j];
    }
    double at3(std::size_t i, std::size_t j, std::size_t k) const {
        return (*data_)[(i * shape_[1] + j) * shape_[2] + k];
    }
    std::span<const double> values() const {
        return {data_->data(), data_->size()};
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    bool all_finite() const;

private:
    std::vector<std::size_t> shape_;
    std::shared_ptr<const std::vector<double>> data_;
    DType dtype_ = DType::F64;
};

/** Complex array stored as interleaved (re, im) doubles, row-major. */
class ComplexTensor {
public:
    ComplexTensor() = default;
    // `interleaved` holds 2 * product(shape) doubles.
    ComplexTensor(std::vector<std::size_t> shape, std::vector<double> interleaved);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_ ? data_->size() / 2 : 0; }
    const double* data() const { return data_->data(); }
    double re(std::size_t i) const { return (*data_)[2 * i]; }
    double im(std::size_t i) const { return (*data_)[2 * i + 1]; }
    std::span<const double> interleaved() const {
        return {data_->data(), data_->size()};
    }

private:
    std::vector<std::size_t> shape_;
    std::shared_ptr<const std::vector<double>> data_;
};

// ============================================================================
// Elementwise and scalar operations
// ============================================================================

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b); // Hadamard
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
// Adds a length-n row vector to every row of an m x n matrix.
Tensor add_rowvec(const Tensor& a, const Tensor& row);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);

double sum(const Tensor& a);
double mean(const Tensor& a);

// Scalar kernels shared with the autodiff backward rules.
double gelu_scalar(double x);
double gelu_grad_scalar(double x);

// ============================================================================
// Linear algebra and shape operations
// ============================================================================

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a); // rank-2 only
Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);
Tensor concat_cols(const std::vector<Tensor>& parts);
// Rows [r0, r1) of a rank-2 tensor.
Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1);

// Circular shift along the last axis: out[t] = in[(t - shift) mod L].
Tensor roll_last_axis(const Tensor& a, std::int64_t shift);

/**
 * Row softmax with per-row max subtraction. Rows sum to one and the result
 * is invariant under adding a constant to a row. NaN input is rejected.
 */
Tensor softmax_rows(const Tensor& a);

/**
 * Per-row layer normalization over the last axis (population variance),
 * followed by the affine map gamma * xhat + beta.
 */
Tensor layernorm(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                 double eps = 1e-5);

// ============================================================================
// FFT along the last axis (arbitrary lengths, including primes)
// ============================================================================

// Real-to-complex transform keeping bins 0 .. floor(T/2).
ComplexTensor rfft_last_axis(const Tensor& a);
// Inverse of rfft_last_axis given the original length T.
Tensor irfft_last_axis(const ComplexTensor& spec, std::size_t t_len);

// ============================================================================
// Internal parallelism
// ============================================================================

// Global worker count for row-parallel kernels. 1 (the default) runs
// everything inline. Work is partitioned by row, so results are identical
// for any setting.
void set_num_threads(int n);
int num_threads();
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

} // namespace vcformer
