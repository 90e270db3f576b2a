#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vcformer/tensor.hpp"

namespace vcformer {

/** Handle into a Tape. Valid only for the tape that produced it. */
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/**
 * Reverse-mode differentiation record. Operations append nodes in execution
 * order (inputs always precede their consumers); backward() walks the nodes
 * in exact reverse order, accumulating gradients additively across fan-out.
 *
 * A tape is built fresh for every forward pass and is single-threaded;
 * independent tapes on different threads do not interact.
 */
class Tape {
public:
    Var leaf(Tensor value, bool requires_grad);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

    /** Backpropagate from a scalar loss (numel 1); seed gradient is 1. */
    void backward(Var loss);

    /** Gradient of the last backward() w.r.t. v; zeros if disconnected. */
    Tensor grad(Var v) const;

    std::size_t num_nodes() const { return nodes_.size(); }

    // --- used by the operation wrappers ---
    using BackwardFn = std::function<void(Tape&, const Tensor& upstream)>;
    Var emplace(Tensor value, bool requires_grad, BackwardFn backward);
    void accumulate(Var v, const Tensor& g);

private:
    struct Node {
        Tensor value;
        bool requires_grad = false;
        BackwardFn backward; // empty for leaves and no-grad results
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

/**
 * Tape operations. Forward math delegates to the tensor kernels; each
 * wrapper registers the matching backward rule when any input needs a
 * gradient.
 */
namespace ad {

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var add_scalar(Tape& t, Var a, double s);
Var mul_scalar(Tape& t, Var a, double s);
Var add_rowvec(Tape& t, Var a, Var row);
Var relu(Tape& t, Var a);
Var gelu(Tape& t, Var a);
Var sum(Tape& t, Var a);   // -> scalar (shape [1])
Var mean(Tape& t, Var a);  // -> scalar (shape [1])

Var matmul(Tape& t, Var a, Var b);
Var transpose(Tape& t, Var a);
Var reshape(Tape& t, Var a, std::vector<std::size_t> shape);
Var slice_cols(Tape& t, Var a, std::size_t c0, std::size_t c1);
Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var roll_last(Tape& t, Var a, std::int64_t shift);

Var softmax_rows(Tape& t, Var a);
Var layernorm(Tape& t, Var a, Var gamma, Var beta, double eps = 1e-5);

// Spectra are carried as real tensors with the last axis interleaved
// (re, im); a [rows x T] input maps to [rows x 2*(T/2+1)].
Var rfft(Tape& t, Var a);
Var irfft(Tape& t, Var spec, std::size_t t_len);

// Pairwise cross spectrum: for interleaved spectra q, k of shape [N x 2F],
// row (i*N + j) of the [N*N x 2F] output is q_i * conj(k_j).
Var cross_spectrum(Tape& t, Var q, Var k);

// Contraction of [N x N x L] lag scores with a length-L weight vector.
Var lag_contract(Tape& t, Var r, Var weights);

/**
 * Solves A X = B for symmetric positive definite A via Cholesky.
 * Backward: grad_B = solve(A^T, upstream), grad_A = -grad_B X^T.
 */
Var linear_solve(Tape& t, Var a, Var b);

/** Mean squared error over all entries; scalar output. */
Var mse(Tape& t, Var pred, Var target);

} // namespace ad

// Non-tape dense solve (LU with partial pivoting) used by fit paths and
// oracles. Reads the full matrix, so the autodiff rule for linear_solve is
// exact for arbitrary perturbations of A.
Tensor linear_solve(const Tensor& a, const Tensor& b);

/**
 * Minimum-norm solve of A X = B for symmetric positive SEMI-definite A via
 * Jacobi eigendecomposition, dropping eigenvalues below rel_tol * lambda_max.
 * Handles the exactly singular Gram matrices that appear when snapshots are
 * rank deficient.
 */
Tensor psd_pinv_solve(const Tensor& a, const Tensor& b, double rel_tol = 1e-12);

// ============================================================================
// Finite-difference checking
// ============================================================================

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0; // absolute error when both sides are ~0
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double worst = 0.0;
    bool passed(double tol) const { return worst <= tol; }
};

/**
 * Compares analytic gradients against central differences with per-coordinate
 * step h = h_scale * max(1, |theta|). `build` must be a pure function of the
 * parameter tensors: it receives a fresh tape plus leaf vars (one per
 * parameter, in order) and returns the scalar loss var. 64-bit inputs only.
 *
 * Error metric per coordinate: |a - n| / max(|a|, |n|) with an absolute
 * fallback when both magnitudes are below 1e-8. Failures are reported, never
 * thrown.
 */
GradCheckReport grad_check(
    const std::function<Var(Tape&, const std::vector<Var>&)>& build,
    const std::vector<std::pair<std::string, Tensor>>& params,
    double h_scale = 1e-6);

} // namespace vcformer
