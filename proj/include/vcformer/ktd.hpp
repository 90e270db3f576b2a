#pragma once

#include <vector>

#include "vcformer/autodiff.hpp"
#include "vcformer/mlp.hpp"
#include "vcformer/tensor.hpp"

namespace vcformer {

/**
 * Koopman temporal detector. The [N x D] input is cut along the token axis
 * into n = D/S segments; each segment is flattened (variate-major) and
 * encoded into an M-dimensional embedding. The embeddings are snapshots of
 * a dynamical system: a finite operator is fitted from adjacent snapshot
 * pairs by least squares, rolled forward n steps from the last embedding,
 * and the predictions decoded back to N x S blocks, giving an output of the
 * same N x D shape. The operator is recomputed from the current input every
 * forward pass; it is not a trainable weight.
 */
struct KtdParams {
    MlpParams encoder;  // N*S -> M (hidden width M)
    MlpParams decoder;  // M -> N*S (hidden width M)
    std::size_t seg_len = 0;
    double ridge_eps = 1e-5;
    // Test hook: bypass both MLPs (implies M == N*S). Embeddings are then
    // the flattened segments themselves, which makes exact linear snapshot
    // data reproducible in closed form.
    bool identity_stub = false;

    static KtdParams init(std::size_t n_vars, std::size_t seg_len, std::size_t m,
                          Rng& rng, double ridge_eps = 1e-5,
                          DType dtype = DType::F64);
    static KtdParams identity(std::size_t seg_len, double ridge_eps = 0.0);
};

struct KtdVars {
    MlpVars encoder;
    MlpVars decoder;
};

/** Splits x [N x D] into D/S column blocks of shape [N x S]. */
std::vector<Tensor> segment(const Tensor& x, std::size_t seg_len);

/**
 * Operator fitted from snapshot columns z [M x n]:
 *
 *   K = z_fore (z_back^T z_back + eps I)^(-1) z_back^T
 *
 * kept in factored form; applying K to a vector costs O(M n). With eps = 0
 * the small Gram can be exactly singular (whenever n-1 exceeds the snapshot
 * rank), so that mode solves through a rank-truncated eigendecomposition,
 * which realizes the pseudoinverse limit the ridge approaches.
 */
struct KoopmanFit {
    Tensor z_back;  // [M x (n-1)]
    Tensor z_fore;  // [M x (n-1)]
    Tensor gram;    // [(n-1) x (n-1)], ridge already added
    double eps = 0.0;

    Tensor apply(const Tensor& z) const; // z: [M x c] columns
    Tensor dense() const;                // materialized [M x M], tests only
};

KoopmanFit fit_koopman(const Tensor& snapshots, double eps);

Tensor ktd_forward(const Tensor& x, const KtdParams& p, Nonlinearity nl);

namespace ad {

KtdVars ktd_register(Tape& t, const KtdParams& p, bool requires_grad);

Var ktd_forward(Tape& t, Var x, const KtdVars& vars, const KtdParams& p,
                Nonlinearity nl);

} // namespace ad

} // namespace vcformer
