#pragma once

#include "vcformer/autodiff.hpp"
#include "vcformer/lagcorr.hpp"
#include "vcformer/rng.hpp"
#include "vcformer/tensor.hpp"

namespace vcformer {

/**
 * Variable correlation attention over variate tokens.
 *
 * Tokens are rows of an [N x D] matrix (one embedded series per variate).
 * Queries, keys and values are square projections of the tokens; the
 * attention score for a pair of variates aggregates their lagged circular
 * cross-correlations along the token axis with a learnable weight per lag,
 * then a row softmax mixes the values. Single head; the output projection
 * starts near the identity so the layer begins as a light residual update.
 */
struct VcaParams {
    Tensor w_q, w_k, w_v, w_o; // [D x D]
    Tensor lambda;             // [D], init uniform 1/D

    static VcaParams init(std::size_t d, Rng& rng, DType dtype = DType::F64);
};

struct VcaVars {
    Var w_q, w_k, w_v, w_o, lambda;
};

/** Forward pass; optionally exposes the pre-softmax score map. */
Tensor vca_forward(const Tensor& x, const VcaParams& p, Tensor* pre_softmax = nullptr);

/** The [N x N] pre-softmax correlation map for analysis/export. */
Tensor export_corr_map(const Tensor& x, const VcaParams& p);

namespace ad {

VcaVars vca_register(Tape& t, const VcaParams& p, bool requires_grad);

Var vca_forward(Tape& t, Var x, const VcaVars& p, Var* pre_softmax = nullptr);

} // namespace ad

} // namespace vcformer
