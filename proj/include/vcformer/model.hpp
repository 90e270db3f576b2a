#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vcformer/autodiff.hpp"
#include "vcformer/ktd.hpp"
#include "vcformer/mlp.hpp"
#include "vcformer/vca.hpp"

namespace vcformer {

struct ModelConfig {
    std::size_t t = 96;   // look-back length
    std::size_t h = 96;   // forecast horizon
    std::size_t n = 0;    // variate count (0 = infer from data)
    std::size_t d = 128;  // token width
    std::size_t m = 256;  // Koopman embedding width
    std::size_t s = 32;   // segment length
    std::size_t l = 2;    // encoder block count
    DType dtype = DType::F64;
    std::uint64_t seed = 0;
    Nonlinearity nonlinearity = Nonlinearity::Gelu;
    double ridge_eps = 1e-5;
    double layernorm_eps = 1e-5;

    void validate() const;
};

struct BlockParams {
    VcaParams vca;
    KtdParams ktd;
    Tensor norm1_gamma, norm1_beta;
    Tensor norm2_gamma, norm2_beta;
};

/**
 * All learnable tensors of one model instance. Parameters are addressable
 * by dotted path (embed.w1, block.0.vca.w_q, proj.b2, ...) through
 * for_each, in a fixed order shared by the optimizer and the checkpoint
 * container.
 */
struct ModelParams {
    ModelConfig config;
    MlpParams embed; // T -> D
    std::vector<BlockParams> blocks;
    MlpParams proj;  // D -> H

    static ModelParams init(const ModelConfig& cfg);

    void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
    void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;
    std::size_t count_scalars() const;
};

struct BlockVars {
    VcaVars vca;
    KtdVars ktd;
    Var norm1_gamma, norm1_beta, norm2_gamma, norm2_beta;
};

struct ParamVars {
    MlpVars embed;
    std::vector<BlockVars> blocks;
    MlpVars proj;

    void for_each(const std::function<void(const std::string&, Var)>& fn) const;
};

ParamVars register_params(Tape& t, const ModelParams& params, bool requires_grad);

// Flat (name, tensor) view in for_each order, and its inverse for rebuilding
// ParamVars from a vector of leaves in the same order (grad_check plumbing).
std::vector<std::pair<std::string, Tensor>> named_tensors(const ModelParams& params);
ParamVars param_vars_from_list(const std::vector<Var>& flat, const ModelConfig& cfg);

/**
 * Full forward pass: transpose to variate-major, embed each series into a
 * token, run the encoder blocks (attention and Koopman sublayers, each with
 * a residual connection and post-norm), project tokens to the horizon, and
 * transpose back. Input [T x N], output [H x N].
 *
 * `corr_maps`, when given, collects each block's pre-softmax score map.
 */
Var model_forward(Tape& t, Var x_in, const ParamVars& vars, const ModelParams& params,
                  std::vector<Var>* corr_maps = nullptr);

/** Convenience inference wrapper (no gradients recorded). */
Tensor model_predict(const ModelParams& params, const Tensor& x_in,
                     std::vector<Tensor>* corr_maps = nullptr);

double loss_mse(const Tensor& pred, const Tensor& target);

// ============================================================================
// Reference baselines
// ============================================================================

/** Repeats the last observed row H times. */
Tensor baseline_persistence(const Tensor& x_in, std::size_t horizon);

/**
 * Ridge-regularized linear map from a length-T channel window to its next H
 * values. Channel-independent: by default one W [T x H] (plus per-channel
 * intercept) is shared across channels; per_channel fits a separate map per
 * channel. Closed-form normal-equations fit over all training windows.
 */
struct LinearBaseline {
    std::vector<Tensor> w;   // one [T x H], or one per channel
    Tensor channel_mean_x;   // [N x T] per-channel window input means
    Tensor channel_mean_y;   // [N x H]
    bool per_channel = false;
    std::size_t t_len = 0, horizon = 0;

    Tensor predict(const Tensor& x_in) const; // [T x N] -> [H x N]
};

LinearBaseline fit_linear_baseline(const Tensor& series, std::size_t t_len,
                                   std::size_t horizon, double ridge,
                                   bool per_channel = false);

} // namespace vcformer
