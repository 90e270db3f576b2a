#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcformer/data.hpp"
#include "vcformer/model.hpp"

namespace vcformer {

struct TrainConfig {
    double lr = 1e-3;          // base learning rate
    double lr_decay = 0.9;     // multiplied in per epoch
    std::size_t max_epochs = 10;
    std::size_t batch_size = 16;
    std::size_t patience = 5;  // early-stopping patience on val MSE
    double clip_norm = 5.0;    // global gradient-norm clip
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t stride = 1;    // training window stride
};

/** Per-parameter Adam moments, aligned with the ModelParams ordering. */
struct OptimState {
    std::vector<Tensor> m, v;
    std::int64_t step = 0;

    static OptimState init(const std::vector<std::pair<std::string, Tensor>>& params);
};

/**
 * Scales all gradients so the global L2 norm does not exceed max_norm.
 * Returns the pre-clip norm.
 */
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

/**
 * One Adam update with bias correction; global-norm clipping is applied to
 * the gradients first. Parameters are replaced with updated tensors. A NaN
 * gradient aborts with the offending parameter path in the message.
 */
void adam_step(std::vector<std::pair<std::string, Tensor>>& params,
               std::vector<Tensor> grads, OptimState& state, const TrainConfig& cfg,
               double lr);

struct TrainReport {
    std::vector<double> train_loss; // one entry per completed epoch
    std::vector<double> val_mse;
    std::vector<double> val_mae;
    std::size_t best_epoch = 0;     // 0-based index into the vectors
    double best_val_mse = 0.0;
    double wall_time_sec = 0.0;
    std::uint64_t seed = 0;
    bool diverged = false;
    bool early_stopped = false;
};

/** All-window evaluation of the model over one split matrix. */
Metrics evaluate_split(const ModelParams& params, const Tensor& split_data,
                       std::size_t stride = 1);

/**
 * Trains with Adam and an exponential learning-rate decay, early-stopping on
 * validation MSE, and restores the best parameters seen. Deterministic for a
 * fixed seed when the thread count is 1 (batch order, initialization and all
 * reductions are fixed). A non-finite loss or gradient stops training with
 * the last finite-epoch parameters kept.
 */
TrainReport fit(ModelParams& params, const DatasetSplit& split, const TrainConfig& cfg);

} // namespace vcformer
