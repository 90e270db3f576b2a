#include "vcformer/train.hpp"

#include <chrono>
#include <cmath>

#include "vcformer/rng.hpp"

namespace vcformer {

OptimState OptimState::init(const std::vector<std::pair<std::string, Tensor>>& params) {
    OptimState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& [name, t] : params) {
        s.m.push_back(Tensor::zeros(t.shape()));
        s.v.push_back(Tensor::zeros(t.shape()));
    }
    return s;
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
    double sq = 0.0;
    for (const Tensor& g : grads)
        for (double v : g.values()) sq += v * v;
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double scale = max_norm / norm;
        for (Tensor& g : grads) g = mul_scalar(g, scale);
    }
    return norm;
}

void adam_step(std::vector<std::pair<std::string, Tensor>>& params,
               std::vector<Tensor> grads, OptimState& state, const TrainConfig& cfg,
               double lr) {
    if (grads.size() != params.size()) {
        throw ConfigError("adam_step: " + std::to_string(grads.size()) +
                          " gradients for " + std::to_string(params.size()) +
                          " parameters");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!grads[i].all_finite()) {
            throw NumericError("adam_step: non-finite gradient for parameter '" +
                               params[i].first + "'");
        }
    }
    clip_global_norm(grads, cfg.clip_norm);
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& theta = params[i].second;
        const Tensor& g = grads[i];
        std::vector<double> m_new(theta.size()), v_new(theta.size()), out(theta.size());
        for (std::size_t c = 0; c < theta.size(); ++c) {
            double m = cfg.beta1 * state.m[i][c] + (1.0 - cfg.beta1) * g[c];
            double v = cfg.beta2 * state.v[i][c] + (1.0 - cfg.beta2) * g[c] * g[c];
            m_new[c] = m;
            v_new[c] = v;
            double mhat = m / bc1;
            double vhat = v / bc2;
            out[c] = theta[c] - lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
        state.m[i] = Tensor(theta.shape(), std::move(m_new));
        state.v[i] = Tensor(theta.shape(), std::move(v_new));
        params[i].second = Tensor(theta.shape(), std::move(out), theta.dtype());
    }
}

Metrics evaluate_split(const ModelParams& params, const Tensor& split_data,
                       std::size_t stride) {
    WindowSampler sampler(split_data, params.config.t, params.config.h, stride);
    MetricsAccumulator acc;
    for (std::size_t i = 0; i < sampler.count(); ++i) {
        auto [x, y] = sampler.window(i);
        acc.add(model_predict(params, x), y);
    }
    return acc.result();
}

namespace {

void write_back(ModelParams& params,
                const std::vector<std::pair<std::string, Tensor>>& flat) {
    std::size_t i = 0;
    params.for_each([&](const std::string&, Tensor& t) { t = flat[i++].second; });
}

} // namespace

TrainReport fit(ModelParams& params, const DatasetSplit& split, const TrainConfig& cfg) {
    auto t_start = std::chrono::steady_clock::now();
    const ModelConfig& mc = params.config;
    WindowSampler train_windows(split.train, mc.t, mc.h, cfg.stride);
    if (train_windows.count() == 0) {
        throw ConfigError("fit: train split has no complete (T, H) window");
    }
    if (WindowSampler(split.val, mc.t, mc.h).count() == 0) {
        throw ConfigError("fit: val split has no complete (T, H) window");
    }

    TrainReport report;
    report.seed = mc.seed;

    auto flat = named_tensors(params);
    OptimState state = OptimState::init(flat);
    Rng shuffle_rng(mc.seed ^ 0x9e3779b97f4a7c15ull);

    ModelParams best = params;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        double lr = cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch));
        std::vector<std::size_t> order = train_windows.order_sequential();
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        bool blew_up = false;
        for (std::size_t start = 0; start < order.size() && !blew_up;
             start += cfg.batch_size) {
            std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            Tape tape;
            ParamVars vars = register_params(tape, params, true);
            Var loss{};
            for (std::size_t w = start; w < stop; ++w) {
                auto [x, y] = train_windows.window(order[w]);
                Var pred = model_forward(tape, tape.constant(x), vars, params);
                Var sample = ad::mse(tape, pred, tape.constant(y));
                loss = loss.valid() ? ad::add(tape, loss, sample) : sample;
            }
            loss = ad::mul_scalar(tape, loss, 1.0 / static_cast<double>(stop - start));
            double loss_value = tape.value(loss)[0];
            if (!std::isfinite(loss_value)) {
                blew_up = true;
                break;
            }
            tape.backward(loss);
            std::vector<Tensor> grads;
            grads.reserve(flat.size());
            vars.for_each([&](const std::string&, Var v) { grads.push_back(tape.grad(v)); });
            try {
                adam_step(flat, std::move(grads), state, cfg, lr);
            } catch (const NumericError&) {
                blew_up = true;
                break;
            }
            write_back(params, flat);
            epoch_loss += loss_value;
            ++batches;
        }
        if (blew_up) {
            report.diverged = true;
            break;
        }
        epoch_loss /= static_cast<double>(batches);

        Metrics val = evaluate_split(params, split.val, 1);
        report.train_loss.push_back(epoch_loss);
        report.val_mse.push_back(val.mse);
        report.val_mae.push_back(val.mae);

        if (val.mse < best_val) {
            best_val = val.mse;
            best_epoch = epoch;
            best = params;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= cfg.patience) {
                report.early_stopped = true;
                break;
            }
        }
    }

    params = best;
    report.best_epoch = best_epoch;
    report.best_val_mse = best_val;
    report.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return report;
}

} // namespace vcformer
