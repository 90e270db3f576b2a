#include "vcformer/model.hpp"

namespace vcformer {

void ModelConfig::validate() const {
    if (t == 0 || h == 0 || d == 0 || m == 0 || s == 0) {
        throw ConfigError("model config: t, h, d, m, s must be positive");
    }
    if (d % s != 0) {
        throw ConfigError("model config: segment length " + std::to_string(s) +
                          " does not divide token width " + std::to_string(d));
    }
    if (d / s < 2) {
        throw ConfigError("model config: need at least two segments (d/s >= 2), got " +
                          std::to_string(d / s));
    }
}

ModelParams ModelParams::init(const ModelConfig& cfg) {
    cfg.validate();
    if (cfg.n == 0) throw ConfigError("model init: variate count not set");
    Rng rng(cfg.seed);
    ModelParams p;
    p.config = cfg;
    p.embed = MlpParams::init(cfg.t, cfg.d, cfg.d, rng, cfg.dtype);
    p.blocks.reserve(cfg.l);
    for (std::size_t i = 0; i < cfg.l; ++i) {
        BlockParams b;
        b.vca = VcaParams::init(cfg.d, rng, cfg.dtype);
        b.ktd = KtdParams::init(cfg.n, cfg.s, cfg.m, rng, cfg.ridge_eps, cfg.dtype);
        b.norm1_gamma = Tensor::full({cfg.d}, 1.0, cfg.dtype);
        b.norm1_beta = Tensor::zeros({cfg.d}, cfg.dtype);
        b.norm2_gamma = Tensor::full({cfg.d}, 1.0, cfg.dtype);
        b.norm2_beta = Tensor::zeros({cfg.d}, cfg.dtype);
        p.blocks.push_back(std::move(b));
    }
    p.proj = MlpParams::init(cfg.d, cfg.d, cfg.h, rng, cfg.dtype);
    return p;
}

namespace {

template <typename Params, typename Fn>
void visit_params(Params& p, Fn&& fn) {
    fn("embed.w1", p.embed.w1);
    fn("embed.b1", p.embed.b1);
    fn("embed.w2", p.embed.w2);
    fn("embed.b2", p.embed.b2);
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
        auto& b = p.blocks[i];
        std::string base = "block." + std::to_string(i) + ".";
        fn(base + "vca.w_q", b.vca.w_q);
        fn(base + "vca.w_k", b.vca.w_k);
        fn(base + "vca.w_v", b.vca.w_v);
        fn(base + "vca.w_o", b.vca.w_o);
        fn(base + "vca.lambda", b.vca.lambda);
        fn(base + "ktd.enc.w1", b.ktd.encoder.w1);
        fn(base + "ktd.enc.b1", b.ktd.encoder.b1);
        fn(base + "ktd.enc.w2", b.ktd.encoder.w2);
        fn(base + "ktd.enc.b2", b.ktd.encoder.b2);
        fn(base + "ktd.dec.w1", b.ktd.decoder.w1);
        fn(base + "ktd.dec.b1", b.ktd.decoder.b1);
        fn(base + "ktd.dec.w2", b.ktd.decoder.w2);
        fn(base + "ktd.dec.b2", b.ktd.decoder.b2);
        fn(base + "norm1.gamma", b.norm1_gamma);
        fn(base + "norm1.beta", b.norm1_beta);
        fn(base + "norm2.gamma", b.norm2_gamma);
        fn(base + "norm2.beta", b.norm2_beta);
    }
    fn("proj.w1", p.proj.w1);
    fn("proj.b1", p.proj.b1);
    fn("proj.w2", p.proj.w2);
    fn("proj.b2", p.proj.b2);
}

} // namespace

void ModelParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
    visit_params(*this, fn);
}

void ModelParams::for_each(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
    visit_params(*this, fn);
}

std::size_t ModelParams::count_scalars() const {
    std::size_t total = 0;
    for_each([&](const std::string&, const Tensor& t) { total += t.size(); });
    return total;
}

void ParamVars::for_each(const std::function<void(const std::string&, Var)>& fn) const {
    fn("embed.w1", embed.w1);
    fn("embed.b1", embed.b1);
    fn("embed.w2", embed.w2);
    fn("embed.b2", embed.b2);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        std::string base = "block." + std::to_string(i) + ".";
        fn(base + "vca.w_q", b.vca.w_q);
        fn(base + "vca.w_k", b.vca.w_k);
        fn(base + "vca.w_v", b.vca.w_v);
        fn(base + "vca.w_o", b.vca.w_o);
        fn(base + "vca.lambda", b.vca.lambda);
        fn(base + "ktd.enc.w1", b.ktd.encoder.w1);
        fn(base + "ktd.enc.b1", b.ktd.encoder.b1);
        fn(base + "ktd.enc.w2", b.ktd.encoder.w2);
        fn(base + "ktd.enc.b2", b.ktd.encoder.b2);
        fn(base + "ktd.dec.w1", b.ktd.decoder.w1);
        fn(base + "ktd.dec.b1", b.ktd.decoder.b1);
        fn(base + "ktd.dec.w2", b.ktd.decoder.w2);
        fn(base + "ktd.dec.b2", b.ktd.decoder.b2);
        fn(base + "norm1.gamma", b.norm1_gamma);
        fn(base + "norm1.beta", b.norm1_beta);
        fn(base + "norm2.gamma", b.norm2_gamma);
        fn(base + "norm2.beta", b.norm2_beta);
    }
    fn("proj.w1", proj.w1);
    fn("proj.b1", proj.b1);
    fn("proj.w2", proj.w2);
    fn("proj.b2", proj.b2);
}

ParamVars register_params(Tape& t, const ModelParams& params, bool requires_grad) {
    ParamVars v;
    v.embed = ad::mlp_register(t, params.embed, requires_grad);
    v.blocks.reserve(params.blocks.size());
    for (const BlockParams& b : params.blocks) {
        BlockVars bv;
        bv.vca = ad::vca_register(t, b.vca, requires_grad);
        bv.ktd = ad::ktd_register(t, b.ktd, requires_grad);
        bv.norm1_gamma = t.leaf(b.norm1_gamma, requires_grad);
        bv.norm1_beta = t.leaf(b.norm1_beta, requires_grad);
        bv.norm2_gamma = t.leaf(b.norm2_gamma, requires_grad);
        bv.norm2_beta = t.leaf(b.norm2_beta, requires_grad);
        v.blocks.push_back(bv);
    }
    v.proj = ad::mlp_register(t, params.proj, requires_grad);
    return v;
}

std::vector<std::pair<std::string, Tensor>> named_tensors(const ModelParams& params) {
    std::vector<std::pair<std::string, Tensor>> out;
    params.for_each([&](const std::string& name, const Tensor& t) {
        out.emplace_back(name, t);
    });
    return out;
}

ParamVars param_vars_from_list(const std::vector<Var>& flat, const ModelConfig& cfg) {
    std::size_t expect = 4 + cfg.l * 17 + 4;
    if (flat.size() != expect) {
        throw ConfigError("param_vars_from_list: expected " + std::to_string(expect) +
                          " tensors, got " + std::to_string(flat.size()));
    }
    std::size_t i = 0;
    auto next = [&] { return flat[i++]; };
    ParamVars v;
    v.embed = {next(), next(), next(), next()};
    v.blocks.reserve(cfg.l);
    for (std::size_t b = 0; b < cfg.l; ++b) {
        BlockVars bv;
        bv.vca = {next(), next(), next(), next(), next()};
        bv.ktd.encoder = {next(), next(), next(), next()};
        bv.ktd.decoder = {next(), next(), next(), next()};
        bv.norm1_gamma = next();
        bv.norm1_beta = next();
        bv.norm2_gamma = next();
        bv.norm2_beta = next();
        v.blocks.push_back(bv);
    }
    v.proj = {next(), next(), next(), next()};
    return v;
}

Var model_forward(Tape& t, Var x_in, const ParamVars& vars, const ModelParams& params,
                  std::vector<Var>* corr_maps) {
    const ModelConfig& cfg = params.config;
    const Tensor& xv = t.value(x_in);
    if (xv.rank() != 2 || xv.extent(0) != cfg.t || xv.extent(1) != cfg.n) {
        throw ShapeError("model_forward: expected input [" + std::to_string(cfg.t) +
                         "x" + std::to_string(cfg.n) + "], got " + xv.shape_str());
    }
    Var x = ad::transpose(t, x_in); // [N x T]
    x = ad::mlp_apply(t, x, vars.embed, cfg.nonlinearity); // [N x D]
    for (std::size_t i = 0; i < vars.blocks.size(); ++i) {
        const BlockVars& b = vars.blocks[i];
        Var raw;
        Var attn_out = ad::vca_forward(t, x, b.vca, corr_maps ? &raw : nullptr);
        if (corr_maps) corr_maps->push_back(raw);
        x = ad::layernorm(t, ad::add(t, x, attn_out), b.norm1_gamma, b.norm1_beta,
                          cfg.layernorm_eps);
        Var ktd_out =
            ad::ktd_forward(t, x, b.ktd, params.blocks[i].ktd, cfg.nonlinearity);
        x = ad::layernorm(t, ad::add(t, x, ktd_out), b.norm2_gamma, b.norm2_beta,
                          cfg.layernorm_eps);
    }
    Var y = ad::mlp_apply(t, x, vars.proj, cfg.nonlinearity); // [N x H]
    return ad::transpose(t, y);                               // [H x N]
}

Tensor model_predict(const ModelParams& params, const Tensor& x_in,
                     std::vector<Tensor>* corr_maps) {
    Tape t;
    ParamVars vars = register_params(t, params, false);
    std::vector<Var> maps;
    Var out = model_forward(t, t.constant(x_in), vars, params,
                            corr_maps ? &maps : nullptr);
    if (corr_maps) {
        corr_maps->clear();
        for (Var m : maps) corr_maps->push_back(t.value(m));
    }
    return t.value(out);
}

double loss_mse(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) {
        throw ShapeError("loss_mse: shape mismatch " + pred.shape_str() + " vs " +
                         target.shape_str());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

// ============================================================================
// Baselines
// ============================================================================

Tensor baseline_persistence(const Tensor& x_in, std::size_t horizon) {
    std::size_t t_len = x_in.extent(0), n = x_in.extent(1);
    std::vector<double> out(horizon * n);
    const double* last = x_in.data() + (t_len - 1) * n;
    for (std::size_t hh = 0; hh < horizon; ++hh)
        for (std::size_t c = 0; c < n; ++c) out[hh * n + c] = last[c];
    return Tensor({horizon, n}, std::move(out));
}

LinearBaseline fit_linear_baseline(const Tensor& series, std::size_t t_len,
                                   std::size_t horizon, double ridge,
                                   bool per_channel) {
    std::size_t rows = series.extent(0), n_ch = series.extent(1);
    if (rows < t_len + horizon) {
        throw ConfigError("fit_linear_baseline: series too short (" +
                          std::to_string(rows) + " rows) for T=" +
                          std::to_string(t_len) + " H=" + std::to_string(horizon));
    }
    std::size_t n_win = rows - t_len - horizon + 1;

    LinearBaseline model;
    model.per_channel = per_channel;
    model.t_len = t_len;
    model.horizon = horizon;

    // Per-channel raw accumulators; centered moments are formed afterwards.
    std::size_t groups = per_channel ? n_ch : 1;
    std::vector<std::vector<double>> sxx(groups, std::vector<double>(t_len * t_len, 0.0));
    std::vector<std::vector<double>> sxy(groups, std::vector<double>(t_len * horizon, 0.0));
    std::vector<double> mean_x(n_ch * t_len, 0.0), mean_y(n_ch * horizon, 0.0);

    std::vector<double> x(t_len), y(horizon);
    for (std::size_t c = 0; c < n_ch; ++c) {
        for (std::size_t w = 0; w < n_win; ++w) {
            for (std::size_t i = 0; i < t_len; ++i) x[i] = series.at2(w + i, c);
            for (std::size_t i = 0; i < horizon; ++i) y[i] = series.at2(w + t_len + i, c);
            for (std::size_t i = 0; i < t_len; ++i) {
                mean_x[c * t_len + i] += x[i];
            }
            for (std::size_t i = 0; i < horizon; ++i) mean_y[c * horizon + i] += y[i];
            std::size_t g = per_channel ? c : 0;
            double* gx = sxx[g].data();
            double* gy = sxy[g].data();
            for (std::size_t i = 0; i < t_len; ++i) {
                double xi = x[i];
                for (std::size_t j = 0; j < t_len; ++j) gx[i * t_len + j] += xi * x[j];
                for (std::size_t j = 0; j < horizon; ++j) gy[i * horizon + j] += xi * y[j];
            }
        }
    }
    double inv_w = 1.0 / static_cast<double>(n_win);
    for (double& v : mean_x) v *= inv_w;
    for (double& v : mean_y) v *= inv_w;

    // Subtract the per-channel mean outer products to center the moments.
    for (std::size_t c = 0; c < n_ch; ++c) {
        std::size_t g = per_channel ? c : 0;
        const double* mx = mean_x.data() + c * t_len;
        const double* my = mean_y.data() + c * horizon;
        double cnt = static_cast<double>(n_win);
        for (std::size_t i = 0; i < t_len; ++i) {
            for (std::size_t j = 0; j < t_len; ++j)
                sxx[g][i * t_len + j] -= cnt * mx[i] * mx[j];
            for (std::size_t j = 0; j < horizon; ++j)
                sxy[g][i * horizon + j] -= cnt * mx[i] * my[j];
        }
    }

    for (std::size_t g = 0; g < groups; ++g) {
        Tensor gram = add(Tensor({t_len, t_len}, std::move(sxx[g])),
                          mul_scalar(Tensor::identity(t_len), ridge));
        model.w.push_back(linear_solve(gram, Tensor({t_len, horizon}, std::move(sxy[g]))));
    }
    model.channel_mean_x = Tensor({n_ch, t_len}, std::move(mean_x));
    model.channel_mean_y = Tensor({n_ch, horizon}, std::move(mean_y));
    return model;
}

Tensor LinearBaseline::predict(const Tensor& x_in) const {
    std::size_t n_ch = x_in.extent(1);
    if (x_in.extent(0) != t_len) {
        throw ShapeError("linear baseline: expected " + std::to_string(t_len) +
                         " rows, got " + x_in.shape_str());
    }
    std::vector<double> out(horizon * n_ch, 0.0);
    for (std::size_t c = 0; c < n_ch; ++c) {
        const Tensor& wc = w[per_channel ? c : 0];
        for (std::size_t j = 0; j < horizon; ++j) {
            double acc = channel_mean_y.at2(c, j);
            for (std::size_t i = 0; i < t_len; ++i)
                acc += (x_in.at2(i, c) - channel_mean_x.at2(c, i)) * wc.at2(i, j);
            out[j * n_ch + c] = acc;
        }
    }
    return Tensor({horizon, n_ch}, std::move(out));
}

} // namespace vcformer
