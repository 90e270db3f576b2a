#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vcformer/model.hpp"
#include "vcformer/rng.hpp"

using namespace vcformer;

TEST_SUITE_BEGIN("model");

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.t = 8;
    cfg.h = 4;
    cfg.n = 3;
    cfg.d = 8;
    cfg.s = 4;
    cfg.m = 6;
    cfg.l = 1;
    cfg.seed = 7;
    return cfg;
}

} // namespace

TEST_CASE("config validation") {
    ModelConfig bad = tiny_config();
    bad.s = 3; // does not divide d = 8
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = tiny_config();
    bad.s = 8; // single segment
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("shape contract at the reference configuration") {
    ModelConfig cfg;
    cfg.t = 96;
    cfg.h = 96;
    cfg.n = 8;
    cfg.d = 128;
    cfg.m = 256;
    cfg.s = 32;
    cfg.l = 2;
    cfg.seed = 1;
    ModelParams params = ModelParams::init(cfg);
    Rng rng(2);
    Tensor x = Tensor::random_gaussian({96, 8}, rng);
    Tensor y = model_predict(params, x);
    CHECK(y.extent(0) == 96);
    CHECK(y.extent(1) == 8);
    CHECK(y.all_finite());
}

TEST_CASE("zero blocks degenerate to a per-variate MLP chain") {
    ModelConfig cfg = tiny_config();
    cfg.l = 0;
    ModelParams params = ModelParams::init(cfg);
    Rng rng(3);
    Tensor x = Tensor::random_gaussian({cfg.t, cfg.n}, rng);
    Tensor y = model_predict(params, x);

    Tensor expect = transpose(mlp_apply(
        mlp_apply(transpose(x), params.embed, cfg.nonlinearity), params.proj,
        cfg.nonlinearity));
    CHECK(oracle::max_abs_diff(y, expect) < 1e-13);
}

TEST_CASE("input shape is checked at entry") {
    ModelParams params = ModelParams::init(tiny_config());
    CHECK_THROWS_AS(model_predict(params, Tensor::zeros({4, 3})), ShapeError);
}

TEST_CASE("loss_mse trivial and oracle cases") {
    Rng rng(4);
    Tensor a = Tensor::random_gaussian({4, 3}, rng);
    CHECK(loss_mse(a, a) == 0.0);
    CHECK(loss_mse(add_scalar(a, 1.0), a) == doctest::Approx(1.0).epsilon(1e-12));

    Tensor b = Tensor::random_gaussian({4, 3}, rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double d = a.at2(i, j) - b.at2(i, j);
            acc += d * d;
        }
    CHECK(std::abs(loss_mse(a, b) - acc / 12.0) < 1e-12);
    CHECK_THROWS_AS(loss_mse(a, Tensor::zeros({3, 4})), ShapeError);
}

TEST_CASE("full-model gradient check on the tiny configuration") {
    ModelConfig cfg = tiny_config();
    ModelParams params = ModelParams::init(cfg);
    Rng rng(5);
    Tensor x = Tensor::random_gaussian({cfg.t, cfg.n}, rng);
    Tensor target = Tensor::random_gaussian({cfg.h, cfg.n}, rng);

    auto build = [&](Tape& tp, const std::vector<Var>& vs) {
        ParamVars vars = param_vars_from_list(vs, cfg);
        Var pred = model_forward(tp, tp.constant(x), vars, params);
        return ad::mse(tp, pred, tp.constant(target));
    };
    GradCheckReport report = grad_check(build, named_tensors(params));
    for (const auto& entry : report.entries) {
        INFO(entry.name, " -> ", entry.max_rel_err);
        CHECK(entry.max_rel_err < 1e-4);
    }
}

TEST_CASE("deterministic initialization and prediction") {
    ModelConfig cfg = tiny_config();
    ModelParams a = ModelParams::init(cfg);
    ModelParams b = ModelParams::init(cfg);
    auto ta = named_tensors(a);
    auto tb = named_tensors(b);
    REQUIRE(ta.size() == tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i)
        CHECK(oracle::max_abs_diff(ta[i].second, tb[i].second) == 0.0);

    Rng rng(6);
    Tensor x = Tensor::random_gaussian({cfg.t, cfg.n}, rng);
    CHECK(oracle::max_abs_diff(model_predict(a, x), model_predict(b, x)) == 0.0);
}

TEST_CASE("residual wiring: zeroed sublayer outputs leave two layernorms") {
    ModelConfig cfg = tiny_config();
    ModelParams params = ModelParams::init(cfg);
    // silence VCA (output projection) and the KTD decoder's final layer
    params.blocks[0].vca.w_o = Tensor::zeros({cfg.d, cfg.d});
    params.blocks[0].ktd.decoder.w2 = Tensor::zeros({cfg.m, cfg.n * cfg.s});
    params.blocks[0].ktd.decoder.b2 = Tensor::zeros({cfg.n * cfg.s});

    Rng rng(8);
    Tensor x = Tensor::random_gaussian({cfg.t, cfg.n}, rng);
    Tensor y = model_predict(params, x);

    Tensor emb = mlp_apply(transpose(x), params.embed, cfg.nonlinearity);
    Tensor ln1 = layernorm(emb, params.blocks[0].norm1_gamma,
                           params.blocks[0].norm1_beta, cfg.layernorm_eps);
    Tensor ln2 = layernorm(ln1, params.blocks[0].norm2_gamma,
                           params.blocks[0].norm2_beta, cfg.layernorm_eps);
    Tensor expect = transpose(mlp_apply(ln2, params.proj, cfg.nonlinearity));
    CHECK(oracle::max_abs_diff(y, expect) < 1e-12);
}

TEST_CASE("persistence baseline") {
    // constant series forecasts itself
    Tensor flat = Tensor::full({5, 2}, 3.0);
    Tensor pred = baseline_persistence(flat, 4);
    CHECK(loss_mse(pred, Tensor::full({4, 2}, 3.0)) == 0.0);

    // ramp of slope one: squared error at horizon step h is h^2
    std::size_t t_len = 6, horizon = 3;
    std::vector<double> ramp_in(t_len), ramp_target(horizon);
    for (std::size_t i = 0; i < t_len; ++i) ramp_in[i] = static_cast<double>(i);
    for (std::size_t i = 0; i < horizon; ++i)
        ramp_target[i] = static_cast<double>(t_len + i);
    Tensor pred_ramp = baseline_persistence(Tensor({t_len, 1}, ramp_in), horizon);
    double expect = (1.0 + 4.0 + 9.0) / 3.0;
    CHECK(loss_mse(pred_ramp, Tensor({horizon, 1}, ramp_target)) ==
          doctest::Approx(expect).epsilon(1e-12));

    // H = 1 is exactly the last row
    Tensor single = baseline_persistence(Tensor({t_len, 1}, ramp_in), 1);
    CHECK(single[0] == 5.0);
}

TEST_CASE("linear baseline fits periodic signals to near-zero error") {
    // period-8 signal, T = 16, H = 8: continuation is linear in the window
    std::size_t rows = 200, t_len = 16, horizon = 8;
    std::vector<double> buf(rows * 2);
    for (std::size_t i = 0; i < rows; ++i) {
        double phase = 2.0 * oracle::kPi * static_cast<double>(i) / 8.0;
        buf[i * 2] = std::sin(phase);
        buf[i * 2 + 1] = std::cos(phase) + 0.5 * std::sin(2.0 * phase);
    }
    Tensor series({rows, 2}, buf);
    LinearBaseline lb = fit_linear_baseline(series, t_len, horizon, 1e-8);

    double worst = 0.0;
    for (std::size_t w = 0; w + t_len + horizon <= rows; w += 7) {
        Tensor x = slice_rows(series, w, w + t_len);
        Tensor y = slice_rows(series, w + t_len, w + t_len + horizon);
        worst = std::max(worst, loss_mse(lb.predict(x), y));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("linear baseline degenerate channels and heavy ridge") {
    std::size_t rows = 60, t_len = 8, horizon = 4;
    std::vector<double> buf(rows * 2);
    Rng rng(9);
    for (std::size_t i = 0; i < rows; ++i) {
        buf[i * 2] = 2.5;             // zero-variance channel
        buf[i * 2 + 1] = rng.gaussian();
    }
    Tensor series({rows, 2}, buf);

    LinearBaseline lb = fit_linear_baseline(series, t_len, horizon, 1e-6);
    Tensor pred = lb.predict(slice_rows(series, 0, t_len));
    for (std::size_t hh = 0; hh < horizon; ++hh)
        CHECK(pred.at2(hh, 0) == doctest::Approx(2.5).epsilon(1e-9));

    // ridge -> infinity collapses the weights; predictions fall back to the
    // per-channel target means
    LinearBaseline heavy = fit_linear_baseline(series, t_len, horizon, 1e12);
    Tensor pred_heavy = heavy.predict(slice_rows(series, 10, 10 + t_len));
    for (std::size_t hh = 0; hh < horizon; ++hh) {
        CHECK(pred_heavy.at2(hh, 0) ==
              doctest::Approx(heavy.channel_mean_y.at2(0, hh)).epsilon(1e-6));
        CHECK(pred_heavy.at2(hh, 1) ==
              doctest::Approx(heavy.channel_mean_y.at2(1, hh)).epsilon(1e-6));
    }
}

TEST_CASE("per-channel baseline separates channel dynamics") {
    std::size_t rows = 120, t_len = 8, horizon = 2;
    std::vector<double> buf(rows * 2);
    for (std::size_t i = 0; i < rows; ++i) {
        buf[i * 2] = std::sin(2.0 * oracle::kPi * static_cast<double>(i) / 4.0);
        buf[i * 2 + 1] = std::sin(2.0 * oracle::kPi * static_cast<double>(i) / 6.0);
    }
    Tensor series({rows, 2}, buf);
    LinearBaseline lb = fit_linear_baseline(series, t_len, horizon, 1e-9, true);
    REQUIRE(lb.w.size() == 2);
    Tensor x = slice_rows(series, 20, 20 + t_len);
    Tensor y = slice_rows(series, 20 + t_len, 20 + t_len + horizon);
    CHECK(loss_mse(lb.predict(x), y) < 1e-10);
}

TEST_SUITE_END();
