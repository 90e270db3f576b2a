// Command-line front end: training, evaluation, forecasting, kernel
// benchmarking, gradient checking, correlation-map export and synthetic
// data generation.
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime or numeric error,
// 3 gradient-check failure.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vcformer/checkpoint.hpp"
#include "vcformer/data.hpp"
#include "vcformer/lagcorr.hpp"
#include "vcformer/runconfig.hpp"
#include "vcformer/train.hpp"

using nlohmann::json;
using namespace vcformer;

namespace {

struct GradcheckFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config file plus dotted-name overrides, applied after the file loads.
struct ConfigCli {
    std::string config_path;

    std::optional<std::size_t> model_t, model_h, model_n, model_d, model_m, model_s,
        model_l;
    std::optional<std::string> model_dtype, model_nonlinearity;
    std::optional<double> model_ridge_eps, model_layernorm_eps;

    std::optional<double> train_lr, train_lr_decay, train_clip_norm, train_beta1,
        train_beta2, train_adam_eps;
    std::optional<std::size_t> train_max_epochs, train_batch_size, train_patience,
        train_stride;

    std::optional<std::string> data_csv, data_ratios;
    std::optional<bool> data_has_timestamp;

    std::optional<std::uint64_t> seed;
    std::optional<int> threads;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run-config file");
        cmd->add_option("--model.t", model_t, "look-back length");
        cmd->add_option("--model.h", model_h, "forecast horizon");
        cmd->add_option("--model.n", model_n, "variate count (0 = infer from data)");
        cmd->add_option("--model.d", model_d, "token width");
        cmd->add_option("--model.m", model_m, "Koopman embedding width");
        cmd->add_option("--model.s", model_s, "Koopman segment length");
        cmd->add_option("--model.l", model_l, "encoder block count");
        cmd->add_option("--model.dtype", model_dtype, "f64 or f32");
        cmd->add_option("--model.nonlinearity", model_nonlinearity, "gelu or relu");
        cmd->add_option("--model.ridge_eps", model_ridge_eps, "Koopman ridge epsilon");
        cmd->add_option("--model.layernorm_eps", model_layernorm_eps, "layernorm epsilon");
        cmd->add_option("--train.lr", train_lr, "base learning rate");
        cmd->add_option("--train.lr_decay", train_lr_decay, "per-epoch decay factor");
        cmd->add_option("--train.max_epochs", train_max_epochs, "epoch cap");
        cmd->add_option("--train.batch_size", train_batch_size, "windows per step");
        cmd->add_option("--train.patience", train_patience, "early-stop patience");
        cmd->add_option("--train.clip_norm", train_clip_norm, "gradient clip norm");
        cmd->add_option("--train.beta1", train_beta1, "Adam beta1");
        cmd->add_option("--train.beta2", train_beta2, "Adam beta2");
        cmd->add_option("--train.adam_eps", train_adam_eps, "Adam epsilon");
        cmd->add_option("--train.stride", train_stride, "training window stride");
        cmd->add_option("--data.csv", data_csv, "dataset CSV path");
        cmd->add_option("--data.has_timestamp", data_has_timestamp,
                        "first column is a timestamp");
        cmd->add_option("--data.ratios", data_ratios,
                        "train,val,test ratios, e.g. 0.6,0.2,0.2");
        cmd->add_option("--seed", seed, "seed for all randomness");
        cmd->add_option("--threads", threads, "worker threads (1 = deterministic)");
    }

    RunConfig resolve() const {
        RunConfig cfg = config_path.empty() ? default_run_config()
                                            : run_config_from_file(config_path);
        if (model_t) cfg.model.t = *model_t;
        if (model_h) cfg.model.h = *model_h;
        if (model_n) cfg.model.n = *model_n;
        if (model_d) cfg.model.d = *model_d;
        if (model_m) cfg.model.m = *model_m;
        if (model_s) cfg.model.s = *model_s;
        if (model_l) cfg.model.l = *model_l;
        if (model_dtype) {
            if (*model_dtype == "f32") {
                cfg.model.dtype = DType::F32;
            } else if (*model_dtype == "f64") {
                cfg.model.dtype = DType::F64;
            } else {
                throw ConfigError("unknown dtype '" + *model_dtype + "'");
            }
        }
        if (model_nonlinearity)
            cfg.model.nonlinearity = nonlinearity_from_string(*model_nonlinearity);
        if (model_ridge_eps) cfg.model.ridge_eps = *model_ridge_eps;
        if (model_layernorm_eps) cfg.model.layernorm_eps = *model_layernorm_eps;
        if (train_lr) cfg.train.lr = *train_lr;
        if (train_lr_decay) cfg.train.lr_decay = *train_lr_decay;
        if (train_max_epochs) cfg.train.max_epochs = *train_max_epochs;
        if (train_batch_size) cfg.train.batch_size = *train_batch_size;
        if (train_patience) cfg.train.patience = *train_patience;
        if (train_clip_norm) cfg.train.clip_norm = *train_clip_norm;
        if (train_beta1) cfg.train.beta1 = *train_beta1;
        if (train_beta2) cfg.train.beta2 = *train_beta2;
        if (train_adam_eps) cfg.train.adam_eps = *train_adam_eps;
        if (train_stride) cfg.train.stride = *train_stride;
        if (data_csv) cfg.data.csv = *data_csv;
        if (data_has_timestamp) cfg.data.has_timestamp = *data_has_timestamp;
        if (data_ratios) {
            std::array<double, 3> r{};
            if (std::sscanf(data_ratios->c_str(), "%lf,%lf,%lf", &r[0], &r[1], &r[2]) !=
                3) {
                throw ConfigError("cannot parse ratios '" + *data_ratios + "'");
            }
            cfg.data.ratios = r;
        }
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        return cfg;
    }
};

json safe_num(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw DataError("write failed for '" + path + "'");
}

std::string matrix_csv(const Tensor& m, const std::vector<std::string>& header = {}) {
    std::ostringstream os;
    os.precision(17);
    if (!header.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c) os << ",";
            os << header[c];
        }
        os << "\n";
    }
    for (std::size_t i = 0; i < m.extent(0); ++i) {
        for (std::size_t j = 0; j < m.extent(1); ++j) {
            if (j) os << ",";
            os << m.at2(i, j);
        }
        os << "\n";
    }
    return os.str();
}

struct LoadedModel {
    RunConfig cfg;
    ModelParams params;
    Tensor norm_mean, norm_std;
};

LoadedModel load_model(const std::string& checkpoint_path) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    LoadedModel lm{run_config_from_json(ckpt.config_json),
                   ModelParams{}, Tensor{}, Tensor{}};
    if (lm.cfg.model.n == 0) {
        throw ConfigError("checkpoint config has no variate count");
    }
    lm.params = ModelParams::init(lm.cfg.resolved_model());
    load_into_model(ckpt, lm.params);
    const Tensor* mean = ckpt.find("norm.mean");
    const Tensor* stdev = ckpt.find("norm.std");
    if (!mean || !stdev) {
        throw DataError("checkpoint is missing the normalization statistics");
    }
    lm.norm_mean = *mean;
    lm.norm_std = *stdev;
    return lm;
}

// ----------------------------------------------------------------------------
// Subcommands
// ----------------------------------------------------------------------------

int cmd_train(const ConfigCli& cc, const std::string& out_path,
              const std::string& report_path) {
    RunConfig cfg = cc.resolve();
    if (cfg.data.csv.empty()) {
        throw ConfigError("train: no dataset (set data.csv or --data.csv)");
    }
    set_num_threads(cfg.threads);
    RawSeries raw = load_csv(cfg.data.csv, cfg.data.has_timestamp);
    if (raw.rows_rejected > 0) {
        std::cerr << "warning: dropped " << raw.rows_rejected << " NaN rows\n";
    }
    if (cfg.model.n == 0) {
        cfg.model.n = raw.values.extent(1);
    } else if (cfg.model.n != raw.values.extent(1)) {
        throw ConfigError("train: config expects " + std::to_string(cfg.model.n) +
                          " variates, CSV has " + std::to_string(raw.values.extent(1)));
    }
    DatasetSplit split = split_normalize(raw, cfg.data.ratios);
    ModelParams params = ModelParams::init(cfg.resolved_model());
    std::cout << "training on " << cfg.data.csv << " (" << raw.values.extent(0)
              << " rows, " << cfg.model.n << " variates, "
              << params.count_scalars() << " parameters)\n";
    TrainReport report = fit(params, split, cfg.train);

    std::string config_json = run_config_to_json(cfg);
    save_checkpoint(out_path,
                    make_checkpoint(params, split.mean, split.stdev, config_json));

    json rj;
    rj["config"] = json::parse(config_json);
    rj["train_loss"] = report.train_loss;
    rj["val_mse"] = report.val_mse;
    rj["val_mae"] = report.val_mae;
    rj["best_epoch"] = report.best_epoch;
    rj["best_val_mse"] = safe_num(report.best_val_mse);
    rj["wall_time_sec"] = report.wall_time_sec;
    rj["seed"] = report.seed;
    rj["diverged"] = report.diverged;
    rj["early_stopped"] = report.early_stopped;
    write_text(report_path, rj.dump(2) + "\n");

    std::cout << "epochs: " << report.train_loss.size()
              << (report.diverged ? " (diverged)" : "")
              << ", best val mse: " << report.best_val_mse << "\n"
              << "checkpoint: " << out_path << "\nreport: " << report_path << "\n";
    return report.diverged ? 2 : 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& csv_override,
             const std::string& split_name, int threads) {
    LoadedModel lm = load_model(checkpoint_path);
    set_num_threads(threads > 0 ? threads : lm.cfg.threads);
    std::string csv = csv_override.empty() ? lm.cfg.data.csv : csv_override;
    if (csv.empty()) throw ConfigError("eval: no dataset available");
    RawSeries raw = load_csv(csv, lm.cfg.data.has_timestamp);
    DatasetSplit split = split_normalize(raw, lm.cfg.data.ratios);
    const Tensor* data = nullptr;
    if (split_name == "train") {
        data = &split.train;
    } else if (split_name == "val") {
        data = &split.val;
    } else if (split_name == "test") {
        data = &split.test;
    } else {
        throw ConfigError("eval: unknown split '" + split_name + "'");
    }
    WindowSampler sampler(*data, lm.cfg.model.t, lm.cfg.model.h);
    Metrics m = evaluate_split(lm.params, *data);
    json out;
    out["split"] = split_name;
    out["windows"] = sampler.count();
    out["mse"] = safe_num(m.mse);
    out["mae"] = safe_num(m.mae);
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_forecast(const std::string& checkpoint_path, const std::string& csv,
                 const std::string& out_path, bool denorm, int threads) {
    LoadedModel lm = load_model(checkpoint_path);
    set_num_threads(threads > 0 ? threads : lm.cfg.threads);
    RawSeries raw = load_csv(csv, lm.cfg.data.has_timestamp);
    std::size_t t_len = lm.cfg.model.t;
    if (raw.values.extent(0) < t_len) {
        throw ConfigError("forecast: need at least " + std::to_string(t_len) +
                          " rows, CSV has " + std::to_string(raw.values.extent(0)));
    }
    if (raw.values.extent(1) != lm.cfg.model.n) {
        throw ConfigError("forecast: model expects " + std::to_string(lm.cfg.model.n) +
                          " variates, CSV has " + std::to_string(raw.values.extent(1)));
    }
    Tensor window = slice_rows(raw.values, raw.values.extent(0) - t_len,
                               raw.values.extent(0));
    Tensor pred = model_predict(lm.params,
                                normalize_with(window, lm.norm_mean, lm.norm_std));
    if (denorm) pred = denormalize(pred, lm.norm_mean, lm.norm_std);
    std::string text = matrix_csv(pred, raw.column_names);
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_text(out_path, text);
        std::cout << "forecast (" << pred.extent(0) << "x" << pred.extent(1)
                  << (denorm ? ", raw scale" : ", normalized") << ") -> " << out_path
                  << "\n";
    }
    return 0;
}

int cmd_bench(const std::string& sizes_arg, const std::string& out_path,
              std::uint64_t seed) {
    std::vector<std::pair<std::size_t, std::size_t>> sizes;
    std::istringstream is(sizes_arg);
    std::string item;
    while (std::getline(is, item, ',')) {
        std::size_t n = 0, len = 0;
        if (std::sscanf(item.c_str(), "%zu:%zu", &n, &len) != 2 || n == 0 || len == 0) {
            throw ConfigError("bench: cannot parse size '" + item + "' (want N:L)");
        }
        sizes.emplace_back(n, len);
    }
    if (sizes.empty()) throw ConfigError("bench: no sizes given");
    auto rows = bench_lagcorr(sizes, seed);
    std::string csv = bench_csv(rows);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_text(out_path, csv);
        std::cout << csv;
        std::cout << "-> " << out_path << "\n";
    }
    return 0;
}

int cmd_gradcheck(double tol) {
    ModelConfig cfg;
    cfg.t = 8;
    cfg.h = 4;
    cfg.n = 3;
    cfg.d = 8;
    cfg.s = 4;
    cfg.m = 6;
    cfg.l = 1;
    cfg.seed = 7;
    ModelParams params = ModelParams::init(cfg);
    Rng rng(1234);
    Tensor x = Tensor::random_gaussian({cfg.t, cfg.n}, rng);
    Tensor target = Tensor::random_gaussian({cfg.h, cfg.n}, rng);

    auto build = [&](Tape& tp, const std::vector<Var>& vs) {
        ParamVars vars = param_vars_from_list(vs, cfg);
        Var pred = model_forward(tp, tp.constant(x), vars, params);
        return ad::mse(tp, pred, tp.constant(target));
    };
    GradCheckReport report = grad_check(build, named_tensors(params));
    bool ok = true;
    for (const auto& entry : report.entries) {
        bool pass = entry.max_rel_err <= tol;
        ok = ok && pass;
        std::cout << (pass ? "ok   " : "FAIL ") << entry.name << "  max_rel_err="
                  << entry.max_rel_err << "\n";
    }
    std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << " (worst "
              << report.worst << ", tol " << tol << ")\n";
    if (!ok) throw GradcheckFailed("gradient check failed");
    return 0;
}

int cmd_corrmap(const std::string& checkpoint_path, const std::string& csv,
                std::size_t layer, std::size_t window_index,
                const std::string& prefix, int threads) {
    LoadedModel lm = load_model(checkpoint_path);
    set_num_threads(threads > 0 ? threads : lm.cfg.threads);
    if (layer >= lm.cfg.model.l) {
        throw ConfigError("corrmap: layer " + std::to_string(layer) + " out of range (" +
                          std::to_string(lm.cfg.model.l) + " blocks)");
    }
    RawSeries raw = load_csv(csv, lm.cfg.data.has_timestamp);
    Tensor normalized = normalize_with(raw.values, lm.norm_mean, lm.norm_std);
    WindowSampler sampler(normalized, lm.cfg.model.t, lm.cfg.model.h);
    if (sampler.count() == 0) {
        throw ConfigError("corrmap: CSV too short for one (T, H) window");
    }
    if (window_index >= sampler.count()) {
        throw ConfigError("corrmap: window " + std::to_string(window_index) +
                          " out of range (" + std::to_string(sampler.count()) + ")");
    }
    auto [x, y] = sampler.window(window_index);

    std::size_t degenerate = 0;
    Tensor input_pearson = pearson_map(x, &degenerate);
    if (degenerate > 0) {
        std::cerr << "warning: " << degenerate
                  << " zero-variance channel(s); their correlations are set to 0\n";
    }
    Tensor target_pearson = pearson_map(y, &degenerate);

    std::vector<Tensor> maps;
    model_predict(lm.params, x, &maps);

    write_text(prefix + "_input_pearson.csv", matrix_csv(input_pearson));
    write_text(prefix + "_target_pearson.csv", matrix_csv(target_pearson));
    std::string layer_path = prefix + "_layer" + std::to_string(layer) + ".csv";
    write_text(layer_path, matrix_csv(maps[layer]));
    std::cout << "wrote " << prefix << "_input_pearson.csv, " << prefix
              << "_target_pearson.csv, " << layer_path << "\n";
    return 0;
}

int cmd_synth(std::size_t n, std::size_t len, std::size_t lag, double coupling,
              double noise, std::uint64_t seed, double indep_scale,
              const std::string& out_path) {
    SynthMeta meta;
    RawSeries raw = synth_lagged(n, len, lag, coupling, noise, seed, indep_scale, &meta);
    write_text(out_path, matrix_csv(raw.values, raw.column_names));
    json mj;
    mj["n"] = meta.n;
    mj["timesteps"] = meta.timesteps;
    mj["lag"] = meta.lag;
    mj["coupling"] = meta.coupling;
    mj["noise_sigma"] = meta.noise_sigma;
    mj["indep_scale"] = meta.indep_scale;
    mj["seed"] = meta.seed;
    write_text(out_path + ".meta.json", mj.dump(2) + "\n");
    std::cout << "wrote " << out_path << " (" << len << "x" << n << ") and "
              << out_path << ".meta.json\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"VCformer forecasting toolkit"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    ConfigCli train_cc;
    train_cc.attach(train_cmd);
    std::string train_out = "model.vcfm";
    std::string train_report = "train_report.json";
    train_cmd->add_option("--out", train_out, "checkpoint output path");
    train_cmd->add_option("--report", train_report, "train report JSON path");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string eval_ckpt, eval_csv, eval_split = "test";
    int eval_threads = 0;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--csv", eval_csv, "override the dataset CSV");
    eval_cmd->add_option("--split", eval_split, "train, val or test");
    eval_cmd->add_option("--threads", eval_threads, "worker threads");

    // forecast
    auto* fc_cmd = app.add_subcommand("forecast", "forecast H steps from the last T rows");
    std::string fc_ckpt, fc_csv, fc_out;
    bool fc_denorm = false;
    int fc_threads = 0;
    fc_cmd->add_option("--checkpoint", fc_ckpt, "checkpoint path")->required();
    fc_cmd->add_option("--csv", fc_csv, "input CSV")->required();
    fc_cmd->add_option("--out", fc_out, "output CSV (default stdout)");
    fc_cmd->add_flag("--denormalize", fc_denorm, "map back to raw scale");
    fc_cmd->add_option("--threads", fc_threads, "worker threads");

    // bench-lagcorr
    auto* bench_cmd = app.add_subcommand("bench-lagcorr",
                                         "time the naive and FFT correlation paths");
    std::string bench_sizes = "8:64,8:256,8:1024,8:4096";
    std::string bench_out;
    std::uint64_t bench_seed = 0;
    bench_cmd->add_option("--sizes", bench_sizes, "comma list of N:L pairs");
    bench_cmd->add_option("--out", bench_out, "CSV output path (default stdout)");
    bench_cmd->add_option("--seed", bench_seed, "input seed");

    // gradcheck
    auto* gc_cmd = app.add_subcommand(
        "gradcheck", "finite-difference check of the full model (tiny config)");
    double gc_tol = 1e-4;
    bool gc_tiny = false;
    gc_cmd->add_flag("--tiny-config", gc_tiny, "use the built-in tiny configuration");
    gc_cmd->add_option("--tol", gc_tol, "max relative error accepted");

    // corrmap
    auto* cm_cmd = app.add_subcommand(
        "corrmap", "export pre-softmax score and Pearson correlation maps");
    std::string cm_ckpt, cm_csv, cm_prefix = "corrmap";
    std::size_t cm_layer = 0, cm_window = 0;
    int cm_threads = 0;
    cm_cmd->add_option("--checkpoint", cm_ckpt, "checkpoint path")->required();
    cm_cmd->add_option("--csv", cm_csv, "input CSV")->required();
    cm_cmd->add_option("--layer", cm_layer, "block index");
    cm_cmd->add_option("--window", cm_window, "window index into the CSV");
    cm_cmd->add_option("--out-prefix", cm_prefix, "output file prefix");
    cm_cmd->add_option("--threads", cm_threads, "worker threads");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a lag-coupled dataset");
    std::size_t sy_n = 4, sy_len = 4000, sy_lag = 7;
    double sy_coupling = 0.9, sy_noise = 0.05, sy_indep = 1.0;
    std::uint64_t sy_seed = 17;
    std::string sy_out = "synth.csv";
    synth_cmd->add_option("--n", sy_n, "channel count");
    synth_cmd->add_option("--len", sy_len, "timesteps");
    synth_cmd->add_option("--lag", sy_lag, "per-channel delay step");
    synth_cmd->add_option("--coupling", sy_coupling, "shared-component weight");
    synth_cmd->add_option("--noise", sy_noise, "Gaussian noise sigma");
    synth_cmd->add_option("--seed", sy_seed, "generator seed");
    synth_cmd->add_option("--indep-scale", sy_indep, "independent component scale");
    synth_cmd->add_option("--out", sy_out, "output CSV path");

    // config
    auto* config_cmd = app.add_subcommand("config", "inspect run configuration");
    bool cfg_defaults = false;
    ConfigCli config_cc;
    config_cc.attach(config_cmd);
    config_cmd->add_flag("--print-defaults", cfg_defaults, "emit the default config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_cc, train_out, train_report);
        if (eval_cmd->parsed())
            return cmd_eval(eval_ckpt, eval_csv, eval_split, eval_threads);
        if (fc_cmd->parsed())
            return cmd_forecast(fc_ckpt, fc_csv, fc_out, fc_denorm, fc_threads);
        if (bench_cmd->parsed()) return cmd_bench(bench_sizes, bench_out, bench_seed);
        if (gc_cmd->parsed()) return cmd_gradcheck(gc_tol);
        if (cm_cmd->parsed())
            return cmd_corrmap(cm_ckpt, cm_csv, cm_layer, cm_window, cm_prefix,
                               cm_threads);
        if (synth_cmd->parsed())
            return cmd_synth(sy_n, sy_len, sy_lag, sy_coupling, sy_noise, sy_seed,
                             sy_indep, sy_out);
        if (config_cmd->parsed()) {
            if (cfg_defaults) {
                std::cout << run_config_to_json(default_run_config()) << "\n";
            } else {
                std::cout << run_config_to_json(config_cc.resolve()) << "\n";
            }
            return 0;
        }
    } catch (const GradcheckFailed& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
