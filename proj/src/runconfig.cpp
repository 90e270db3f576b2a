#include "vcformer/runconfig.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace vcformer {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("config: unknown key '" + where + it.key() + "'");
        }
    }
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

} // namespace

RunConfig default_run_config() { return RunConfig{}; }

std::string run_config_to_json(const RunConfig& cfg, int indent) {
    json j;
    j["model"] = {
        {"t", cfg.model.t},
        {"h", cfg.model.h},
        {"n", cfg.model.n},
        {"d", cfg.model.d},
        {"m", cfg.model.m},
        {"s", cfg.model.s},
        {"l", cfg.model.l},
        {"dtype", cfg.model.dtype == DType::F32 ? "f32" : "f64"},
        {"nonlinearity", nonlinearity_to_string(cfg.model.nonlinearity)},
        {"ridge_eps", cfg.model.ridge_eps},
        {"layernorm_eps", cfg.model.layernorm_eps},
    };
    j["train"] = {
        {"lr", cfg.train.lr},
        {"lr_decay", cfg.train.lr_decay},
        {"max_epochs", cfg.train.max_epochs},
        {"batch_size", cfg.train.batch_size},
        {"patience", cfg.train.patience},
        {"clip_norm", cfg.train.clip_norm},
        {"beta1", cfg.train.beta1},
        {"beta2", cfg.train.beta2},
        {"adam_eps", cfg.train.adam_eps},
        {"stride", cfg.train.stride},
    };
    j["data"] = {
        {"csv", cfg.data.csv},
        {"has_timestamp", cfg.data.has_timestamp},
        {"ratios", cfg.data.ratios},
    };
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    return j.dump(indent);
}

RunConfig run_config_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    reject_unknown(j, {"model", "train", "data", "seed", "threads"}, "");

    RunConfig cfg;
    try {
        if (j.contains("model")) {
            const json& m = j["model"];
            reject_unknown(m,
                           {"t", "h", "n", "d", "m", "s", "l", "dtype", "nonlinearity",
                            "ridge_eps", "layernorm_eps"},
                           "model.");
            maybe(m, "t", cfg.model.t);
            maybe(m, "h", cfg.model.h);
            maybe(m, "n", cfg.model.n);
            maybe(m, "d", cfg.model.d);
            maybe(m, "m", cfg.model.m);
            maybe(m, "s", cfg.model.s);
            maybe(m, "l", cfg.model.l);
            if (m.contains("dtype")) {
                std::string dt = m.at("dtype").get<std::string>();
                if (dt == "f32") {
                    cfg.model.dtype = DType::F32;
                } else if (dt == "f64") {
                    cfg.model.dtype = DType::F64;
                } else {
                    throw ConfigError("config: unknown dtype '" + dt + "'");
                }
            }
            if (m.contains("nonlinearity")) {
                cfg.model.nonlinearity =
                    nonlinearity_from_string(m.at("nonlinearity").get<std::string>());
            }
            maybe(m, "ridge_eps", cfg.model.ridge_eps);
            maybe(m, "layernorm_eps", cfg.model.layernorm_eps);
        }
        if (j.contains("train")) {
            const json& t = j["train"];
            reject_unknown(t,
                           {"lr", "lr_decay", "max_epochs", "batch_size", "patience",
                            "clip_norm", "beta1", "beta2", "adam_eps", "stride"},
                           "train.");
            maybe(t, "lr", cfg.train.lr);
            maybe(t, "lr_decay", cfg.train.lr_decay);
            maybe(t, "max_epochs", cfg.train.max_epochs);
            maybe(t, "batch_size", cfg.train.batch_size);
            maybe(t, "patience", cfg.train.patience);
            maybe(t, "clip_norm", cfg.train.clip_norm);
            maybe(t, "beta1", cfg.train.beta1);
            maybe(t, "beta2", cfg.train.beta2);
            maybe(t, "adam_eps", cfg.train.adam_eps);
            maybe(t, "stride", cfg.train.stride);
        }
        if (j.contains("data")) {
            const json& d = j["data"];
            reject_unknown(d, {"csv", "has_timestamp", "ratios"}, "data.");
            maybe(d, "csv", cfg.data.csv);
            maybe(d, "has_timestamp", cfg.data.has_timestamp);
            if (d.contains("ratios")) {
                auto r = d.at("ratios").get<std::vector<double>>();
                if (r.size() != 3) {
                    throw ConfigError("config: data.ratios needs exactly 3 entries");
                }
                cfg.data.ratios = {r[0], r[1], r[2]};
            }
        }
        maybe(j, "seed", cfg.seed);
        maybe(j, "threads", cfg.threads);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

RunConfig run_config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

} // namespace vcformer
