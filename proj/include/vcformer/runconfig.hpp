#pragma once

#include <array>
#include <string>

#include "vcformer/model.hpp"
#include "vcformer/train.hpp"

namespace vcformer {

/**
 * The whole run in one JSON-serializable document: model dimensions, train
 * settings, data source and split ratios, seed and threading. Unknown keys
 * are rejected on parse so typos fail loudly.
 */
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    struct DataSection {
        std::string csv;
        bool has_timestamp = true;
        std::array<double, 3> ratios{0.6, 0.2, 0.2};
    } data;
    std::uint64_t seed = 0;
    int threads = 1;

    /** ModelConfig with the run-level seed folded in. */
    ModelConfig resolved_model() const {
        ModelConfig m = model;
        m.seed = seed;
        return m;
    }
};

RunConfig default_run_config();

std::string run_config_to_json(const RunConfig& cfg, int indent = 2);
RunConfig run_config_from_json(const std::string& json_text);
RunConfig run_config_from_file(const std::string& path);

} // namespace vcformer
