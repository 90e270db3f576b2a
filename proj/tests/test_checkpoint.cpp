#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <fstream>

#include "oracles.hpp"
#include "vcformer/checkpoint.hpp"
#include "vcformer/runconfig.hpp"

using namespace vcformer;

TEST_SUITE_BEGIN("checkpoint");

namespace {

std::filesystem::path temp_path(const std::string& stem) {
    return std::filesystem::temp_directory_path() /
           (stem + "_" + std::to_string(::getpid()) + ".bin");
}

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.t = 8;
    cfg.h = 4;
    cfg.n = 2;
    cfg.d = 8;
    cfg.s = 4;
    cfg.m = 6;
    cfg.l = 1;
    cfg.seed = 77;
    return cfg;
}

} // namespace

TEST_CASE("save/load/save round trip is byte identical") {
    ModelParams params = ModelParams::init(tiny_config());
    Tensor mean({2}, {0.5, -0.25});
    Tensor stdev({2}, {1.5, 2.25});
    Checkpoint ckpt = make_checkpoint(params, mean, stdev, "{\"seed\": 77}");

    auto p1 = temp_path("ckpt_a");
    auto p2 = temp_path("ckpt_b");
    save_checkpoint(p1.string(), ckpt);
    Checkpoint loaded = load_checkpoint(p1.string());
    save_checkpoint(p2.string(), loaded);

    CHECK(file_bytes(p1) == file_bytes(p2));
    CHECK(loaded.config_json == "{\"seed\": 77}");
    REQUIRE(loaded.tensors.size() == ckpt.tensors.size());
    for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
        CHECK(loaded.tensors[i].first == ckpt.tensors[i].first);
        CHECK(oracle::max_abs_diff(loaded.tensors[i].second, ckpt.tensors[i].second) ==
              0.0);
    }
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("f32 tensors round trip bit exactly through the 4-byte encoding") {
    Rng rng(81);
    Tensor t = Tensor::random_gaussian({3, 5}, rng, DType::F32);
    Checkpoint ckpt;
    ckpt.config_json = "{}";
    ckpt.tensors.emplace_back("w", t);

    auto p = temp_path("ckpt_f32");
    save_checkpoint(p.string(), ckpt);
    Checkpoint loaded = load_checkpoint(p.string());
    CHECK(loaded.tensors[0].second.dtype() == DType::F32);
    CHECK(oracle::max_abs_diff(loaded.tensors[0].second, t) == 0.0);
    std::filesystem::remove(p);
}

TEST_CASE("f32 model parameters keep the narrow tag end to end") {
    ModelConfig cfg = tiny_config();
    cfg.dtype = DType::F32;
    ModelParams params = ModelParams::init(cfg);
    params.for_each([](const std::string&, Tensor& t) {
        CHECK(t.dtype() == DType::F32);
    });

    auto p = temp_path("ckpt_model_f32");
    save_checkpoint(p.string(),
                    make_checkpoint(params, Tensor::zeros({2}), Tensor::full({2}, 1.0),
                                    "{}"));
    Checkpoint loaded = load_checkpoint(p.string());
    ModelParams restored = ModelParams::init(cfg);
    load_into_model(loaded, restored);
    auto a = named_tensors(params);
    auto b = named_tensors(restored);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(b[i].second.dtype() == DType::F32);
        CHECK(oracle::max_abs_diff(a[i].second, b[i].second) == 0.0);
    }
    std::filesystem::remove(p);
}

TEST_CASE("load_into_model restores predictions exactly") {
    ModelConfig cfg = tiny_config();
    ModelParams params = ModelParams::init(cfg);
    Rng rng(82);
    Tensor x = Tensor::random_gaussian({cfg.t, cfg.n}, rng);
    Tensor before = model_predict(params, x);

    auto p = temp_path("ckpt_model");
    save_checkpoint(p.string(),
                    make_checkpoint(params, Tensor::zeros({2}), Tensor::full({2}, 1.0),
                                    "{}"));

    ModelConfig cfg2 = cfg;
    cfg2.seed = 12345; // different init, then overwritten by the checkpoint
    ModelParams restored = ModelParams::init(cfg2);
    load_into_model(load_checkpoint(p.string()), restored);
    Tensor after = model_predict(restored, x);
    CHECK(oracle::max_abs_diff(before, after) == 0.0);
    std::filesystem::remove(p);
}

TEST_CASE("corrupt containers are rejected") {
    auto p = temp_path("ckpt_bad");
    {
        std::ofstream out(p, std::ios::binary);
        out << "NOPEate some bytes";
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(p.string()), doctest::Contains("magic"),
                         DataError);
    std::filesystem::remove(p);
    CHECK_THROWS_AS(load_checkpoint(p.string()), DataError);
}

TEST_CASE("run config round trips through JSON") {
    RunConfig cfg = default_run_config();
    cfg.model.d = 64;
    cfg.model.dtype = DType::F32;
    cfg.train.lr = 0.5;
    cfg.data.csv = "somewhere.csv";
    cfg.data.ratios = {0.7, 0.1, 0.2};
    cfg.seed = 99;
    std::string text = run_config_to_json(cfg);
    RunConfig back = run_config_from_json(text);
    CHECK(back.model.d == 64);
    CHECK(back.model.dtype == DType::F32);
    CHECK(back.train.lr == 0.5);
    CHECK(back.data.csv == "somewhere.csv");
    CHECK(back.data.ratios[0] == 0.7);
    CHECK(back.seed == 99);
    CHECK(back.resolved_model().seed == 99);
}

TEST_CASE("unknown config keys are rejected") {
    CHECK_THROWS_WITH_AS(run_config_from_json("{\"modle\": {}}"),
                         doctest::Contains("modle"), ConfigError);
    CHECK_THROWS_WITH_AS(run_config_from_json("{\"model\": {\"dd\": 3}}"),
                         doctest::Contains("model.dd"), ConfigError);
    CHECK_THROWS_AS(run_config_from_json("{\"data\": {\"ratios\": [1, 2]}}"),
                    ConfigError);
    CHECK_THROWS_AS(run_config_from_json("not json"), ConfigError);
}

TEST_SUITE_END();
