#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include "evslt/config.hpp"
#include "evslt/errors.hpp"

using namespace evslt;

TEST_SUITE("config") {

TEST_CASE("an empty document yields the defaults") {
    const auto rc = parse_config("{}");
    CHECK(rc.seed == 7);
    CHECK(rc.epochs == 1);
    CHECK(rc.batch_size == 4);
    CHECK(rc.frames == 16);
    CHECK(rc.subsample == 1);
    CHECK(rc.height == 64);
    CHECK(rc.width == 64);
    CHECK(rc.bin_mode == BinMode::kTime);
    CHECK(rc.resize_mode == ResizeMode::kMass);
    CHECK(rc.model.encoder.token_dim == 128);
    CHECK(rc.model.mamba.token_dim == 128);
    CHECK(rc.optim.lr0 == 0.01);
    CHECK(rc.decode_strategy == DecodeStrategy::Greedy);
    CHECK(rc.beam_width == 4);
    CHECK(rc.synth.samples == 32);
}

TEST_CASE("a fully specified document parses into every field") {
    const std::string doc = R"({
      "seed": 99, "epochs": 3, "batch_size": 2, "frames": 8, "subsample": 2,
      "height": 32, "width": 48, "bin_mode": "count", "resize_mode": "mean",
      "model": {
        "in_channels": 2,
        "encoder": {"stages": [[8, 2], [16, 1]], "token_dim": 24},
        "mamba": {"d_inner": 48, "state_dim": 8, "conv_width": 3, "norm": "rms",
                  "share_directions": true},
        "head": {"aggregation": "add", "plan": [[3, 1]], "d_model": 16,
                 "enc_layers": 2, "dec_layers": 1, "heads": 2, "ff_dim": 32, "max_len": 12}
      },
      "optim": {"lr0": 0.1, "lr_min": 0.001, "momentum": 0.8, "weight_decay": 0.0001},
      "decode": {"strategy": "beam", "beam_width": 6},
      "synth": {"samples": 10, "vocab": 5, "min_len": 1, "max_len": 3,
                "sensor_width": 40, "sensor_height": 30, "token_duration_us": 20000,
                "ratios": [0.6, 0.2, 0.2]}
    })";
    const auto rc = parse_config(doc);
    CHECK(rc.seed == 99);
    CHECK(rc.epochs == 3);
    CHECK(rc.subsample == 2);
    CHECK(rc.bin_mode == BinMode::kCount);
    CHECK(rc.resize_mode == ResizeMode::kMean);
    CHECK(rc.model.encoder.stages.size() == 2);
    CHECK(rc.model.encoder.stages[1].out_channels == 16);
    CHECK(rc.model.encoder.stages[1].stride == 1);
    CHECK(rc.model.encoder.token_dim == 24);
    CHECK(rc.model.mamba.token_dim == 24);  // mirrored from the encoder
    CHECK(rc.model.mamba.norm == NormKind::RmsNorm);
    CHECK(rc.model.mamba.share_directions);
    CHECK(rc.model.head.aggregation == AggMode::Add);
    CHECK(rc.model.head.d_model == 16);
    CHECK(rc.optim.momentum == 0.8);
    CHECK(rc.decode_strategy == DecodeStrategy::Beam);
    CHECK(rc.beam_width == 6);
    CHECK(rc.synth.ratios == std::vector<double>{0.6, 0.2, 0.2});
}

TEST_CASE("unknown keys are rejected at every level") {
    CHECK_THROWS_AS((void)parse_config(R"({"sead": 1})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"model": {"encodr": {}}})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"model": {"encoder": {"token_dmi": 4}}})"),
                    ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"model": {"mamba": {"dinner": 4}}})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"model": {"head": {"dmodel": 4}}})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"optim": {"lr": 0.1}})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"decode": {"beam": 2}})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"synth": {"n": 4}})"), ConfigError);
}

TEST_CASE("type and value errors are config errors") {
    CHECK_THROWS_AS((void)parse_config("not json"), ConfigError);
    CHECK_THROWS_AS((void)parse_config("[1, 2]"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"epochs": "three"})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"epochs": 0})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"batch_size": -1})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"frames": 0})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"bin_mode": "length"})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"resize_mode": "bilinear"})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"model": {"mamba": {"norm": "batch"}}})"),
                    ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"model": {"head": {"aggregation": "mean"}}})"),
                    UnknownMode);
    CHECK_THROWS_AS((void)parse_config(R"({"model": {"encoder": {"stages": [[8]]}}})"),
                    ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"decode": {"strategy": "sampling"}})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"optim": {"lr0": 0.0}})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"optim": {"momentum": 1.0}})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"synth": {"ratios": [1.0, 0.0]}})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"synth": {"ratios": [0.5, 0.4, 0.2]}})"), ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"synth": {"min_len": 3, "max_len": 2}})"),
                    ConfigError);
}

TEST_CASE("the environment variable overrides the config seed") {
    const std::string path = "config_env_test.json";
    {
        std::ofstream f(path);
        f << R"({"seed": 5})";
    }
    CHECK(load_config(path).seed == 5);

    setenv("EVSLT_SEED", "123", 1);
    CHECK(load_config(path).seed == 123);
    setenv("EVSLT_SEED", "abc", 1);
    CHECK_THROWS_AS((void)load_config(path), ConfigError);
    unsetenv("EVSLT_SEED");
    CHECK(load_config(path).seed == 5);

    std::remove(path.c_str());
    CHECK_THROWS_AS((void)load_config("missing_config.json"), ConfigError);
}

}  // TEST_SUITE
