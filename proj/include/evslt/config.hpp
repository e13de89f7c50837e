#pragma once

// Run configuration: one structured file drives synth, train, eval, and
// bench. Unknown keys are startup errors so typos never silently no-op.

#include <cstdint>
#include <string>
#include <vector>

#include "evslt/events.hpp"
#include "evslt/model.hpp"
#include "evslt/optim.hpp"
#include "evslt/translator.hpp"

namespace evslt {

struct SynthConfig {
    int64_t samples = 32;
    int64_t vocab = 12;
    int64_t min_len = 2;
    int64_t max_len = 6;
    int64_t sensor_width = 64;
    int64_t sensor_height = 64;
    int64_t token_duration_us = 40000;
    std::vector<double> ratios{0.8, 0.1, 0.1};  // train/val/test
};

struct RunConfig {
    uint64_t seed = 7;
    int64_t epochs = 1;
    int64_t batch_size = 4;
    int64_t frames = 16;     // stacked frame count T
    int64_t subsample = 1;   // keep every k-th frame
    int64_t height = 64;     // training resolution after resize
    int64_t width = 64;
    BinMode bin_mode = BinMode::kTime;
    ResizeMode resize_mode = ResizeMode::kMass;
    ModelConfig model;
    OptimizerState optim;
    DecodeStrategy decode_strategy = DecodeStrategy::Greedy;
    int beam_width = 4;
    SynthConfig synth;
};

// parses and validates a config document; missing keys fall back to
// defaults, unrecognized keys raise ConfigError
RunConfig parse_config(const std::string& text);

// parse_config on a file, then apply the EVSLT_SEED override if set
RunConfig load_config(const std::string& path);

}  // namespace evslt
