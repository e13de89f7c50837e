#pragma once

// The four operator entry points behind the CLI. Each is a pure function of
// (config, filesystem inputs) so runs are reproducible and testable without
// spawning a process.

#include <cstdint>
#include <string>
#include <vector>

#include "evslt/config.hpp"
#include "evslt/metrics.hpp"

namespace evslt {

struct SynthResult {
    std::string manifest_path;
    std::string vocab_path;
    int64_t train_count = 0;
    int64_t val_count = 0;
    int64_t test_count = 0;
};

// deterministic corpus: event files, manifest.jsonl, vocab.txt
SynthResult cmd_synth(const RunConfig& rc, const std::string& out_dir);

struct TrainResult {
    std::string log_path;
    std::string best_path;
    std::string last_path;
    int64_t final_step = 0;
    double final_train_loss = 0;
};

// epochs of seeded mini-batch SGD; appends to train_log.jsonl, keeps
// best.ckpt (lowest val loss) and last.ckpt (resume point)
TrainResult cmd_train(const RunConfig& rc, const std::string& manifest_path,
                      const std::string& out_dir);

struct EvalResult {
    ScoreReport report;
    std::string predictions_path;
    std::string scores_path;
};

// generates a hypothesis per sample of the split and scores the corpus
EvalResult cmd_eval(const RunConfig& rc, const std::string& manifest_path,
                    const std::string& split, const std::string& out_dir);

struct BenchRow {
    std::string component;
    int64_t T = 0;
    double median_ms = 0;
    double ratio = 0;  // median_ms relative to the component's base T
};

// forward-pass scaling of the SSM block vs a quadratic attention reference
std::vector<BenchRow> cmd_bench(const RunConfig& rc, const std::string& out_dir);

}  // namespace evslt
