#pragma once

// Dataset manifests (JSON Lines) and the sample -> tensor pipeline shared by
// training and evaluation.

#include <cstdint>
#include <string>
#include <vector>

#include "evslt/config.hpp"
#include "evslt/events.hpp"
#include "evslt/vocab.hpp"

namespace evslt {

struct ManifestEntry {
    std::string id;
    std::string events_path;  // relative to the manifest directory
    std::string text;
    std::string split;  // train | val | test
};

struct Manifest {
    std::string dir;
    std::vector<ManifestEntry> entries;
};

// validates ids (unique), splits, and that every events file exists
Manifest load_manifest(const std::string& path);

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

std::vector<size_t> split_indices(const Manifest& m, const std::string& split);

// keeps frames 0, k, 2k, ... (the frame-count ablation knob)
FrameTensor subsample_frames(const FrameTensor& frames, int64_t keep_every);

struct LoadedSample {
    std::string id;
    std::string text;
    FrameTensor frames;         // [T', 2, H, W] after subsample/resize/normalize
    std::vector<int> sentence;  // BOS..EOS framed token ids
};

// read events -> stack -> subsample -> resize -> normalize -> encode text
LoadedSample load_sample(const Manifest& m, const ManifestEntry& e, const RunConfig& rc,
                         const Vocabulary& vocab);

struct Batch {
    std::vector<int64_t> shape;  // [B, T, C, H, W]
    std::vector<float> values;
    std::vector<std::vector<int>> sentences;
};

Batch make_batch(const std::vector<const LoadedSample*>& samples);

}  // namespace evslt
