#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "evslt/errors.hpp"

namespace evslt {

// One asynchronous sensor event: pixel location, timestamp in microseconds,
// polarity of the brightness change.
struct EventPoint {
    int32_t x = 0;
    int32_t y = 0;
    int64_t t = 0;
    int8_t p = 1;  // +1 or -1

    bool operator==(const EventPoint&) const = default;
};

struct EventStream {
    int32_t width = 0;
    int32_t height = 0;
    std::vector<EventPoint> points;  // non-decreasing in t

    bool operator==(const EventStream&) const = default;
};

// Throws OutOfBounds / NonMonotonicTime / MalformedFile on invalid content.
void validate_stream(const EventStream& stream);

// Dense stacked event frames, layout [T][C][H][W] row-major, C = 2
// (channel 0 counts +1 events, channel 1 counts -1 events).
struct FrameTensor {
    int64_t frames = 0;
    int64_t channels = 0;
    int64_t height = 0;
    int64_t width = 0;
    std::vector<float> data;

    float& at(int64_t t, int64_t c, int64_t y, int64_t x) {
        return data[((t * channels + c) * height + y) * width + x];
    }
    float at(int64_t t, int64_t c, int64_t y, int64_t x) const {
        return data[((t * channels + c) * height + y) * width + x];
    }
    double total_mass() const;
};

// Binary ".evst" container (see README for the byte layout) with a CSV
// fallback chosen by the ".csv" extension.
EventStream read_events(const std::string& path);
void write_events(const EventStream& stream, const std::string& path);

enum class BinMode { kTime, kCount };

// Splits the stream into `frame_count` bins and accumulates per-polarity
// counts. Time mode bins [t_min, t_max] uniformly (last bin closed on the
// right); count mode gives each bin an equal share of events.
FrameTensor stack_to_frames(const EventStream& stream, int64_t frame_count,
                            BinMode mode = BinMode::kTime);

enum class ResizeMode { kMean, kMass };

// Area-weighted (box filter) resampling per frame and channel. kMean keeps
// the average intensity, kMass keeps the total event mass.
FrameTensor resize_frames(const FrameTensor& frames, int64_t out_h, int64_t out_w,
                          ResizeMode mode = ResizeMode::kMean);

// Scales every frame of a sample by 1 / max entry (all-zero tensors stay
// zero), removing event-rate dependence before the encoder.
void normalize_per_sample(FrameTensor& frames);

// Synthetic scene: one moving-dot motif per sentence token, each vocabulary
// entry moving along its own trajectory, concatenated in time.
struct SynthSample {
    EventStream stream;
    std::vector<int> vocab_indices;  // positions into the vocabulary list
};

struct SynthOptions {
    int32_t sensor_width = 64;
    int32_t sensor_height = 64;
    int min_len = 2;
    int max_len = 6;
    int64_t token_duration_us = 40000;
};

SynthSample synth_scene(uint64_t seed, int vocab_size, const SynthOptions& opt);

}  // namespace evslt
