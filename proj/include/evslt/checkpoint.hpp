#pragma once

// Binary parameter snapshots. A checkpoint stores every ParamStore entry by
// name plus the optimizer step counter; reloading into an identically
// initialized store restores training state bit for bit.

#include <cstdint>
#include <string>

#include "evslt/params.hpp"

namespace evslt {

// "EVCK", u16 version, then per record: u16 name length, name bytes,
// u16 rank, rank u32 dims, little-endian f32 values. A trailing rank-0
// "optim.step" record carries the step counter.
std::string serialize_checkpoint(const ParamStore& store, int64_t step);

// fills an identically initialized store by name and returns the stored
// step; unknown, duplicate, missing, or reshaped records are MalformedFile
int64_t parse_checkpoint(const std::string& bytes, ParamStore& store);

// writes to path + ".tmp" and renames so a crash never leaves a torn file
void save_checkpoint(const std::string& path, const ParamStore& store, int64_t step);

int64_t load_checkpoint(const std::string& path, ParamStore& store);

}  // namespace evslt
