#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedproto/param_vector.hpp"

namespace fedproto {

/// Named flat f64 record appended after the model parameters in a checkpoint
/// file. Used for optimizer state ("m", "v", "step") so runs can resume.
struct CheckpointRecord {
  std::string name;
  std::vector<double> data;
  bool operator==(const CheckpointRecord&) const = default;
};

struct CheckpointFile {
  ParamVector params;
  std::vector<CheckpointRecord> extra;
  bool operator==(const CheckpointFile&) const = default;
};

// Binary layout: magic "FPSV", format version u16, segment count u32,
// per segment (name length u32, UTF-8 bytes, length u64), then the values as
// little-endian IEEE-754 f64. Optional trailing records follow until EOF,
// each as (name length u32, bytes, count u64, f64 data).
inline constexpr std::uint16_t kCheckpointVersion = 1;

void write_checkpoint(const std::string& path, const CheckpointFile& file);
CheckpointFile read_checkpoint(const std::string& path);

}  // namespace fedproto
