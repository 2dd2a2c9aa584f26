#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "seqac/params.hpp"
#include "seqac/vocab.hpp"

namespace seqac {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kCheckpointVersion = 1;

/// Everything needed to resume or evaluate a run.
///
/// File layout, integers as 64-bit little-endian:
///   "SEQC" | version | config length | config text | token count |
///   (token length | token bytes)* | tensor count |
///   (name length | name | rank | dims* | f64 LE values*)*
struct Checkpoint {
  std::string config;  // key=value snapshot
  Vocab vocab;
  NamedTensors tensors;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

/// Writes through a temporary file and rename, so a crash never leaves a torn checkpoint.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Human-readable listing: version, vocabulary size, tensors with shapes.
std::string describe_checkpoint(const Checkpoint& ckpt);

}  // namespace seqac
