#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "rmn/config.hpp"
#include "rmn/model.hpp"

namespace rmn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout, little-endian:
//   "RMNCKPT\0" | u32 version | u32 header bytes | header (key=value lines)
//   | u64 vocabulary hash | u32 entry count
//   | per entry: u32 name bytes | name | u64 rows | u64 cols | rows*cols f64 (row-major)
struct Checkpoint {
  RunConfig config;
  int epochs_completed = 0;
  std::uint64_t vocab_hash = 0;
};

void save_checkpoint(std::ostream& out, const ModelStack& model, const Checkpoint& meta);
std::string checkpoint_bytes(const ModelStack& model, const Checkpoint& meta);

struct LoadedCheckpoint {
  Checkpoint meta;
  ModelStack model;
};

// Rebuilds the architecture from the header and verifies that every stored
// entry matches it by name and shape.
LoadedCheckpoint load_checkpoint(std::istream& in);

}  // namespace rmn
