#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "exgrg/matrix.hpp"

namespace exgrg {

struct NamedMatrix {
  std::string name;
  Matrix value;
};

/// Binary layout (little-endian): magic "EXGRG01\0", u64 config length,
/// config text, u64 iteration, u64 entry count, then per entry u64 name
/// length, name, u64 rows, u64 cols, rows*cols IEEE-754 doubles.
struct Checkpoint {
  std::string config_text;
  std::uint64_t iteration = 0;
  std::vector<NamedMatrix> entries;
};

/// Writes atomically through a temporary file in the same directory.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws DataError on a wrong magic/version or a truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace exgrg
