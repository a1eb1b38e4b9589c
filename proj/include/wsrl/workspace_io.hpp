#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "wsrl/workspace.hpp"

namespace wsrl {

// Workspace record ("WSPC", version 1), little-endian:
//   magic[4] | version u16 | var_count u32 |
//   per variable: name_len u16, name, T u32, B u32, rank u8, extents u32 x rank,
//                 float32 payload laid out [T, B, extents...]
//   | crc32 u32 over every byte between the version field and the trailer.
//
// Trajectory dataset ("WSDS", version 1): magic[4] | version u16 | count u32 |
// count concatenated workspace records.

inline constexpr uint16_t kWorkspaceFormatVersion = 1;
inline constexpr uint16_t kDatasetFormatVersion = 1;

// Variables must be gap-free.
std::vector<uint8_t> serialize(const Workspace& ws);
Workspace deserialize(std::span<const uint8_t> bytes);
// Parses one record from the front of `bytes`; `consumed` receives its length.
Workspace deserialize_prefix(std::span<const uint8_t> bytes, size_t& consumed);

void save_workspace(const std::filesystem::path& path, const Workspace& ws);
Workspace load_workspace(const std::filesystem::path& path);

std::vector<uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes);

// A serialized collection of workspaces; records are decoded on demand.
class TrajectoryDataset {
 public:
  TrajectoryDataset() = default;
  static TrajectoryDataset from_bytes(std::vector<uint8_t> bytes);
  static TrajectoryDataset load(const std::filesystem::path& path);

  size_t size() const { return offsets_.size(); }
  Workspace read_workspace(size_t index) const;
  std::vector<Workspace> read_all() const;

 private:
  std::vector<uint8_t> bytes_;
  std::vector<std::pair<size_t, size_t>> offsets_;  // (begin, length)
};

std::vector<uint8_t> serialize_dataset(std::span<const Workspace> workspaces);
void save_dataset(const std::filesystem::path& path, std::span<const Workspace> workspaces);

// True when the file starts with the dataset magic.
bool is_dataset_file(std::span<const uint8_t> bytes);

}  // namespace wsrl
