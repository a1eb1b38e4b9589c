#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wsrl/workspace.hpp"

namespace wsrl {

// Ring buffer of single-item trajectory windows of length L. Each stored
// window is a detached workspace [L, 1, ...]; sampling re-batches windows into
// a workspace [L, m, ...].
class ReplayBuffer {
 public:
  ReplayBuffer(int64_t capacity, int64_t window_length);

  // Inserts ws[b, o..o+L) for every item b and every start o in
  // {0, S, 2S, ...} with o + L <= T, items outer. Returns the number inserted.
  // Oldest windows are evicted first once the buffer is full.
  int64_t put(const Workspace& ws, int64_t stride = 1);
  // m windows drawn uniformly with replacement.
  Workspace sample(int64_t m, uint64_t seed) const;
  // Indices (oldest first) that sample(m, seed) draws.
  std::vector<int64_t> sample_indices(int64_t m, uint64_t seed) const;

  int64_t size() const { return static_cast<int64_t>(count_); }
  int64_t capacity() const { return capacity_; }
  int64_t window_length() const { return length_; }
  // i-th stored window, 0 being the oldest.
  const Workspace& window(int64_t i) const;
  // Every stored window, oldest first, as one workspace [L, size, ...].
  Workspace all() const;
  void clear();

  // Stored windows as a trajectory dataset, oldest first.
  void dump(const std::filesystem::path& path) const;
  static ReplayBuffer load(const std::filesystem::path& path, int64_t capacity);

 private:
  void insert(Workspace window);

  int64_t capacity_;
  int64_t length_;
  std::vector<Workspace> slots_;
  size_t head_ = 0;  // next slot to overwrite
  size_t count_ = 0;
  std::vector<std::string> names_;
  std::vector<Shape> shapes_;
};

}  // namespace wsrl
