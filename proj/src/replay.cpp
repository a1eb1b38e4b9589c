#include "wsrl/replay.hpp"

#include <random>

#include "wsrl/workspace_io.hpp"

namespace wsrl {

ReplayBuffer::ReplayBuffer(int64_t capacity, int64_t window_length) : capacity_(capacity), length_(window_length) {
  if (capacity < 1) throw RangeError("replay buffer capacity must be positive, got " + std::to_string(capacity));
  if (window_length < 1) throw RangeError("replay window length must be positive, got " + std::to_string(window_length));
}

int64_t ReplayBuffer::put(const Workspace& ws, int64_t stride) {
  if (stride < 1) throw RangeError("replay stride must be positive, got " + std::to_string(stride));
  if (ws.empty()) throw WorkspaceError("cannot store an empty workspace");
  const auto names = ws.variables();
  const int64_t steps = ws.time_size();
  std::vector<Shape> shapes;
  for (const auto& name : names) {
    if (ws.time_size(name) != steps) {
      throw WorkspaceError("variable '" + name + "' has time extent " + std::to_string(ws.time_size(name)) +
                           ", expected " + std::to_string(steps));
    }
    shapes.push_back(ws.item_shape(name));
  }
  if (steps < length_) {
    throw RangeError("time extent " + std::to_string(steps) + " is shorter than the window length " +
                     std::to_string(length_));
  }
  if (!names_.empty() && (names != names_ || shapes != shapes_)) {
    throw WorkspaceError("workspace variables do not match the buffer contents");
  }
  // Validates gap-freeness before anything is stored.
  for (const auto& name : names) ws.full(name);
  names_ = names;
  shapes_ = shapes;

  int64_t inserted = 0;
  for (int64_t b = 0; b < ws.batch_size(); ++b) {
    const int64_t row[] = {b};
    for (int64_t o = 0; o + length_ <= steps; o += stride) {
      insert(ws.subworkspace(row, o, o + length_));
      ++inserted;
    }
  }
  return inserted;
}

void ReplayBuffer::insert(Workspace window) {
  if (slots_.size() < static_cast<size_t>(capacity_)) {
    slots_.push_back(std::move(window));
  } else {
    slots_[head_] = std::move(window);
  }
  head_ = (head_ + 1) % static_cast<size_t>(capacity_);
  count_ = slots_.size();
}

const Workspace& ReplayBuffer::window(int64_t i) const {
  if (i < 0 || i >= size()) throw IndexError("replay window " + std::to_string(i) + " outside [0," + std::to_string(size()) + ")", i);
  const size_t oldest = count_ < static_cast<size_t>(capacity_) ? 0 : head_;
  return slots_[(oldest + static_cast<size_t>(i)) % count_];
}

std::vector<int64_t> ReplayBuffer::sample_indices(int64_t m, uint64_t seed) const {
  if (count_ == 0) throw RangeError("cannot sample from an empty replay buffer");
  if (m < 1) throw RangeError("sample size must be positive, got " + std::to_string(m));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int64_t> pick(0, size() - 1);
  std::vector<int64_t> out(static_cast<size_t>(m));
  for (auto& i : out) i = pick(rng);
  return out;
}

Workspace ReplayBuffer::sample(int64_t m, uint64_t seed) const {
  std::vector<Workspace> parts;
  for (int64_t i : sample_indices(m, seed)) parts.push_back(window(i));
  return Workspace::concat_batch(parts);
}

Workspace ReplayBuffer::all() const {
  if (count_ == 0) throw RangeError("replay buffer is empty");
  std::vector<Workspace> parts;
  for (int64_t i = 0; i < size(); ++i) parts.push_back(window(i));
  return Workspace::concat_batch(parts);
}

void ReplayBuffer::clear() {
  slots_.clear();
  head_ = 0;
  count_ = 0;
  names_.clear();
  shapes_.clear();
}

void ReplayBuffer::dump(const std::filesystem::path& path) const {
  std::vector<Workspace> windows;
  for (int64_t i = 0; i < size(); ++i) windows.push_back(window(i));
  save_dataset(path, windows);
}

ReplayBuffer ReplayBuffer::load(const std::filesystem::path& path, int64_t capacity) {
  const auto dataset = TrajectoryDataset::load(path);
  if (dataset.size() == 0) throw FormatError("dataset holds no windows");
  const Workspace first = dataset.read_workspace(0);
  ReplayBuffer rb(capacity, first.time_size());
  for (size_t i = 0; i < dataset.size(); ++i) {
    const Workspace w = dataset.read_workspace(i);
    if (w.batch_size() != 1 || w.time_size() != rb.length_) {
      throw FormatError("dataset record " + std::to_string(i) + " is not a window of length " +
                        std::to_string(rb.length_) + " and batch 1");
    }
    rb.put(w, rb.length_);
  }
  return rb;
}

}  // namespace wsrl
