#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsrl/tensor.hpp"

namespace wsrl {

// The blackboard shared by agents: variable name -> time-indexed series of
// [B, ...] tensors. All variables share one batch size B, fixed by the first
// write. Reading a slot that was never written is an error.
class Workspace {
 public:
  Workspace() = default;

  void set(const std::string& name, int64_t t, const Tensor& value);
  // Returns the stored tensor itself; autodiff linkage is preserved.
  Tensor get(const std::string& name, int64_t t) const;

  // value is [T, B, ...]; all T slots are validated before any is written.
  void set_full(const std::string& name, const Tensor& value);
  // Time-major stack [T, B, ...] of a gap-free variable.
  Tensor full(const std::string& name) const;
  Tensor operator[](const std::string& name) const { return full(name); }

  // Detached deep copy of rows `batch_indices` over timesteps [t0, t1).
  Workspace subworkspace(std::span<const int64_t> batch_indices, int64_t t0, int64_t t1) const;
  // Detached copy of the last n timesteps of every variable, all rows.
  Workspace last_steps(int64_t n) const;
  Workspace detach() const;
  // Metadata-only: storage is always host memory.
  Workspace to(const std::string& device) const;
  const std::string& device() const { return device_; }

  // Concatenates workspaces with identical variables and time extents along
  // the batch axis.
  static Workspace concat_batch(const std::vector<Workspace>& parts);

  bool empty() const { return vars_.empty(); }
  bool has(const std::string& name) const { return vars_.count(name) != 0; }
  bool is_written(const std::string& name, int64_t t) const;
  std::vector<std::string> variables() const;
  int64_t time_size(const std::string& name) const;
  // Largest time extent over all variables; 0 when empty.
  int64_t time_size() const;
  // 0 when nothing has been written.
  int64_t batch_size() const { return batch_.value_or(0); }
  const Shape& item_shape(const std::string& name) const;
  void clear();

  bool bit_equal(const Workspace& other) const;

 private:
  struct Series {
    Shape item_shape;
    std::vector<std::optional<Tensor>> steps;
  };

  const Series& series(const std::string& name) const;
  void check_write(const std::string& name, const Shape& item, int64_t batch) const;

  std::map<std::string, Series> vars_;
  std::optional<int64_t> batch_;
  std::string device_ = "cpu";
};

// Nonempty, '/'-separated segments, none empty.
void validate_variable_name(const std::string& name);

}  // namespace wsrl
