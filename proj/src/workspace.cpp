#include "wsrl/workspace.hpp"

#include <algorithm>

namespace wsrl {

void validate_variable_name(const std::string& name) {
  if (name.empty()) throw WorkspaceError("variable name must be nonempty");
  if (name.front() == '/' || name.back() == '/' || name.find("//") != std::string::npos) {
    throw WorkspaceError("variable name '" + name + "' has an empty namespace segment");
  }
}

const Workspace::Series& Workspace::series(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw UnknownVariableError("unknown variable '" + name + "'");
  return it->second;
}

void Workspace::check_write(const std::string& name, const Shape& item, int64_t batch) const {
  validate_variable_name(name);
  if (batch_ && *batch_ != batch) {
    throw BatchMismatchError("variable '" + name + "': batch size " + std::to_string(batch) +
                             " does not match workspace batch size " + std::to_string(*batch_));
  }
  auto it = vars_.find(name);
  if (it != vars_.end() && it->second.item_shape != item) {
    throw ItemShapeMismatchError("variable '" + name + "': item shape " + shape_str(item) +
                                 " does not match earlier writes " + shape_str(it->second.item_shape));
  }
}

void Workspace::set(const std::string& name, int64_t t, const Tensor& value) {
  if (t < 0) throw RangeError("variable '" + name + "': negative timestep " + std::to_string(t));
  if (value.dim() < 1) throw ShapeError("variable '" + name + "': value needs a batch dimension, got [ ]");
  Shape item(value.shape().begin() + 1, value.shape().end());
  check_write(name, item, value.size(0));
  batch_ = value.size(0);
  Series& s = vars_[name];
  s.item_shape = std::move(item);
  if (static_cast<int64_t>(s.steps.size()) <= t) s.steps.resize(static_cast<size_t>(t + 1));
  s.steps[static_cast<size_t>(t)] = value;
}

Tensor Workspace::get(const std::string& name, int64_t t) const {
  const Series& s = series(name);
  if (t < 0 || t >= static_cast<int64_t>(s.steps.size()) || !s.steps[static_cast<size_t>(t)]) {
    throw UnwrittenTimestepError("variable '" + name + "' was not written at t=" + std::to_string(t), t);
  }
  return *s.steps[static_cast<size_t>(t)];
}

void Workspace::set_full(const std::string& name, const Tensor& value) {
  if (value.dim() < 2) {
    throw ShapeError("set_full '" + name + "': expected [T,B,...], got " + shape_str(value.shape()));
  }
  Shape item(value.shape().begin() + 2, value.shape().end());
  check_write(name, item, value.size(1));
  const int64_t steps = value.size(0);
  for (int64_t t = 0; t < steps; ++t) set(name, t, select(value, t));
}

Tensor Workspace::full(const std::string& name) const {
  const Series& s = series(name);
  std::vector<Tensor> parts;
  parts.reserve(s.steps.size());
  for (size_t t = 0; t < s.steps.size(); ++t) {
    if (!s.steps[t]) {
      throw UnwrittenTimestepError("variable '" + name + "' has a gap at t=" + std::to_string(t),
                                   static_cast<int64_t>(t));
    }
    parts.push_back(*s.steps[t]);
  }
  return stack(parts);
}

Workspace Workspace::subworkspace(std::span<const int64_t> batch_indices, int64_t t0, int64_t t1) const {
  const int64_t batch = batch_size();
  for (int64_t i : batch_indices) {
    if (i < 0 || i >= batch) {
      throw RangeError("subworkspace: batch index " + std::to_string(i) + " outside [0," + std::to_string(batch) + ")");
    }
  }
  if (t0 < 0 || t0 >= t1 || t1 > time_size()) {
    throw RangeError("subworkspace: window [" + std::to_string(t0) + "," + std::to_string(t1) +
                     ") invalid for time extent " + std::to_string(time_size()));
  }
  const std::vector<int64_t> rows(batch_indices.begin(), batch_indices.end());
  Workspace out;
  out.device_ = device_;
  NoGradGuard no_grad;
  for (const auto& [name, s] : vars_) {
    for (int64_t t = t0; t < t1; ++t) {
      if (t >= static_cast<int64_t>(s.steps.size()) || !s.steps[static_cast<size_t>(t)]) {
        throw UnwrittenTimestepError("subworkspace: variable '" + name + "' not written at t=" + std::to_string(t), t);
      }
      out.set(name, t - t0, index_rows(*s.steps[static_cast<size_t>(t)], rows).detach());
    }
  }
  if (out.vars_.empty()) out.batch_ = static_cast<int64_t>(rows.size());
  return out;
}

Workspace Workspace::last_steps(int64_t n) const {
  const int64_t total = time_size();
  if (n < 1 || n > total) {
    throw RangeError("last_steps: " + std::to_string(n) + " outside [1," + std::to_string(total) + "]");
  }
  std::vector<int64_t> rows(static_cast<size_t>(batch_size()));
  for (size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int64_t>(i);
  return subworkspace(rows, total - n, total);
}

Workspace Workspace::detach() const {
  Workspace out;
  out.device_ = device_;
  out.batch_ = batch_;
  for (const auto& [name, s] : vars_) {
    Series copy;
    copy.item_shape = s.item_shape;
    copy.steps.reserve(s.steps.size());
    for (const auto& step : s.steps) {
      copy.steps.push_back(step ? std::optional<Tensor>(step->detach()) : std::nullopt);
    }
    out.vars_.emplace(name, std::move(copy));
  }
  return out;
}

Workspace Workspace::to(const std::string& device) const {
  Workspace out = *this;
  out.device_ = device;
  return out;
}

Workspace Workspace::concat_batch(const std::vector<Workspace>& parts) {
  if (parts.empty()) return {};
  const Workspace& first = parts.front();
  const auto names = first.variables();
  for (const auto& p : parts) {
    if (p.variables() != names) throw WorkspaceError("concat_batch: variable sets differ");
  }
  Workspace out;
  out.device_ = first.device_;
  NoGradGuard no_grad;
  for (const auto& name : names) {
    const int64_t steps = first.time_size(name);
    for (const auto& p : parts) {
      if (p.time_size(name) != steps) throw WorkspaceError("concat_batch: time extents differ for '" + name + "'");
    }
    for (int64_t t = 0; t < steps; ++t) {
      std::vector<Tensor> rows;
      rows.reserve(parts.size());
      for (const auto& p : parts) rows.push_back(p.get(name, t));
      out.set(name, t, concat(rows, 0).detach());
    }
  }
  if (names.empty()) {
    int64_t batch = 0;
    for (const auto& p : parts) batch += p.batch_size();
    out.batch_ = batch;
  }
  return out;
}

bool Workspace::is_written(const std::string& name, int64_t t) const {
  auto it = vars_.find(name);
  if (it == vars_.end() || t < 0 || t >= static_cast<int64_t>(it->second.steps.size())) return false;
  return it->second.steps[static_cast<size_t>(t)].has_value();
}

std::vector<std::string> Workspace::variables() const {
  std::vector<std::string> names;
  names.reserve(vars_.size());
  for (const auto& [name, s] : vars_) names.push_back(name);
  return names;
}

int64_t Workspace::time_size(const std::string& name) const {
  return static_cast<int64_t>(series(name).steps.size());
}

int64_t Workspace::time_size() const {
  int64_t out = 0;
  for (const auto& [name, s] : vars_) out = std::max(out, static_cast<int64_t>(s.steps.size()));
  return out;
}

const Shape& Workspace::item_shape(const std::string& name) const { return series(name).item_shape; }

void Workspace::clear() {
  vars_.clear();
  batch_.reset();
}

bool Workspace::bit_equal(const Workspace& other) const {
  if (vars_.size() != other.vars_.size() || batch_size() != other.batch_size()) return false;
  for (const auto& [name, s] : vars_) {
    auto it = other.vars_.find(name);
    if (it == other.vars_.end()) return false;
    const Series& o = it->second;
    if (s.item_shape != o.item_shape || s.steps.size() != o.steps.size()) return false;
    for (size_t t = 0; t < s.steps.size(); ++t) {
      if (s.steps[t].has_value() != o.steps[t].has_value()) return false;
      if (s.steps[t] && !s.steps[t]->bit_equal(*o.steps[t])) return false;
    }
  }
  return true;
}

}  // namespace wsrl
