#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wsrl/errors.hpp"

namespace wsrl {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& shape);
int64_t shape_numel(const Shape& shape);

class Tensor;
struct TensorImpl;

// One recorded primitive operation. Nodes are owned by their output tensor and
// hold the inputs they need for the backward pass.
struct TapeNode {
  uint64_t sequence = 0;
  const char* op = "";
  TensorImpl* output = nullptr;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  // Receives d(loss)/d(output) and returns one gradient buffer per input
  // (empty for inputs that do not require grad).
  std::function<std::vector<std::vector<float>>(const std::vector<float>&)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  bool requires_grad = false;
  std::vector<float> grad;  // empty when absent
  std::shared_ptr<TapeNode> node;
};

// Dense row-major float32 array with optional autodiff linkage. Copies of a
// Tensor share storage; use clone() for a value copy.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, float value);
  static Tensor scalar(float value);
  static Tensor vector(std::vector<float> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<float>> rows);

  const Shape& shape() const { return impl_->shape; }
  int64_t dim() const { return static_cast<int64_t>(impl_->shape.size()); }
  int64_t size(int64_t axis) const;
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

  std::span<const float> data() const { return impl_->data; }
  // Direct write access; intended for leaves (parameter init, optimizers).
  std::span<float> mutable_data() { return impl_->data; }
  float item() const;
  float at(std::initializer_list<int64_t> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool value);
  bool is_leaf() const { return impl_->node == nullptr; }
  bool has_node() const { return impl_->node != nullptr; }

  bool has_grad() const { return !impl_->grad.empty(); }
  // Detached copy of the accumulated gradient; zeros when absent.
  Tensor grad() const;
  void zero_grad() { impl_->grad.clear(); }

  Tensor detach() const;
  Tensor clone() const;
  // Overwrites values in place (shapes must match); keeps identity and grad flag.
  void assign(const Tensor& other);

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  bool bit_equal(const Tensor& other) const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// ---- gradient mode ---------------------------------------------------------

bool grad_enabled();

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

struct NoGradGuard : GradModeGuard {
  NoGradGuard() : GradModeGuard(false) {}
};

template <typename F>
decltype(auto) grad_mode(bool enabled, F&& body) {
  GradModeGuard guard(enabled);
  return std::forward<F>(body)();
}

// ---- differentiation -------------------------------------------------------

// Accumulates d(loss)/d(leaf) into every reachable requires_grad leaf, visiting
// recorded operations in reverse recording order. The graph is released
// afterwards: intermediates become detached.
void backward(const Tensor& loss);

void zero_grad(std::span<Tensor> params);
void zero_grad(std::vector<Tensor>& params);

// ---- primitive operations --------------------------------------------------
//
// Elementwise binary ops accept identical shapes, a 0-d scalar against any
// shape, or a [B,1] column against [B,N].

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor mul_scalar(const Tensor& a, float s);
Tensor add_scalar(const Tensor& a, float s);

Tensor matmul(const Tensor& a, const Tensor& b);
// x [B,in] · w [in,out] + b [out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);

Tensor softmax(const Tensor& x);      // last axis
Tensor log_softmax(const Tensor& x);  // last axis

// Picks x[..., index[...]] along the last axis; index has x's shape minus the
// last axis and holds integral values.
Tensor gather(const Tensor& x, const Tensor& index);

Tensor concat(const std::vector<Tensor>& parts, int64_t axis);
Tensor stack(const std::vector<Tensor>& parts);  // new leading axis
Tensor select(const Tensor& x, int64_t index);   // drops the leading axis
Tensor slice(const Tensor& x, int64_t begin, int64_t end);  // leading axis
Tensor index_rows(const Tensor& x, const std::vector<int64_t>& rows);  // leading axis
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum_last(const Tensor& x);  // reduces the last axis

Tensor mse_loss(const Tensor& prediction, const Tensor& target);
// Mean over rows of -log softmax(logits)[target]; logits [N,C], target [N].
Tensor cross_entropy(const Tensor& logits, const Tensor& target);

// Not differentiable.
Tensor argmax_last(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(const Tensor& a, float s) { return mul_scalar(a, s); }
inline Tensor operator*(float s, const Tensor& a) { return mul_scalar(a, s); }

// Rounds a float-stored index and validates it against [0, extent).
int64_t to_index(float value, int64_t extent, const char* what);

}  // namespace wsrl
