#include "wsrl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace wsrl {

namespace {

thread_local bool t_grad_enabled = true;
thread_local uint64_t t_sequence = 0;

using Grads = std::vector<std::vector<float>>;
using BackwardFn = std::function<Grads(const std::vector<float>&)>;

Tensor make(Shape shape, std::vector<float> data) { return Tensor(std::move(shape), std::move(data)); }

void record(Tensor& out, const char* op, std::initializer_list<Tensor> inputs, BackwardFn fn) {
  if (!t_grad_enabled) return;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return;
  auto node = std::make_shared<TapeNode>();
  node->sequence = ++t_sequence;
  node->op = op;
  node->output = out.impl().get();
  for (const auto& in : inputs) node->inputs.push_back(in.impl());
  node->backward = std::move(fn);
  out.impl()->requires_grad = true;
  out.impl()->node = std::move(node);
}

void record_many(Tensor& out, const char* op, const std::vector<Tensor>& inputs, BackwardFn fn) {
  if (!t_grad_enabled) return;
  bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return;
  auto node = std::make_shared<TapeNode>();
  node->sequence = ++t_sequence;
  node->op = op;
  node->output = out.impl().get();
  for (const auto& in : inputs) node->inputs.push_back(in.impl());
  node->backward = std::move(fn);
  out.impl()->requires_grad = true;
  out.impl()->node = std::move(node);
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

enum class Broadcast { kSame, kScalarA, kScalarB, kColumnA, kColumnB };

Broadcast classify(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::kSame;
  if (a.empty()) return Broadcast::kScalarA;
  if (b.empty()) return Broadcast::kScalarB;
  if (a.size() == 2 && b.size() == 2 && a[0] == b[0]) {
    if (a[1] == 1) return Broadcast::kColumnA;
    if (b[1] == 1) return Broadcast::kColumnB;
  }
  shape_mismatch(op, a, b);
}

struct BinaryLayout {
  Broadcast kind;
  Shape out_shape;
  int64_t columns = 1;

  int64_t ia(int64_t i) const {
    switch (kind) {
      case Broadcast::kScalarA: return 0;
      case Broadcast::kColumnA: return i / columns;
      default: return i;
    }
  }
  int64_t ib(int64_t i) const {
    switch (kind) {
      case Broadcast::kScalarB: return 0;
      case Broadcast::kColumnB: return i / columns;
      default: return i;
    }
  }
};

BinaryLayout layout_for(const char* op, const Tensor& a, const Tensor& b) {
  BinaryLayout l{classify(op, a.shape(), b.shape()), {}, 1};
  switch (l.kind) {
    case Broadcast::kSame:
    case Broadcast::kScalarB:
    case Broadcast::kColumnB: l.out_shape = a.shape(); break;
    default: l.out_shape = b.shape(); break;
  }
  if (l.out_shape.size() == 2) l.columns = l.out_shape[1];
  return l;
}

// Elementwise binary op with forward f(x,y) and partials dx(x,y), dy(x,y).
template <typename F, typename Dx, typename Dy>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, Dx dx, Dy dy) {
  BinaryLayout l = layout_for(op, a, b);
  const int64_t n = shape_numel(l.out_shape);
  std::vector<float> out(static_cast<size_t>(n));
  auto ad = a.data();
  auto bd = b.data();
  for (int64_t i = 0; i < n; ++i) out[i] = f(ad[l.ia(i)], bd[l.ib(i)]);
  Tensor result = make(l.out_shape, std::move(out));
  record(result, op, {a, b}, [a, b, l, n, dx, dy](const std::vector<float>& g) {
    Grads grads(2);
    auto ad = a.data();
    auto bd = b.data();
    if (a.requires_grad()) {
      grads[0].assign(ad.size(), 0.0f);
      for (int64_t i = 0; i < n; ++i) grads[0][l.ia(i)] += g[i] * dx(ad[l.ia(i)], bd[l.ib(i)]);
    }
    if (b.requires_grad()) {
      grads[1].assign(bd.size(), 0.0f);
      for (int64_t i = 0; i < n; ++i) grads[1][l.ib(i)] += g[i] * dy(ad[l.ia(i)], bd[l.ib(i)]);
    }
    return grads;
  });
  return result;
}

// Elementwise unary op; df receives (input, output).
template <typename F, typename Df>
Tensor unary(const char* op, const Tensor& x, F f, Df df) {
  auto xd = x.data();
  std::vector<float> out(xd.size());
  for (size_t i = 0; i < xd.size(); ++i) out[i] = f(xd[i]);
  Tensor result = make(x.shape(), std::move(out));
  // Output values are copied: the node must not keep its own output alive.
  std::vector<float> yv = result.impl()->data;
  record(result, op, {x}, [x, yv = std::move(yv), df](const std::vector<float>& g) {
    Grads grads(1);
    auto xd = x.data();
    grads[0].resize(xd.size());
    for (size_t i = 0; i < xd.size(); ++i) grads[0][i] = g[i] * df(xd[i], yv[i]);
    return grads;
  });
  return result;
}

int64_t last_extent(const char* op, const Tensor& x) {
  if (x.dim() < 1) throw ShapeError(std::string(op) + ": expected rank >= 1, got " + shape_str(x.shape()));
  return x.shape().back();
}

std::vector<float> softmax_rows(std::span<const float> x, int64_t cols) {
  std::vector<float> out(x.size());
  const int64_t rows = cols == 0 ? 0 : static_cast<int64_t>(x.size()) / cols;
  for (int64_t r = 0; r < rows; ++r) {
    const float* in = x.data() + r * cols;
    float* o = out.data() + r * cols;
    float m = -std::numeric_limits<float>::infinity();
    for (int64_t c = 0; c < cols; ++c) m = std::max(m, in[c]);
    float total = 0.0f;
    for (int64_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - m);
      total += o[c];
    }
    for (int64_t c = 0; c < cols; ++c) o[c] /= total;
  }
  return out;
}

std::vector<float> log_softmax_rows(std::span<const float> x, int64_t cols) {
  std::vector<float> out(x.size());
  const int64_t rows = cols == 0 ? 0 : static_cast<int64_t>(x.size()) / cols;
  for (int64_t r = 0; r < rows; ++r) {
    const float* in = x.data() + r * cols;
    float* o = out.data() + r * cols;
    float m = -std::numeric_limits<float>::infinity();
    for (int64_t c = 0; c < cols; ++c) m = std::max(m, in[c]);
    float total = 0.0f;
    for (int64_t c = 0; c < cols; ++c) total += std::exp(in[c] - m);
    const float lse = m + std::log(total);
    for (int64_t c = 0; c < cols; ++c) o[c] = in[c] - lse;
  }
  return out;
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return n;
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) { impl_->data.assign(1, 0.0f); }

Tensor::Tensor(Shape shape, std::vector<float> data) : impl_(std::make_shared<TensorImpl>()) {
  for (int64_t e : shape) {
    if (e < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
  }
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeError("shape " + shape_str(shape) + " does not match " + std::to_string(data.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0f); }
Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0f); }

Tensor Tensor::full(Shape shape, float value) {
  const int64_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<float>(static_cast<size_t>(std::max<int64_t>(n, 0)), value));
}

Tensor Tensor::scalar(float value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<float> values) {
  const auto n = static_cast<int64_t>(values.size());
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<float>> rows) {
  std::vector<float> data;
  int64_t cols = rows.size() ? static_cast<int64_t>(rows.begin()->size()) : 0;
  for (const auto& r : rows) {
    if (static_cast<int64_t>(r.size()) != cols) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({static_cast<int64_t>(rows.size()), cols}, std::move(data));
}

int64_t Tensor::size(int64_t axis) const {
  const int64_t d = dim();
  if (axis < 0) axis += d;
  if (axis < 0 || axis >= d) throw IndexError("axis out of range for shape " + shape_str(shape()), axis);
  return impl_->shape[static_cast<size_t>(axis)];
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

float Tensor::at(std::initializer_list<int64_t> index) const {
  if (static_cast<int64_t>(index.size()) != dim()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " vs shape " + shape_str(shape()));
  }
  int64_t offset = 0;
  size_t axis = 0;
  for (int64_t i : index) {
    const int64_t extent = impl_->shape[axis++];
    if (i < 0 || i >= extent) throw IndexError("index out of range: " + std::to_string(i), i);
    offset = offset * extent + i;
  }
  return impl_->data[static_cast<size_t>(offset)];
}

Tensor& Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw AutodiffError("requires_grad can only be changed on leaf tensors");
  impl_->requires_grad = value;
  return *this;
}

Tensor Tensor::grad() const {
  if (impl_->grad.empty()) return zeros(shape());
  return Tensor(shape(), impl_->grad);
}

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data); }

Tensor Tensor::clone() const {
  Tensor t(shape(), impl_->data);
  t.impl_->requires_grad = impl_->requires_grad;
  return t;
}

void Tensor::assign(const Tensor& other) {
  if (other.shape() != shape()) shape_mismatch("assign", shape(), other.shape());
  impl_->data = other.impl_->data;
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (shape() != other.shape()) return false;
  auto a = data();
  auto b = other.data();
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](float x, float y) {
    uint32_t ux, uy;
    std::memcpy(&ux, &x, 4);
    std::memcpy(&uy, &y, 4);
    return ux == uy;
  });
}

// ---- grad mode -------------------------------------------------------------

bool grad_enabled() { return t_grad_enabled; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(t_grad_enabled) { t_grad_enabled = enabled; }

GradModeGuard::~GradModeGuard() { t_grad_enabled = previous_; }

// ---- backward --------------------------------------------------------------

void backward(const Tensor& loss) {
  if (loss.numel() != 1) throw NonScalarLossError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) throw DetachedLossError("backward: loss is not attached to a tape");
  if (loss.is_leaf()) {
    auto& g = loss.impl()->grad;
    if (g.empty()) g.assign(1, 0.0f);
    g[0] += 1.0f;
    return;
  }

  std::vector<std::shared_ptr<TapeNode>> nodes;
  std::vector<TapeNode*> stack{loss.impl()->node.get()};
  std::unordered_map<TapeNode*, bool> seen{{loss.impl()->node.get(), true}};
  nodes.push_back(loss.impl()->node);
  while (!stack.empty()) {
    TapeNode* n = stack.back();
    stack.pop_back();
    for (const auto& in : n->inputs) {
      if (in->node && !seen[in->node.get()]) {
        seen[in->node.get()] = true;
        nodes.push_back(in->node);
        stack.push_back(in->node.get());
      }
    }
  }
  std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a->sequence > b->sequence; });

  std::unordered_map<TensorImpl*, std::vector<float>> pending;
  pending[loss.impl().get()] = {1.0f};
  for (const auto& node : nodes) {
    auto it = pending.find(node->output);
    if (it == pending.end()) continue;
    std::vector<float> gout = std::move(it->second);
    pending.erase(it);
    Grads gin = node->backward(gout);
    for (size_t k = 0; k < node->inputs.size(); ++k) {
      TensorImpl* in = node->inputs[k].get();
      if (!in->requires_grad || k >= gin.size() || gin[k].empty()) continue;
      std::vector<float>& target = in->node ? pending[in] : in->grad;
      if (target.empty()) {
        target = std::move(gin[k]);
      } else {
        for (size_t i = 0; i < target.size(); ++i) target[i] += gin[k][i];
      }
    }
  }

  for (const auto& node : nodes) {
    node->output->requires_grad = false;
    node->output->node.reset();
  }
}

void zero_grad(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

void zero_grad(std::vector<Tensor>& params) { zero_grad(std::span<Tensor>(params)); }

// ---- ops -------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](float x, float y) { return x + y; }, [](float, float) { return 1.0f; },
      [](float, float) { return 1.0f; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](float x, float y) { return x - y; }, [](float, float) { return 1.0f; },
      [](float, float) { return -1.0f; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](float x, float y) { return x * y; }, [](float, float y) { return y; },
      [](float x, float) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](float x, float y) { return x / y; }, [](float, float y) { return 1.0f / y; },
      [](float x, float y) { return -x / (y * y); });
}

Tensor neg(const Tensor& a) {
  return unary("neg", a, [](float x) { return -x; }, [](float, float) { return -1.0f; });
}

Tensor mul_scalar(const Tensor& a, float s) {
  return unary("mul_scalar", a, [s](float x) { return x * s; }, [s](float, float) { return s; });
}

Tensor add_scalar(const Tensor& a, float s) {
  return unary("add_scalar", a, [s](float x) { return x + s; }, [](float, float) { return 1.0f; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.size(1) != b.size(0)) shape_mismatch("matmul", a.shape(), b.shape());
  const int64_t m = a.size(0), k = a.size(1), n = b.size(1);
  std::vector<float> out(static_cast<size_t>(m * n), 0.0f);
  auto ad = a.data();
  auto bd = b.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const float av = ad[i * k + p];
      for (int64_t j = 0; j < n; ++j) out[i * n + j] += av * bd[p * n + j];
    }
  }
  Tensor result = make({m, n}, std::move(out));
  record(result, "matmul", {a, b}, [a, b, m, k, n](const std::vector<float>& g) {
    Grads grads(2);
    auto ad = a.data();
    auto bd = b.data();
    if (a.requires_grad()) {
      grads[0].assign(static_cast<size_t>(m * k), 0.0f);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
          float acc = 0.0f;
          for (int64_t j = 0; j < n; ++j) acc += g[i * n + j] * bd[p * n + j];
          grads[0][i * k + p] = acc;
        }
    }
    if (b.requires_grad()) {
      grads[1].assign(static_cast<size_t>(k * n), 0.0f);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
          const float av = ad[i * k + p];
          for (int64_t j = 0; j < n; ++j) grads[1][p * n + j] += av * g[i * n + j];
        }
    }
    return grads;
  });
  return result;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.dim() != 2 || w.dim() != 2 || x.size(1) != w.size(0)) shape_mismatch("linear", x.shape(), w.shape());
  if (b.dim() != 1 || b.size(0) != w.size(1)) shape_mismatch("linear(bias)", w.shape(), b.shape());
  const int64_t m = x.size(0), k = x.size(1), n = w.size(1);
  std::vector<float> out(static_cast<size_t>(m * n));
  auto xd = x.data();
  auto wd = w.data();
  auto bd = b.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) out[i * n + j] = bd[j];
    for (int64_t p = 0; p < k; ++p) {
      const float xv = xd[i * k + p];
      for (int64_t j = 0; j < n; ++j) out[i * n + j] += xv * wd[p * n + j];
    }
  }
  Tensor result = make({m, n}, std::move(out));
  record(result, "linear", {x, w, b}, [x, w, b, m, k, n](const std::vector<float>& g) {
    Grads grads(3);
    auto xd = x.data();
    auto wd = w.data();
    if (x.requires_grad()) {
      grads[0].assign(static_cast<size_t>(m * k), 0.0f);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
          float acc = 0.0f;
          for (int64_t j = 0; j < n; ++j) acc += g[i * n + j] * wd[p * n + j];
          grads[0][i * k + p] = acc;
        }
    }
    if (w.requires_grad()) {
      grads[1].assign(static_cast<size_t>(k * n), 0.0f);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
          const float xv = xd[i * k + p];
          for (int64_t j = 0; j < n; ++j) grads[1][p * n + j] += xv * g[i * n + j];
        }
    }
    if (b.requires_grad()) {
      grads[2].assign(static_cast<size_t>(n), 0.0f);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) grads[2][j] += g[i * n + j];
    }
    return grads;
  });
  return result;
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](float v) { return v > 0.0f ? v : 0.0f; }, [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor tanh(const Tensor& x) {
  return unary("tanh", x, [](float v) { return std::tanh(v); }, [](float, float y) { return 1.0f - y * y; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary("log", x, [](float v) { return std::log(v); }, [](float v, float) { return 1.0f / v; });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](float v) { return v * v; }, [](float v, float) { return 2.0f * v; });
}

Tensor softmax(const Tensor& x) {
  const int64_t cols = last_extent("softmax", x);
  std::vector<float> y = softmax_rows(x.data(), cols);
  Tensor result = make(x.shape(), y);
  record(result, "softmax", {x}, [y, cols](const std::vector<float>& g) {
    Grads grads(1);
    grads[0].resize(y.size());
    const size_t rows = cols == 0 ? 0 : y.size() / static_cast<size_t>(cols);
    for (size_t r = 0; r < rows; ++r) {
      float dot = 0.0f;
      for (int64_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
      for (int64_t c = 0; c < cols; ++c) grads[0][r * cols + c] = y[r * cols + c] * (g[r * cols + c] - dot);
    }
    return grads;
  });
  return result;
}

Tensor log_softmax(const Tensor& x) {
  const int64_t cols = last_extent("log_softmax", x);
  std::vector<float> y = log_softmax_rows(x.data(), cols);
  Tensor result = make(x.shape(), y);
  record(result, "log_softmax", {x}, [y, cols](const std::vector<float>& g) {
    Grads grads(1);
    grads[0].resize(y.size());
    const size_t rows = cols == 0 ? 0 : y.size() / static_cast<size_t>(cols);
    for (size_t r = 0; r < rows; ++r) {
      float total = 0.0f;
      for (int64_t c = 0; c < cols; ++c) total += g[r * cols + c];
      for (int64_t c = 0; c < cols; ++c) grads[0][r * cols + c] = g[r * cols + c] - std::exp(y[r * cols + c]) * total;
    }
    return grads;
  });
  return result;
}

int64_t to_index(float value, int64_t extent, const char* what) {
  const auto index = static_cast<int64_t>(std::llround(value));
  if (!std::isfinite(value) || index < 0 || index >= extent) {
    throw IndexError(std::string(what) + ": index " + std::to_string(index) + " out of range [0," +
                         std::to_string(extent) + ")",
                     index);
  }
  return index;
}

Tensor gather(const Tensor& x, const Tensor& index) {
  const int64_t cols = last_extent("gather", x);
  Shape expected(x.shape().begin(), x.shape().end() - 1);
  if (index.shape() != expected) shape_mismatch("gather", x.shape(), index.shape());
  const int64_t rows = index.numel();
  std::vector<int64_t> picks(static_cast<size_t>(rows));
  std::vector<float> out(static_cast<size_t>(rows));
  auto xd = x.data();
  auto id = index.data();
  for (int64_t r = 0; r < rows; ++r) {
    picks[r] = to_index(id[r], cols, "gather");
    out[r] = xd[r * cols + picks[r]];
  }
  Tensor result = make(expected, std::move(out));
  const auto total = static_cast<size_t>(x.numel());
  record(result, "gather", {x}, [picks, cols, total](const std::vector<float>& g) {
    Grads grads(1);
    grads[0].assign(total, 0.0f);
    for (size_t r = 0; r < picks.size(); ++r) grads[0][r * cols + picks[r]] += g[r];
    return grads;
  });
  return result;
}

Tensor concat(const std::vector<Tensor>& parts, int64_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const auto rank = static_cast<int64_t>(first.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw IndexError("concat: axis out of range for " + shape_str(first), axis);
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (static_cast<int64_t>(s.size()) != rank) shape_mismatch("concat", first, s);
    for (int64_t d = 0; d < rank; ++d) {
      if (d != axis && s[d] != first[d]) shape_mismatch("concat", first, s);
    }
    out_shape[axis] += s[axis];
  }
  int64_t outer = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= first[d];
  int64_t inner = 1;
  for (int64_t d = axis + 1; d < rank; ++d) inner *= first[d];
  std::vector<int64_t> widths;
  for (const auto& p : parts) widths.push_back(p.shape()[axis] * inner);
  const int64_t out_width = out_shape[axis] * inner;

  std::vector<float> out(static_cast<size_t>(shape_numel(out_shape)));
  int64_t offset = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    auto pd = parts[k].data();
    for (int64_t o = 0; o < outer; ++o) {
      std::copy_n(pd.data() + o * widths[k], widths[k], out.data() + o * out_width + offset);
    }
    offset += widths[k];
  }
  Tensor result = make(out_shape, std::move(out));
  record_many(result, "concat", parts, [widths, outer, out_width](const std::vector<float>& g) {
    Grads grads(widths.size());
    int64_t offset = 0;
    for (size_t k = 0; k < widths.size(); ++k) {
      grads[k].resize(static_cast<size_t>(outer * widths[k]));
      for (int64_t o = 0; o < outer; ++o) {
        std::copy_n(g.data() + o * out_width + offset, widths[k], grads[k].data() + o * widths[k]);
      }
      offset += widths[k];
    }
    return grads;
  });
  return result;
}

Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  std::vector<Tensor> expanded;
  expanded.reserve(parts.size());
  Shape unit{1};
  unit.insert(unit.end(), parts.front().shape().begin(), parts.front().shape().end());
  for (const auto& p : parts) {
    if (p.shape() != parts.front().shape()) shape_mismatch("stack", parts.front().shape(), p.shape());
    expanded.push_back(reshape(p, unit));
  }
  return concat(expanded, 0);
}

Tensor slice(const Tensor& x, int64_t begin, int64_t end) {
  if (x.dim() < 1) throw ShapeError("slice: expected rank >= 1, got " + shape_str(x.shape()));
  const int64_t extent = x.size(0);
  if (begin < 0 || begin > end || end > extent) {
    throw IndexError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") outside [0," +
                         std::to_string(extent) + ")",
                     begin < 0 || begin > extent ? begin : end);
  }
  const int64_t row = extent == 0 ? 0 : x.numel() / extent;
  Shape out_shape = x.shape();
  out_shape[0] = end - begin;
  auto xd = x.data();
  std::vector<float> out(xd.begin() + begin * row, xd.begin() + end * row);
  Tensor result = make(out_shape, std::move(out));
  const auto total = static_cast<size_t>(x.numel());
  record(result, "slice", {x}, [begin, row, total](const std::vector<float>& g) {
    Grads grads(1);
    grads[0].assign(total, 0.0f);
    std::copy(g.begin(), g.end(), grads[0].begin() + begin * row);
    return grads;
  });
  return result;
}

Tensor select(const Tensor& x, int64_t index) {
  if (x.dim() < 1) throw ShapeError("select: expected rank >= 1, got " + shape_str(x.shape()));
  if (index < 0 || index >= x.size(0)) throw IndexError("select: index " + std::to_string(index) + " out of range", index);
  Shape item(x.shape().begin() + 1, x.shape().end());
  return reshape(slice(x, index, index + 1), item);
}

Tensor index_rows(const Tensor& x, const std::vector<int64_t>& rows) {
  if (x.dim() < 1) throw ShapeError("index_rows: expected rank >= 1, got " + shape_str(x.shape()));
  const int64_t extent = x.size(0);
  const int64_t row = extent == 0 ? 0 : x.numel() / extent;
  for (int64_t r : rows) {
    if (r < 0 || r >= extent) throw IndexError("index_rows: index " + std::to_string(r) + " out of range", r);
  }
  Shape out_shape = x.shape();
  out_shape[0] = static_cast<int64_t>(rows.size());
  auto xd = x.data();
  std::vector<float> out;
  out.reserve(rows.size() * static_cast<size_t>(row));
  for (int64_t r : rows) out.insert(out.end(), xd.begin() + r * row, xd.begin() + (r + 1) * row);
  Tensor result = make(out_shape, std::move(out));
  const auto total = static_cast<size_t>(x.numel());
  record(result, "index_rows", {x}, [rows, row, total](const std::vector<float>& g) {
    Grads grads(1);
    grads[0].assign(total, 0.0f);
    for (size_t k = 0; k < rows.size(); ++k)
      for (int64_t j = 0; j < row; ++j) grads[0][rows[k] * row + j] += g[k * row + j];
    return grads;
  });
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) shape_mismatch("reshape", x.shape(), shape);
  auto xd = x.data();
  Tensor result = make(std::move(shape), std::vector<float>(xd.begin(), xd.end()));
  record(result, "reshape", {x}, [](const std::vector<float>& g) { return Grads{g}; });
  return result;
}

Tensor sum(const Tensor& x) {
  float total = 0.0f;
  for (float v : x.data()) total += v;
  Tensor result = Tensor::scalar(total);
  const auto n = static_cast<size_t>(x.numel());
  record(result, "sum", {x}, [n](const std::vector<float>& g) { return Grads{std::vector<float>(n, g[0])}; });
  return result;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean: empty tensor " + shape_str(x.shape()));
  float total = 0.0f;
  for (float v : x.data()) total += v;
  const auto n = static_cast<size_t>(x.numel());
  Tensor result = Tensor::scalar(total / static_cast<float>(n));
  record(result, "mean", {x}, [n](const std::vector<float>& g) {
    return Grads{std::vector<float>(n, g[0] / static_cast<float>(n))};
  });
  return result;
}

Tensor sum_last(const Tensor& x) {
  const int64_t cols = last_extent("sum_last", x);
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  const int64_t rows = shape_numel(out_shape);
  std::vector<float> out(static_cast<size_t>(rows), 0.0f);
  auto xd = x.data();
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) out[r] += xd[r * cols + c];
  Tensor result = make(out_shape, std::move(out));
  record(result, "sum_last", {x}, [rows, cols](const std::vector<float>& g) {
    Grads grads(1);
    grads[0].resize(static_cast<size_t>(rows * cols));
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) grads[0][r * cols + c] = g[r];
    return grads;
  });
  return result;
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) shape_mismatch("mse_loss", prediction.shape(), target.shape());
  return mean(square(sub(prediction, target)));
}

Tensor cross_entropy(const Tensor& logits, const Tensor& target) {
  if (logits.dim() != 2 || target.dim() != 1 || target.size(0) != logits.size(0)) {
    shape_mismatch("cross_entropy", logits.shape(), target.shape());
  }
  return neg(mean(gather(log_softmax(logits), target)));
}

Tensor argmax_last(const Tensor& x) {
  const int64_t cols = last_extent("argmax_last", x);
  if (cols == 0) throw ShapeError("argmax_last: empty last axis");
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  const int64_t rows = shape_numel(out_shape);
  std::vector<float> out(static_cast<size_t>(rows));
  auto xd = x.data();
  for (int64_t r = 0; r < rows; ++r) {
    int64_t best = 0;
    for (int64_t c = 1; c < cols; ++c) {
      if (xd[r * cols + c] > xd[r * cols + best]) best = c;
    }
    out[r] = static_cast<float>(best);
  }
  return make(out_shape, std::move(out));
}

}  // namespace wsrl
