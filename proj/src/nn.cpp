#include "wsrl/nn.hpp"

#include <cmath>

namespace wsrl::nn {

Tensor uniform(Shape shape, float bound, std::mt19937_64& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (float& v : t.mutable_data()) {
    const float u = static_cast<float>(rng() >> 40) / static_cast<float>(1 << 24);
    v = (2.0f * u - 1.0f) * bound;
  }
  return t;
}

Linear Linear::make(int64_t in, int64_t out, std::mt19937_64& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in));
  Linear l{uniform({in, out}, bound, rng), uniform({out}, bound, rng)};
  l.weight.set_requires_grad(true);
  l.bias.set_requires_grad(true);
  return l;
}

Mlp::Mlp(const std::vector<int64_t>& sizes, Activation activation, std::mt19937_64& rng) : activation_(activation) {
  if (sizes.size() < 2) throw ShapeError("Mlp needs at least input and output sizes");
  for (size_t i = 0; i + 1 < sizes.size(); ++i) layers_.push_back(Linear::make(sizes[i], sizes[i + 1], rng));
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size()) h = activation_ == Activation::kTanh ? tanh(h) : relu(h);
  }
  return h;
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

}  // namespace wsrl::nn
