#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "wsrl/tensor.hpp"

namespace wsrl::nn {

// Uniform in [-bound, bound), drawn from the top 24 bits of each sample.
Tensor uniform(Shape shape, float bound, std::mt19937_64& rng);

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Linear make(int64_t in, int64_t out, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  std::vector<Tensor> parameters() const { return {weight, bias}; }
};

enum class Activation { kTanh, kRelu };

// Stack of Linear layers with an activation between them (not after the last).
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int64_t>& sizes, Activation activation, std::mt19937_64& rng);

  Tensor operator()(const Tensor& x) const;
  std::vector<Tensor> parameters() const;
  const std::vector<Linear>& layers() const { return layers_; }
  int64_t output_size() const { return layers_.back().bias.size(0); }

 private:
  std::vector<Linear> layers_;
  Activation activation_ = Activation::kTanh;
};

}  // namespace wsrl::nn
