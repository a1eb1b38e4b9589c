#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "wsrl/tensor.hpp"

namespace wsrl {

enum class OptimizerKind { kSgd, kAdam };

// SGD or bias-corrected Adam over an explicit parameter list. Moment buffers
// are keyed by parameter storage.
class Optimizer {
 public:
  static Optimizer sgd(float learning_rate);
  static Optimizer adam(float learning_rate, float beta1 = 0.9f, float beta2 = 0.999f, float epsilon = 1e-8f);

  // Throws MissingGradError if any parameter has no gradient.
  void step(std::vector<Tensor>& params);

  OptimizerKind kind() const { return kind_; }
  float learning_rate() const { return lr_; }
  void set_learning_rate(float lr) { lr_ = lr; }
  int64_t step_count() const { return steps_; }

 private:
  struct Moments {
    std::vector<float> first;
    std::vector<float> second;
  };

  OptimizerKind kind_ = OptimizerKind::kSgd;
  float lr_ = 0.0f;
  float beta1_ = 0.9f;
  float beta2_ = 0.999f;
  float epsilon_ = 1e-8f;
  int64_t steps_ = 0;
  std::unordered_map<const TensorImpl*, Moments> moments_;
};

// Rescales gradients so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
float clip_grad_norm(std::vector<Tensor>& params, float max_norm);

}  // namespace wsrl
