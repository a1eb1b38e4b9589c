#include "wsrl/optim.hpp"

#include <cmath>

namespace wsrl {

Optimizer Optimizer::sgd(float learning_rate) {
  Optimizer opt;
  opt.kind_ = OptimizerKind::kSgd;
  opt.lr_ = learning_rate;
  return opt;
}

Optimizer Optimizer::adam(float learning_rate, float beta1, float beta2, float epsilon) {
  Optimizer opt;
  opt.kind_ = OptimizerKind::kAdam;
  opt.lr_ = learning_rate;
  opt.beta1_ = beta1;
  opt.beta2_ = beta2;
  opt.epsilon_ = epsilon;
  return opt;
}

void Optimizer::step(std::vector<Tensor>& params) {
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw MissingGradError("optimizer step: parameter " + std::to_string(i) + " of shape " +
                             shape_str(params[i].shape()) + " has no gradient");
    }
  }
  ++steps_;
  if (kind_ == OptimizerKind::kSgd) {
    for (auto& p : params) {
      const auto& g = p.impl()->grad;
      auto w = p.mutable_data();
      for (size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * g[i];
    }
    return;
  }
  const double correction1 = 1.0 - std::pow(static_cast<double>(beta1_), static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(static_cast<double>(beta2_), static_cast<double>(steps_));
  for (auto& p : params) {
    const auto& g = p.impl()->grad;
    auto w = p.mutable_data();
    Moments& m = moments_[p.impl().get()];
    if (m.first.size() != w.size()) {
      m.first.assign(w.size(), 0.0f);
      m.second.assign(w.size(), 0.0f);
    }
    for (size_t i = 0; i < w.size(); ++i) {
      m.first[i] = beta1_ * m.first[i] + (1.0f - beta1_) * g[i];
      m.second[i] = beta2_ * m.second[i] + (1.0f - beta2_) * g[i] * g[i];
      const auto m_hat = static_cast<float>(m.first[i] / correction1);
      const auto v_hat = static_cast<float>(m.second[i] / correction2);
      w[i] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

float clip_grad_norm(std::vector<Tensor>& params, float max_norm) {
  double total = 0.0;
  for (const auto& p : params) {
    for (float g : p.impl()->grad) total += static_cast<double>(g) * g;
  }
  const auto norm = static_cast<float>(std::sqrt(total));
  if (norm > max_norm && norm > 0.0f) {
    const float scale = max_norm / norm;
    for (auto& p : params) {
      for (float& g : p.impl()->grad) g *= scale;
    }
  }
  return norm;
}

}  // namespace wsrl
