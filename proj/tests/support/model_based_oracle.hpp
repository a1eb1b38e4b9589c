#pragma once

// Double-precision reference for the unrolled linear environment driven by a
// linear policy a_t = s_t · W:
//   s_{t+1} = s_t · A + a_t · B,  loss = sum_{t>=1} sum_b ||s_t||^2
// (the negated sum of env/reward). Used as the finite-difference oracle.

#include <vector>

#include "wsrl/tensor.hpp"

namespace wsrl::testing {

struct LinearSystem {
  int64_t d = 0, k = 0, batch = 0, steps = 0;
  std::vector<double> a, b, w, s0;  // row-major [d,d], [k,d], [d,k], [batch,d]
};

inline std::vector<double> as_doubles(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline double rollout_loss(const LinearSystem& m) {
  std::vector<double> s = m.s0;
  double loss = 0.0;
  for (int64_t t = 1; t < m.steps; ++t) {
    std::vector<double> next(static_cast<size_t>(m.batch * m.d), 0.0);
    for (int64_t r = 0; r < m.batch; ++r) {
      std::vector<double> act(static_cast<size_t>(m.k), 0.0);
      for (int64_t j = 0; j < m.k; ++j)
        for (int64_t i = 0; i < m.d; ++i) act[j] += s[r * m.d + i] * m.w[i * m.k + j];
      for (int64_t c = 0; c < m.d; ++c) {
        double v = 0.0;
        for (int64_t i = 0; i < m.d; ++i) v += s[r * m.d + i] * m.a[i * m.d + c];
        for (int64_t j = 0; j < m.k; ++j) v += act[j] * m.b[j * m.d + c];
        next[r * m.d + c] = v;
        loss += v * v;
      }
    }
    s = std::move(next);
  }
  return loss;
}

// Central differences of rollout_loss with respect to every entry of m.w.
inline std::vector<double> policy_gradient_fd(LinearSystem m, double h = 1e-3) {
  std::vector<double> g(m.w.size());
  for (size_t i = 0; i < m.w.size(); ++i) {
    const double keep = m.w[i];
    m.w[i] = keep + h;
    const double up = rollout_loss(m);
    m.w[i] = keep - h;
    const double down = rollout_loss(m);
    m.w[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace wsrl::testing
