#pragma once

#include <random>
#include <string>
#include <vector>

#include "wsrl/workspace.hpp"

namespace wsrl::testing {

inline std::string random_name(std::mt19937_64& rng) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz_0123456789";
  std::uniform_int_distribution<int> segments(1, 3), length(1, 8);
  std::uniform_int_distribution<size_t> pick(0, alphabet.size() - 1);
  std::string name;
  const int n = segments(rng);
  for (int s = 0; s < n; ++s) {
    if (s > 0) name += '/';
    const int len = length(rng);
    for (int i = 0; i < len; ++i) name += alphabet[pick(rng)];
  }
  return name;
}

// Gap-free workspace: up to 5 variables, T <= 16, B <= 8, item rank <= 3.
// Payloads include negative zero and subnormals so bit-exactness is tested.
inline Workspace random_workspace(std::mt19937_64& rng) {
  Workspace ws;
  std::uniform_int_distribution<int64_t> batch(1, 8), steps(1, 16), extent(1, 4);
  std::uniform_int_distribution<int> vars(0, 5), rank(0, 3), special(0, 30);
  std::normal_distribution<float> value(0.0f, 10.0f);
  const int64_t b = batch(rng);
  const int n = vars(rng);
  for (int v = 0; v < n; ++v) {
    const std::string name = random_name(rng);
    if (ws.has(name)) continue;
    Shape shape{steps(rng), b};
    const int r = rank(rng);
    for (int i = 0; i < r; ++i) shape.push_back(extent(rng));
    Tensor x = Tensor::zeros(shape);
    for (float& f : x.mutable_data()) {
      switch (special(rng)) {
        case 0: f = -0.0f; break;
        case 1: f = 1e-42f; break;
        default: f = value(rng);
      }
    }
    ws.set_full(name, x);
  }
  return ws;
}

}  // namespace wsrl::testing
