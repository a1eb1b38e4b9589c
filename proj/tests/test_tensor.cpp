#include <doctest.h>

#include <cmath>

#include "support/grad_check.hpp"
#include "wsrl/optim.hpp"
#include "wsrl/tensor.hpp"

using namespace wsrl;

TEST_CASE("matmul with identity") {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor id = Tensor::matrix({{1, 0}, {0, 1}});
  CHECK(matmul(a, id).bit_equal(a));
}

TEST_CASE("softmax of equal logits is uniform") {
  Tensor s = softmax(Tensor::vector({0, 0}));
  CHECK(s.data()[0] == doctest::Approx(0.5));
  CHECK(s.data()[1] == doctest::Approx(0.5));
}

TEST_CASE("cross entropy of uniform logits is ln 2") {
  Tensor loss = cross_entropy(Tensor::matrix({{0, 0}}), Tensor::vector({0}));
  CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("shape errors name both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({3, 2});
  try {
    add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[2,3]") != std::string::npos);
    CHECK(std::string(e.what()).find("[3,2]") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(add(Tensor::zeros({2, 1}), Tensor::zeros({3, 4})), ShapeError);
  CHECK_THROWS_AS(add(Tensor::zeros({4}), Tensor::zeros({4, 1})), ShapeError);
}

TEST_CASE("gather index out of range reports the index") {
  Tensor x = Tensor::zeros({2, 3});
  try {
    gather(x, Tensor::vector({0, 3}));
    FAIL("expected IndexError");
  } catch (const IndexError& e) {
    CHECK(e.index() == 3);
  }
  CHECK_THROWS_AS(cross_entropy(x, Tensor::vector({-1, 0})), IndexError);
}

TEST_CASE("column broadcast against a matrix") {
  Tensor col = Tensor::matrix({{1}, {2}});
  Tensor m = Tensor::matrix({{1, 1, 1}, {1, 1, 1}});
  Tensor r = mul(col, m);
  CHECK(r.shape() == Shape{2, 3});
  CHECK(r.at({1, 2}) == 2.0f);
}

TEST_CASE("backward of sum is ones") {
  Tensor x = Tensor::vector({1, 2, 3}).set_requires_grad(true);
  backward(sum(x));
  CHECK(x.grad().bit_equal(Tensor::vector({1, 1, 1})));
}

TEST_CASE("backward of mse against zero") {
  Tensor x = Tensor::vector({2}).set_requires_grad(true);
  backward(mse_loss(x, Tensor::vector({0})));
  CHECK(x.grad().data()[0] == doctest::Approx(4.0));
}

TEST_CASE("backward errors") {
  Tensor x = Tensor::vector({1, 2}).set_requires_grad(true);
  CHECK_THROWS_AS(backward(mul_scalar(x, 2.0f)), NonScalarLossError);
  CHECK_THROWS_AS(backward(sum(Tensor::vector({1, 2}))), DetachedLossError);
  Tensor loss = sum(x);
  backward(loss);
  // The graph is released after one backward pass.
  CHECK_THROWS_AS(backward(loss), DetachedLossError);
}

TEST_CASE("gradients accumulate until zero_grad") {
  Tensor x = Tensor::vector({1, -2}).set_requires_grad(true);
  auto loss_fn = [&] { return sum(square(x)); };
  backward(loss_fn());
  const Tensor once = x.grad();
  backward(loss_fn());
  CHECK(x.grad().data()[0] == doctest::Approx(2 * once.data()[0]));

  std::vector<Tensor> params{x};
  zero_grad(params);
  CHECK_FALSE(x.has_grad());
  CHECK(x.grad().bit_equal(Tensor::zeros({2})));
  backward(loss_fn());
  CHECK(x.grad().bit_equal(once));

  Tensor untouched = Tensor::vector({5}).set_requires_grad(true);
  std::vector<Tensor> fresh{untouched};
  zero_grad(fresh);
  CHECK_FALSE(untouched.has_grad());
}

TEST_CASE("backward visits a shared subexpression once per use") {
  Tensor x = Tensor::scalar(3.0f).set_requires_grad(true);
  Tensor y = mul(x, x);
  backward(add(y, y));  // d/dx 2x^2 = 4x
  CHECK(x.grad().item() == doctest::Approx(12.0));
}

TEST_CASE("grad mode") {
  Tensor w = Tensor::matrix({{1, 2}, {3, 4}}).set_requires_grad(true);
  Tensor out = grad_mode(false, [&] { return matmul(w, w); });
  CHECK_FALSE(out.requires_grad());
  CHECK_THROWS_AS(backward(sum(out)), DetachedLossError);
  {
    NoGradGuard outer;
    {
      NoGradGuard inner;
      CHECK_FALSE(matmul(w, w).requires_grad());
    }
    CHECK_FALSE(grad_enabled());
    CHECK_FALSE(matmul(w, w).requires_grad());
  }
  CHECK(grad_enabled());
  CHECK(matmul(w, w).requires_grad());
}

TEST_CASE("optimizer steps") {
  SUBCASE("sgd") {
    Tensor p = Tensor::vector({1}).set_requires_grad(true);
    backward(sum(p));
    std::vector<Tensor> params{p};
    Optimizer::sgd(0.1f).step(params);
    CHECK(p.data()[0] == doctest::Approx(0.9));
  }
  SUBCASE("sgd with zero learning rate") {
    Tensor p = Tensor::vector({1, -3}).set_requires_grad(true);
    backward(sum(square(p)));
    std::vector<Tensor> params{p};
    Optimizer::sgd(0.0f).step(params);
    CHECK(p.bit_equal(Tensor::vector({1, -3})));
  }
  SUBCASE("adam first step") {
    // m = 0.1, v = 0.001; bias-corrected both are 1, so the step is lr * 1 / (1 + 1e-8).
    Tensor p = Tensor::vector({0.5f}).set_requires_grad(true);
    backward(sum(p));
    std::vector<Tensor> params{p};
    Optimizer opt = Optimizer::adam(1e-3f);
    opt.step(params);
    CHECK(p.data()[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
    CHECK(opt.step_count() == 1);
  }
  SUBCASE("missing grad") {
    Tensor p = Tensor::vector({1}).set_requires_grad(true);
    std::vector<Tensor> params{p};
    CHECK_THROWS_AS(Optimizer::adam(1e-3f).step(params), MissingGradError);
  }
}

TEST_CASE("finite differences for every primitive op") {
  std::mt19937_64 rng(1234);
  for (const auto& family : testing::op_families()) {
    CAPTURE(family.name);
    for (int i = 0; i < 20; ++i) {
      const auto report = testing::check_gradients(family.make(rng), 1000 + i);
      CHECK(report.max_rel_error < 1e-3);
      CHECK(report.max_forward_error < 1e-5);
    }
  }
}

TEST_CASE("two-layer tanh MLP gradient matches finite differences") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 5; ++i) {
    const auto report = testing::check_gradients(testing::mlp_case(rng), 7 + i);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("softmax rows sum to one and cross entropy is nonnegative") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    Tensor x = testing::random_tensor(rng, testing::random_shape(rng, 2, 2, 6), -5, 5);
    Tensor s = softmax(x);
    const int64_t rows = x.size(0), cols = x.size(1);
    for (int64_t r = 0; r < rows; ++r) {
      double total = 0;
      for (int64_t c = 0; c < cols; ++c) total += s.at({r, c});
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
    Tensor target = Tensor::zeros({rows});
    CHECK(cross_entropy(x, target).item() >= 0.0f);
  }
}

TEST_CASE("identical op sequences are bit-identical") {
  auto run = [] {
    std::mt19937_64 rng(42);
    auto c = testing::mlp_case(rng);
    return c.fn(c.inputs);
  };
  CHECK(run().bit_equal(run()));
}
