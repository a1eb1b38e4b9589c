#include <doctest.h>

#include <filesystem>
#include <random>

#include "support/fuzz.hpp"
#include "wsrl/errors.hpp"
#include "wsrl/workspace.hpp"
#include "wsrl/workspace_io.hpp"

using namespace wsrl;

namespace {

Tensor iota(Shape shape, float start = 0.0f) {
  Tensor t = Tensor::zeros(std::move(shape));
  float v = start;
  for (float& f : t.mutable_data()) f = v++;
  return t;
}

}  // namespace

TEST_CASE("set at t=5 grows the time axis to 6") {
  Workspace ws;
  for (int64_t t = 0; t <= 5; ++t) ws.set("x", t, iota({4, 3}, static_cast<float>(t)));
  CHECK(ws.full("x").shape() == Shape{6, 4, 3});
  CHECK(ws["x"].shape() == Shape{6, 4, 3});
  CHECK(ws.time_size("x") == 6);
}

TEST_CASE("set overwrites and get aliases") {
  Workspace ws;
  ws.set("x", 0, iota({4, 3}));
  Tensor second = iota({4, 3}, 100);
  ws.set("x", 0, second);
  CHECK(ws.get("x", 0).same_storage(second));
}

TEST_CASE("batch and item shape are enforced") {
  Workspace ws;
  ws.set("x", 0, Tensor::zeros({4, 3}));
  CHECK_THROWS_AS(ws.set("y", 0, Tensor::zeros({5, 2})), BatchMismatchError);
  CHECK_THROWS_AS(ws.set("x", 1, Tensor::zeros({4, 2})), ItemShapeMismatchError);
  CHECK_THROWS_AS(ws.set_full("z", Tensor::zeros({3, 5, 2})), BatchMismatchError);
  CHECK_THROWS_AS(ws.set("x", -1, Tensor::zeros({4, 3})), RangeError);
  CHECK_THROWS_AS(ws.set("", 0, Tensor::zeros({4, 3})), WorkspaceError);
  CHECK_THROWS_AS(ws.set("a//b", 0, Tensor::zeros({4, 3})), WorkspaceError);
  CHECK_FALSE(ws.has("z"));
}

TEST_CASE("reading unwritten slots") {
  Workspace ws;
  ws.set("x", 0, Tensor::zeros({2}));
  ws.set("x", 1, Tensor::zeros({2}));
  CHECK_THROWS_AS(ws.get("nope", 0), UnknownVariableError);
  try {
    ws.get("x", 2);
    FAIL("expected UnwrittenTimestepError");
  } catch (const UnwrittenTimestepError& e) {
    CHECK(e.timestep() == 2);
  }
  ws.set("gap", 0, Tensor::zeros({2}));
  ws.set("gap", 2, Tensor::zeros({2}));
  try {
    ws.full("gap");
    FAIL("expected UnwrittenTimestepError");
  } catch (const UnwrittenTimestepError& e) {
    CHECK(e.timestep() == 1);
  }
  CHECK_THROWS_AS(ws.full("nope"), UnknownVariableError);
}

TEST_CASE("set_full and get agree") {
  Workspace ws;
  Tensor loss = iota({12, 4, 6});
  ws.set_full("loss", loss);
  CHECK(ws.get("loss", 3).bit_equal(select(loss, 3)));
  CHECK(ws.time_size("loss") == 12);
  ws.set_full("z", iota({3, 4, 5}));
  CHECK(ws.time_size("z") == 3);
  ws.set("single", 0, Tensor::zeros({4}));
  CHECK(ws.full("single").shape() == Shape{1, 4});
}

TEST_CASE("full and get agree on fuzzed workspaces") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    Workspace ws = testing::random_workspace(rng);
    for (const auto& name : ws.variables()) {
      const Tensor f = ws.full(name);
      for (int64_t t = 0; t < ws.time_size(name); ++t) CHECK(select(f, t).bit_equal(ws.get(name, t)));
    }
  }
}

TEST_CASE("subworkspace") {
  Workspace ws;
  Tensor x = iota({10, 4, 3});
  ws.set_full("x", x);

  SUBCASE("identity window is a detached copy") {
    const std::vector<int64_t> all{0, 1, 2, 3};
    Workspace copy = ws.subworkspace(all, 0, 10);
    CHECK(copy.bit_equal(ws));
    CHECK_FALSE(copy.get("x", 0).same_storage(ws.get("x", 0)));
  }
  SUBCASE("shape arithmetic and values") {
    const std::vector<int64_t> idx{1};
    Workspace sub = ws.subworkspace(idx, 2, 4);
    const Tensor s = sub.full("x");
    CHECK(s.shape() == Shape{2, 1, 3});
    for (int64_t t = 0; t < 2; ++t)
      for (int64_t c = 0; c < 3; ++c) CHECK(s.at({t, 0, c}) == x.at({t + 2, 1, c}));
  }
  SUBCASE("errors") {
    const std::vector<int64_t> bad{4};
    const std::vector<int64_t> ok{0};
    CHECK_THROWS_AS(ws.subworkspace(bad, 0, 1), RangeError);
    CHECK_THROWS_AS(ws.subworkspace(ok, 3, 3), RangeError);
    CHECK_THROWS_AS(ws.subworkspace(ok, 0, 11), RangeError);
  }
}

TEST_CASE("subworkspace composes") {
  std::mt19937_64 rng(3);
  int checked = 0;
  for (int i = 0; i < 100; ++i) {
    Workspace ws = testing::random_workspace(rng);
    if (ws.empty()) continue;
    int64_t horizon = ws.time_size();
    for (const auto& v : ws.variables()) horizon = std::min(horizon, ws.time_size(v));
    const int64_t b = ws.batch_size();
    std::uniform_int_distribution<int64_t> row(0, b - 1);
    std::vector<int64_t> outer(static_cast<size_t>(row(rng) + 1));
    for (auto& r : outer) r = row(rng);
    const int64_t a = std::uniform_int_distribution<int64_t>(0, horizon - 1)(rng);
    const int64_t e = std::uniform_int_distribution<int64_t>(a + 1, horizon)(rng);
    std::uniform_int_distribution<int64_t> inner_row(0, static_cast<int64_t>(outer.size()) - 1);
    std::vector<int64_t> inner(static_cast<size_t>(inner_row(rng) + 1));
    for (auto& r : inner) r = inner_row(rng);
    const int64_t c = std::uniform_int_distribution<int64_t>(0, e - a - 1)(rng);
    const int64_t d = std::uniform_int_distribution<int64_t>(c + 1, e - a)(rng);

    std::vector<int64_t> composed;
    for (auto j : inner) composed.push_back(outer[static_cast<size_t>(j)]);
    const Workspace lhs = ws.subworkspace(outer, a, e).subworkspace(inner, c, d);
    const Workspace rhs = ws.subworkspace(composed, a + c, a + d);
    CHECK(lhs.bit_equal(rhs));
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("detach") {
  Tensor w = Tensor::vector({1, 2}).set_requires_grad(true);
  Workspace ws;
  ws.set("x", 0, mul_scalar(w, 3.0f));
  Workspace d = ws.detach();
  CHECK(d.bit_equal(ws));
  CHECK_FALSE(d.get("x", 0).requires_grad());
  CHECK_THROWS_AS(backward(sum(d.get("x", 0))), DetachedLossError);
  CHECK(Workspace().detach().empty());
}

TEST_CASE("device tag is metadata") {
  Workspace ws;
  ws.set("x", 0, Tensor::zeros({1}));
  CHECK(ws.device() == "cpu");
  Workspace moved = ws.to("cuda:0");
  CHECK(moved.device() == "cuda:0");
  CHECK(moved.bit_equal(ws));
}

TEST_CASE("serialization round trip") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100; ++i) {
    Workspace ws = testing::random_workspace(rng);
    const Workspace back = deserialize(serialize(ws));
    CHECK(back.bit_equal(ws));
  }
  CHECK(deserialize(serialize(Workspace())).empty());
}

TEST_CASE("serialization errors") {
  Workspace ws;
  ws.set_full("x", iota({2, 3, 2}));
  const auto bytes = serialize(ws);

  auto corrupt = [&](size_t at) {
    auto copy = bytes;
    copy[at] ^= 0xFF;
    return copy;
  };
  CHECK_THROWS_AS(deserialize(corrupt(0)), BadMagicError);
  CHECK_THROWS_AS(deserialize(corrupt(4)), VersionMismatchError);
  CHECK_THROWS_AS(deserialize(corrupt(bytes.size() - 8)), ChecksumError);
  CHECK_THROWS_AS(deserialize(std::span(bytes).first(bytes.size() - 3)), TruncatedError);
  CHECK_THROWS_AS(deserialize(std::span(bytes).first(3)), TruncatedError);

  Workspace gap;
  gap.set("g", 1, Tensor::zeros({1}));
  CHECK_THROWS_AS(serialize(gap), UnwrittenTimestepError);
}

TEST_CASE("byte layout") {
  Workspace ws;
  ws.set_full("ab", Tensor::full({1, 1}, 1.0f));
  const auto b = serialize(ws);
  // magic, version, count, name_len, name, T, B, rank, payload, crc
  CHECK(b.size() == 4 + 2 + 4 + 2 + 2 + 4 + 4 + 1 + 4 + 4);
  CHECK(std::string(b.begin(), b.begin() + 4) == "WSPC");
  CHECK(b[4] == 1);
  CHECK(b[5] == 0);
  CHECK(b[6] == 1);
  CHECK(b[10] == 2);
  CHECK(b[12] == 'a');
}

TEST_CASE("dataset files") {
  std::mt19937_64 rng(8);
  std::vector<Workspace> items;
  for (int i = 0; i < 5; ++i) items.push_back(testing::random_workspace(rng));
  const auto path = std::filesystem::temp_directory_path() / "wsrl_test_dataset.wsds";
  save_dataset(path, items);
  const auto ds = TrajectoryDataset::load(path);
  REQUIRE(ds.size() == items.size());
  for (size_t i = 0; i < items.size(); ++i) CHECK(ds.read_workspace(i).bit_equal(items[i]));
  CHECK(is_dataset_file(read_file(path)));
  std::filesystem::remove(path);
}
