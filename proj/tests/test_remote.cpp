#include <doctest.h>

#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "support/agents.hpp"
#include "wsrl/envs.hpp"
#include "wsrl/errors.hpp"
#include "wsrl/remote.hpp"
#include "wsrl/wire.hpp"

using namespace wsrl;

namespace {

// Writes x@t = [[t, t, t], [t, t, t]].
class Shaped : public TAgent {
 protected:
  void step(int64_t t, const KwArgs&) override { set("x", t, Tensor::full({2, 3}, static_cast<float>(t))); }
};

// Records the kwargs it receives as variables.
class KwRecorder : public Agent {
 protected:
  void forward(const KwArgs& kw) override {
    set("n_steps", 0, Tensor::vector({static_cast<float>(kw.get_int("n_steps"))}));
    set("epsilon", 0, Tensor::vector({static_cast<float>(kw.get_double("epsilon", -1.0))}));
  }
};

class Silent : public Agent {
 protected:
  void forward(const KwArgs&) override {}
};

// Dies (or throws) on the worker seeded with `bad_seed` when kwarg "fail" is set.
class Faulty : public TAgent {
 public:
  explicit Faulty(uint64_t bad_seed) : bad_(bad_seed) {}
  void seed(uint64_t s) override {
    Agent::seed(s);
    seed_ = s;
  }

 protected:
  void step(int64_t t, const KwArgs& kw) override {
    const std::string mode = kw.find_string("fail").value_or("");
    if (seed_ == bad_ && mode == "crash") ::_exit(7);
    if (seed_ == bad_ && mode == "throw") throw EnvError("scripted failure");
    set("x", t, Tensor::vector({1.0f}));
  }

 private:
  uint64_t bad_;
  uint64_t seed_ = 0;
};

AgentPtr grid_acquisition(int64_t batch) {
  auto env = std::make_shared<EnvAgent>(GridWorld(20, true), batch, true);
  return temporal(sequential({env, std::make_shared<testing::Uniform>(4, batch)}));
}

Workspace local_oracle(int64_t n, int64_t batch, uint64_t seed, const KwArgs& kw) {
  std::vector<Workspace> parts;
  for (int64_t k = 0; k < n; ++k) {
    auto agent = grid_acquisition(batch);
    agent->seed(seed + static_cast<uint64_t>(k));
    Workspace ws;
    agent->execute(ws, kw);
    parts.push_back(ws);
  }
  return Workspace::concat_batch(parts);
}

bool shm_exists(const std::string& name) { return std::filesystem::exists("/dev/shm/" + name); }

}  // namespace

TEST_CASE("wire messages round trip") {
  KwArgs kw{{"t", 3}, {"n_steps", int64_t{1} << 40}, {"epsilon", 0.125}, {"stochastic", false}, {"mode", "eval"}};
  for (const auto& m : {wire::Message::run(kw), wire::Message::run({}), wire::Message::error("boom: line 2"),
                        wire::Message::of(wire::Command::kStop), wire::Message::of(wire::Command::kAck),
                        wire::Message::of(wire::Command::kDone)}) {
    const auto bytes = wire::encode(m);
    uint32_t length = 0;
    std::memcpy(&length, bytes.data(), 4);
    CHECK(length == bytes.size() - 4);
    CHECK(wire::decode(std::span(bytes).subspan(4)) == m);
  }
  const auto bytes = wire::encode(wire::Message::run(kw));
  CHECK_THROWS_AS(wire::decode(std::span(bytes).subspan(4, bytes.size() - 6)), ProtocolError);
  std::vector<uint8_t> bad{9};
  CHECK_THROWS_AS(wire::decode(bad), ProtocolError);

  int fds[2];
  REQUIRE(::pipe(fds) == 0);
  wire::write_message(fds[1], wire::Message::run(kw));
  ::close(fds[1]);
  CHECK(wire::read_message(fds[0])->kwargs == kw);
  CHECK_FALSE(wire::read_message(fds[0]).has_value());
  ::close(fds[0]);
}

TEST_CASE("probe shapes size the shared arena") {
  auto [ra, sw] = create_remote(temporal(std::make_shared<Shaped>()), 4, {{"t", 0}, {"n_steps", 5}});
  CHECK(sw->batch_per_worker() == 2);
  CHECK(sw->time_capacity() == 5);
  REQUIRE(sw->variables().size() == 1);
  CHECK(sw->variables()[0].item_shape == Shape{3});
  for (const auto& name : sw->region_names()) {
    CHECK(name.rfind("wspc-" + sw->run_id() + "-", 0) == 0);
    CHECK(shm_exists(name));
  }
  remote_execute(*ra, *sw, {{"t", 0}, {"n_steps", 5}});
  const Workspace snap = snapshot(*sw);
  CHECK(snap.full("x").shape() == Shape{5, 8, 3});
  CHECK_FALSE(snap.get("x", 0).requires_grad());
  const auto names = sw->region_names();
  ra->close();
  for (const auto& name : names) CHECK_FALSE(shm_exists(name));
  CHECK_THROWS_AS(create_remote(std::make_shared<Silent>(), 2, {}), RemoteError);
  CHECK_THROWS_AS(create_remote(std::make_shared<Shaped>(), 0, {{"t", 0}}), RemoteError);
}

TEST_CASE("single process equals local execution") {
  const KwArgs kw{{"t", 0}, {"n_steps", 30}};
  auto [ra, sw] = create_remote(grid_acquisition(3), 1, kw, {.seed = 11});
  remote_execute(*ra, *sw, kw);
  CHECK(snapshot(*sw).bit_equal(local_oracle(1, 3, 11, kw)));
}

TEST_CASE("deterministic agent gives identical slices") {
  auto fill = std::make_shared<FillAgent>();
  const KwArgs kw{{"var_name", "x"}, {"value", 2.5}, {"n_steps", 4}};
  auto [ra, sw] = create_remote(fill, 2, kw);
  remote_execute(*ra, *sw, kw);
  const Tensor x = snapshot(*sw).full("x");
  CHECK(x.shape() == Shape{4, 2});
  for (float v : x.data()) CHECK(v == 2.5f);
}

TEST_CASE("remote run equals concatenated local runs") {
  const KwArgs kw{{"t", 0}, {"n_steps", 25}};
  auto [ra, sw] = create_remote(grid_acquisition(2), 4, kw, {.seed = 100});
  remote_execute(*ra, *sw, kw);
  const Workspace blocking = snapshot(*sw);
  CHECK(blocking.bit_equal(local_oracle(4, 2, 100, kw)));
  CHECK(blocking.bit_equal(snapshot(*sw)));

  // A second run continues each worker's agents from their current state.
  remote_execute(*ra, *sw, kw);
  CHECK_FALSE(snapshot(*sw).bit_equal(blocking));
}

TEST_CASE("async run equals blocking run") {
  const KwArgs kw{{"t", 0}, {"n_steps", 25}};
  Workspace blocking;
  {
    auto [ra, sw] = create_remote(grid_acquisition(2), 4, kw, {.seed = 5});
    remote_execute(*ra, *sw, kw);
    blocking = snapshot(*sw);
  }
  auto [ra, sw] = create_remote(grid_acquisition(2), 4, kw, {.seed = 5});
  remote_execute_async(*ra, *sw, kw);
  join(*ra);
  CHECK_FALSE(is_running(*ra));
  CHECK(snapshot(*sw).bit_equal(blocking));
}

TEST_CASE("async bookkeeping") {
  auto env = std::make_shared<EnvAgent>(SleepEnv(2000), 1, false);
  auto agent = temporal(sequential({env, std::make_shared<testing::Uniform>(2, 1)}));
  const KwArgs kw{{"t", 0}, {"n_steps", 60}};
  auto [ra, sw] = create_remote(agent, 2, {{"t", 0}, {"n_steps", 1}}, {.seed = 1, .time_capacity = 60});
  remote_execute_async(*ra, *sw, kw);
  CHECK(is_running(*ra));
  CHECK_THROWS_AS(remote_execute_async(*ra, *sw, kw), AlreadyRunningError);
  CHECK_THROWS_AS(snapshot(*sw), AlreadyRunningError);
  int polls = 0;
  while (is_running(*ra)) {
    ++polls;
    ::usleep(1000);
  }
  CHECK(polls > 0);
  join(*ra);
  CHECK_FALSE(is_running(*ra));
  CHECK(snapshot(*sw).full("env/env_obs").shape() == Shape{60, 2, 1});
}

TEST_CASE("kwargs reach the workers") {
  auto [ra, sw] = create_remote(std::make_shared<KwRecorder>(), 3, {{"n_steps", 1}});
  remote_execute(*ra, *sw, {{"n_steps", 100}, {"epsilon", 0.5}});
  const Workspace snap = snapshot(*sw);
  CHECK(snap.get("n_steps", 0).bit_equal(Tensor::vector({100, 100, 100})));
  CHECK(snap.get("epsilon", 0).bit_equal(Tensor::vector({0.5f, 0.5f, 0.5f})));
}

TEST_CASE("capacity and layout are enforced") {
  auto [ra, sw] = create_remote(temporal(std::make_shared<Shaped>()), 2, {{"t", 0}, {"n_steps", 3}});
  CHECK_THROWS_AS(remote_execute(*ra, *sw, {{"t", 0}, {"n_steps", 4}}), WorkerError);
  CHECK(ra->closed());
  CHECK(sw->released());
  CHECK_THROWS_AS(remote_execute(*ra, *sw, {{"t", 0}, {"n_steps", 3}}), RemoteError);
}

TEST_CASE("worker failures fail the run and release the arena") {
  for (const char* mode : {"crash", "throw"}) {
    CAPTURE(mode);
    auto [ra, sw] = create_remote(temporal(std::make_shared<Faulty>(42)), 3, {{"t", 0}, {"n_steps", 2}}, {.seed = 40});
    const auto names = sw->region_names();
    try {
      remote_execute(*ra, *sw, {{"t", 0}, {"n_steps", 2}, {"fail", mode}});
      FAIL("expected WorkerError");
    } catch (const WorkerError& e) {
      CHECK(e.worker() == 2);
      if (std::string(mode) == "throw") CHECK(std::string(e.what()).find("scripted failure") != std::string::npos);
    }
    for (const auto& name : names) CHECK_FALSE(shm_exists(name));
    CHECK_THROWS_AS(snapshot(*sw), RemoteError);
  }
}

TEST_CASE("slice writes stay inside their rows") {
  std::mt19937_64 rng(4);
  SharedWorkspace sw({{"a", {3}}, {"b", {}}}, 2, 4, 6);
  auto random_slice = [&] {
    Workspace ws;
    std::normal_distribution<float> d;
    for (int64_t t = 0; t < 6; ++t) {
      Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({2});
      for (float& v : a.mutable_data()) v = d(rng);
      for (float& v : b.mutable_data()) v = d(rng);
      ws.set("a", t, a);
      ws.set("b", t, b);
    }
    return ws;
  };
  std::vector<Workspace> slices;
  for (int64_t k = 0; k < 4; ++k) {
    slices.push_back(random_slice());
    sw.write_slice(k, slices.back());
  }
  for (int round = 0; round < 50; ++round) {
    const int64_t j = std::uniform_int_distribution<int64_t>(0, 3)(rng);
    slices[static_cast<size_t>(j)] = random_slice();
    sw.write_slice(j, slices[static_cast<size_t>(j)]);
    for (int64_t k = 0; k < 4; ++k) CHECK(sw.read_slice(k).bit_equal(slices[static_cast<size_t>(k)]));
  }
  CHECK(sw.snapshot().bit_equal(Workspace::concat_batch(slices)));

  Workspace wrong;
  wrong.set("a", 0, Tensor::zeros({2, 4}));
  CHECK_THROWS_AS(sw.write_slice(0, wrong), ItemShapeMismatchError);
  Workspace unknown;
  unknown.set("c", 0, Tensor::zeros({2}));
  CHECK_THROWS_AS(sw.write_slice(0, unknown), RemoteError);
  Workspace late;
  late.set("b", 6, Tensor::zeros({2}));
  CHECK_THROWS_AS(sw.write_slice(0, late), RangeError);
  CHECK(sw.read_slice(0).bit_equal(slices[0]));

  sw.copy_step_to_front(5);
  const Workspace front = sw.snapshot();
  CHECK(front.time_size() == 1);
  CHECK(front.get("a", 0).bit_equal(Workspace::concat_batch(slices).get("a", 5)));
}

TEST_CASE("parameters are broadcast before each run") {
  auto lin = std::make_shared<LinearAgent>(Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({0, 0}), "x", "y");
  lin->weight().set_requires_grad(true);
  class Feed : public TAgent {
   protected:
    void step(int64_t t, const KwArgs&) override { set("x", t, Tensor::matrix({{1, 2}})); }
  };
  auto agent = sequential({std::make_shared<Feed>(), lin});
  auto [ra, sw] = create_remote(agent, 2, {{"t", 0}});
  remote_execute(*ra, *sw, {{"t", 0}});
  CHECK(snapshot(*sw).get("y", 0).bit_equal(Tensor::matrix({{1, 2}, {1, 2}})));
  lin->weight().assign(Tensor::matrix({{2, 0}, {0, 2}}));
  remote_execute(*ra, *sw, {{"t", 0}});
  CHECK(snapshot(*sw).get("y", 0).bit_equal(Tensor::matrix({{2, 4}, {2, 4}})));
}

TEST_CASE("replaying a value agent over a snapshot") {
  const KwArgs kw{{"t", 0}, {"n_steps", 10}};
  auto [ra, sw] = create_remote(grid_acquisition(2), 2, kw);
  remote_execute(*ra, *sw, kw);
  Workspace ws = snapshot(*sw);
  const Tensor obs = ws.full("env/env_obs");
  auto critic = std::make_shared<LinearAgent>(9, 1, 3);
  class Rename : public TAgent {
   public:
    explicit Rename(AgentPtr inner) : inner_(std::move(inner)) {}

   protected:
    void step(int64_t t, const KwArgs& kw) override {
      set("x", t, get("env/env_obs", t));
      inner_->execute(workspace(), kw);
    }

   private:
    AgentPtr inner_;
  };
  replay(*temporal(std::make_shared<Rename>(critic)), ws, kw);
  CHECK(ws.full("y").shape() == Shape{10, 4, 1});
  CHECK(ws.full("env/env_obs").bit_equal(obs));
}
