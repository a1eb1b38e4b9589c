#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "wsrl/workspace_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = wsrl::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("wsrl-cli-" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content = "") const {
    const auto p = (path / name).string();
    if (!content.empty()) std::ofstream(p) << content;
    return p;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kConfigs = WSRL_CONFIG_DIR;

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"train", "--algo", "sarsa", "--config", kConfigs + "/a2c_cartpole.cfg"}).code == 2);
  CHECK(run({"train", "--algo", "a2c"}).code == 2);
  CHECK(run({"record", "--env", "gridworld", "--policy", "oracle", "--out", "/tmp/x"}).code == 2);
  CHECK(run({"bench-parallel", "--config", kConfigs + "/bench_sleep.cfg", "--processes", "1,zero"}).code == 2);
}

TEST_CASE("config errors exit with 2 and name the line") {
  TempDir dir;
  const auto bad = dir.file("bad.cfg", "env.name = cartpole\nalgo.gama = 0.9\n");
  const Outcome o = run({"train", "--algo", "a2c", "--config", bad});
  CHECK(o.code == 2);
  CHECK(o.err.find("line 2") != std::string::npos);
  CHECK(o.err.find("algo.gama") != std::string::npos);

  const auto typed = dir.file("typed.cfg", "algo.n_steps = many\n");
  CHECK(run({"train", "--algo", "a2c", "--config", typed}).code == 2);
  CHECK(run({"train", "--algo", "a2c", "--config", dir.file("missing.cfg")}).code == 2);
  CHECK(run({"train", "--algo", "a2c", "--config", kConfigs + "/a2c_cartpole.cfg", "--seed", "-1"}).code == 2);
}

TEST_CASE("duplicate keys warn on stderr and the run proceeds") {
  TempDir dir;
  const auto cfg = dir.file("dup.cfg",
                            "env.name = cartpole\nenv.n_envs = 2\nalgo.n_steps = 4\nrun.total_steps = 12\n"
                            "run.seed = 1\nrun.seed = 2\n");
  const Outcome o = run({"train", "--algo", "reinforce", "--config", cfg});
  CHECK(o.code == 0);
  CHECK(o.err.find("run.seed") != std::string::npos);
}

TEST_CASE("runtime failures exit with 1") {
  TempDir dir;
  const auto cfg = dir.file("bc.cfg", "env.name = gridworld\nalgo.bc_iterations = 2\n");
  CHECK(run({"bc", "--config", cfg, "--dataset", dir.file("absent.wsds")}).code == 1);
  CHECK(run({"inspect", dir.file("absent.ws")}).code == 1);
  CHECK(run({"inspect", dir.file("garbage.ws", "not a workspace")}).code == 1);
}

TEST_CASE("record, inspect and clone") {
  TempDir dir;
  const auto data = dir.file("expert.wsds");
  Outcome o = run({"record", "--env", "gridworld-random-start", "--policy", "expert", "--episodes", "30", "--out",
                   data, "--seed", "4"});
  REQUIRE(o.code == 0);
  CHECK(o.out.find("recorded 30 episodes") != std::string::npos);

  o = run({"inspect", data});
  REQUIRE(o.code == 0);
  CHECK(o.out.find("dataset: 30 workspaces") != std::string::npos);
  CHECK(o.out.find("env/env_obs  T=") != std::string::npos);
  CHECK(o.out.find("B=1") != std::string::npos);

  const auto ws = dir.file("one.ws");
  wsrl::save_workspace(ws, wsrl::TrajectoryDataset::load(data).read_workspace(0));
  o = run({"inspect", ws});
  REQUIRE(o.code == 0);
  CHECK(o.out.rfind("workspace: T=", 0) == 0);
  CHECK(o.out.find("env/env_obs") != std::string::npos);

  const auto cfg = dir.file("bc.cfg", "env.name = gridworld\nalgo.bc_iterations = 150\nalgo.batch_size = 16\n");
  o = run({"bc", "--config", cfg, "--dataset", data});
  REQUIRE(o.code == 0);
  CHECK(o.out.find("action agreement") != std::string::npos);
}

TEST_CASE("training twice with the same seed writes identical logs") {
  TempDir dir;
  const auto cfg = dir.file("a2c.cfg",
                            "env.name = cartpole\nenv.n_envs = 4\nalgo.n_steps = 8\nrun.total_steps = 280\n"
                            "model.hidden = 8\nrun.seed = 7\n");
  const auto a = dir.file("a.jsonl"), b = dir.file("b.jsonl"), c = dir.file("c.jsonl");
  for (const std::string algo : {"reinforce", "a2c", "ddqn"}) {
    CAPTURE(algo);
    REQUIRE(run({"train", "--algo", algo, "--config", cfg, "--log", a}).code == 0);
    REQUIRE(run({"train", "--algo", algo, "--config", cfg, "--log", b}).code == 0);
    REQUIRE(run({"train", "--algo", algo, "--config", cfg, "--log", c, "--seed", "8"}).code == 0);
    CHECK_FALSE(slurp(a).empty());
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a) != slurp(c));
  }
}

TEST_CASE("the differentiable-environment demos run from the CLI") {
  TempDir dir;
  const auto cfg = dir.file("demo.cfg", "env.n_envs = 4\nalgo.n_steps = 5\nrun.total_steps = 100\n");
  for (const std::string algo : {"model-based", "multi-agent"}) {
    const Outcome o = run({"train", "--algo", algo, "--config", cfg});
    CHECK(o.code == 0);
    CHECK(o.out.find("5 iterations") != std::string::npos);
  }
}

TEST_CASE("parallel acquisition throughput does not drop with more workers") {
  const Outcome o = run({"bench-parallel", "--config", kConfigs + "/bench_sleep.cfg", "--processes", "1,2,4",
                         "--rollouts", "4"});
  REQUIRE(o.code == 0);
  std::istringstream in(o.out);
  std::string header;
  std::getline(in, header);
  CHECK(header == "processes steps_per_second speedup");
  std::vector<double> rates;
  int64_t processes = 0;
  double rate = 0.0, speedup = 0.0;
  while (in >> processes >> rate >> speedup) rates.push_back(rate);
  REQUIRE(rates.size() == 3);
  // Sleep-bound steps: extra workers overlap and never slow acquisition down.
  CHECK(rates[1] >= 0.95 * rates[0]);
  CHECK(rates[2] >= 0.95 * rates[1]);
}
