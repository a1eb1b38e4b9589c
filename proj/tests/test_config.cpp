#include <doctest.h>

#include <algorithm>
#include <set>

#include "wsrl/config.hpp"
#include "wsrl/errors.hpp"

using namespace wsrl;

namespace {

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("a float value is read as a float") {
  const Config c = parse_config("algo.gamma = 0.99");
  REQUIRE(c.entries.count("algo.gamma") == 1);
  CHECK(std::get<double>(c.entries.at("algo.gamma").value) == 0.99);
  CHECK(to_train_config(c).gamma == 0.99);
}

TEST_CASE("unknown key names its line") {
  CHECK(error_line("algo.gamm = 0.99") == 1);
  CHECK(error_line("# header\n\nalgo.gamma = 0.9\nalgo.lrr = 0.1\n") == 4);
}

TEST_CASE("line without '=' names its line") {
  CHECK(error_line("algo.gamma = 0.5\nalgo.lr 0.1\n") == 2);
}

TEST_CASE("type mismatches name their line") {
  CHECK(error_line("algo.n_steps = 3.5") == 1);
  CHECK(error_line("\nalgo.gamma = fast") == 2);
  CHECK(error_line("run.log_wallclock = yes") == 1);
  CHECK(error_line("env.n_envs = ") == 1);
  CHECK(error_line("env.n_envs = 4x") == 1);
}

TEST_CASE("empty text gives all defaults") {
  const Config c = parse_config("");
  CHECK(c.entries.empty());
  const TrainConfig d = to_train_config(c);
  const TrainConfig fresh;
  CHECK(format_config(d) == format_config(fresh));
}

TEST_CASE("comments, blank lines and spacing") {
  const Config c = parse_config("  # comment\n\n env.name=gridworld   # trailing\nrun.log_path = \"out/log.jsonl\"\r\n");
  const TrainConfig t = to_train_config(c);
  CHECK(t.env == "gridworld");
  CHECK(t.log_path == "out/log.jsonl");
}

TEST_CASE("integers are accepted for float keys") {
  CHECK(to_train_config(parse_config("algo.gamma = 1")).gamma == 1.0);
}

TEST_CASE("duplicates keep the last value and warn") {
  const Config c = parse_config("algo.lr = 0.1\nalgo.lr = 0.2\n");
  CHECK(std::get<double>(c.entries.at("algo.lr").value) == 0.2);
  CHECK(c.entries.at("algo.lr").line == 2);
  REQUIRE(c.warnings.size() == 1);
  CHECK(c.warnings[0].find("algo.lr") != std::string::npos);
}

TEST_CASE("invariant violations are rejected") {
  CHECK_THROWS_AS(to_train_config(parse_config("algo.gamma = 1.5")), ConfigError);
  CHECK_THROWS_AS(to_train_config(parse_config("algo.gamma = -0.1")), ConfigError);
  CHECK_THROWS_AS(to_train_config(parse_config("algo.n_steps = 0")), ConfigError);
  CHECK_THROWS_AS(to_train_config(parse_config("model.policy = lstm")), ConfigError);
  CHECK_THROWS_AS(to_train_config(parse_config("env.n_envs = 6\nrun.num_processes = 4")), ConfigError);
  CHECK_THROWS_AS(to_train_config(parse_config("run.seed = -1")), ConfigError);
  CHECK_NOTHROW(to_train_config(parse_config("algo.gamma = 0\nalgo.n_steps = 1")));
}

TEST_CASE("every field round-trips through the text form") {
  TrainConfig t;
  t.env = "gridworld";
  t.n_envs = 12;
  t.gamma = 0.123456789012345;
  t.learning_rate = 3e-4;
  t.n_steps = 7;
  t.entropy_coef = 0.02;
  t.critic_coef = 0.25;
  t.max_grad_norm = 1.5;
  t.epsilon_start = 0.9;
  t.epsilon_end = 0.01;
  t.epsilon_decay_steps = 777;
  t.target_update = 33;
  t.replay_capacity = 999;
  t.batch_size = 17;
  t.learning_starts = 5;
  t.updates_per_rollout = 3;
  t.bc_iterations = 44;
  t.policy = "recurrent";
  t.hidden = 9;
  t.total_steps = 1234;
  t.seed = 42;
  t.num_processes = 4;
  t.log_path = "a b/c.jsonl";
  t.log_wallclock = true;
  t.eval_episodes = 3;
  const std::string text = format_config(t);
  const TrainConfig back = to_train_config(parse_config(text));
  CHECK(format_config(back) == text);
  CHECK(back.gamma == t.gamma);
  CHECK(back.log_path == t.log_path);
  // One line per key and every key is distinct.
  const auto keys = config_keys();
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(keys.size()));
  CHECK(std::set<std::string>(keys.begin(), keys.end()).size() == keys.size());
  CHECK(keys.size() == 25);
}
