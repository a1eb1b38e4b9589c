#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace wsrl {

struct TrainConfig {
  // env.*
  std::string env = "cartpole";
  int64_t n_envs = 8;  // total across worker processes
  // algo.*
  double gamma = 0.99;
  double learning_rate = 0.01;
  int64_t n_steps = 32;  // timesteps per rollout
  double entropy_coef = 0.0;
  double critic_coef = 0.5;
  double max_grad_norm = 0.0;  // 0 disables clipping
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int64_t epsilon_decay_steps = 10000;  // env steps
  int64_t target_update = 200;          // gradient steps between target copies
  int64_t replay_capacity = 10000;
  int64_t batch_size = 64;
  int64_t learning_starts = 500;  // env steps before the first update
  int64_t updates_per_rollout = 1;
  int64_t bc_iterations = 2000;
  // model.*
  std::string policy = "mlp";  // mlp | recurrent
  int64_t hidden = 32;
  // run.*
  int64_t total_steps = 100000;  // env steps
  uint64_t seed = 0;
  int64_t num_processes = 1;
  std::string log_path;
  bool log_wallclock = false;
  int64_t eval_episodes = 20;

  // Throws ConfigError (line 0) on invariant violations.
  void validate() const;
};

using ConfigValue = std::variant<int64_t, double, bool, std::string>;

struct ConfigEntry {
  ConfigValue value;
  int line = 0;
};

// Parsed `key = value` text, typed against the known keys.
struct Config {
  std::map<std::string, ConfigEntry> entries;
  std::vector<std::string> warnings;
};

// One `key = value` per line; '#' starts a comment; blank lines are skipped.
// Unknown keys, lines without '=' and values that do not parse as the key's
// type throw ConfigError naming the line. A repeated key keeps the last value
// and records a warning.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);

// Defaults overridden by the entries, then validated.
TrainConfig to_train_config(const Config& config);
// Every key, one per line, in a form parse_config reads back.
std::string format_config(const TrainConfig& config);
std::vector<std::string> config_keys();

}  // namespace wsrl
