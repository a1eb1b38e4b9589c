#include "cli.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <numeric>
#include <sstream>

#include "wsrl/algorithms.hpp"
#include "wsrl/config.hpp"
#include "wsrl/errors.hpp"
#include "wsrl/workspace_io.hpp"

namespace wsrl::cli {

namespace {

constexpr int kUsage = 2;
constexpr int kFailure = 1;

TrainConfig read_config(const std::string& path, std::ostream& err) {
  const Config config = load_config(path);
  for (const auto& w : config.warnings) err << "warning: " << path << ": " << w << "\n";
  return to_train_config(config);
}

double mean_of_last(const std::vector<double>& v, size_t n) {
  if (v.empty()) return 0.0;
  const size_t k = std::min(n, v.size());
  return std::accumulate(v.end() - static_cast<std::ptrdiff_t>(k), v.end(), 0.0) / static_cast<double>(k);
}

void describe(std::ostream& out, const Workspace& ws, const std::string& indent) {
  for (const auto& name : ws.variables()) {
    out << indent << name << "  T=" << ws.time_size(name) << " B=" << ws.batch_size()
        << " item=" << shape_str(ws.item_shape(name)) << "\n";
  }
}

std::vector<int64_t> parse_counts(const std::string& text) {
  std::vector<int64_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    size_t used = 0;
    int64_t v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v < 1) throw ConfigError("bad process count '" + item + "'", 0);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("no process counts given", 0);
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Workspace-based reinforcement learning toolkit"};
  app.require_subcommand(1);

  std::string algo, config_path, dataset_path, env, policy, out_path, inspect_path, process_list = "1,2,4",
                                                                                 log_override;
  std::optional<int64_t> seed, processes;
  int64_t episodes = 100, max_steps = 1000, record_seed = 0, rollouts = 20;

  auto* train = app.add_subcommand("train", "Run a trainer from a config file");
  train->add_option("--algo", algo, "reinforce | a2c | ddqn | model-based | multi-agent")
      ->required()
      ->check(CLI::IsMember({"reinforce", "a2c", "ddqn", "model-based", "multi-agent"}));
  train->add_option("--config", config_path, "Config file")->required();
  train->add_option("--seed", seed, "Overrides run.seed");
  train->add_option("--processes", processes, "Overrides run.num_processes");
  train->add_option("--log", log_override, "Overrides run.log_path");

  auto* record = app.add_subcommand("record", "Record episodes into a trajectory dataset");
  record->add_option("--env", env, "Environment name")->required();
  record->add_option("--policy", policy, "random | expert")->required()->check(CLI::IsMember({"random", "expert"}));
  record->add_option("--episodes", episodes, "Number of episodes")->check(CLI::PositiveNumber);
  record->add_option("--out", out_path, "Output dataset file")->required();
  record->add_option("--seed", record_seed, "Generator seed")->check(CLI::NonNegativeNumber);
  record->add_option("--max-steps", max_steps, "Episode step cap")->check(CLI::PositiveNumber);

  auto* bc = app.add_subcommand("bc", "Behavioral cloning from a dataset");
  bc->add_option("--config", config_path, "Config file")->required();
  bc->add_option("--dataset", dataset_path, "Trajectory dataset")->required();
  bc->add_option("--seed", seed, "Overrides run.seed");
  bc->add_option("--log", log_override, "Overrides run.log_path");

  auto* inspect = app.add_subcommand("inspect", "Describe a workspace or dataset file");
  inspect->add_option("file", inspect_path, "Workspace or dataset file")->required();

  auto* bench = app.add_subcommand("bench-parallel", "Acquisition throughput per worker count");
  bench->add_option("--processes", process_list, "Comma-separated worker counts");
  bench->add_option("--config", config_path, "Config file")->required();
  bench->add_option("--rollouts", rollouts, "Timed rollouts per worker count")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  TrainConfig cfg;
  try {
    if (!config_path.empty()) cfg = read_config(config_path, err);
    if (seed) {
      if (*seed < 0) throw ConfigError("--seed must be nonnegative", 0);
      cfg.seed = static_cast<uint64_t>(*seed);
    }
    if (processes) cfg.num_processes = *processes;
    if (!log_override.empty()) cfg.log_path = log_override;
    cfg.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*train) {
      TrainResult r;
      if (algo == "reinforce") r = train_reinforce(cfg);
      else if (algo == "a2c") r = train_a2c(cfg);
      else if (algo == "ddqn") r = train_double_dqn(cfg);
      else if (algo == "model-based") r = demo_model_based(cfg);
      else r = demo_multi_agent(cfg);
      const auto& records = r.log.records();
      out << algo << ": " << records.size() << " iterations, "
          << (records.empty() ? 0 : records.back().global_step) << " steps, " << r.episode_returns.size()
          << " episodes, mean return of last 20: " << mean_of_last(r.episode_returns, 20) << "\n";
      if (!r.episode_returns.empty()) {
        const WindowMean best = best_window_mean(r, 20, 0.0);
        out << "best mean return over 20 consecutive episodes: " << best.value << " (step " << best.step << ")\n";
      }
      if (!r.eval_returns.empty()) {
        out << "greedy evaluation mean return: " << mean_of_last(r.eval_returns, r.eval_returns.size()) << "\n";
      }
      if (!cfg.log_path.empty()) out << "metric log: " << cfg.log_path << "\n";
    } else if (*record) {
      const auto episodes_ws = record_episodes(env, policy, episodes, static_cast<uint64_t>(record_seed), max_steps);
      save_dataset(out_path, episodes_ws);
      int64_t steps = 0;
      for (const auto& w : episodes_ws) steps += w.time_size();
      out << "recorded " << episodes_ws.size() << " episodes (" << steps << " steps) to " << out_path << "\n";
    } else if (*bc) {
      const TrainResult r = train_bc(cfg, dataset_path);
      out << "bc: " << r.log.records().size() << " iterations, final cross entropy "
          << r.log.records().back().losses.at("cross_entropy") << ", action agreement " << std::fixed
          << std::setprecision(4) << r.agreement << "\n";
    } else if (*inspect) {
      const auto bytes = read_file(inspect_path);
      if (is_dataset_file(bytes)) {
        const auto ds = TrajectoryDataset::from_bytes(bytes);
        out << "dataset: " << ds.size() << " workspaces\n";
        for (size_t i = 0; i < ds.size(); ++i) {
          const Workspace w = ds.read_workspace(i);
          out << "[" << i << "] T=" << w.time_size() << " B=" << w.batch_size() << "\n";
          describe(out, w, "  ");
        }
      } else {
        const Workspace w = deserialize(bytes);
        out << "workspace: T=" << w.time_size() << " B=" << w.batch_size() << "\n";
        describe(out, w, "  ");
      }
    } else if (*bench) {
      std::vector<int64_t> counts;
      try {
        counts = parse_counts(process_list);
      } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
      }
      const auto samples = bench_parallel(cfg, counts, rollouts);
      out << "processes steps_per_second speedup\n";
      for (const auto& s : samples) {
        out << s.processes << " " << std::fixed << std::setprecision(1) << s.steps_per_second << " "
            << std::setprecision(2) << s.steps_per_second / samples.front().steps_per_second << "\n";
      }
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return 0;
}

}  // namespace wsrl::cli
