#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wsrl/agent.hpp"
#include "wsrl/config.hpp"
#include "wsrl/envs.hpp"
#include "wsrl/remote.hpp"

namespace wsrl {

struct MetricRecord {
  int64_t global_step = 0;
  std::optional<double> episode_return_mean;  // episodes finished since the last record
  std::optional<double> episode_return_max;
  std::map<std::string, double> losses;
  double wallclock = 0.0;  // seconds since training started; 0 unless run.log_wallclock
};

// Append-only training log. With a path, every record is written as one JSON
// line and flushed immediately.
class MetricLog {
 public:
  MetricLog() = default;
  explicit MetricLog(const std::filesystem::path& path);

  void append(const MetricRecord& record);
  const std::vector<MetricRecord>& records() const { return records_; }
  static std::string to_json_line(const MetricRecord& record);

 private:
  std::vector<MetricRecord> records_;
  std::unique_ptr<std::ofstream> out_;
};

// ---- loss helpers ----------------------------------------------------------

// G_t = r_t + gamma * c_t * G_{t+1} with G_T = 0, for [T, B] rewards r and
// continuation flags c (0 where the episode ends after step t). Not recorded.
Tensor discounted_returns(const Tensor& rewards, const Tensor& continues, double gamma);

// A_t = r_{t+1} + gamma * (1 - done_{t+1}) * V_{t+1} - V_t over [T, B] inputs
// aligned at t (next_reward[t] = r_{t+1}, next_done[t] = done_{t+1},
// next_value[t] = V_{t+1}). The bootstrap value is detached.
Tensor a2c_advantage(const Tensor& next_reward, const Tensor& next_done, const Tensor& value,
                     const Tensor& next_value, double gamma);

// y = r + gamma * (1 - done) * Q_target(s', argmax_a Q_online(s', a)); [B].
Tensor double_dqn_target(const Tensor& reward, const Tensor& done, const Tensor& q_online_next,
                         const Tensor& q_target_next, double gamma);

struct LossTerms {
  Tensor loss;
  std::map<std::string, double> terms;  // logged values
};

// Losses over a rollout [T, B] whose policy outputs (and critic for A2C) were
// replayed with gradients from t0 on. The action at t is credited with
// env/reward@t+1; actions on terminal observations (env/done@t) are masked.
// Every term is averaged over the (T - 1 - t0) * B action slots. When
// action_entropy is present its masked mean is logged and, scaled by
// entropy_coef, subtracted from the loss.
//   REINFORCE: -log pi(a_t|s_t) * G_t, with G from discounted_returns and the
//              episode continuing past t unless done@t+1 or initial_state@t+1.
//   A2C: policy -A_t.detach() * log pi plus critic_coef * A_t^2.
LossTerms reinforce_loss(const Workspace& ws, int64_t t0, double gamma, double entropy_coef = 0.0);
LossTerms a2c_loss(const Workspace& ws, int64_t t0, double gamma, double entropy_coef = 0.0, double critic_coef = 0.5);
// Over length-2 windows holding q@0, q@1, target_q@1, action@0 and env/*:
// mean over the batch of (1 - done@0) * (q@0[action@0] - y)^2.
LossTerms double_dqn_loss(const Workspace& batch, double gamma);

// ---- acquisition -----------------------------------------------------------

// Repeatedly unrolls temporal(sequential([env, policy])) for n_steps, locally
// or over num_processes workers. From the second rollout on, timestep 0 holds
// the last timestep of the previous rollout and execution resumes at t = 1, so
// environments continue across rollouts. Acquisition records no gradients.
class RolloutCollector {
 public:
  RolloutCollector(AgentPtr env, AgentPtr policy, int64_t n_steps, int64_t num_processes, uint64_t seed);
  ~RolloutCollector();

  Workspace& collect(const KwArgs& kwargs = {});
  Workspace& workspace() { return ws_; }
  // First timestep produced by the latest rollout (0 or 1).
  int64_t first_new_step() const { return carried_ ? 1 : 0; }
  // Environment steps taken by the latest rollout.
  int64_t new_env_steps() const;
  // Return of every episode that finished in the latest rollout.
  std::vector<double> finished_returns() const;
  const AgentPtr& acquisition_agent() const { return acquisition_; }

 private:
  AgentPtr acquisition_;
  int64_t n_steps_;
  std::optional<Remote> remote_;
  Workspace ws_;
  bool carried_ = false;
  bool started_ = false;
};

struct WindowMean {
  double value = 0.0;    // best mean over `window` consecutive episodes
  int64_t step = 0;      // global step when that window closed
  std::optional<int64_t> first_reaching;  // first global step the mean hit the threshold
};

// ---- trainers --------------------------------------------------------------

struct TrainResult {
  MetricLog log;
  std::vector<double> episode_returns;  // in completion order
  std::vector<int64_t> episode_steps;   // global step at which each finished
  AgentPtr policy;
  AgentPtr critic;
  std::vector<double> eval_returns;  // greedy evaluation after training
  double agreement = 0.0;            // behavioral cloning only
  std::vector<AgentPtr> policies;    // demos: every trained controller
};

// loss = -sum_t mask_t * log pi(a_t|s_t) * G_t with within-rollout returns
// that stop at episode ends; terminal-step actions are masked out.
TrainResult train_reinforce(const TrainConfig& cfg);
// Policy and critic are replayed over each acquired workspace.
TrainResult train_a2c(const TrainConfig& cfg);
// Epsilon-greedy acquisition into a replay buffer of length-2 windows.
TrainResult train_double_dqn(const TrainConfig& cfg);
// Replays the policy over recorded trajectories; loss is the cross entropy of
// the stored actions over non-terminal steps.
TrainResult train_bc(const TrainConfig& cfg, const std::filesystem::path& dataset);

// Differentiable-environment demos. Loss is -sum_t mean_b env/reward.
TrainResult demo_model_based(const TrainConfig& cfg, bool train_dynamics = false);
TrainResult demo_multi_agent(const TrainConfig& cfg, bool freeze_second = false);

// Scans consecutive windows of finished episodes. Empty input gives a zero
// value; fewer than `window` episodes form a single window.
WindowMean best_window_mean(const TrainResult& result, size_t window, double threshold);

// Environment used by the trainers (auto-reset), n_envs items.
std::shared_ptr<EnvAgent> make_env_agent(const std::string& env, int64_t n_envs, bool auto_reset = true);

// Greedy episodes (stochastic=false, epsilon=0) from fresh environments;
// returns each episode's total reward.
std::vector<double> evaluate_greedy(const AgentPtr& policy, const std::string& env, int64_t episodes, uint64_t seed,
                                    int64_t max_steps = 1000);

// One trajectory per episode, recorded with `policy` ("expert" or "random").
std::vector<Workspace> record_episodes(const std::string& env, const std::string& policy, int64_t episodes,
                                       uint64_t seed, int64_t max_steps = 1000);

// Fraction of non-terminal dataset steps where the policy's most probable
// action equals the stored one.
double action_agreement(const AgentPtr& policy, const std::vector<Workspace>& trajectories);

struct ThroughputSample {
  int64_t processes = 0;
  double steps_per_second = 0.0;
};

// Random-policy acquisition on cfg.env with cfg.n_envs environments per worker
// and rollouts of cfg.n_steps, timed over `rollouts` rollouts per worker count.
std::vector<ThroughputSample> bench_parallel(const TrainConfig& cfg, const std::vector<int64_t>& processes,
                                             int64_t rollouts);

}  // namespace wsrl
