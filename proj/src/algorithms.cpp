#include "wsrl/algorithms.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <numeric>

#include "wsrl/optim.hpp"
#include "wsrl/policies.hpp"
#include "wsrl/replay.hpp"
#include "wsrl/workspace_io.hpp"

namespace wsrl {

// ---- metric log ------------------------------------------------------------

MetricLog::MetricLog(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
  if (!*out_) throw Error("cannot open metric log " + path.string());
}

std::string MetricLog::to_json_line(const MetricRecord& r) {
  nlohmann::ordered_json j;
  j["global_step"] = r.global_step;
  j["episode_return_mean"] = r.episode_return_mean ? nlohmann::ordered_json(*r.episode_return_mean) : nullptr;
  j["episode_return_max"] = r.episode_return_max ? nlohmann::ordered_json(*r.episode_return_max) : nullptr;
  nlohmann::ordered_json losses = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.losses) losses[k] = v;
  j["losses"] = std::move(losses);
  j["wallclock"] = r.wallclock;
  return j.dump();
}

void MetricLog::append(const MetricRecord& record) {
  if (!records_.empty() && record.global_step < records_.back().global_step) {
    throw Error("metric log: global_step decreased from " + std::to_string(records_.back().global_step) + " to " +
                std::to_string(record.global_step));
  }
  records_.push_back(record);
  if (out_) {
    *out_ << to_json_line(record) << '\n';
    out_->flush();
  }
}

// ---- loss helpers ----------------------------------------------------------

Tensor discounted_returns(const Tensor& rewards, const Tensor& continues, double gamma) {
  if (rewards.dim() != 2 || rewards.shape() != continues.shape()) {
    throw ShapeError("discounted_returns: expected matching [T,B] rewards and continuation flags, got " +
                     shape_str(rewards.shape()) + " and " + shape_str(continues.shape()));
  }
  const int64_t steps = rewards.size(0), batch = rewards.size(1);
  Tensor out = Tensor::zeros(rewards.shape());
  auto g = out.mutable_data();
  const auto r = rewards.data();
  const auto c = continues.data();
  for (int64_t b = 0; b < batch; ++b) {
    double running = 0.0;
    for (int64_t t = steps - 1; t >= 0; --t) {
      const auto i = static_cast<size_t>(t * batch + b);
      running = r[i] + gamma * c[i] * running;
      g[i] = static_cast<float>(running);
    }
  }
  return out;
}

Tensor a2c_advantage(const Tensor& next_reward, const Tensor& next_done, const Tensor& value,
                     const Tensor& next_value, double gamma) {
  const Tensor keep = add_scalar(neg(next_done.detach()), 1.0f);
  const Tensor target = add(next_reward.detach(), mul_scalar(mul(keep, next_value.detach()), static_cast<float>(gamma)));
  return sub(target, value);
}

Tensor double_dqn_target(const Tensor& reward, const Tensor& done, const Tensor& q_online_next,
                         const Tensor& q_target_next, double gamma) {
  const Tensor best = argmax_last(q_online_next.detach());
  const Tensor bootstrap = gather(q_target_next.detach(), best);
  const Tensor keep = add_scalar(neg(done.detach()), 1.0f);
  return add(reward.detach(), mul_scalar(mul(keep, bootstrap), static_cast<float>(gamma))).detach();
}

namespace {

// Stacks var@t for t in [t0, t1) into [t1 - t0, B, ...].
Tensor stack_steps(const Workspace& ws, const std::string& name, int64_t t0, int64_t t1) {
  std::vector<Tensor> parts;
  for (int64_t t = t0; t < t1; ++t) parts.push_back(ws.get(name, t));
  return stack(parts);
}

Tensor one_minus(const Tensor& x) { return add_scalar(neg(x.detach()), 1.0f); }

struct RolloutTerms {
  Tensor logp, next_reward, next_done, mask;
  float scale;
};

// Action at t is credited with the reward observed at t + 1. Actions taken on
// terminal observations are discarded by the environment and masked out.
RolloutTerms rollout_terms(const Workspace& ws, int64_t t0) {
  const int64_t n = ws.time_size("env/reward");
  if (t0 < 0 || t0 + 2 > n) {
    throw RangeError("loss window starting at " + std::to_string(t0) + " needs two timesteps, trace has " +
                     std::to_string(n));
  }
  RolloutTerms r;
  r.logp = stack_steps(ws, "action_logp", t0, n - 1);
  r.next_reward = stack_steps(ws, "env/reward", t0 + 1, n).detach();
  r.next_done = stack_steps(ws, "env/done", t0 + 1, n).detach();
  r.mask = one_minus(stack_steps(ws, "env/done", t0, n - 1));
  r.scale = 1.0f / static_cast<float>(r.logp.numel());
  return r;
}

void add_entropy_bonus(const Workspace& ws, int64_t t0, const RolloutTerms& r, double coef, LossTerms& out) {
  if (!ws.has("action_entropy")) return;
  const int64_t n = ws.time_size("env/reward");
  const Tensor entropy = mul_scalar(sum(mul(r.mask, stack_steps(ws, "action_entropy", t0, n - 1))), r.scale);
  out.terms["entropy"] = entropy.item();
  if (coef > 0.0) out.loss = sub(out.loss, mul_scalar(entropy, static_cast<float>(coef)));
}

}  // namespace

LossTerms reinforce_loss(const Workspace& ws, int64_t t0, double gamma, double entropy_coef) {
  const RolloutTerms r = rollout_terms(ws, t0);
  const int64_t n = ws.time_size("env/reward");
  const Tensor continues = mul(one_minus(r.next_done), one_minus(stack_steps(ws, "env/initial_state", t0 + 1, n)));
  const Tensor returns = discounted_returns(r.next_reward, continues, gamma);
  LossTerms out;
  out.loss = mul_scalar(neg(sum(mul(mul(r.mask, returns), r.logp))), r.scale);
  out.terms["policy"] = out.loss.item();
  add_entropy_bonus(ws, t0, r, entropy_coef, out);
  return out;
}

LossTerms a2c_loss(const Workspace& ws, int64_t t0, double gamma, double entropy_coef, double critic_coef) {
  const RolloutTerms r = rollout_terms(ws, t0);
  const int64_t n = ws.time_size("env/reward");
  const Tensor value = stack_steps(ws, "critic", t0, n - 1);
  const Tensor next_value = stack_steps(ws, "critic", t0 + 1, n);
  const Tensor advantage = a2c_advantage(r.next_reward, r.next_done, value, next_value, gamma);
  const Tensor policy_loss = mul_scalar(neg(sum(mul(mul(r.mask, advantage.detach()), r.logp))), r.scale);
  const Tensor critic_loss = mul_scalar(sum(mul(r.mask, square(advantage))), r.scale);
  LossTerms out;
  out.loss = add(policy_loss, mul_scalar(critic_loss, static_cast<float>(critic_coef)));
  out.terms["policy"] = policy_loss.item();
  out.terms["critic"] = critic_loss.item();
  add_entropy_bonus(ws, t0, r, entropy_coef, out);
  return out;
}

LossTerms double_dqn_loss(const Workspace& batch, double gamma) {
  const Tensor y = double_dqn_target(batch.get("env/reward", 1), batch.get("env/done", 1), batch.get("q", 1),
                                     batch.get("target_q", 1), gamma);
  const Tensor predicted = gather(batch.get("q", 0), batch.get("action", 0));
  const Tensor mask = one_minus(batch.get("env/done", 0));
  LossTerms out;
  out.loss = mul_scalar(sum(mul(mask, square(sub(predicted, y)))), 1.0f / static_cast<float>(y.numel()));
  out.terms["td"] = out.loss.item();
  return out;
}

// ---- acquisition -----------------------------------------------------------

RolloutCollector::RolloutCollector(AgentPtr env, AgentPtr policy, int64_t n_steps, int64_t num_processes,
                                   uint64_t seed)
    : acquisition_(temporal(sequential({std::move(env), std::move(policy)}))), n_steps_(n_steps) {
  if (n_steps < 2) throw KwArgError("rollouts need at least 2 timesteps, got " + std::to_string(n_steps));
  acquisition_->seed(seed);
  if (num_processes > 1) {
    NoGradGuard no_grad;
    remote_ = create_remote(acquisition_, num_processes, KwArgs{{"t", 0}, {"n_steps", n_steps}},
                            RemoteOptions{seed, n_steps});
  }
}

RolloutCollector::~RolloutCollector() {
  if (remote_ && remote_->agent) remote_->agent->close();
}

Workspace& RolloutCollector::collect(const KwArgs& kwargs) {
  carried_ = started_;
  const int64_t t0 = first_new_step();
  const KwArgs run = kwargs.with("t", t0).with("n_steps", n_steps_ - t0);
  if (remote_) {
    SharedWorkspace& sw = *remote_->workspace;
    if (carried_) {
      sw.copy_step_to_front(n_steps_ - 1);
    } else {
      sw.clear();
    }
    remote_execute(*remote_->agent, sw, run);
    ws_ = sw.snapshot();
  } else {
    NoGradGuard no_grad;
    if (carried_) {
      ws_ = ws_.last_steps(1);
    } else {
      ws_.clear();
    }
    acquisition_->execute(ws_, run);
  }
  started_ = true;
  return ws_;
}

int64_t RolloutCollector::new_env_steps() const { return ws_.batch_size() * (n_steps_ - 1); }

std::vector<double> RolloutCollector::finished_returns() const {
  std::vector<double> out;
  for (int64_t t = first_new_step(); t < n_steps_; ++t) {
    const Tensor done = ws_.get("env/done", t);
    const Tensor ret = ws_.get("env/cumulated_reward", t);
    for (int64_t b = 0; b < done.numel(); ++b) {
      if (done.data()[static_cast<size_t>(b)] > 0.5f) out.push_back(ret.data()[static_cast<size_t>(b)]);
    }
  }
  return out;
}

// ---- shared trainer plumbing -----------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

class Progress {
 public:
  Progress(const TrainConfig& cfg, TrainResult& result)
      : cfg_(cfg), result_(result), start_(Clock::now()) {
    if (!cfg.log_path.empty()) result_.log = MetricLog(cfg.log_path);
  }

  void episodes(const std::vector<double>& returns, int64_t global_step) {
    pending_.insert(pending_.end(), returns.begin(), returns.end());
    for (double r : returns) {
      result_.episode_returns.push_back(r);
      result_.episode_steps.push_back(global_step);
    }
  }

  void record(int64_t global_step, std::map<std::string, double> losses) {
    MetricRecord r;
    r.global_step = global_step;
    if (!pending_.empty()) {
      r.episode_return_mean = std::accumulate(pending_.begin(), pending_.end(), 0.0) / static_cast<double>(pending_.size());
      r.episode_return_max = *std::max_element(pending_.begin(), pending_.end());
    }
    pending_.clear();
    r.losses = std::move(losses);
    if (cfg_.log_wallclock) r.wallclock = std::chrono::duration<double>(Clock::now() - start_).count();
    result_.log.append(r);
  }

 private:
  const TrainConfig& cfg_;
  TrainResult& result_;
  Clock::time_point start_;
  std::vector<double> pending_;
};

void optimize(Optimizer& opt, std::vector<Tensor>& params, const Tensor& loss, double max_grad_norm) {
  zero_grad(params);
  backward(loss);
  if (max_grad_norm > 0.0) clip_grad_norm(params, static_cast<float>(max_grad_norm));
  opt.step(params);
}

struct EnvSpec {
  int64_t obs_dim;
  int64_t n_actions;
};

EnvSpec env_spec(const std::string& env) {
  const auto core = make_env_core(env);
  return {core->obs_dim(), core->num_actions()};
}

void check_rollout_length(const TrainConfig& cfg) {
  if (cfg.n_steps < 2) throw ConfigError("algo.n_steps must be >= 2 for this trainer", 0);
}

// Rollouts that fit in the step budget; at least one.
int64_t rollout_count(const TrainConfig& cfg) {
  return std::max<int64_t>(1, cfg.total_steps / (cfg.n_envs * (cfg.n_steps - 1)));
}

TrainResult train_policy_gradient(const TrainConfig& cfg, bool actor_critic) {
  cfg.validate();
  check_rollout_length(cfg);
  const EnvSpec spec = env_spec(cfg.env);
  TrainResult result;
  Progress progress(cfg, result);

  const AgentPtr policy = make_policy(cfg, spec.obs_dim, spec.n_actions, cfg.seed + 1000);
  AgentPtr critic;
  if (actor_critic) critic = std::make_shared<CriticAgent>(spec.obs_dim, cfg.hidden, cfg.seed + 2000);
  result.policy = policy;
  result.critic = critic;

  RolloutCollector collector(make_env_agent(cfg.env, cfg.n_envs / cfg.num_processes), policy, cfg.n_steps,
                             cfg.num_processes, cfg.seed);
  const AgentPtr replay_policy = temporal(policy);
  const AgentPtr replay_critic = critic ? temporal(critic) : nullptr;
  std::vector<Tensor> params = policy->parameters();
  if (critic) append_unique(params, critic->parameters());
  Optimizer opt = Optimizer::adam(static_cast<float>(cfg.learning_rate));

  const int64_t n = cfg.n_steps;
  int64_t global_step = 0;
  for (int64_t it = 0, iterations = rollout_count(cfg); it < iterations; ++it) {
    Workspace& ws = collector.collect();
    global_step += collector.new_env_steps();
    progress.episodes(collector.finished_returns(), global_step);

    const int64_t t0 = collector.first_new_step();
    replay(*replay_policy, ws, KwArgs{{"t", t0}, {"n_steps", n - t0}, {"replay", true}});
    if (replay_critic) replay(*replay_critic, ws, KwArgs{{"t", t0}, {"n_steps", n - t0}});

    LossTerms l = actor_critic ? a2c_loss(ws, t0, cfg.gamma, cfg.entropy_coef, cfg.critic_coef)
                               : reinforce_loss(ws, t0, cfg.gamma, cfg.entropy_coef);
    optimize(opt, params, l.loss, cfg.max_grad_norm);
    progress.record(global_step, std::move(l.terms));
  }
  return result;
}

}  // namespace

WindowMean best_window_mean(const TrainResult& result, size_t window, double threshold) {
  WindowMean out;
  const auto& r = result.episode_returns;
  if (r.empty() || window == 0) return out;
  const size_t w = std::min(window, r.size());
  double sum = std::accumulate(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(w), 0.0);
  bool first = true;
  for (size_t end = w;; ++end) {
    const double mean = sum / static_cast<double>(w);
    const int64_t step = result.episode_steps[end - 1];
    if (first || mean > out.value) {
      out.value = mean;
      out.step = step;
      first = false;
    }
    if (!out.first_reaching && mean >= threshold) out.first_reaching = step;
    if (end == r.size()) break;
    sum += r[end] - r[end - w];
  }
  return out;
}

std::shared_ptr<EnvAgent> make_env_agent(const std::string& env, int64_t n_envs, bool auto_reset) {
  const auto core = make_env_core(env);
  return std::make_shared<EnvAgent>(*core, n_envs, auto_reset);
}

TrainResult train_reinforce(const TrainConfig& cfg) { return train_policy_gradient(cfg, false); }

TrainResult train_a2c(const TrainConfig& cfg) { return train_policy_gradient(cfg, true); }

TrainResult train_double_dqn(const TrainConfig& cfg) {
  cfg.validate();
  check_rollout_length(cfg);
  const EnvSpec spec = env_spec(cfg.env);
  TrainResult result;
  Progress progress(cfg, result);

  auto online = std::make_shared<QAgent>(spec.obs_dim, spec.n_actions, cfg.hidden, cfg.seed + 1000);
  auto target = std::make_shared<QAgent>(spec.obs_dim, spec.n_actions, cfg.hidden, cfg.seed + 1000, "env/env_obs",
                                         "target_q");
  copy_parameters(*online, *target);
  result.policy = online;

  RolloutCollector collector(make_env_agent(cfg.env, cfg.n_envs / cfg.num_processes), online, cfg.n_steps,
                             cfg.num_processes, cfg.seed);
  ReplayBuffer buffer(cfg.replay_capacity, 2);
  const AgentPtr replay_online = temporal(online);
  std::vector<Tensor> params = online->parameters();
  Optimizer opt = Optimizer::adam(static_cast<float>(cfg.learning_rate));

  int64_t global_step = 0, updates = 0;
  for (int64_t it = 0, iterations = rollout_count(cfg); it < iterations; ++it) {
    const double progress_fraction =
        std::min(1.0, static_cast<double>(global_step) / static_cast<double>(cfg.epsilon_decay_steps));
    const double epsilon = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * progress_fraction;
    Workspace& ws = collector.collect(KwArgs{{"epsilon", epsilon}});
    global_step += collector.new_env_steps();
    progress.episodes(collector.finished_returns(), global_step);
    buffer.put(ws, 1);

    std::map<std::string, double> terms{{"epsilon", epsilon}};
    if (global_step < cfg.learning_starts) {
      progress.record(global_step, std::move(terms));
      continue;
    }
    double td_sum = 0.0;
    for (int64_t u = 0; u < cfg.updates_per_rollout; ++u) {
      Workspace batch = buffer.sample(cfg.batch_size, cfg.seed * 1000003 + static_cast<uint64_t>(updates));
      replay(*replay_online, batch, KwArgs{{"t", 0}, {"n_steps", 2}, {"replay", true}});
      {
        NoGradGuard no_grad;
        target->execute(batch, KwArgs{{"t", 1}, {"replay", true}});
      }
      const LossTerms l = double_dqn_loss(batch, cfg.gamma);
      optimize(opt, params, l.loss, cfg.max_grad_norm);
      td_sum += l.terms.at("td");
      ++updates;
      if (updates % cfg.target_update == 0) copy_parameters(*online, *target);
    }
    terms["td"] = td_sum / static_cast<double>(cfg.updates_per_rollout);
    progress.record(global_step, std::move(terms));
  }
  result.eval_returns = evaluate_greedy(online, cfg.env, cfg.eval_episodes, cfg.seed + 3000);
  return result;
}

TrainResult train_bc(const TrainConfig& cfg, const std::filesystem::path& dataset_path) {
  cfg.validate();
  const TrajectoryDataset dataset = TrajectoryDataset::load(dataset_path);
  if (dataset.size() == 0) throw FormatError("dataset " + dataset_path.string() + " holds no trajectories");
  const Workspace first = dataset.read_workspace(0);
  const Shape obs = first.item_shape("env/env_obs");
  if (obs.size() != 1) throw ShapeError("behavioral cloning expects vector observations, got " + shape_str(obs));
  const EnvSpec spec = env_spec(cfg.env);
  if (spec.obs_dim != obs[0]) {
    throw ShapeError("dataset observations have " + std::to_string(obs[0]) + " features but " + cfg.env + " has " +
                     std::to_string(spec.obs_dim));
  }

  TrainResult result;
  Progress progress(cfg, result);
  const AgentPtr policy = make_policy(cfg, spec.obs_dim, spec.n_actions, cfg.seed + 1000);
  result.policy = policy;
  const AgentPtr replay_policy = temporal(policy);
  std::vector<Tensor> params = policy->parameters();
  Optimizer opt = Optimizer::adam(static_cast<float>(cfg.learning_rate));
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<size_t> pick(0, dataset.size() - 1);
  const int64_t per_iteration = std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(dataset.size()));

  int64_t global_step = 0;
  for (int64_t it = 0; it < cfg.bc_iterations; ++it) {
    Tensor total = Tensor::scalar(0.0f);
    double count = 0.0;
    for (int64_t k = 0; k < per_iteration; ++k) {
      Workspace ws = dataset.read_workspace(pick(rng));
      const int64_t steps = ws.time_size();
      replay(*replay_policy, ws, KwArgs{{"t", 0}, {"n_steps", steps}, {"replay", true}});
      const Tensor mask = one_minus(ws.full("env/done"));
      const Tensor logp = stack_steps(ws, "action_logp", 0, steps);
      total = add(total, neg(sum(mul(mask, logp))));
      for (float m : mask.data()) count += m;
      global_step += ws.batch_size() * steps;
    }
    if (count == 0.0) throw FormatError("dataset holds no non-terminal steps");
    const Tensor loss = mul_scalar(total, static_cast<float>(1.0 / count));
    optimize(opt, params, loss, cfg.max_grad_norm);
    progress.record(global_step, {{"cross_entropy", loss.item()}});
  }
  result.agreement = action_agreement(policy, dataset.read_all());
  return result;
}

namespace {

Tensor rollout_cost(Agent& unrolled, int64_t n_steps) {
  Workspace ws;
  unrolled.execute(ws, KwArgs{{"t", 0}, {"n_steps", n_steps}});
  const Tensor reward = ws.full("env/reward");
  return mul_scalar(neg(sum(reward)), 1.0f / static_cast<float>(reward.size(1)));
}

TrainResult differentiable_demo(const TrainConfig& cfg, const std::shared_ptr<DiffEnvAgent>& env,
                                const std::vector<AgentPtr>& controllers, std::vector<Tensor> params) {
  cfg.validate();
  TrainResult result;
  Progress progress(cfg, result);
  result.policies = controllers;
  result.policy = controllers.front();
  std::vector<AgentPtr> members{env};
  members.insert(members.end(), controllers.begin(), controllers.end());
  const AgentPtr unrolled = temporal(sequential(members));
  Optimizer opt = Optimizer::adam(static_cast<float>(cfg.learning_rate));
  const int64_t per_iteration = cfg.n_envs * cfg.n_steps;
  const int64_t iterations = std::max<int64_t>(1, cfg.total_steps / per_iteration);
  // Every trainable tensor of the composition receives gradients; only
  // `params` are stepped.
  std::vector<Tensor> all = unrolled->parameters();
  for (int64_t it = 0; it < iterations; ++it) {
    const Tensor cost = rollout_cost(*unrolled, cfg.n_steps);
    zero_grad(all);
    backward(cost);
    if (cfg.max_grad_norm > 0.0) clip_grad_norm(params, static_cast<float>(cfg.max_grad_norm));
    opt.step(params);
    progress.episodes({-static_cast<double>(cost.item())}, (it + 1) * per_iteration);
    progress.record((it + 1) * per_iteration, {{"cost", cost.item()}});
  }
  return result;
}

}  // namespace

TrainResult demo_model_based(const TrainConfig& cfg, bool train_dynamics) {
  constexpr int64_t kStateDim = 4, kActionDim = 2;
  auto env = DiffEnvAgent::make(kStateDim, {kActionDim}, cfg.n_envs, cfg.seed);
  auto policy = std::make_shared<LinearPolicy>(kStateDim, kActionDim, cfg.seed + 1000);
  std::vector<Tensor> params = policy->parameters();
  if (train_dynamics) append_unique(params, env->parameters());
  return differentiable_demo(cfg, env, {policy}, params);
}

TrainResult demo_multi_agent(const TrainConfig& cfg, bool freeze_second) {
  constexpr int64_t kStateDim = 4;
  auto env = DiffEnvAgent::make(kStateDim, {1, 1}, cfg.n_envs, cfg.seed, {"action_1", "action_2"});
  auto first = std::make_shared<LinearPolicy>(kStateDim, 1, cfg.seed + 1000, "env/env_obs", "action_1");
  auto second = std::make_shared<LinearPolicy>(kStateDim, 1, cfg.seed + 2000, "env/env_obs", "action_2");
  std::vector<Tensor> params = first->parameters();
  if (!freeze_second) append_unique(params, second->parameters());
  return differentiable_demo(cfg, env, {first, second}, params);
}

// ---- evaluation and datasets -----------------------------------------------

namespace {

// Runs fresh environments without auto-reset until every item is done.
Workspace run_episodes(const std::string& env, const AgentPtr& policy, int64_t episodes, uint64_t seed,
                       int64_t max_steps, const KwArgs& kwargs) {
  const AgentPtr unrolled = temporal(sequential({make_env_agent(env, episodes, false), policy}));
  unrolled->seed(seed);
  Workspace ws;
  NoGradGuard no_grad;
  unrolled->execute(ws, kwargs.with("t", 0).with("n_steps", max_steps).with("stop_variable", "env/done"));
  return ws;
}

}  // namespace

std::vector<double> evaluate_greedy(const AgentPtr& policy, const std::string& env, int64_t episodes, uint64_t seed,
                                    int64_t max_steps) {
  const Workspace ws =
      run_episodes(env, policy, episodes, seed, max_steps, KwArgs{{"stochastic", false}, {"epsilon", 0.0}});
  const Tensor last = ws.get("env/cumulated_reward", ws.time_size() - 1);
  return {last.data().begin(), last.data().end()};
}

std::vector<Workspace> record_episodes(const std::string& env, const std::string& policy, int64_t episodes,
                                       uint64_t seed, int64_t max_steps) {
  AgentPtr actor;
  if (policy == "expert") {
    if (env.rfind("gridworld", 0) != 0) throw Error("the expert policy is defined for gridworld environments only");
    actor = std::make_shared<GridWorldExpert>();
  } else if (policy == "random") {
    actor = std::make_shared<RandomPolicy>(env_spec(env).n_actions);
  } else {
    throw Error("unknown recording policy '" + policy + "'");
  }
  const Workspace ws = run_episodes(env, actor, episodes, seed, max_steps, {});
  const Tensor done = ws.full("env/done");
  const int64_t steps = ws.time_size();
  std::vector<Workspace> out;
  for (int64_t b = 0; b < episodes; ++b) {
    int64_t length = steps;
    for (int64_t t = 0; t < steps; ++t) {
      if (done.data()[static_cast<size_t>(t * episodes + b)] > 0.5f) {
        length = t + 1;
        break;
      }
    }
    const int64_t row[] = {b};
    out.push_back(ws.subworkspace(row, 0, length));
  }
  return out;
}

double action_agreement(const AgentPtr& policy, const std::vector<Workspace>& trajectories) {
  const AgentPtr replay_policy = temporal(policy);
  NoGradGuard no_grad;
  int64_t matches = 0, total = 0;
  for (const auto& trajectory : trajectories) {
    Workspace ws = trajectory;
    const int64_t steps = ws.time_size();
    replay(*replay_policy, ws, KwArgs{{"t", 0}, {"n_steps", steps}, {"replay", true}});
    for (int64_t t = 0; t < steps; ++t) {
      const Tensor greedy = argmax_last(ws.get("action_probs", t));
      const Tensor stored = ws.get("action", t);
      const Tensor done = ws.get("env/done", t);
      for (int64_t b = 0; b < greedy.numel(); ++b) {
        const auto i = static_cast<size_t>(b);
        if (done.data()[i] > 0.5f) continue;
        ++total;
        if (greedy.data()[i] == stored.data()[i]) ++matches;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(total);
}

std::vector<ThroughputSample> bench_parallel(const TrainConfig& cfg, const std::vector<int64_t>& processes,
                                             int64_t rollouts) {
  std::vector<ThroughputSample> out;
  const int64_t n_actions = env_spec(cfg.env).n_actions;
  for (int64_t n : processes) {
    if (n < 1) throw ConfigError("process counts must be >= 1", 0);
    RolloutCollector collector(make_env_agent(cfg.env, cfg.n_envs), std::make_shared<RandomPolicy>(n_actions),
                               cfg.n_steps, n, cfg.seed);
    collector.collect();
    int64_t steps = 0;
    const auto start = Clock::now();
    for (int64_t r = 0; r < rollouts; ++r) {
      collector.collect();
      steps += collector.new_env_steps();
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    out.push_back({n, static_cast<double>(steps) / seconds});
  }
  return out;
}

}  // namespace wsrl
