#include "wsrl/envs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "wsrl/errors.hpp"
#include "wsrl/nn.hpp"

namespace wsrl {

std::vector<float> GridWorld::reset(std::mt19937_64& rng) {
  row_ = col_ = steps_ = 0;
  if (random_start_) {
    // Any cell but the goal.
    const auto cell = std::uniform_int_distribution<int64_t>(0, kSize * kSize - 2)(rng);
    row_ = cell / kSize;
    col_ = cell % kSize;
  }
  return observe();
}

EnvCore::Transition GridWorld::step(int64_t action) {
  switch (action) {
    case 0: row_ = std::max<int64_t>(row_ - 1, 0); break;
    case 1: row_ = std::min<int64_t>(row_ + 1, kSize - 1); break;
    case 2: col_ = std::max<int64_t>(col_ - 1, 0); break;
    case 3: col_ = std::min<int64_t>(col_ + 1, kSize - 1); break;
    default: throw ActionSpaceError("gridworld: action " + std::to_string(action) + " not in [0, 4)");
  }
  ++steps_;
  const bool at_goal = row_ == kSize - 1 && col_ == kSize - 1;
  return {observe(), at_goal ? kGoalReward : kStepReward, at_goal || steps_ >= max_steps_};
}

std::vector<float> GridWorld::observe() const {
  std::vector<float> obs(static_cast<size_t>(kSize * kSize), 0.0f);
  obs[static_cast<size_t>(row_ * kSize + col_)] = 1.0f;
  return obs;
}

int64_t GridWorld::cell_of(std::span<const float> obs) {
  return std::max_element(obs.begin(), obs.end()) - obs.begin();
}

std::vector<float> CartPole::reset(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  x_ = u(rng);
  x_dot_ = u(rng);
  theta_ = u(rng);
  theta_dot_ = u(rng);
  steps_ = 0;
  return observe();
}

EnvCore::Transition CartPole::step(int64_t action) {
  if (action != 0 && action != 1) throw ActionSpaceError("cartpole: action " + std::to_string(action) + " not in [0, 2)");
  constexpr double total_mass = kMassCart + kMassPole;
  constexpr double pole_mass_length = kMassPole * kHalfLength;
  const double force = action == 1 ? kForce : -kForce;
  const double cos_t = std::cos(theta_), sin_t = std::sin(theta_);
  const double temp = (force + pole_mass_length * theta_dot_ * theta_dot_ * sin_t) / total_mass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) / (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;
  x_ += kDt * x_dot_;
  x_dot_ += kDt * x_acc;
  theta_ += kDt * theta_dot_;
  theta_dot_ += kDt * theta_acc;
  ++steps_;
  const bool fell = std::abs(x_) > kXLimit || std::abs(theta_) > kThetaLimit;
  return {observe(), 1.0f, fell || steps_ >= max_steps_};
}

void CartPole::set_state(double x, double x_dot, double theta, double theta_dot) {
  x_ = x;
  x_dot_ = x_dot;
  theta_ = theta;
  theta_dot_ = theta_dot;
}

std::vector<float> CartPole::observe() const {
  return {static_cast<float>(x_), static_cast<float>(x_dot_), static_cast<float>(theta_),
          static_cast<float>(theta_dot_)};
}

std::vector<float> SleepEnv::reset(std::mt19937_64&) {
  steps_ = 0;
  return {0.0f};
}

EnvCore::Transition SleepEnv::step(int64_t action) {
  if (action != 0 && action != 1) throw ActionSpaceError("sleep: action " + std::to_string(action) + " not in [0, 2)");
  std::this_thread::sleep_for(std::chrono::microseconds(micros_));
  ++steps_;
  return {{static_cast<float>(steps_ % 2)}, 0.0f, false};
}

std::unique_ptr<EnvCore> make_env_core(const std::string& name) {
  if (name == "gridworld") return std::make_unique<GridWorld>();
  if (name == "gridworld-random-start") return std::make_unique<GridWorld>(20, true);
  if (name == "cartpole") return std::make_unique<CartPole>();
  if (name == "sleep") return std::make_unique<SleepEnv>();
  throw EnvError("unknown environment '" + name + "' (expected gridworld, gridworld-random-start, cartpole or sleep)");
}

EnvAgent::EnvAgent(const EnvCore& prototype, int64_t n_envs, bool auto_reset, std::string action_var)
    : TAgent(prototype.name()), auto_reset_(auto_reset), action_var_(std::move(action_var)) {
  if (n_envs < 1) throw EnvError("EnvAgent needs n_envs >= 1, got " + std::to_string(n_envs));
  for (int64_t i = 0; i < n_envs; ++i) cores_.push_back(prototype.clone());
  items_.resize(static_cast<size_t>(n_envs));
}

void EnvAgent::reset_item(size_t b, float& reward) {
  items_[b] = ItemState{cores_[b]->reset(rng()), 0.0f, 0, false};
  reward = 0.0f;
}

void EnvAgent::step(int64_t t, const KwArgs&) {
  const size_t n = cores_.size();
  std::vector<float> rewards(n, 0.0f);
  std::vector<bool> initial(n, false);
  if (t == 0) {
    for (size_t b = 0; b < n; ++b) {
      reset_item(b, rewards[b]);
      initial[b] = true;
    }
    write(t, rewards, initial);
    return;
  }

  const Tensor action = get(action_var_, t - 1);
  if (action.shape() != Shape{static_cast<int64_t>(n)}) {
    throw ActionSpaceError(name() + ": expected " + action_var_ + " of shape [" + std::to_string(n) + "], got " +
                           shape_str(action.shape()));
  }
  std::vector<int64_t> actions(n);
  for (size_t b = 0; b < n; ++b) {
    const float a = action.data()[b];
    const float r = std::round(a);
    if (!std::isfinite(a) || r < 0.0f || r >= static_cast<float>(num_actions())) {
      throw ActionSpaceError(name() + ": action " + std::to_string(a) + " for item " + std::to_string(b) +
                             " not in [0, " + std::to_string(num_actions()) + ")");
    }
    actions[b] = static_cast<int64_t>(r);
  }

  for (size_t b = 0; b < n; ++b) {
    ItemState& item = items_[b];
    if (item.done) {
      if (auto_reset_) {
        reset_item(b, rewards[b]);
        initial[b] = true;
      }
      continue;  // frozen terminal: same observation, reward 0, done stays set
    }
    EnvCore::Transition tr = cores_[b]->step(actions[b]);
    item.obs = std::move(tr.obs);
    item.cumulated += tr.reward;
    item.timestep += 1;
    item.done = tr.done;
    rewards[b] = tr.reward;
  }
  write(t, rewards, initial);
}

void EnvAgent::write(int64_t t, const std::vector<float>& rewards, const std::vector<bool>& initial) {
  const auto n = static_cast<int64_t>(cores_.size());
  const int64_t d = obs_dim();
  Tensor obs = Tensor::zeros({n, d});
  Tensor reward = Tensor::zeros({n}), done = Tensor::zeros({n}), timestep = Tensor::zeros({n});
  Tensor init = Tensor::zeros({n}), cumulated = Tensor::zeros({n});
  auto o = obs.mutable_data();
  for (int64_t b = 0; b < n; ++b) {
    const ItemState& item = items_[static_cast<size_t>(b)];
    std::copy(item.obs.begin(), item.obs.end(), o.begin() + b * d);
    reward.mutable_data()[b] = rewards[static_cast<size_t>(b)];
    done.mutable_data()[b] = item.done ? 1.0f : 0.0f;
    timestep.mutable_data()[b] = static_cast<float>(item.timestep);
    init.mutable_data()[b] = initial[static_cast<size_t>(b)] ? 1.0f : 0.0f;
    cumulated.mutable_data()[b] = item.cumulated;
  }
  set("env/env_obs", t, obs);
  set("env/reward", t, reward);
  set("env/done", t, done);
  set("env/timestep", t, timestep);
  set("env/initial_state", t, init);
  set("env/cumulated_reward", t, cumulated);
}

DiffEnvAgent::DiffEnvAgent(Tensor a, std::vector<Tensor> bs, Tensor initial_state, std::vector<std::string> action_vars)
    : TAgent("diff_env"),
      a_(std::move(a)),
      bs_(std::move(bs)),
      s0_(initial_state.detach()),
      action_vars_(std::move(action_vars)) {
  if (a_.dim() != 2 || a_.size(0) != a_.size(1)) throw ShapeError("DiffEnvAgent: A must be square, got " + shape_str(a_.shape()));
  if (bs_.size() != action_vars_.size()) throw EnvError("DiffEnvAgent: one control matrix per action variable");
  for (const auto& b : bs_) {
    if (b.dim() != 2 || b.size(1) != a_.size(0)) {
      throw ShapeError("DiffEnvAgent: control matrix " + shape_str(b.shape()) + " does not match A " +
                       shape_str(a_.shape()));
    }
  }
  if (s0_.dim() != 2 || s0_.size(1) != a_.size(0)) {
    throw ShapeError("DiffEnvAgent: initial state " + shape_str(s0_.shape()) + " does not match A " +
                     shape_str(a_.shape()));
  }
}

std::shared_ptr<DiffEnvAgent> DiffEnvAgent::make(int64_t state_dim, std::vector<int64_t> action_dims, int64_t n_envs,
                                                 uint64_t init_seed, std::vector<std::string> action_vars) {
  std::mt19937_64 gen(init_seed);
  Tensor a = nn::uniform({state_dim, state_dim}, 0.05f, gen);
  for (int64_t i = 0; i < state_dim; ++i) a.mutable_data()[i * state_dim + i] += 1.0f;
  std::vector<Tensor> bs;
  for (int64_t k : action_dims) bs.push_back(nn::uniform({k, state_dim}, 0.5f, gen));
  Tensor s0 = nn::uniform({n_envs, state_dim}, 1.0f, gen);
  a.set_requires_grad(true);
  for (auto& b : bs) b.set_requires_grad(true);
  return std::make_shared<DiffEnvAgent>(a, bs, s0, std::move(action_vars));
}

std::vector<Tensor> DiffEnvAgent::parameters() const {
  std::vector<Tensor> out{a_};
  out.insert(out.end(), bs_.begin(), bs_.end());
  return out;
}

void DiffEnvAgent::step(int64_t t, const KwArgs&) {
  const int64_t n = s0_.size(0);
  if (t == 0) {
    set("env/env_obs", t, s0_);
    set("env/reward", t, Tensor::zeros({n}));
    set("env/cumulated_reward", t, Tensor::zeros({n}));
    set("env/initial_state", t, Tensor::ones({n}));
  } else {
    Tensor s = matmul(get("env/env_obs", t - 1), a_);
    for (size_t i = 0; i < bs_.size(); ++i) {
      const Tensor action = get(action_vars_[i], t - 1);
      if (action.dim() != 2 || action.size(1) != bs_[i].size(0)) {
        throw ActionSpaceError("diff_env: " + action_vars_[i] + " has shape " + shape_str(action.shape()) +
                               ", expected [B," + std::to_string(bs_[i].size(0)) + "]");
      }
      s = add(s, matmul(action, bs_[i]));
    }
    const Tensor reward = neg(sum_last(square(s)));
    set("env/env_obs", t, s);
    set("env/reward", t, reward);
    set("env/cumulated_reward", t, add(get("env/cumulated_reward", t - 1), reward));
    set("env/initial_state", t, Tensor::zeros({n}));
  }
  set("env/done", t, Tensor::zeros({n}));
  set("env/timestep", t, Tensor::full({n}, static_cast<float>(t)));
}

DataLoaderAgent::DataLoaderAgent(Tensor x, Tensor y, int64_t batch_size, bool wrap)
    : TAgent("data_loader"), x_(x.detach()), y_(y.detach()), batch_size_(batch_size), wrap_(wrap) {
  if (x_.dim() < 1 || x_.size(0) == 0) throw EnvError("DataLoaderAgent: empty dataset");
  if (y_.shape() != Shape{x_.size(0)}) {
    throw ShapeError("DataLoaderAgent: labels " + shape_str(y_.shape()) + " do not match inputs " +
                     shape_str(x_.shape()));
  }
  if (batch_size_ < 1) throw EnvError("DataLoaderAgent: batch size must be >= 1");
  if (!wrap_ && batch_size_ > x_.size(0)) {
    throw EnvError("DataLoaderAgent: batch size " + std::to_string(batch_size_) + " exceeds dataset size " +
                   std::to_string(x_.size(0)) + " and wrap is disabled");
  }
}

void DataLoaderAgent::seed(uint64_t seed) {
  Agent::seed(seed);
  order_.clear();
  cursor_ = 0;
  epoch_ = 0;
}

void DataLoaderAgent::reshuffle() {
  order_.resize(static_cast<size_t>(x_.size(0)));
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int64_t>(i);
  std::shuffle(order_.begin(), order_.end(), rng());
  cursor_ = 0;
}

void DataLoaderAgent::step(int64_t t, const KwArgs&) {
  if (order_.empty()) reshuffle();
  const auto b = static_cast<size_t>(batch_size_);
  if (!wrap_ && cursor_ + b > order_.size()) {
    reshuffle();
    ++epoch_;
  }
  std::vector<int64_t> rows;
  while (rows.size() < b) {
    if (cursor_ == order_.size()) {
      reshuffle();
      ++epoch_;
    }
    rows.push_back(order_[cursor_++]);
  }
  set("data/x", t, index_rows(x_, rows));
  set("data/y", t, index_rows(y_, rows));
}

}  // namespace wsrl
