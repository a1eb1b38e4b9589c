#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wsrl/agent.hpp"

namespace wsrl {

// One discrete-action environment instance.
class EnvCore {
 public:
  struct Transition {
    std::vector<float> obs;
    float reward = 0.0f;
    bool done = false;
  };

  virtual ~EnvCore() = default;
  virtual std::string name() const = 0;
  virtual int64_t obs_dim() const = 0;
  virtual int64_t num_actions() const = 0;
  virtual std::vector<float> reset(std::mt19937_64& rng) = 0;
  // action is in [0, num_actions()).
  virtual Transition step(int64_t action) = 0;
  virtual std::unique_ptr<EnvCore> clone() const = 0;
};

// 3x3 grid, start (0,0), goal (2,2). Actions 0=up 1=down 2=left 3=right; moves
// into a wall leave the agent in place. Reward -1 per step, +10 on the step
// that reaches the goal. Observation is the one-hot cell index (row * 3 + col).
class GridWorld : public EnvCore {
 public:
  static constexpr int64_t kSize = 3;
  static constexpr float kGoalReward = 10.0f;
  static constexpr float kStepReward = -1.0f;

  explicit GridWorld(int64_t max_steps = 20, bool random_start = false)
      : max_steps_(max_steps), random_start_(random_start) {}

  std::string name() const override { return "gridworld"; }
  int64_t obs_dim() const override { return kSize * kSize; }
  int64_t num_actions() const override { return 4; }
  std::vector<float> reset(std::mt19937_64& rng) override;
  Transition step(int64_t action) override;
  std::unique_ptr<EnvCore> clone() const override { return std::make_unique<GridWorld>(*this); }

  int64_t row() const { return row_; }
  int64_t col() const { return col_; }
  // Cell of a one-hot observation.
  static int64_t cell_of(std::span<const float> obs);

 private:
  std::vector<float> observe() const;

  int64_t max_steps_;
  bool random_start_;
  int64_t row_ = 0, col_ = 0, steps_ = 0;
};

// Classic cart-pole with explicit Euler integration (dt = 0.02). Episodes end
// when |theta| > 12 degrees, |x| > 2.4, or after max_steps steps; reward 1 per
// step. Observation (x, x_dot, theta, theta_dot).
class CartPole : public EnvCore {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kDt = 0.02;
  static constexpr double kThetaLimit = 12.0 * 3.14159265358979323846 / 180.0;
  static constexpr double kXLimit = 2.4;

  explicit CartPole(int64_t max_steps = 200) : max_steps_(max_steps) {}

  std::string name() const override { return "cartpole"; }
  int64_t obs_dim() const override { return 4; }
  int64_t num_actions() const override { return 2; }
  std::vector<float> reset(std::mt19937_64& rng) override;
  Transition step(int64_t action) override;
  std::unique_ptr<EnvCore> clone() const override { return std::make_unique<CartPole>(*this); }

  void set_state(double x, double x_dot, double theta, double theta_dot);
  std::array<double, 4> state() const { return {x_, x_dot_, theta_, theta_dot_}; }

 private:
  std::vector<float> observe() const;

  int64_t max_steps_;
  double x_ = 0, x_dot_ = 0, theta_ = 0, theta_dot_ = 0;
  int64_t steps_ = 0;
};

// Sleeps for a fixed time per step; never terminates. Used for throughput
// measurements.
class SleepEnv : public EnvCore {
 public:
  explicit SleepEnv(int64_t micros = 1000) : micros_(micros) {}

  std::string name() const override { return "sleep"; }
  int64_t obs_dim() const override { return 1; }
  int64_t num_actions() const override { return 2; }
  std::vector<float> reset(std::mt19937_64& rng) override;
  Transition step(int64_t action) override;
  std::unique_ptr<EnvCore> clone() const override { return std::make_unique<SleepEnv>(*this); }

 private:
  int64_t micros_;
  int64_t steps_ = 0;
};

// Known names: gridworld, gridworld-random-start, cartpole, sleep.
std::unique_ptr<EnvCore> make_env_core(const std::string& name);

// A batch of environments writing, at every executed t:
//   env/env_obs [B, obs_dim], env/reward, env/done, env/timestep,
//   env/initial_state, env/cumulated_reward (all [B]).
// At t = 0 every item is reset. At t > 0 the agent reads action@t-1 ([B]).
// Without auto-reset a finished item repeats its last observation with reward
// 0 and done = 1; with auto-reset it is reset on the following step.
class EnvAgent : public TAgent {
 public:
  EnvAgent(const EnvCore& prototype, int64_t n_envs, bool auto_reset, std::string action_var = "action");

  int64_t n_envs() const { return static_cast<int64_t>(cores_.size()); }
  int64_t obs_dim() const { return cores_.front()->obs_dim(); }
  int64_t num_actions() const { return cores_.front()->num_actions(); }
  const EnvCore& core(int64_t i) const { return *cores_.at(static_cast<size_t>(i)); }

 protected:
  void step(int64_t t, const KwArgs& kwargs) override;

 private:
  struct ItemState {
    std::vector<float> obs;
    float cumulated = 0.0f;
    int64_t timestep = 0;
    bool done = false;
  };

  void reset_item(size_t b, float& reward);
  void write(int64_t t, const std::vector<float>& rewards, const std::vector<bool>& initial);

  std::vector<std::unique_ptr<EnvCore>> cores_;
  std::vector<ItemState> items_;
  bool auto_reset_;
  std::string action_var_;
};

// Differentiable linear environment: s' = s·A + sum_i a_i·B_i and
// reward = -||s'||^2, with A [d,d], B_i [k_i,d]. The previous state is read
// back from env/env_obs@t-1, so gradients flow through the whole unroll into
// the actions and into A and B_i. Writes the same six env/* variables as
// EnvAgent; done is always 0.
class DiffEnvAgent : public TAgent {
 public:
  DiffEnvAgent(Tensor a, std::vector<Tensor> bs, Tensor initial_state, std::vector<std::string> action_vars = {"action"});
  // A near the identity, small random B, uniform initial state in [-1, 1].
  static std::shared_ptr<DiffEnvAgent> make(int64_t state_dim, std::vector<int64_t> action_dims, int64_t n_envs,
                                            uint64_t init_seed, std::vector<std::string> action_vars = {"action"});

  std::vector<Tensor> parameters() const override;
  Tensor& dynamics() { return a_; }
  std::vector<Tensor>& controls() { return bs_; }
  const Tensor& initial_state() const { return s0_; }

 protected:
  void step(int64_t t, const KwArgs& kwargs) override;

 private:
  Tensor a_;
  std::vector<Tensor> bs_;
  Tensor s0_;
  std::vector<std::string> action_vars_;
};

// Writes data/x [B, ...] and data/y [B] at the executed t, one batch per call.
// Items are drawn from a stream of shuffled epochs (agent generator). With
// wrap, a batch that crosses an epoch boundary continues into the next
// permutation; without wrap, the tail of an epoch is dropped. Batches are never
// short.
class DataLoaderAgent : public TAgent {
 public:
  DataLoaderAgent(Tensor x, Tensor y, int64_t batch_size, bool wrap = true);

  // Also restarts the item stream.
  void seed(uint64_t seed) override;
  int64_t epoch() const { return epoch_; }

 protected:
  void step(int64_t t, const KwArgs& kwargs) override;

 private:
  void reshuffle();

  Tensor x_, y_;
  int64_t batch_size_;
  bool wrap_;
  std::vector<int64_t> order_;
  size_t cursor_ = 0;
  int64_t epoch_ = 0;
};

}  // namespace wsrl
