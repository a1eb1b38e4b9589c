#pragma once

#include <cstdint>
#include <string>

#include "wsrl/agent.hpp"
#include "wsrl/config.hpp"
#include "wsrl/nn.hpp"

namespace wsrl {

// Categorical policy over an MLP. At t it reads input [B, in] and writes
//   <out> [B] sampled action (kwarg stochastic=false takes the argmax),
//   <out>_logp [B], <out>_probs [B, A], <out>_entropy [B].
// With kwarg replay=true the action already stored at t is kept and only its
// log-probability, the probabilities and the entropy are rewritten.
class CategoricalPolicy : public TAgent {
 public:
  CategoricalPolicy(int64_t in_dim, int64_t n_actions, int64_t hidden, uint64_t init_seed,
                    std::string input = "env/env_obs", std::string output = "action");

  std::vector<Tensor> parameters() const override { return net_.parameters(); }
  Tensor logits(const Tensor& x) const { return net_(x); }

 protected:
  void step(int64_t t, const KwArgs& kwargs) override;

 private:
  nn::Mlp net_;
  int64_t n_actions_;
  std::string input_, output_;
};

// Recurrent encoder: z_t = tanh(x_t·W_x + (1 - init_t)·z_{t-1}·W_z + b), where
// init_t is env/initial_state. The recurrent term is dropped at the first
// timestep of a trace and wherever z_{t-1} was never written.
class RecAgent : public TAgent {
 public:
  RecAgent(int64_t in_dim, int64_t hidden, uint64_t init_seed, std::string input = "env/env_obs",
           std::string output = "z");

  std::vector<Tensor> parameters() const override { return {w_x_, w_z_, b_}; }

 protected:
  void step(int64_t t, const KwArgs& kwargs) override;

 private:
  Tensor w_x_, w_z_, b_;
  std::string input_, output_;
};

// State-value head: writes critic [B].
class CriticAgent : public TAgent {
 public:
  CriticAgent(int64_t in_dim, int64_t hidden, uint64_t init_seed, std::string input = "env/env_obs",
              std::string output = "critic");

  std::vector<Tensor> parameters() const override { return net_.parameters(); }

 protected:
  void step(int64_t t, const KwArgs& kwargs) override;

 private:
  nn::Mlp net_;
  std::string input_, output_;
};

// Action-value head: writes <output> [B, A] and, unless replay=true, an
// epsilon-greedy action (kwarg epsilon, default 0).
class QAgent : public TAgent {
 public:
  QAgent(int64_t in_dim, int64_t n_actions, int64_t hidden, uint64_t init_seed, std::string input = "env/env_obs",
         std::string output = "q");

  std::vector<Tensor> parameters() const override { return net_.parameters(); }
  Tensor values(const Tensor& x) const { return net_(x); }

 protected:
  void step(int64_t t, const KwArgs& kwargs) override;

 private:
  nn::Mlp net_;
  int64_t n_actions_;
  std::string input_, output_;
};

// Deterministic GridWorld expert: right while col < 2, then down.
class GridWorldExpert : public TAgent {
 public:
  GridWorldExpert() : TAgent("expert") {}
  static int64_t action_for_cell(int64_t cell) { return cell % 3 < 2 ? 3 : 1; }

 protected:
  void step(int64_t t, const KwArgs& kwargs) override;
};

// Uniform actions; action_logp is -log(n_actions).
class RandomPolicy : public TAgent {
 public:
  RandomPolicy(int64_t n_actions, std::string input = "env/env_obs");

 protected:
  void step(int64_t t, const KwArgs& kwargs) override;

 private:
  int64_t n_actions_;
  std::string input_;
};

// Continuous linear controller: output = input·W + b.
class LinearPolicy : public TAgent {
 public:
  LinearPolicy(int64_t in_dim, int64_t out_dim, uint64_t init_seed, std::string input = "env/env_obs",
               std::string output = "action");

  std::vector<Tensor> parameters() const override { return layer_.parameters(); }

 protected:
  void step(int64_t t, const KwArgs& kwargs) override;

 private:
  nn::Linear layer_;
  std::string input_, output_;
};

// model.policy = mlp: CategoricalPolicy on env/env_obs.
// model.policy = recurrent: sequential([RecAgent, CategoricalPolicy on z]).
AgentPtr make_policy(const TrainConfig& cfg, int64_t obs_dim, int64_t n_actions, uint64_t init_seed);

}  // namespace wsrl
