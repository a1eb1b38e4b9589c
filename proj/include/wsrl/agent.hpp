#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "wsrl/kwargs.hpp"
#include "wsrl/tensor.hpp"
#include "wsrl/workspace.hpp"

namespace wsrl {

// A named unit of computation over a workspace. forward() reaches the bound
// workspace only through get()/set(); execute() binds it for exactly one call.
class Agent {
 public:
  explicit Agent(std::string name = {}) : name_(std::move(name)) {}
  virtual ~Agent() = default;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  // Throws ReentrancyError if this instance is already executing.
  void execute(Workspace& ws, const KwArgs& kwargs = {});
  void operator()(Workspace& ws, const KwArgs& kwargs = {}) { execute(ws, kwargs); }

  // Trainable tensors owned by this agent or its children, without duplicates.
  virtual std::vector<Tensor> parameters() const { return {}; }
  // Seeds this agent's generator; containers give their k-th child seed + k.
  virtual void seed(uint64_t seed) { rng_.seed(seed); }

  const std::string& name() const { return name_; }
  bool is_bound() const { return bound_ != nullptr; }

 protected:
  virtual void forward(const KwArgs& kwargs) = 0;

  Workspace& workspace() const;
  Tensor get(const std::string& name, int64_t t) const { return workspace().get(name, t); }
  Tensor get_full(const std::string& name) const { return workspace().full(name); }
  void set(const std::string& name, int64_t t, const Tensor& value) { workspace().set(name, t, value); }
  void set_full(const std::string& name, const Tensor& value) { workspace().set_full(name, value); }
  bool is_written(const std::string& name, int64_t t) const { return workspace().is_written(name, t); }

  std::mt19937_64& rng() { return rng_; }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();

 private:
  std::string name_;
  Workspace* bound_ = nullptr;
  std::mt19937_64 rng_{0};
};

using AgentPtr = std::shared_ptr<Agent>;

// An agent anchored at one timestep: execute() must receive integer kwarg "t".
class TAgent : public Agent {
 public:
  using Agent::Agent;

 protected:
  virtual void step(int64_t t, const KwArgs& kwargs) = 0;

 private:
  void forward(const KwArgs& kwargs) final;
};

// Runs its members one after the other on the same workspace and kwargs.
class Agents : public Agent {
 public:
  explicit Agents(std::vector<AgentPtr> agents, std::string name = {});

  std::vector<Tensor> parameters() const override;
  void seed(uint64_t seed) override;
  const std::vector<AgentPtr>& members() const { return agents_; }

 protected:
  void forward(const KwArgs& kwargs) override;

 private:
  std::vector<AgentPtr> agents_;
};

// Unrolls an agent from kwarg t (default 0) until n_steps timesteps have run
// or the stop_variable is true (> 0.5) for every batch entry. The inner agent
// sees the caller's kwargs without n_steps/stop_variable and with t updated.
class TemporalAgent : public Agent {
 public:
  explicit TemporalAgent(AgentPtr agent, std::string name = {});

  std::vector<Tensor> parameters() const override { return agent_->parameters(); }
  void seed(uint64_t seed) override;
  const AgentPtr& inner() const { return agent_; }

 protected:
  void forward(const KwArgs& kwargs) override;

 private:
  AgentPtr agent_;
};

AgentPtr sequential(std::vector<AgentPtr> agents);
AgentPtr temporal(AgentPtr agent);

// Executes an agent over a workspace that already holds a trace. Variables the
// agent writes are overwritten; everything else is left as is.
void replay(Agent& agent, Workspace& ws, const KwArgs& kwargs = {});

// Writes [value] (batch of one) to var_name for t in [0, n_steps).
class FillAgent : public Agent {
 public:
  using Agent::Agent;

 protected:
  void forward(const KwArgs& kwargs) override;
};

// y@t = x@t · W + b
class LinearAgent : public TAgent {
 public:
  LinearAgent(Tensor weight, Tensor bias, std::string input = "x", std::string output = "y");
  LinearAgent(int64_t n_input, int64_t n_output, uint64_t init_seed);

  std::vector<Tensor> parameters() const override { return {weight_, bias_}; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 protected:
  void step(int64_t t, const KwArgs& kwargs) override;

 private:
  Tensor weight_;
  Tensor bias_;
  std::string input_;
  std::string output_;
};

// Reads full "predicted_y" [T,B,C] and "y" [T,B]; writes "loss"@0 as the
// per-item cross entropy averaged over time, shape [B].
class CrossEntropyAgent : public Agent {
 public:
  using Agent::Agent;

 protected:
  void forward(const KwArgs& kwargs) override;
};

// Appends the tensors of `extra` not already present in `into`.
void append_unique(std::vector<Tensor>& into, const std::vector<Tensor>& extra);

// Copies parameter values from `from` into `to` (same architecture).
void copy_parameters(const Agent& from, Agent& to);

}  // namespace wsrl
