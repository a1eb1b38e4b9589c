#include "wsrl/agent.hpp"

#include <unordered_set>

#include "wsrl/nn.hpp"

namespace wsrl {

namespace {

class BindingGuard {
 public:
  BindingGuard(Workspace*& slot, Workspace& ws) : slot_(slot) { slot_ = &ws; }
  ~BindingGuard() { slot_ = nullptr; }
  BindingGuard(const BindingGuard&) = delete;
  BindingGuard& operator=(const BindingGuard&) = delete;

 private:
  Workspace*& slot_;
};

}  // namespace

void Agent::execute(Workspace& ws, const KwArgs& kwargs) {
  if (bound_ != nullptr) {
    throw ReentrancyError("agent '" + name_ + "' is already executing; clone it to run on another workspace");
  }
  BindingGuard guard(bound_, ws);
  forward(kwargs);
}

Workspace& Agent::workspace() const {
  if (bound_ == nullptr) throw AgentError("agent '" + name_ + "' accessed the workspace outside execute()");
  return *bound_;
}

double Agent::uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

void TAgent::forward(const KwArgs& kwargs) {
  if (!kwargs.contains("t")) throw KwArgError("agent '" + name() + "' requires keyword argument t");
  step(kwargs.get_int("t"), kwargs);
}

Agents::Agents(std::vector<AgentPtr> agents, std::string name) : Agent(std::move(name)), agents_(std::move(agents)) {
  if (agents_.empty()) throw AgentError("Agents container needs at least one agent");
  for (const auto& a : agents_) {
    if (!a) throw AgentError("Agents container received a null agent");
  }
}

std::vector<Tensor> Agents::parameters() const {
  std::vector<Tensor> out;
  for (const auto& a : agents_) append_unique(out, a->parameters());
  return out;
}

void Agents::seed(uint64_t seed) {
  Agent::seed(seed);
  for (size_t k = 0; k < agents_.size(); ++k) agents_[k]->seed(seed + k);
}

void Agents::forward(const KwArgs& kwargs) {
  for (const auto& a : agents_) a->execute(workspace(), kwargs);
}

TemporalAgent::TemporalAgent(AgentPtr agent, std::string name) : Agent(std::move(name)), agent_(std::move(agent)) {
  if (!agent_) throw AgentError("TemporalAgent received a null agent");
}

void TemporalAgent::seed(uint64_t seed) {
  Agent::seed(seed);
  agent_->seed(seed);
}

void TemporalAgent::forward(const KwArgs& kwargs) {
  const int64_t t0 = kwargs.contains("t") ? kwargs.get_int("t") : 0;
  const auto n_steps = kwargs.find_int("n_steps");
  const auto stop_variable = kwargs.find_string("stop_variable");
  if (!n_steps && !stop_variable) throw KwArgError("TemporalAgent needs n_steps or stop_variable");
  if (n_steps && *n_steps < 1) throw KwArgError("TemporalAgent: n_steps must be >= 1");

  KwArgs inner = kwargs.without({"n_steps", "stop_variable"});
  int64_t t = t0;
  while (true) {
    inner.set("t", t);
    agent_->execute(workspace(), inner);
    if (stop_variable) {
      const Tensor s = get(*stop_variable, t);
      bool all = true;
      for (float v : s.data()) all = all && v > 0.5f;
      if (all) break;
    }
    ++t;
    if (n_steps && t >= t0 + *n_steps) break;
  }
}

AgentPtr sequential(std::vector<AgentPtr> agents) { return std::make_shared<Agents>(std::move(agents)); }

AgentPtr temporal(AgentPtr agent) { return std::make_shared<TemporalAgent>(std::move(agent)); }

void replay(Agent& agent, Workspace& ws, const KwArgs& kwargs) { agent.execute(ws, kwargs); }

void FillAgent::forward(const KwArgs& kwargs) {
  const std::string var = kwargs.get_string("var_name");
  const auto value = static_cast<float>(kwargs.get_double("value"));
  const int64_t n_steps = kwargs.get_int("n_steps");
  for (int64_t t = 0; t < n_steps; ++t) set(var, t, Tensor::vector({value}));
}

LinearAgent::LinearAgent(Tensor weight, Tensor bias, std::string input, std::string output)
    : weight_(std::move(weight)), bias_(std::move(bias)), input_(std::move(input)), output_(std::move(output)) {}

LinearAgent::LinearAgent(int64_t n_input, int64_t n_output, uint64_t init_seed) : input_("x"), output_("y") {
  std::mt19937_64 gen(init_seed);
  auto layer = nn::Linear::make(n_input, n_output, gen);
  weight_ = layer.weight;
  bias_ = layer.bias;
}

void LinearAgent::step(int64_t t, const KwArgs&) { set(output_, t, linear(get(input_, t), weight_, bias_)); }

void CrossEntropyAgent::forward(const KwArgs&) {
  const Tensor logits = get_full("predicted_y");
  const Tensor target = get_full("y");
  if (logits.dim() != 3 || target.dim() != 2 || logits.size(0) != target.size(0) || logits.size(1) != target.size(1)) {
    throw ShapeError("CrossEntropyAgent: predicted_y " + shape_str(logits.shape()) + " vs y " +
                     shape_str(target.shape()));
  }
  const int64_t steps = logits.size(0), batch = logits.size(1), classes = logits.size(2);
  const Tensor nll = neg(gather(log_softmax(reshape(logits, {steps * batch, classes})), reshape(target, {steps * batch})));
  const Tensor per_step = reshape(nll, {steps, batch});
  Tensor total = select(per_step, 0);
  for (int64_t t = 1; t < steps; ++t) total = add(total, select(per_step, t));
  set("loss", 0, mul_scalar(total, 1.0f / static_cast<float>(steps)));
}

void append_unique(std::vector<Tensor>& into, const std::vector<Tensor>& extra) {
  std::unordered_set<const TensorImpl*> seen;
  for (const auto& t : into) seen.insert(t.impl().get());
  for (const auto& t : extra) {
    if (seen.insert(t.impl().get()).second) into.push_back(t);
  }
}

void copy_parameters(const Agent& from, Agent& to) {
  auto src = from.parameters();
  auto dst = to.parameters();
  if (src.size() != dst.size()) throw AgentError("copy_parameters: parameter counts differ");
  for (size_t i = 0; i < src.size(); ++i) dst[i].assign(src[i]);
}

}  // namespace wsrl
