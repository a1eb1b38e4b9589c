#include "wsrl/policies.hpp"

#include <cmath>

namespace wsrl {

CategoricalPolicy::CategoricalPolicy(int64_t in_dim, int64_t n_actions, int64_t hidden, uint64_t init_seed,
                                     std::string input, std::string output)
    : TAgent("policy"), n_actions_(n_actions), input_(std::move(input)), output_(std::move(output)) {
  std::mt19937_64 gen(init_seed);
  net_ = nn::Mlp({in_dim, hidden, n_actions}, nn::Activation::kTanh, gen);
}

void CategoricalPolicy::step(int64_t t, const KwArgs& kwargs) {
  const Tensor logp_all = log_softmax(net_(get(input_, t)));
  const Tensor probs = exp(logp_all);
  const int64_t batch = probs.size(0);
  Tensor action;
  if (kwargs.get_bool("replay", false)) {
    action = get(output_, t);
  } else {
    action = Tensor::zeros({batch});
    const bool stochastic = kwargs.get_bool("stochastic", true);
    const auto p = probs.data();
    auto out = action.mutable_data();
    for (int64_t b = 0; b < batch; ++b) {
      const auto row = p.subspan(static_cast<size_t>(b * n_actions_), static_cast<size_t>(n_actions_));
      int64_t pick = 0;
      if (stochastic) {
        const double u = uniform();
        double acc = 0.0;
        pick = n_actions_ - 1;
        for (int64_t a = 0; a < n_actions_; ++a) {
          acc += row[static_cast<size_t>(a)];
          if (u < acc) {
            pick = a;
            break;
          }
        }
      } else {
        for (int64_t a = 1; a < n_actions_; ++a) {
          if (row[static_cast<size_t>(a)] > row[static_cast<size_t>(pick)]) pick = a;
        }
      }
      out[static_cast<size_t>(b)] = static_cast<float>(pick);
    }
    set(output_, t, action);
  }
  set(output_ + "_logp", t, gather(logp_all, action));
  set(output_ + "_probs", t, probs);
  set(output_ + "_entropy", t, neg(sum_last(mul(probs, logp_all))));
}

RecAgent::RecAgent(int64_t in_dim, int64_t hidden, uint64_t init_seed, std::string input, std::string output)
    : TAgent("rec"), input_(std::move(input)), output_(std::move(output)) {
  std::mt19937_64 gen(init_seed);
  const auto in = nn::Linear::make(in_dim, hidden, gen);
  const auto rec = nn::Linear::make(hidden, hidden, gen);
  w_x_ = in.weight;
  b_ = in.bias;
  w_z_ = rec.weight;
}

void RecAgent::step(int64_t t, const KwArgs&) {
  Tensor pre = linear(get(input_, t), w_x_, b_);
  if (t > 0 && is_written(output_, t - 1)) {
    const Tensor init = get("env/initial_state", t);
    const Tensor keep = reshape(add_scalar(neg(init), 1.0f), {init.size(0), 1});
    pre = add(pre, mul(keep, matmul(get(output_, t - 1), w_z_)));
  }
  set(output_, t, tanh(pre));
}

CriticAgent::CriticAgent(int64_t in_dim, int64_t hidden, uint64_t init_seed, std::string input, std::string output)
    : TAgent("critic"), input_(std::move(input)), output_(std::move(output)) {
  std::mt19937_64 gen(init_seed);
  net_ = nn::Mlp({in_dim, hidden, 1}, nn::Activation::kTanh, gen);
}

void CriticAgent::step(int64_t t, const KwArgs&) {
  const Tensor v = net_(get(input_, t));
  set(output_, t, reshape(v, {v.size(0)}));
}

QAgent::QAgent(int64_t in_dim, int64_t n_actions, int64_t hidden, uint64_t init_seed, std::string input,
               std::string output)
    : TAgent("q"), n_actions_(n_actions), input_(std::move(input)), output_(std::move(output)) {
  std::mt19937_64 gen(init_seed);
  net_ = nn::Mlp({in_dim, hidden, n_actions}, nn::Activation::kTanh, gen);
}

void QAgent::step(int64_t t, const KwArgs& kwargs) {
  const Tensor q = net_(get(input_, t));
  set(output_, t, q);
  if (kwargs.get_bool("replay", false)) return;
  const double epsilon = kwargs.get_double("epsilon", 0.0);
  const Tensor greedy = argmax_last(q);
  Tensor action = greedy.clone();
  auto out = action.mutable_data();
  std::uniform_int_distribution<int64_t> pick(0, n_actions_ - 1);
  for (float& a : out) {
    const double u = uniform();
    const int64_t random_action = pick(rng());
    if (u < epsilon) a = static_cast<float>(random_action);
  }
  set("action", t, action);
}

void GridWorldExpert::step(int64_t t, const KwArgs&) {
  const Tensor cells = argmax_last(get("env/env_obs", t));
  Tensor action = Tensor::zeros({cells.size(0)});
  auto out = action.mutable_data();
  for (size_t b = 0; b < out.size(); ++b) {
    out[b] = static_cast<float>(action_for_cell(static_cast<int64_t>(cells.data()[b])));
  }
  set("action", t, action);
}

RandomPolicy::RandomPolicy(int64_t n_actions, std::string input)
    : TAgent("random"), n_actions_(n_actions), input_(std::move(input)) {}

void RandomPolicy::step(int64_t t, const KwArgs& kwargs) {
  const int64_t batch = get(input_, t).size(0);
  if (!kwargs.get_bool("replay", false)) {
    Tensor action = Tensor::zeros({batch});
    std::uniform_int_distribution<int64_t> pick(0, n_actions_ - 1);
    for (float& a : action.mutable_data()) a = static_cast<float>(pick(rng()));
    set("action", t, action);
  }
  set("action_logp", t, Tensor::full({batch}, -std::log(static_cast<float>(n_actions_))));
}

LinearPolicy::LinearPolicy(int64_t in_dim, int64_t out_dim, uint64_t init_seed, std::string input, std::string output)
    : TAgent("linear_policy"), input_(std::move(input)), output_(std::move(output)) {
  std::mt19937_64 gen(init_seed);
  layer_ = nn::Linear::make(in_dim, out_dim, gen);
}

void LinearPolicy::step(int64_t t, const KwArgs&) { set(output_, t, layer_(get(input_, t))); }

AgentPtr make_policy(const TrainConfig& cfg, int64_t obs_dim, int64_t n_actions, uint64_t init_seed) {
  if (cfg.policy == "recurrent") {
    return sequential({std::make_shared<RecAgent>(obs_dim, cfg.hidden, init_seed),
                       std::make_shared<CategoricalPolicy>(cfg.hidden, n_actions, cfg.hidden, init_seed + 1, "z")});
  }
  return std::make_shared<CategoricalPolicy>(obs_dim, n_actions, cfg.hidden, init_seed);
}

}  // namespace wsrl
