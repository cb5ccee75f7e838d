#include "xsched/a2c.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace xsched {

namespace {

std::vector<int> head_offsets(const std::vector<int>& head_sizes) {
  std::vector<int> offsets(head_sizes.size());
  int at = 0;
  for (std::size_t h = 0; h < head_sizes.size(); ++h) {
    if (head_sizes[h] < 1) throw std::invalid_argument("policy heads must have at least one action");
    offsets[h] = at;
    at += head_sizes[h];
  }
  return offsets;
}

int total_actions(const std::vector<int>& head_sizes) {
  return std::accumulate(head_sizes.begin(), head_sizes.end(), 0);
}

}  // namespace

PolicyOutput make_policy_output(const Eigen::VectorXd& logits, const std::vector<int>& head_sizes) {
  PolicyOutput out;
  out.head_sizes = head_sizes;
  out.offsets = head_offsets(head_sizes);
  if (logits.size() != total_actions(head_sizes))
    throw std::invalid_argument("policy has " + std::to_string(logits.size()) + " logits but heads need " +
                                std::to_string(total_actions(head_sizes)));
  out.logits = logits;
  out.probs.resize(logits.size());
  for (int h = 0; h < out.heads(); ++h) {
    const auto z = out.head_logits(h);
    const Eigen::ArrayXd e = (z.array() - z.maxCoeff()).exp();
    out.probs.segment(out.offsets[static_cast<std::size_t>(h)], z.size()) = (e / e.sum()).matrix();
  }
  return out;
}

PolicyOutput actor_forward(const Mlp& actor, const Eigen::VectorXd& state, const std::vector<int>& head_sizes) {
  if (actor.output_size() != total_actions(head_sizes))
    throw std::invalid_argument("actor output width does not match the head sizes");
  return make_policy_output(mlp_forward(actor, state), head_sizes);
}

double joint_log_prob(const PolicyOutput& policy, const std::vector<int>& indices) {
  if (static_cast<int>(indices.size()) != policy.heads()) throw std::invalid_argument("one index per head required");
  double lp = 0.0;
  for (int h = 0; h < policy.heads(); ++h) lp += std::log(policy.head_probs(h)(indices[static_cast<std::size_t>(h)]));
  return lp;
}

SampledAction sample_action(const PolicyOutput& policy, Rng& rng) {
  SampledAction a;
  a.indices.resize(static_cast<std::size_t>(policy.heads()));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int h = 0; h < policy.heads(); ++h) {
    const auto p = policy.head_probs(h);
    const double u = unit(rng);
    double cdf = 0.0;
    int pick = static_cast<int>(p.size()) - 1;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      cdf += p(k);
      if (u < cdf) {
        pick = static_cast<int>(k);
        break;
      }
    }
    // cdf tail may fall short of 1: skip zero-probability classes
    while (pick > 0 && p(pick) == 0.0) --pick;
    a.indices[static_cast<std::size_t>(h)] = pick;
    a.log_prob += std::log(p(pick));
  }
  return a;
}

SampledAction greedy_action(const PolicyOutput& policy) {
  SampledAction a;
  a.indices.resize(static_cast<std::size_t>(policy.heads()));
  for (int h = 0; h < policy.heads(); ++h) {
    const auto p = policy.head_probs(h);
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < p.size(); ++k)
      if (p(k) > p(best)) best = k;
    a.indices[static_cast<std::size_t>(h)] = static_cast<int>(best);
    a.log_prob += std::log(p(best));
  }
  return a;
}

std::vector<double> discounted_returns(const std::vector<double>& rewards, double discount) {
  if (rewards.empty()) throw std::invalid_argument("discounted_returns: empty reward list");
  std::vector<double> g(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    running = rewards[t] + discount * running;
    g[t] = running;
  }
  return g;
}

std::vector<double> advantages(const Trajectory& trajectory, double discount, AdvantageMode mode) {
  if (trajectory.empty()) throw std::invalid_argument("advantages: empty trajectory");
  std::vector<double> a(trajectory.size());
  if (mode == AdvantageMode::FullReturn) {
    std::vector<double> rewards;
    rewards.reserve(trajectory.size());
    for (const auto& s : trajectory) rewards.push_back(s.reward);
    const auto g = discounted_returns(rewards, discount);
    for (std::size_t t = 0; t < a.size(); ++t) a[t] = g[t] - trajectory[t].value;
    return a;
  }
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double next = t + 1 < trajectory.size() ? trajectory[t + 1].value : 0.0;
    a[t] = trajectory[t].reward + discount * next - trajectory[t].value;
  }
  return a;
}

LossResult combined_loss(const Mlp& actor, const Mlp& critic, const std::vector<int>& head_sizes,
                         const Trajectory& trajectory, const std::vector<double>& advantage,
                         const std::vector<double>& returns, double value_weight) {
  const auto steps = static_cast<Eigen::Index>(trajectory.size());
  if (steps == 0) throw std::invalid_argument("combined_loss: empty trajectory");
  if (advantage.size() != trajectory.size() || returns.size() != trajectory.size())
    throw std::invalid_argument("combined_loss: advantage/return length mismatch");
  const auto offsets = head_offsets(head_sizes);
  if (actor.output_size() != total_actions(head_sizes))
    throw std::invalid_argument("combined_loss: actor output width does not match the head sizes");

  Eigen::MatrixXd states(actor.input_size(), steps);
  for (Eigen::Index t = 0; t < steps; ++t) states.col(t) = trajectory[static_cast<std::size_t>(t)].state;

  const auto actor_tape = mlp_forward_batch(actor, states);
  const auto critic_tape = mlp_forward_batch(critic, states);
  const Eigen::MatrixXd& logits = actor_tape.output();
  const Eigen::MatrixXd& values = critic_tape.output();

  LossResult out;
  Eigen::MatrixXd d_logits(logits.rows(), steps);
  Eigen::MatrixXd d_values(1, steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto& step = trajectory[static_cast<std::size_t>(t)];
    if (step.actions.size() != head_sizes.size()) throw std::invalid_argument("combined_loss: action arity mismatch");
    const double adv = advantage[static_cast<std::size_t>(t)];
    double log_pi = 0.0;
    for (std::size_t h = 0; h < head_sizes.size(); ++h) {
      const auto z = logits.col(t).segment(offsets[h], head_sizes[h]);
      const double zmax = z.maxCoeff();
      const Eigen::ArrayXd e = (z.array() - zmax).exp();
      const double lse = zmax + std::log(e.sum());
      const int a = step.actions[h];
      if (a < 0 || a >= head_sizes[h]) throw std::invalid_argument("combined_loss: action index out of range");
      log_pi += z(a) - lse;
      // d(-A log softmax_a)/dz = -A (onehot_a - softmax)
      auto dz = d_logits.col(t).segment(offsets[h], head_sizes[h]);
      dz = adv * (e / e.sum()).matrix();
      dz(a) -= adv;
    }
    out.policy_loss -= adv * log_pi;
    const double err = returns[static_cast<std::size_t>(t)] - values(0, t);
    out.value_loss += value_weight * err * err;
    d_values(0, t) = -2.0 * value_weight * err;
  }
  out.loss = out.policy_loss + out.value_loss;
  if (!std::isfinite(out.loss)) throw std::runtime_error("combined_loss: non-finite loss");

  out.actor_grad = mlp_backward(actor, actor_tape, d_logits);
  out.critic_grad = mlp_backward(critic, critic_tape, d_values);
  if (!all_finite(out.actor_grad) || !all_finite(out.critic_grad))
    throw std::runtime_error("combined_loss: non-finite gradient");
  return out;
}

AdamState make_adam(const Mlp& params) { return {zeros_like(params), zeros_like(params), 0}; }

double clip_global_norm(Mlp& grad, double max_norm) {
  const double norm = std::sqrt(squared_norm(grad));
  if (norm > max_norm) scale_in_place(grad, max_norm / norm);
  return norm;
}

void optimizer_step(Mlp& params, Mlp grad, AdamState& state, const A2CHyper& hyper) {
  if (grad.dimensions() != params.dimensions() || state.first_moment.dimensions() != params.dimensions())
    throw std::invalid_argument("optimizer_step: shape mismatch");
  clip_global_norm(grad, hyper.clip_norm);
  ++state.steps;
  const double b1 = hyper.adam_beta1;
  const double b2 = hyper.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.steps));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.steps));
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = (b2 * v.array() + (1.0 - b2) * g.array().square()).matrix();
    p.array() -= hyper.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + hyper.adam_epsilon);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& l = params.layers[i];
    update(l.weight, grad.layers[i].weight, state.first_moment.layers[i].weight, state.second_moment.layers[i].weight);
    update(l.bias, grad.layers[i].bias, state.first_moment.layers[i].bias, state.second_moment.layers[i].bias);
  }
}

ActorCritic make_actor_critic(int input_size, const std::vector<int>& head_sizes, const A2CHyper& hyper, Rng& rng) {
  std::vector<int> trunk{input_size};
  for (int i = 0; i < hyper.hidden_layers; ++i) trunk.push_back(hyper.hidden_units);
  auto actor_dims = trunk;
  actor_dims.push_back(total_actions(head_sizes));
  auto critic_dims = trunk;
  critic_dims.push_back(1);
  ActorCritic net;
  net.head_sizes = head_sizes;
  net.actor = mlp_init<double>(actor_dims, rng, 0.01);
  net.critic = mlp_init<double>(critic_dims, rng, 1.0);
  return net;
}

double critic_value(const ActorCritic& net, const Eigen::VectorXd& state) { return mlp_forward(net.critic, state)(0); }

A2CLearner make_learner(ActorCritic net) {
  A2CLearner l{std::move(net), {}, {}};
  l.actor_opt = make_adam(l.net.actor);
  l.critic_opt = make_adam(l.net.critic);
  return l;
}

double a2c_update(A2CLearner& learner, const Trajectory& trajectory, const A2CHyper& hyper) {
  std::vector<double> rewards;
  rewards.reserve(trajectory.size());
  for (const auto& s : trajectory) rewards.push_back(s.reward);
  const auto returns = discounted_returns(rewards, hyper.discount);
  const auto adv = advantages(trajectory, hyper.discount, hyper.advantage_mode);
  auto loss = combined_loss(learner.net.actor, learner.net.critic, learner.net.head_sizes, trajectory, adv, returns,
                            hyper.value_weight);
  optimizer_step(learner.net.actor, std::move(loss.actor_grad), learner.actor_opt, hyper);
  optimizer_step(learner.net.critic, std::move(loss.critic_grad), learner.critic_opt, hyper);
  return loss.loss;
}

}  // namespace xsched
