#pragma once

#include <vector>

#include <Eigen/Dense>

#include "xsched/config.hpp"
#include "xsched/env.hpp"
#include "xsched/mlp.hpp"

namespace xsched {

using Mlp = MlpParams<double>;

/// Independent categorical heads laid out back to back in one logit vector.
struct PolicyOutput {
  std::vector<int> head_sizes;
  std::vector<int> offsets;
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;

  int heads() const { return static_cast<int>(head_sizes.size()); }
  auto head_probs(int h) const { return probs.segment(offsets[static_cast<std::size_t>(h)], head_sizes[static_cast<std::size_t>(h)]); }
  auto head_logits(int h) const { return logits.segment(offsets[static_cast<std::size_t>(h)], head_sizes[static_cast<std::size_t>(h)]); }
};

/// Per-head softmax of an arbitrary logit vector.
PolicyOutput make_policy_output(const Eigen::VectorXd& logits, const std::vector<int>& head_sizes);

PolicyOutput actor_forward(const Mlp& actor, const Eigen::VectorXd& state, const std::vector<int>& head_sizes);

struct SampledAction {
  std::vector<int> indices;
  double log_prob = 0.0;
};

/// Inverse-CDF draw per head; one uniform per head is consumed.
SampledAction sample_action(const PolicyOutput& policy, Rng& rng);

/// Per-head argmax, ties to the lowest index.
SampledAction greedy_action(const PolicyOutput& policy);

double joint_log_prob(const PolicyOutput& policy, const std::vector<int>& indices);

struct TrajectoryStep {
  Eigen::VectorXd state;
  std::vector<int> actions;
  double reward = 0.0;
  double value = 0.0;
  double log_prob = 0.0;
};
using Trajectory = std::vector<TrajectoryStep>;

std::vector<double> discounted_returns(const std::vector<double>& rewards, double discount);

/// Advantages from the stored critic values, with V(s_T) = 0.
std::vector<double> advantages(const Trajectory& trajectory, double discount, AdvantageMode mode);

struct LossResult {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  Mlp actor_grad;
  Mlp critic_grad;
};

/// -sum_t A_t log pi(a_t|s_t) + value_weight * sum_t (G_t - V(s_t))^2 with
/// analytic gradients. Advantages are constants; the critic enters only
/// through the squared error.
LossResult combined_loss(const Mlp& actor, const Mlp& critic, const std::vector<int>& head_sizes,
                         const Trajectory& trajectory, const std::vector<double>& advantage,
                         const std::vector<double>& returns, double value_weight);

struct AdamState {
  Mlp first_moment;
  Mlp second_moment;
  long long steps = 0;
};

AdamState make_adam(const Mlp& params);

/// Rescales `grad` in place so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(Mlp& grad, double max_norm);

/// Clips, then applies one adaptive-moment update.
void optimizer_step(Mlp& params, Mlp grad, AdamState& state, const A2CHyper& hyper);

struct ActorCritic {
  Mlp actor;
  Mlp critic;
  std::vector<int> head_sizes;

  int input_size() const { return actor.input_size(); }
};

ActorCritic make_actor_critic(int input_size, const std::vector<int>& head_sizes, const A2CHyper& hyper, Rng& rng);

double critic_value(const ActorCritic& net, const Eigen::VectorXd& state);

struct A2CLearner {
  ActorCritic net;
  AdamState actor_opt;
  AdamState critic_opt;
};

A2CLearner make_learner(ActorCritic net);

/// One update from a complete on-policy episode. Returns the loss before the
/// update.
double a2c_update(A2CLearner& learner, const Trajectory& trajectory, const A2CHyper& hyper);

}  // namespace xsched
