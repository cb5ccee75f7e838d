#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xsched/a2c.hpp"
#include "xsched/checkpoint.hpp"
#include "xsched/config.hpp"
#include "xsched/env.hpp"
#include "xsched/xapps.hpp"

namespace xsched {

/// Method 1 chooses which trained xApps run and freezes the other family at
/// its last action. Method 2 pairs each family with either its trained
/// xApp or its equal-allocation baseline.
enum class Method { RetainPrevious = 1, ExtendWithBaselines = 2 };

Method parse_method(int m);
int action_count(Method method);

/// Method 1: {mu1, mu2} for (power A2C, RBG A2C).
/// Method 2: {mu1, mu2, mu3, mu4} for (power A2C, RBG A2C, power baseline,
/// RBG baseline) with mu1 + mu3 = 1 and mu2 + mu4 = 1.
struct ActivationMessage {
  Method method = Method::RetainPrevious;
  std::vector<int> mu;

  std::string bits() const;
  bool operator==(const ActivationMessage&) const = default;
};

/// The valid messages of `method`, in policy-head order.
std::vector<ActivationMessage> activation_set(Method method);
ActivationMessage activation_from_index(Method method, int index);
void validate(const ActivationMessage& message);

/// Frozen trained xApps. Held by const reference everywhere.
struct XAppPool {
  ActorCritic power;
  ActorCritic rbg;
};

XAppPool load_pool(const std::filesystem::path& dir, const NetworkConfig& cfg);

/// Last emitted action per trainable xApp; starts at the equal split.
struct LastActions {
  Eigen::MatrixXi power;
  Eigen::MatrixXi owner;
};

LastActions initial_last_actions(const NetworkConfig& cfg, const PowerSet& powers);

/// Allocation for the coming slot under `message`. Active trained xApps act
/// greedily on `state`; Method 1 keeps a deactivated family at its last
/// action, Method 2 substitutes the baseline.
AllocationState apply_activation(const ActivationMessage& message, const XAppPool& pool, const NetworkConfig& cfg,
                                 const PowerSet& powers, const NetworkState& state, LastActions& last);

/// [arrival rate / d_max, mean speed / V_max, previous-period reward].
Eigen::VectorXd scheduler_observe(const NetworkConfig& cfg, const EpisodeContext& context, double previous_reward);

struct SchedulerChoice {
  ActivationMessage message;
  SampledAction sample;
};

SchedulerChoice scheduler_act(Method method, const ActorCritic& policy, const Eigen::VectorXd& state, Rng* rng);

struct SafetyGateState {
  double mean = 0.0;
  double dispersion = 1.0;
  double beta = 0.05;
  double z_threshold = -2.0;
  int t_back = 3;
  int warmup = 20;
  double sigma_floor = 1e-6;
  FallbackPolicy fallback = FallbackPolicy::EqualAllocation;
  int updates = 0;
  int timer = 0;
  bool frozen = false;
};

SafetyGateState make_gate(const SafetyConfig& cfg);

/// EWMA update of mean and absolute dispersion; no-op while frozen.
SafetyGateState safety_update(SafetyGateState gate, double value);

/// The message the fallback policy emits. Equal allocation exists only for
/// Method 2, whose pool contains the baselines.
ActivationMessage fallback_message(Method method, FallbackPolicy policy);

struct GateOutcome {
  ActivationMessage message;
  SafetyGateState gate;
  bool gated = false;
  double z = 0.0;
};

/// Updates the statistics with `value`, then overrides `proposed` with the
/// fallback for this and the next t_back - 1 decisions when the z-score of
/// `value` falls below the threshold after warm-up.
GateOutcome safety_gate(SafetyGateState gate, double value, const ActivationMessage& proposed);

struct PeriodRecord {
  int period = 0;
  EpisodeContext context;
  double previous_reward = 0.0;
  ActivationMessage message;
  bool gated = false;
  double value = 0.0;
  double reward = 0.0;
};

struct EpisodeOutcome {
  double tau_e = 0.0;
  double leftover_bits = 0.0;
  std::vector<PeriodRecord> periods;
  Trajectory trajectory;
};

/// Decides the message for one scheduling period from the scheduler state.
/// Fills `step` (actions, log-prob, value) when the decision is learned.
struct PeriodDecision {
  ActivationMessage message;
  bool gated = false;
  double value = 0.0;
  std::vector<int> actions;
  double log_prob = 0.0;
};
using Decider = std::function<PeriodDecision(const Eigen::VectorXd& state, int period)>;

/// Runs one episode in scheduling periods. The environment stream is the
/// only randomness consumed, so two deciders see identical traffic and
/// mobility for the same `env_rng` seed.
EpisodeOutcome run_scheduled_episode(const Config& cfg, const PowerSet& powers, const XAppPool& pool, Method method,
                                     const EpisodeContext& context, Rng& env_rng, const Decider& decide,
                                     int episode = 0);

struct SchedulerTraining {
  Checkpoint checkpoint;
  std::vector<RewardRecord> history;
};

std::string scheduler_kind(Method method);

/// Trains the scheduler against a frozen pool. One update per episode over
/// the period-level trajectory.
SchedulerTraining train_scheduler(Method method, const XAppPool& pool, const Config& cfg, long long episodes,
                                  std::uint64_t seed, const ProgressFn& progress = {});

}  // namespace xsched
