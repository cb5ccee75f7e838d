#include "xsched/scheduler.hpp"

#include <cmath>
#include <stdexcept>

namespace xsched {

namespace {

constexpr std::uint64_t kInitStream = 0x11;
constexpr std::uint64_t kContextStream = 0x12;
constexpr std::uint64_t kPolicyStream = 0x13;
constexpr std::uint64_t kEnvStream = 0x14;

ActorCritic load_member(const std::filesystem::path& path, XAppKind kind, const std::vector<int>& heads, int input) {
  auto ckpt = load_checkpoint(path);
  if (ckpt.kind != to_string(kind))
    throw CheckpointError(CheckpointError::Reason::Format,
                          path.string() + ": expected a " + to_string(kind) + " checkpoint, found " + ckpt.kind);
  if (ckpt.net.head_sizes != heads || ckpt.net.input_size() != input)
    throw CheckpointError(CheckpointError::Reason::Format,
                          path.string() + ": network shape does not match the config");
  return std::move(ckpt.net);
}

}  // namespace

Method parse_method(int m) {
  if (m == 1) return Method::RetainPrevious;
  if (m == 2) return Method::ExtendWithBaselines;
  throw std::invalid_argument("scheduler method must be 1 or 2, got " + std::to_string(m));
}

int action_count(Method method) { return method == Method::RetainPrevious ? 3 : 4; }

std::string ActivationMessage::bits() const {
  std::string s;
  for (int m : mu) s += m ? '1' : '0';
  return s;
}

std::vector<ActivationMessage> activation_set(Method method) {
  if (method == Method::RetainPrevious)
    return {{method, {1, 0}}, {method, {0, 1}}, {method, {1, 1}}};
  return {{method, {1, 1, 0, 0}}, {method, {1, 0, 0, 1}}, {method, {0, 1, 1, 0}}, {method, {0, 0, 1, 1}}};
}

ActivationMessage activation_from_index(Method method, int index) {
  const auto set = activation_set(method);
  if (index < 0 || index >= static_cast<int>(set.size()))
    throw std::invalid_argument("activation index out of range");
  return set[static_cast<std::size_t>(index)];
}

void validate(const ActivationMessage& m) {
  for (int bit : m.mu)
    if (bit != 0 && bit != 1) throw std::invalid_argument("activation bits must be 0 or 1");
  if (m.method == Method::RetainPrevious) {
    if (m.mu.size() != 2) throw std::invalid_argument("method 1 messages carry two bits");
    if (m.mu[0] == 0 && m.mu[1] == 0) throw std::invalid_argument("method 1 must activate at least one xApp");
    return;
  }
  if (m.mu.size() != 4) throw std::invalid_argument("method 2 messages carry four bits");
  if (m.mu[0] + m.mu[2] != 1 || m.mu[1] + m.mu[3] != 1)
    throw std::invalid_argument("method 2 message " + m.bits() + " violates the one-xApp-per-family constraint");
}

XAppPool load_pool(const std::filesystem::path& dir, const NetworkConfig& cfg) {
  return {load_member(dir / "power.ckpt", XAppKind::PowerA2C, power_head_sizes(cfg), power_input_size(cfg)),
          load_member(dir / "rbg.ckpt", XAppKind::RbgA2C, rbg_head_sizes(cfg), rbg_input_size(cfg))};
}

LastActions initial_last_actions(const NetworkConfig& cfg, const PowerSet& powers) {
  auto a = equal_split_allocation(cfg, powers);
  return {std::move(a.power), std::move(a.owner)};
}

AllocationState apply_activation(const ActivationMessage& message, const XAppPool& pool, const NetworkConfig& cfg,
                                 const PowerSet& powers, const NetworkState& state, LastActions& last) {
  validate(message);
  const bool power_trained = message.mu[0] == 1;
  const bool rbg_trained = message.mu[1] == 1;

  if (power_trained) {
    last.power = power_act(pool.power, cfg, xapp_input(XAppKind::PowerA2C, cfg, powers, state), nullptr).action.values;
  }
  if (rbg_trained) {
    last.owner = rbg_act(pool.rbg, cfg, xapp_input(XAppKind::RbgA2C, cfg, powers, state), nullptr).action.values;
  }

  AllocationState next;
  if (message.method == Method::RetainPrevious) {
    next.power = last.power;
    next.owner = last.owner;
  } else {
    next.power = power_trained ? last.power : baseline_power(cfg, powers).values;
    next.owner = rbg_trained ? last.owner : baseline_rbg(cfg).values;
  }
  return next;
}

Eigen::VectorXd scheduler_observe(const NetworkConfig& cfg, const EpisodeContext& context, double previous_reward) {
  Eigen::VectorXd s(3);
  s << context.arrival_rate_bps / cfg.max_arrival_rate_bps(), context.mean_speed_mps / cfg.speed_max_mps,
      previous_reward;
  return s;
}

SchedulerChoice scheduler_act(Method method, const ActorCritic& policy, const Eigen::VectorXd& state, Rng* rng) {
  if (policy.head_sizes != std::vector<int>{action_count(method)})
    throw std::invalid_argument("scheduler policy head does not match method " +
                                std::to_string(static_cast<int>(method)));
  const auto out = actor_forward(policy.actor, state, policy.head_sizes);
  SchedulerChoice c;
  c.sample = rng ? sample_action(out, *rng) : greedy_action(out);
  c.message = activation_from_index(method, c.sample.indices[0]);
  return c;
}

SafetyGateState make_gate(const SafetyConfig& cfg) {
  SafetyGateState g;
  g.beta = cfg.beta;
  g.z_threshold = cfg.z_threshold;
  g.t_back = cfg.t_back;
  g.warmup = cfg.warmup;
  g.sigma_floor = cfg.sigma_floor;
  g.fallback = cfg.fallback;
  g.dispersion = std::max(g.dispersion, g.sigma_floor);
  return g;
}

SafetyGateState safety_update(SafetyGateState gate, double value) {
  if (gate.frozen) return gate;
  const double previous_mean = gate.mean;
  gate.mean = (1.0 - gate.beta) * gate.mean + gate.beta * value;
  gate.dispersion = (1.0 - gate.beta) * gate.dispersion + gate.beta * std::abs(value - previous_mean);
  gate.dispersion = std::max(gate.dispersion, gate.sigma_floor);
  ++gate.updates;
  return gate;
}

ActivationMessage fallback_message(Method method, FallbackPolicy policy) {
  switch (policy) {
    case FallbackPolicy::EqualAllocation:
      if (method == Method::RetainPrevious)
        throw ConfigError("safety.fallback=equal needs the baseline xApps of method 2; use power or rbg with method 1");
      return {method, {0, 0, 1, 1}};
    case FallbackPolicy::BestPowerXApp:
      return method == Method::RetainPrevious ? ActivationMessage{method, {1, 0}} : ActivationMessage{method, {1, 0, 0, 1}};
    case FallbackPolicy::BestRbgXApp:
      return method == Method::RetainPrevious ? ActivationMessage{method, {0, 1}} : ActivationMessage{method, {0, 1, 1, 0}};
  }
  throw std::logic_error("unhandled fallback policy");
}

GateOutcome safety_gate(SafetyGateState gate, double value, const ActivationMessage& proposed) {
  GateOutcome out{proposed, gate, false, 0.0};
  if (gate.frozen) {
    out.message = fallback_message(proposed.method, gate.fallback);
    out.gated = true;
    out.gate.timer = gate.timer - 1;
    out.gate.frozen = out.gate.timer > 0;
    return out;
  }
  out.gate = safety_update(gate, value);
  out.z = (value - out.gate.mean) / out.gate.dispersion;
  if (out.gate.updates > out.gate.warmup && out.z < out.gate.z_threshold) {
    out.message = fallback_message(proposed.method, gate.fallback);
    out.gated = true;
    out.gate.timer = out.gate.t_back - 1;
    out.gate.frozen = out.gate.timer > 0;
  }
  return out;
}

EpisodeOutcome run_scheduled_episode(const Config& cfg, const PowerSet& powers, const XAppPool& pool, Method method,
                                     const EpisodeContext& context, Rng& env_rng, const Decider& decide,
                                     int episode) {
  const auto& net = cfg.network;
  const int period = cfg.scheduling_period;
  if (period < 1 || net.slots_per_episode % period != 0)
    throw ConfigError("scheduling period must divide the episode length");
  const int periods = net.slots_per_episode / period;
  const double slot_norm = context.arrival_rate_bps * net.rbgs_per_oru * net.num_orus;

  NetworkState state = reset_episode(net, context.arrival_rate_bps, context.mean_speed_mps, env_rng, episode);
  LastActions last = initial_last_actions(net, powers);

  EpisodeOutcome out;
  double previous = 0.0;
  double total_rate = 0.0;
  for (int k = 0; k < periods; ++k) {
    const Eigen::VectorXd s = scheduler_observe(net, context, previous);
    PeriodDecision d = decide(s, k);
    if (d.message.method != method) throw std::invalid_argument("decider returned a message for the wrong method");

    double period_rate = 0.0;
    for (int t = 0; t < period; ++t) {
      const auto alloc = apply_activation(d.message, pool, net, powers, state, last);
      auto result = step_env(net, powers, state, alloc, env_rng);
      state = std::move(result.state);
      period_rate += result.throughput_bps;
      out.leftover_bits += result.leftover_bits;
    }
    const double reward = period_rate / (slot_norm * period);
    total_rate += period_rate;
    out.periods.push_back({k, context, previous, d.message, d.gated, d.value, reward});
    if (!d.actions.empty()) out.trajectory.push_back({s, d.actions, reward, d.value, d.log_prob});
    previous = reward;
  }
  out.tau_e = total_rate / (slot_norm * net.slots_per_episode);
  return out;
}

std::string scheduler_kind(Method method) {
  return method == Method::RetainPrevious ? "scheduler_m1" : "scheduler_m2";
}

SchedulerTraining train_scheduler(Method method, const XAppPool& pool, const Config& cfg, long long episodes,
                                  std::uint64_t seed, const ProgressFn& progress) {
  cfg.validate();
  if (episodes < 0) throw std::invalid_argument("train_scheduler: negative episode count");
  const auto& net = cfg.network;
  const PowerSet powers = build_power_set(net);
  const A2CHyper hyper = cfg.scheduler_a2c();

  Rng init_rng = make_rng(seed, {kInitStream});
  Rng context_rng = make_rng(seed, {kContextStream});
  Rng policy_rng = make_rng(seed, {kPolicyStream});
  A2CLearner learner = make_learner(make_actor_critic(3, {action_count(method)}, hyper, init_rng));

  const auto& rates = net.arrival_rate_set_bps;
  const auto& speeds = net.mean_speed_set_mps;
  const Decider decide = [&](const Eigen::VectorXd& s, int) {
    const auto choice = scheduler_act(method, learner.net, s, &policy_rng);
    return PeriodDecision{choice.message, false, critic_value(learner.net, s), choice.sample.indices,
                          choice.sample.log_prob};
  };

  SchedulerTraining out;
  out.history.reserve(static_cast<std::size_t>(episodes));
  for (long long e = 0; e < episodes; ++e) {
    const EpisodeContext ctx{rates[std::uniform_int_distribution<std::size_t>(0, rates.size() - 1)(context_rng)],
                             speeds[std::uniform_int_distribution<std::size_t>(0, speeds.size() - 1)(context_rng)]};
    Rng env_rng = make_rng(seed, {kEnvStream, static_cast<std::uint64_t>(e)});
    const auto outcome = run_scheduled_episode(cfg, powers, pool, method, ctx, env_rng, decide, static_cast<int>(e));
    a2c_update(learner, outcome.trajectory, hyper);
    out.history.push_back({e, ctx.arrival_rate_bps, ctx.mean_speed_mps, outcome.tau_e});
    if (progress) progress(e, outcome.tau_e);
  }

  out.checkpoint.kind = scheduler_kind(method);
  out.checkpoint.net = std::move(learner.net);
  out.checkpoint.hyper = hyper;
  out.checkpoint.episodes = episodes;
  out.checkpoint.seed = seed;
  return out;
}

}  // namespace xsched
