#include "xsched/xapps.hpp"

#include <sstream>
#include <stdexcept>

namespace xsched {

namespace {

constexpr std::uint64_t kInitStream = 0x1;
constexpr std::uint64_t kContextStream = 0x2;
constexpr std::uint64_t kPolicyStream = 0x3;
constexpr std::uint64_t kEnvStream = 0x4;

std::vector<int> heads_of(const NetworkConfig& cfg, int size) {
  return std::vector<int>(static_cast<std::size_t>(cfg.num_orus * cfg.rbgs_per_oru), size);
}

Eigen::Vector4d owner_features(const PowerSet& powers, const NetworkState& state, int b, int r) {
  const auto& l = state.links;
  return {l.csi(b, r), l.rate(b, r), powers[state.allocation.power(b, r)], l.arrivals(b, r)};
}

void check_heads(const ActorCritic& net, const std::vector<int>& expected, const char* what) {
  if (net.head_sizes != expected) throw std::invalid_argument(std::string(what) + ": policy head layout does not match the network config");
}

}  // namespace

std::string to_string(XAppKind kind) {
  switch (kind) {
    case XAppKind::PowerA2C: return "power_a2c";
    case XAppKind::RbgA2C: return "rbg_a2c";
    case XAppKind::PowerBaseline: return "power_baseline";
    case XAppKind::RbgBaseline: return "rbg_baseline";
  }
  return "unknown";
}

XAppKind parse_xapp_kind(const std::string& name) {
  if (name == "power" || name == "power_a2c") return XAppKind::PowerA2C;
  if (name == "rbg" || name == "rbg_a2c") return XAppKind::RbgA2C;
  if (name == "power_baseline") return XAppKind::PowerBaseline;
  if (name == "rbg_baseline") return XAppKind::RbgBaseline;
  throw std::invalid_argument("unknown xApp kind '" + name + "'");
}

bool is_trainable(XAppKind kind) { return kind == XAppKind::PowerA2C || kind == XAppKind::RbgA2C; }

Eigen::VectorXd power_observe(const NetworkConfig& cfg, const PowerSet& powers, const NetworkState& state) {
  Eigen::VectorXd f(power_input_size(cfg));
  for (int b = 0; b < cfg.num_orus; ++b)
    for (int r = 0; r < cfg.rbgs_per_oru; ++r)
      f.segment<4>(4 * (b * cfg.rbgs_per_oru + r)) = owner_features(powers, state, b, r);
  return f;
}

Eigen::VectorXd rbg_observe(const NetworkConfig& cfg, const PowerSet& powers, const NetworkState& state) {
  const int n = cfg.users_per_oru();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(rbg_input_size(cfg));
  for (int b = 0; b < cfg.num_orus; ++b) {
    for (int r = 0; r < cfg.rbgs_per_oru; ++r) {
      const int local = state.allocation.owner(b, r) - global_user(cfg, b, 0);
      f.segment<4>(4 * ((b * cfg.rbgs_per_oru + r) * n + local)) = owner_features(powers, state, b, r);
    }
  }
  return f;
}

Eigen::VectorXd scale_features(const NetworkConfig& cfg, const Eigen::VectorXd& raw) {
  if (raw.size() % 4 != 0) throw std::invalid_argument("scale_features: length must be a multiple of 4");
  const double d_max = cfg.max_arrival_rate_bps();
  const Eigen::Array4d scale(1.0 / cfg.csi_clamp, 1.0 / d_max, 1.0 / cfg.p_max_mw,
                             1.0 / (d_max * cfg.slot_duration_s));
  Eigen::VectorXd out = raw;
  out.reshaped(4, raw.size() / 4).array().colwise() *= scale;
  return out;
}

std::vector<int> power_head_sizes(const NetworkConfig& cfg) { return heads_of(cfg, cfg.power_levels); }
std::vector<int> rbg_head_sizes(const NetworkConfig& cfg) { return heads_of(cfg, cfg.users_per_oru()); }
int power_input_size(const NetworkConfig& cfg) { return 4 * cfg.num_orus * cfg.rbgs_per_oru; }
int rbg_input_size(const NetworkConfig& cfg) { return 4 * cfg.num_orus * cfg.rbgs_per_oru * cfg.users_per_oru(); }

Eigen::VectorXd xapp_input(XAppKind kind, const NetworkConfig& cfg, const PowerSet& powers, const NetworkState& state) {
  switch (kind) {
    case XAppKind::PowerA2C: return scale_features(cfg, power_observe(cfg, powers, state));
    case XAppKind::RbgA2C: return scale_features(cfg, rbg_observe(cfg, powers, state));
    default: throw std::invalid_argument("xapp_input: baseline xApps take no input");
  }
}

XAppDecision power_act(const ActorCritic& net, const NetworkConfig& cfg, const Eigen::VectorXd& input, Rng* rng) {
  check_heads(net, power_head_sizes(cfg), "power_act");
  const auto policy = actor_forward(net.actor, input, net.head_sizes);
  XAppDecision d;
  d.sample = rng ? sample_action(policy, *rng) : greedy_action(policy);
  d.action.ncp = Ncp::Power;
  d.action.values.resize(cfg.num_orus, cfg.rbgs_per_oru);
  for (int b = 0; b < cfg.num_orus; ++b)
    for (int r = 0; r < cfg.rbgs_per_oru; ++r)
      d.action.values(b, r) = d.sample.indices[static_cast<std::size_t>(b * cfg.rbgs_per_oru + r)];
  return d;
}

XAppDecision rbg_act(const ActorCritic& net, const NetworkConfig& cfg, const Eigen::VectorXd& input, Rng* rng) {
  check_heads(net, rbg_head_sizes(cfg), "rbg_act");
  const auto policy = actor_forward(net.actor, input, net.head_sizes);
  XAppDecision d;
  d.sample = rng ? sample_action(policy, *rng) : greedy_action(policy);
  d.action.ncp = Ncp::RbgOwner;
  d.action.values.resize(cfg.num_orus, cfg.rbgs_per_oru);
  for (int b = 0; b < cfg.num_orus; ++b)
    for (int r = 0; r < cfg.rbgs_per_oru; ++r)
      d.action.values(b, r) = global_user(cfg, b, d.sample.indices[static_cast<std::size_t>(b * cfg.rbgs_per_oru + r)]);
  return d;
}

XAppAction baseline_power(const NetworkConfig& cfg, const PowerSet& powers) {
  return {Ncp::Power, equal_split_allocation(cfg, powers).power};
}

XAppAction baseline_rbg(const NetworkConfig& cfg) {
  const PowerSet powers = build_power_set(cfg);
  return {Ncp::RbgOwner, equal_split_allocation(cfg, powers).owner};
}

double episode_reward(const std::vector<double>& slot_rates_bps, double arrival_rate_bps, int rbgs, int orus,
                      int slots) {
  const double denom = arrival_rate_bps * rbgs * orus * slots;
  if (!(denom > 0)) throw std::invalid_argument("episode_reward: zero denominator");
  if (static_cast<int>(slot_rates_bps.size()) != slots)
    throw std::invalid_argument("episode_reward: expected one rate per slot");
  double total = 0.0;
  for (double r : slot_rates_bps) total += r;
  return total / denom;
}

XAppTraining train_xapp(XAppKind kind, const Config& cfg, long long episodes, std::uint64_t seed,
                        const ProgressFn& progress) {
  if (!is_trainable(kind)) throw std::invalid_argument("train_xapp: " + to_string(kind) + " is not trainable");
  if (episodes < 0) throw std::invalid_argument("train_xapp: negative episode count");
  cfg.validate();
  const auto& net_cfg = cfg.network;
  const PowerSet powers = build_power_set(net_cfg);
  const bool is_power = kind == XAppKind::PowerA2C;
  const int T = net_cfg.slots_per_episode;

  Rng init_rng = make_rng(seed, {kInitStream});
  Rng context_rng = make_rng(seed, {kContextStream});
  Rng policy_rng = make_rng(seed, {kPolicyStream});
  const int input = is_power ? power_input_size(net_cfg) : rbg_input_size(net_cfg);
  const auto heads = is_power ? power_head_sizes(net_cfg) : rbg_head_sizes(net_cfg);
  A2CLearner learner = make_learner(make_actor_critic(input, heads, cfg.a2c, init_rng));

  const auto rates = net_cfg.arrival_rate_set_bps;
  const auto speeds = net_cfg.mean_speed_set_mps;
  const AllocationState baseline = equal_split_allocation(net_cfg, powers);

  XAppTraining out;
  out.history.reserve(static_cast<std::size_t>(episodes));
  Trajectory trajectory;
  std::vector<double> slot_rates;
  for (long long e = 0; e < episodes; ++e) {
    const double d_e = rates[std::uniform_int_distribution<std::size_t>(0, rates.size() - 1)(context_rng)];
    const double v_e = speeds[std::uniform_int_distribution<std::size_t>(0, speeds.size() - 1)(context_rng)];
    Rng env_rng = make_rng(seed, {kEnvStream, static_cast<std::uint64_t>(e)});
    NetworkState state = reset_episode(net_cfg, d_e, v_e, env_rng, static_cast<int>(e));
    const double per_slot_norm = d_e * net_cfg.rbgs_per_oru * net_cfg.num_orus * T;

    trajectory.clear();
    slot_rates.clear();
    for (int t = 0; t < T; ++t) {
      TrajectoryStep step;
      step.state = xapp_input(kind, net_cfg, powers, state);
      const auto decision = is_power ? power_act(learner.net, net_cfg, step.state, &policy_rng)
                                     : rbg_act(learner.net, net_cfg, step.state, &policy_rng);
      step.actions = decision.sample.indices;
      step.log_prob = decision.sample.log_prob;
      step.value = critic_value(learner.net, step.state);

      AllocationState next = baseline;
      (is_power ? next.power : next.owner) = decision.action.values;
      auto result = step_env(net_cfg, powers, state, next, env_rng);
      state = std::move(result.state);
      slot_rates.push_back(result.throughput_bps);
      step.reward = result.throughput_bps / per_slot_norm;
      trajectory.push_back(std::move(step));
    }
    a2c_update(learner, trajectory, cfg.a2c);
    const double tau_e = episode_reward(slot_rates, d_e, net_cfg.rbgs_per_oru, net_cfg.num_orus, T);
    out.history.push_back({e, d_e, v_e, tau_e});
    if (progress) progress(e, tau_e);
  }

  out.checkpoint.kind = to_string(kind);
  out.checkpoint.net = std::move(learner.net);
  out.checkpoint.hyper = cfg.a2c;
  out.checkpoint.episodes = episodes;
  out.checkpoint.seed = seed;
  return out;
}

std::string history_csv(const std::vector<RewardRecord>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "episode,d_e,mean_speed,tau_e\n";
  for (const auto& h : history) os << h.episode << ',' << h.arrival_rate_bps << ',' << h.mean_speed_mps << ',' << h.tau_e << '\n';
  return os.str();
}

}  // namespace xsched
