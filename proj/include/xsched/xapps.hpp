#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xsched/a2c.hpp"
#include "xsched/checkpoint.hpp"
#include "xsched/config.hpp"
#include "xsched/env.hpp"

namespace xsched {

enum class XAppKind { PowerA2C, RbgA2C, PowerBaseline, RbgBaseline };

std::string to_string(XAppKind kind);
XAppKind parse_xapp_kind(const std::string& name);
bool is_trainable(XAppKind kind);

/// The network control parameter family an action writes.
enum class Ncp { Power, RbgOwner };

struct XAppAction {
  Ncp ncp = Ncp::Power;
  Eigen::MatrixXi values;  // B x R: power index or global owner id
};

/// Per (b, r), b-major: [csi, rate, power mW, arrivals] of the RBG's owner.
Eigen::VectorXd power_observe(const NetworkConfig& cfg, const PowerSet& powers, const NetworkState& state);

/// Per (b, r, local user), b-major then r then user: the owner's
/// [csi, rate, power mW, arrivals] masked by the ownership indicator. The
/// position of the non-zero block encodes who owns each RBG.
Eigen::VectorXd rbg_observe(const NetworkConfig& cfg, const PowerSet& powers, const NetworkState& state);

/// Rescales consecutive 4-feature blocks: csi / csi_clamp, rate / d_max,
/// power / p_max, arrivals / (d_max * T_s).
Eigen::VectorXd scale_features(const NetworkConfig& cfg, const Eigen::VectorXd& raw);

std::vector<int> power_head_sizes(const NetworkConfig& cfg);
std::vector<int> rbg_head_sizes(const NetworkConfig& cfg);
int power_input_size(const NetworkConfig& cfg);
int rbg_input_size(const NetworkConfig& cfg);

/// Input vector fed to the trained network of `kind`.
Eigen::VectorXd xapp_input(XAppKind kind, const NetworkConfig& cfg, const PowerSet& powers, const NetworkState& state);

struct XAppDecision {
  XAppAction action;
  SampledAction sample;
};

/// Samples when `rng` is given, otherwise takes the per-head argmax.
XAppDecision power_act(const ActorCritic& net, const NetworkConfig& cfg, const Eigen::VectorXd& input, Rng* rng);
XAppDecision rbg_act(const ActorCritic& net, const NetworkConfig& cfg, const Eigen::VectorXd& input, Rng* rng);

XAppAction baseline_power(const NetworkConfig& cfg, const PowerSet& powers);
XAppAction baseline_rbg(const NetworkConfig& cfg);

/// Normalized episode throughput: sum of slot rates over d_e * R * B * T.
double episode_reward(const std::vector<double>& slot_rates_bps, double arrival_rate_bps, int rbgs, int orus,
                      int slots);

struct RewardRecord {
  long long episode = 0;
  double arrival_rate_bps = 0.0;
  double mean_speed_mps = 0.0;
  double tau_e = 0.0;
};

struct XAppTraining {
  Checkpoint checkpoint;
  std::vector<RewardRecord> history;
};

using ProgressFn = std::function<void(long long episode, double tau_e)>;

/// Trains one A2C xApp with the other parameter family held at its equal
/// allocation baseline. One update per episode.
XAppTraining train_xapp(XAppKind kind, const Config& cfg, long long episodes, std::uint64_t seed,
                        const ProgressFn& progress = {});

std::string history_csv(const std::vector<RewardRecord>& history);

}  // namespace xsched
