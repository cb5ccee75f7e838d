#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "xsched/config.hpp"

namespace xsched {

using Rng = std::mt19937_64;

/// Generator for a root seed and a tag path, e.g. {env, cell, episode}.
Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {});

/// Discrete transmit powers in mW. Level 0 is silence; the remaining levels
/// are geometrically spaced between p_min and p_max.
struct PowerSet {
  std::vector<double> levels;
  double ratio = 1.0;

  int size() const { return static_cast<int>(levels.size()); }
  double operator[](int k) const { return levels[static_cast<std::size_t>(k)]; }
  /// Index of the level closest to `mw` on a log scale, ignoring level 0.
  int nearest_nonzero(double mw) const;
};

PowerSet build_power_set(double p_min_mw, double p_max_mw, int levels);
PowerSet build_power_set(const NetworkConfig& cfg);

struct UserState {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double speed = 0.0;
  double direction = 0.0;
  int serving_oru = 0;
};

/// Per (O-RU, RBG) decisions. `owner(b, r)` is a global user id, so the
/// one-owner-per-RBG constraint holds by representation.
struct AllocationState {
  Eigen::MatrixXi owner;
  Eigen::MatrixXi power;
};

/// Link quantities of the last transmitted slot. All matrices are B x R
/// except `gain`, which is B x U.
struct LinkSnapshot {
  Eigen::MatrixXd gain;
  Eigen::MatrixXd csi;
  Eigen::MatrixXd sinr;
  Eigen::MatrixXd capacity;   // bits/s
  Eigen::MatrixXd arrivals;   // bits, integer valued
  Eigen::MatrixXd delivered;  // bits, integer valued
  Eigen::MatrixXd rate;       // bits/s
  Eigen::MatrixXd leftover;   // bits, integer valued
};

struct EpisodeContext {
  double arrival_rate_bps = 0.0;
  double mean_speed_mps = 0.0;
};

struct NetworkState {
  int slot = 0;
  int episode = 0;
  EpisodeContext context;
  std::vector<UserState> users;
  AllocationState allocation;
  LinkSnapshot links;
  Eigen::MatrixXd shadowing_db;  // B x U, fixed for the episode
};

struct StepResult {
  NetworkState state;
  double throughput_bps = 0.0;
  double leftover_bits = 0.0;
};

/// O-RU sites on a square grid with the inter-site distance as pitch.
std::vector<Eigen::Vector2d> oru_positions(const NetworkConfig& cfg);

/// Axis-aligned box the users are reflected in: the O-RU sites grown by the
/// maximum initial distance.
Eigen::AlignedBox2d deployment_area(const NetworkConfig& cfg);

/// Users of O-RU `b` are the contiguous id range [b*n, (b+1)*n).
int global_user(const NetworkConfig& cfg, int oru, int local_user);

AllocationState equal_split_allocation(const NetworkConfig& cfg, const PowerSet& powers);
void check_allocation(const NetworkConfig& cfg, const PowerSet& powers, const AllocationState& a);

NetworkState reset_episode(const NetworkConfig& cfg, double arrival_rate_bps, double mean_speed_mps,
                           Rng& rng, int episode = 0);

NetworkState step_mobility(const NetworkConfig& cfg, NetworkState state, Rng& rng);

double channel_gain(const NetworkConfig& cfg, const Eigen::Vector2d& oru, const Eigen::Vector2d& user,
                    double shadow_db);

/// B x U gains at the current user positions.
Eigen::MatrixXd channel_gains(const NetworkConfig& cfg, const NetworkState& state);

/// Poisson(d_e * T_s) bits on each of the B x R RBGs.
Eigen::MatrixXd draw_arrivals(const NetworkConfig& cfg, double arrival_rate_bps, Rng& rng);

Eigen::MatrixXd compute_csi(const NetworkConfig& cfg, const Eigen::MatrixXd& gain,
                            const AllocationState& allocation);

struct SinrCapacity {
  Eigen::MatrixXd sinr;
  Eigen::MatrixXd capacity;
};

SinrCapacity compute_sinr_capacity(const NetworkConfig& cfg, const PowerSet& powers,
                                   const Eigen::MatrixXd& gain, const AllocationState& allocation);

struct Transmission {
  Eigen::MatrixXd delivered;
  Eigen::MatrixXd rate;
  Eigen::MatrixXd leftover;
  double throughput_bps = 0.0;
};

/// Serves each RBG's arrivals up to its whole-bit capacity for one slot;
/// the excess is discarded and reported as leftover.
Transmission transmit(const NetworkConfig& cfg, const Eigen::MatrixXd& arrivals,
                      const Eigen::MatrixXd& capacity);

StepResult step_env(const NetworkConfig& cfg, const PowerSet& powers, const NetworkState& state,
                    const AllocationState& allocation, Rng& rng);

}  // namespace xsched
