#include "xsched/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace xsched {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0) t += kTwoPi;
  // fmod can return exactly 2*pi after the correction above for tiny negatives.
  return t >= kTwoPi ? 0.0 : t;
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

}  // namespace

Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (tags.size() + 1));
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto t : tags) push(t);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

int PowerSet::nearest_nonzero(double mw) const {
  int best = size() > 1 ? 1 : 0;
  double best_err = std::abs(std::log(levels[static_cast<std::size_t>(best)] / mw));
  for (int k = 2; k < size(); ++k) {
    const double err = std::abs(std::log(levels[static_cast<std::size_t>(k)] / mw));
    if (err < best_err) {
      best = k;
      best_err = err;
    }
  }
  return best;
}

PowerSet build_power_set(double p_min_mw, double p_max_mw, int levels) {
  if (!(p_min_mw > 0)) throw std::invalid_argument("build_power_set: p_min must be positive");
  if (p_max_mw < p_min_mw) throw std::invalid_argument("build_power_set: p_max < p_min");
  if (levels < 2) throw std::invalid_argument("build_power_set: need at least 2 levels");
  if (levels == 2 && p_min_mw != p_max_mw)
    throw std::invalid_argument("build_power_set: 2 levels require p_min == p_max");

  PowerSet set;
  set.levels.reserve(static_cast<std::size_t>(levels));
  set.levels.push_back(0.0);
  if (levels == 2) {
    set.levels.push_back(p_min_mw);
    return set;
  }
  set.ratio = std::pow(p_max_mw / p_min_mw, 1.0 / (levels - 2));
  for (int k = 0; k <= levels - 2; ++k) set.levels.push_back(p_min_mw * std::pow(set.ratio, k));
  // Pin the top level so rounding in pow() cannot overshoot p_max.
  set.levels.back() = p_max_mw;
  return set;
}

PowerSet build_power_set(const NetworkConfig& cfg) {
  return build_power_set(cfg.p_min_mw, cfg.p_max_mw, cfg.power_levels);
}

std::vector<Eigen::Vector2d> oru_positions(const NetworkConfig& cfg) {
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.num_orus))));
  std::vector<Eigen::Vector2d> sites;
  sites.reserve(static_cast<std::size_t>(cfg.num_orus));
  for (int b = 0; b < cfg.num_orus; ++b)
    sites.emplace_back((b % cols) * cfg.inter_site_distance_m, (b / cols) * cfg.inter_site_distance_m);
  return sites;
}

Eigen::AlignedBox2d deployment_area(const NetworkConfig& cfg) {
  Eigen::AlignedBox2d box;
  for (const auto& s : oru_positions(cfg)) box.extend(s);
  const Eigen::Vector2d margin = Eigen::Vector2d::Constant(cfg.initial_distance_max_m);
  return Eigen::AlignedBox2d(box.min() - margin, box.max() + margin);
}

int global_user(const NetworkConfig& cfg, int oru, int local_user) {
  return oru * cfg.users_per_oru() + local_user;
}

AllocationState equal_split_allocation(const NetworkConfig& cfg, const PowerSet& powers) {
  const int n = cfg.users_per_oru();
  const int mid = powers.nearest_nonzero(std::sqrt(cfg.p_min_mw * cfg.p_max_mw));
  AllocationState a;
  a.owner.resize(cfg.num_orus, cfg.rbgs_per_oru);
  a.power.setConstant(cfg.num_orus, cfg.rbgs_per_oru, mid);
  for (int b = 0; b < cfg.num_orus; ++b)
    for (int r = 0; r < cfg.rbgs_per_oru; ++r) a.owner(b, r) = global_user(cfg, b, r % n);
  return a;
}

void check_allocation(const NetworkConfig& cfg, const PowerSet& powers, const AllocationState& a) {
  if (a.owner.rows() != cfg.num_orus || a.owner.cols() != cfg.rbgs_per_oru || a.power.rows() != cfg.num_orus ||
      a.power.cols() != cfg.rbgs_per_oru)
    throw std::invalid_argument("allocation shape does not match B x R");
  const int n = cfg.users_per_oru();
  for (int b = 0; b < cfg.num_orus; ++b) {
    for (int r = 0; r < cfg.rbgs_per_oru; ++r) {
      const int u = a.owner(b, r);
      if (u < b * n || u >= (b + 1) * n)
        throw std::invalid_argument("RBG (" + std::to_string(b) + "," + std::to_string(r) +
                                    ") owned by user " + std::to_string(u) + " not served by that O-RU");
      if (a.power(b, r) < 0 || a.power(b, r) >= powers.size())
        throw std::invalid_argument("power index out of range at (" + std::to_string(b) + "," +
                                    std::to_string(r) + ")");
    }
  }
}

NetworkState reset_episode(const NetworkConfig& cfg, double arrival_rate_bps, double mean_speed_mps, Rng& rng,
                           int episode) {
  cfg.validate();
  if (arrival_rate_bps < 0) throw std::invalid_argument("reset_episode: negative arrival rate");
  if (mean_speed_mps < cfg.speed_min_mps || mean_speed_mps > cfg.speed_max_mps)
    throw std::invalid_argument("reset_episode: mean speed outside [speed_min, speed_max]");

  NetworkState state;
  state.episode = episode;
  state.context = {arrival_rate_bps, mean_speed_mps};

  const auto sites = oru_positions(cfg);
  const double v_lo = std::max(cfg.speed_min_mps, mean_speed_mps - cfg.speed_spread_mps);
  const double v_hi = std::min(cfg.speed_max_mps, mean_speed_mps + cfg.speed_spread_mps);
  state.users.resize(static_cast<std::size_t>(cfg.num_users));
  for (int u = 0; u < cfg.num_users; ++u) {
    auto& user = state.users[static_cast<std::size_t>(u)];
    user.serving_oru = u / cfg.users_per_oru();
    const double angle = uniform(rng, 0.0, kTwoPi);
    const double dist = uniform(rng, cfg.initial_distance_min_m, cfg.initial_distance_max_m);
    user.position = sites[static_cast<std::size_t>(user.serving_oru)] +
                    dist * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    user.speed = v_lo < v_hi ? uniform(rng, v_lo, v_hi) : v_lo;
    user.direction = wrap_angle(uniform(rng, 0.0, kTwoPi));
  }

  state.shadowing_db.resize(cfg.num_orus, cfg.num_users);
  std::normal_distribution<double> shadow(0.0, cfg.shadowing_std_db);
  for (int u = 0; u < cfg.num_users; ++u)
    for (int b = 0; b < cfg.num_orus; ++b) state.shadowing_db(b, u) = cfg.shadowing_std_db > 0 ? shadow(rng) : 0.0;

  const PowerSet powers = build_power_set(cfg);
  state.allocation = equal_split_allocation(cfg, powers);

  auto& links = state.links;
  links.gain = channel_gains(cfg, state);
  links.csi = compute_csi(cfg, links.gain, state.allocation);
  auto sc = compute_sinr_capacity(cfg, powers, links.gain, state.allocation);
  links.sinr = std::move(sc.sinr);
  links.capacity = std::move(sc.capacity);
  links.arrivals.setZero(cfg.num_orus, cfg.rbgs_per_oru);
  links.delivered.setZero(cfg.num_orus, cfg.rbgs_per_oru);
  links.rate.setZero(cfg.num_orus, cfg.rbgs_per_oru);
  links.leftover.setZero(cfg.num_orus, cfg.rbgs_per_oru);
  return state;
}

NetworkState step_mobility(const NetworkConfig& cfg, NetworkState state, Rng& rng) {
  const auto area = deployment_area(cfg);
  for (auto& user : state.users) {
    // Both draws happen every slot so the stream does not depend on outcomes.
    const double change = uniform(rng, 0.0, 1.0);
    const double delta = uniform(rng, 0.0, kTwoPi);

    const double step = user.speed * cfg.slot_duration_s;
    Eigen::Vector2d p = user.position + step * Eigen::Vector2d(std::cos(user.direction), std::sin(user.direction));
    double theta = user.direction;
    for (int axis = 0; axis < 2; ++axis) {
      const double lo = area.min()(axis);
      const double hi = area.max()(axis);
      bool hit = false;
      if (p(axis) < lo) {
        p(axis) = 2 * lo - p(axis);
        hit = true;
      } else if (p(axis) > hi) {
        p(axis) = 2 * hi - p(axis);
        hit = true;
      }
      if (hit) theta = axis == 0 ? std::numbers::pi - theta : -theta;
    }
    user.position = p.cwiseMax(area.min()).cwiseMin(area.max());
    if (change < cfg.direction_change_prob) theta += delta;
    user.direction = wrap_angle(theta);
  }
  return state;
}

double channel_gain(const NetworkConfig& cfg, const Eigen::Vector2d& oru, const Eigen::Vector2d& user,
                    double shadow_db) {
  const double distance_km = std::max((user - oru).norm(), 1.0) / 1000.0;
  const double loss_db = cfg.pathloss_intercept_db + cfg.pathloss_slope_db * std::log10(distance_km) + shadow_db;
  return std::pow(10.0, -loss_db / 10.0);
}

Eigen::MatrixXd channel_gains(const NetworkConfig& cfg, const NetworkState& state) {
  const auto sites = oru_positions(cfg);
  Eigen::MatrixXd gain(cfg.num_orus, cfg.num_users);
  for (int b = 0; b < cfg.num_orus; ++b)
    for (int u = 0; u < cfg.num_users; ++u)
      gain(b, u) = channel_gain(cfg, sites[static_cast<std::size_t>(b)], state.users[static_cast<std::size_t>(u)].position,
                                state.shadowing_db(b, u));
  return gain;
}

Eigen::MatrixXd draw_arrivals(const NetworkConfig& cfg, double arrival_rate_bps, Rng& rng) {
  Eigen::MatrixXd bits(cfg.num_orus, cfg.rbgs_per_oru);
  const double mean = arrival_rate_bps * cfg.slot_duration_s;
  if (mean <= 0) {
    bits.setZero();
    return bits;
  }
  for (int b = 0; b < cfg.num_orus; ++b)
    for (int r = 0; r < cfg.rbgs_per_oru; ++r)
      bits(b, r) = static_cast<double>(std::poisson_distribution<long long>(mean)(rng));
  return bits;
}

Eigen::MatrixXd compute_csi(const NetworkConfig& cfg, const Eigen::MatrixXd& gain, const AllocationState& allocation) {
  Eigen::MatrixXd csi(cfg.num_orus, cfg.rbgs_per_oru);
  for (int b = 0; b < cfg.num_orus; ++b) {
    for (int r = 0; r < cfg.rbgs_per_oru; ++r) {
      const int u = allocation.owner(b, r);
      const double serving = gain(b, u);
      const double interference = gain.col(u).sum() - serving;
      if (!(serving > 0)) {
        csi(b, r) = cfg.csi_clamp;
        continue;
      }
      csi(b, r) = std::min(std::log2(1.0 + interference / serving), cfg.csi_clamp);
    }
  }
  return csi;
}

SinrCapacity compute_sinr_capacity(const NetworkConfig& cfg, const PowerSet& powers, const Eigen::MatrixXd& gain,
                                   const AllocationState& allocation) {
  SinrCapacity out;
  out.sinr.resize(cfg.num_orus, cfg.rbgs_per_oru);
  for (int b = 0; b < cfg.num_orus; ++b) {
    for (int r = 0; r < cfg.rbgs_per_oru; ++r) {
      const int u = allocation.owner(b, r);
      double interference = 0.0;
      for (int other = 0; other < cfg.num_orus; ++other)
        if (other != b) interference += gain(other, u) * powers[allocation.power(other, r)];
      out.sinr(b, r) = gain(b, u) * powers[allocation.power(b, r)] / (interference + cfg.noise_power_mw);
    }
  }
  out.capacity = cfg.rbg_bandwidth_hz() * out.sinr.array().log1p() / std::numbers::ln2;
  return out;
}

Transmission transmit(const NetworkConfig& cfg, const Eigen::MatrixXd& arrivals, const Eigen::MatrixXd& capacity) {
  Transmission tx;
  const Eigen::ArrayXXd capacity_bits = (capacity.array() * cfg.slot_duration_s).floor();
  tx.delivered = arrivals.array().min(capacity_bits).matrix();
  tx.leftover = arrivals - tx.delivered;
  tx.rate = tx.delivered / cfg.slot_duration_s;
  tx.throughput_bps = tx.rate.sum();
  return tx;
}

StepResult step_env(const NetworkConfig& cfg, const PowerSet& powers, const NetworkState& state,
                    const AllocationState& allocation, Rng& rng) {
  if (state.slot >= cfg.slots_per_episode) throw std::logic_error("step_env: episode already finished");
  check_allocation(cfg, powers, allocation);

  StepResult result{state, 0.0, 0.0};
  NetworkState& next = result.state;
  next.allocation = allocation;

  auto& links = next.links;
  links.gain = channel_gains(cfg, next);
  if (cfg.rayleigh_fading) {
    std::exponential_distribution<double> fading(1.0);
    for (int u = 0; u < cfg.num_users; ++u)
      for (int b = 0; b < cfg.num_orus; ++b) links.gain(b, u) *= fading(rng);
  }
  links.arrivals = draw_arrivals(cfg, state.context.arrival_rate_bps, rng);
  links.csi = compute_csi(cfg, links.gain, allocation);
  auto sc = compute_sinr_capacity(cfg, powers, links.gain, allocation);
  links.sinr = std::move(sc.sinr);
  links.capacity = std::move(sc.capacity);
  auto tx = transmit(cfg, links.arrivals, links.capacity);
  links.delivered = std::move(tx.delivered);
  links.rate = std::move(tx.rate);
  links.leftover = std::move(tx.leftover);
  result.throughput_bps = tx.throughput_bps;
  result.leftover_bits = links.leftover.sum();

  next = step_mobility(cfg, std::move(next), rng);
  ++next.slot;
  return result;
}

}  // namespace xsched
