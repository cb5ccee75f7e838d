#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xsched {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Physical and traffic parameters of the multi-cell downlink.
///
/// Powers are held in mW. The key-value file carries them in dBm and the
/// conversion happens in parse_config().
struct NetworkConfig {
  int num_orus = 4;
  int rbgs_per_oru = 12;
  int num_users = 16;
  double inter_site_distance_m = 900.0;
  double carrier_bandwidth_hz = 20e6;
  double noise_power_mw = 3.981071705534972e-12;  // -114 dBm
  double p_min_mw = 1.2589254117941673;           // 1 dBm
  double p_max_mw = 6309.573444801932;            // 38 dBm
  int power_levels = 10;
  double pathloss_intercept_db = 120.9;
  double pathloss_slope_db = 37.6;
  double shadowing_std_db = 8.0;
  double slot_duration_s = 0.1;
  int slots_per_episode = 50;
  double direction_change_prob = 0.3;
  double speed_min_mps = 1.0;
  double speed_max_mps = 50.0;
  double speed_spread_mps = 5.0;
  std::vector<double> arrival_rate_set_bps{3e6, 5e6, 7e6, 9e6};
  std::vector<double> mean_speed_set_mps{10.0, 20.0, 30.0, 40.0};
  double initial_distance_min_m = 150.0;
  double initial_distance_max_m = 450.0;
  bool rayleigh_fading = false;
  double csi_clamp = 30.0;

  double rbg_bandwidth_hz() const { return carrier_bandwidth_hz / rbgs_per_oru; }
  int users_per_oru() const { return num_users / num_orus; }
  double max_arrival_rate_bps() const;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

enum class AdvantageMode { FullReturn, OneStep };

struct A2CHyper {
  double learning_rate = 1e-4;
  double discount = 0.95;
  double value_weight = 0.5;
  double clip_norm = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int hidden_units = 128;
  int hidden_layers = 2;
  AdvantageMode advantage_mode = AdvantageMode::FullReturn;

  void validate() const;
};

enum class FallbackPolicy { EqualAllocation, BestPowerXApp, BestRbgXApp };

struct SafetyConfig {
  bool enabled = false;
  double beta = 0.05;
  double z_threshold = -2.0;
  int t_back = 3;
  int warmup = 20;
  double sigma_floor = 1e-6;
  FallbackPolicy fallback = FallbackPolicy::EqualAllocation;

  void validate() const;
};

struct Config {
  NetworkConfig network;
  A2CHyper a2c;
  SafetyConfig safety;
  int scheduling_period = 10;
  double scheduler_learning_rate = 1e-4;

  /// a2c with the scheduler learning rate.
  A2CHyper scheduler_a2c() const;

  void validate() const;
};

double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

/// Parses the flat `key=value` format. `#` starts a comment. Unknown or
/// repeated keys are errors; absent keys keep their defaults.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);

/// Text form listing every key, suitable for a reference config file.
std::string to_text(const Config& config);

std::string to_string(AdvantageMode mode);
std::string to_string(FallbackPolicy policy);

}  // namespace xsched
