#include "xsched/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace xsched {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt(v[i]);
  }
  return out;
}

struct Key {
  std::function<void(Config&, const std::string&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

#define XSCHED_DOUBLE(name, member)                                                          \
  {                                                                                          \
    name, {                                                                                  \
      [](Config& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); }, \
          [](const Config& c) { return fmt(c.member); }                                      \
    }                                                                                        \
  }
#define XSCHED_INT(name, member)                                                             \
  {                                                                                          \
    name, {                                                                                  \
      [](Config& c, const std::string& k, const std::string& v) { c.member = parse_int(k, v); }, \
          [](const Config& c) { return std::to_string(c.member); }                           \
    }                                                                                        \
  }
#define XSCHED_DBM(name, member)                                                             \
  {                                                                                          \
    name, {                                                                                  \
      [](Config& c, const std::string& k, const std::string& v) {                            \
        c.member = dbm_to_mw(parse_double(k, v));                                            \
      },                                                                                     \
          [](const Config& c) { return fmt(mw_to_dbm(c.member)); }                           \
    }                                                                                        \
  }

// to_text() order
const std::vector<std::pair<std::string, Key>>& key_table() {
  static const std::vector<std::pair<std::string, Key>> table = {
      XSCHED_INT("num_orus", network.num_orus),
      XSCHED_INT("rbgs_per_oru", network.rbgs_per_oru),
      XSCHED_INT("num_users", network.num_users),
      XSCHED_DOUBLE("inter_site_distance_m", network.inter_site_distance_m),
      XSCHED_DOUBLE("carrier_bandwidth_hz", network.carrier_bandwidth_hz),
      XSCHED_DBM("noise_power_dbm", network.noise_power_mw),
      XSCHED_DBM("p_min_dbm", network.p_min_mw),
      XSCHED_DBM("p_max_dbm", network.p_max_mw),
      XSCHED_INT("power_levels", network.power_levels),
      XSCHED_DOUBLE("pathloss_intercept_db", network.pathloss_intercept_db),
      XSCHED_DOUBLE("pathloss_slope_db", network.pathloss_slope_db),
      XSCHED_DOUBLE("shadowing_std_db", network.shadowing_std_db),
      XSCHED_DOUBLE("slot_duration_s", network.slot_duration_s),
      XSCHED_INT("slots_per_episode", network.slots_per_episode),
      XSCHED_DOUBLE("direction_change_prob", network.direction_change_prob),
      XSCHED_DOUBLE("speed_min_mps", network.speed_min_mps),
      XSCHED_DOUBLE("speed_max_mps", network.speed_max_mps),
      XSCHED_DOUBLE("speed_spread_mps", network.speed_spread_mps),
      {"arrival_rate_set_bps",
       {[](Config& c, const std::string& k, const std::string& v) {
          c.network.arrival_rate_set_bps = parse_list(k, v);
        },
        [](const Config& c) { return fmt_list(c.network.arrival_rate_set_bps); }}},
      {"mean_speed_set_mps",
       {[](Config& c, const std::string& k, const std::string& v) {
          c.network.mean_speed_set_mps = parse_list(k, v);
        },
        [](const Config& c) { return fmt_list(c.network.mean_speed_set_mps); }}},
      XSCHED_DOUBLE("initial_distance_min_m", network.initial_distance_min_m),
      XSCHED_DOUBLE("initial_distance_max_m", network.initial_distance_max_m),
      {"rayleigh_fading",
       {[](Config& c, const std::string& k, const std::string& v) {
          c.network.rayleigh_fading = parse_bool(k, v);
        },
        [](const Config& c) { return std::string(c.network.rayleigh_fading ? "true" : "false"); }}},
      XSCHED_DOUBLE("csi_clamp", network.csi_clamp),
      XSCHED_INT("scheduling_period", scheduling_period),
      XSCHED_DOUBLE("scheduler.learning_rate", scheduler_learning_rate),
      XSCHED_DOUBLE("a2c.learning_rate", a2c.learning_rate),
      XSCHED_DOUBLE("a2c.discount", a2c.discount),
      XSCHED_DOUBLE("a2c.value_weight", a2c.value_weight),
      XSCHED_DOUBLE("a2c.clip_norm", a2c.clip_norm),
      XSCHED_DOUBLE("a2c.adam_beta1", a2c.adam_beta1),
      XSCHED_DOUBLE("a2c.adam_beta2", a2c.adam_beta2),
      XSCHED_DOUBLE("a2c.adam_epsilon", a2c.adam_epsilon),
      XSCHED_INT("a2c.hidden_units", a2c.hidden_units),
      XSCHED_INT("a2c.hidden_layers", a2c.hidden_layers),
      {"a2c.advantage_mode",
       {[](Config& c, const std::string& k, const std::string& v) {
          if (v == "full_return")
            c.a2c.advantage_mode = AdvantageMode::FullReturn;
          else if (v == "one_step")
            c.a2c.advantage_mode = AdvantageMode::OneStep;
          else
            throw ConfigError("config key '" + k + "': expected full_return|one_step");
        },
        [](const Config& c) { return to_string(c.a2c.advantage_mode); }}},
      {"safety.enabled",
       {[](Config& c, const std::string& k, const std::string& v) { c.safety.enabled = parse_bool(k, v); },
        [](const Config& c) { return std::string(c.safety.enabled ? "true" : "false"); }}},
      XSCHED_DOUBLE("safety.beta", safety.beta),
      XSCHED_DOUBLE("safety.z_threshold", safety.z_threshold),
      XSCHED_INT("safety.t_back", safety.t_back),
      XSCHED_INT("safety.warmup", safety.warmup),
      XSCHED_DOUBLE("safety.sigma_floor", safety.sigma_floor),
      {"safety.fallback",
       {[](Config& c, const std::string& k, const std::string& v) {
          if (v == "equal")
            c.safety.fallback = FallbackPolicy::EqualAllocation;
          else if (v == "power")
            c.safety.fallback = FallbackPolicy::BestPowerXApp;
          else if (v == "rbg")
            c.safety.fallback = FallbackPolicy::BestRbgXApp;
          else
            throw ConfigError("config key '" + k + "': expected equal|power|rbg");
        },
        [](const Config& c) { return to_string(c.safety.fallback); }}},
  };
  return table;
}

#undef XSCHED_DOUBLE
#undef XSCHED_INT
#undef XSCHED_DBM

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

}  // namespace

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

double NetworkConfig::max_arrival_rate_bps() const {
  return *std::max_element(arrival_rate_set_bps.begin(), arrival_rate_set_bps.end());
}

void NetworkConfig::validate() const {
  require(num_orus >= 1, "num_orus must be >= 1");
  require(rbgs_per_oru >= 1, "rbgs_per_oru must be >= 1");
  require(num_users >= num_orus && num_users % num_orus == 0,
          "num_users must be a positive multiple of num_orus");
  require(inter_site_distance_m > 0, "inter_site_distance_m must be > 0");
  require(carrier_bandwidth_hz > 0, "carrier_bandwidth_hz must be > 0");
  require(noise_power_mw > 0, "noise power must be > 0");
  require(p_min_mw > 0 && p_min_mw <= p_max_mw, "need 0 < p_min <= p_max");
  require(power_levels >= 2, "power_levels must be >= 2");
  require(power_levels > 2 || p_min_mw == p_max_mw, "power_levels = 2 requires p_min == p_max");
  require(shadowing_std_db >= 0, "shadowing_std_db must be >= 0");
  require(slot_duration_s > 0, "slot_duration_s must be > 0");
  require(slots_per_episode >= 1, "slots_per_episode must be >= 1");
  require(direction_change_prob >= 0 && direction_change_prob <= 1,
          "direction_change_prob must lie in [0, 1]");
  require(speed_min_mps > 0 && speed_min_mps <= speed_max_mps, "need 0 < speed_min <= speed_max");
  require(speed_spread_mps >= 0, "speed_spread_mps must be >= 0");
  for (double d : arrival_rate_set_bps) require(d > 0, "arrival rates must be > 0");
  for (double v : mean_speed_set_mps)
    require(v >= speed_min_mps && v <= speed_max_mps, "mean speeds must lie in [speed_min, speed_max]");
  require(initial_distance_min_m > 0 && initial_distance_min_m <= initial_distance_max_m,
          "need 0 < initial_distance_min <= initial_distance_max");
  require(csi_clamp > 0, "csi_clamp must be > 0");
}

void A2CHyper::validate() const {
  require(learning_rate > 0, "a2c.learning_rate must be > 0");
  require(discount > 0 && discount < 1, "a2c.discount must lie in (0, 1)");
  require(value_weight > 0, "a2c.value_weight must be > 0");
  require(clip_norm > 0, "a2c.clip_norm must be > 0");
  require(adam_beta1 >= 0 && adam_beta1 < 1, "a2c.adam_beta1 must lie in [0, 1)");
  require(adam_beta2 >= 0 && adam_beta2 < 1, "a2c.adam_beta2 must lie in [0, 1)");
  require(adam_epsilon > 0, "a2c.adam_epsilon must be > 0");
  require(hidden_units >= 1, "a2c.hidden_units must be >= 1");
  require(hidden_layers >= 0, "a2c.hidden_layers must be >= 0");
}

void SafetyConfig::validate() const {
  require(beta >= 0 && beta <= 1, "safety.beta must lie in [0, 1]");
  require(t_back >= 1, "safety.t_back must be >= 1");
  require(warmup >= 0, "safety.warmup must be >= 0");
  require(sigma_floor > 0, "safety.sigma_floor must be > 0");
}

void Config::validate() const {
  network.validate();
  a2c.validate();
  safety.validate();
  require(scheduling_period >= 1 && network.slots_per_episode % scheduling_period == 0,
          "scheduling_period must divide slots_per_episode");
  require(scheduler_learning_rate > 0, "scheduler.learning_rate must be > 0");
}

A2CHyper Config::scheduler_a2c() const {
  A2CHyper h = a2c;
  h.learning_rate = scheduler_learning_rate;
  return h;
}

Config parse_config(std::string_view text) {
  std::map<std::string, const Key*> lookup;
  for (const auto& [name, key] : key_table()) lookup.emplace(name, &key);

  Config config;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = lookup.find(key);
    if (it == lookup.end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' given twice");
    it->second->set(config, key, value);
  }
  config.validate();
  return config;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const Config& config) {
  std::string out;
  for (const auto& [name, key] : key_table()) out += name + "=" + key.get(config) + "\n";
  return out;
}

std::string to_string(AdvantageMode mode) {
  return mode == AdvantageMode::FullReturn ? "full_return" : "one_step";
}

std::string to_string(FallbackPolicy policy) {
  switch (policy) {
    case FallbackPolicy::EqualAllocation: return "equal";
    case FallbackPolicy::BestPowerXApp: return "power";
    case FallbackPolicy::BestRbgXApp: return "rbg";
  }
  return "equal";
}

}  // namespace xsched
