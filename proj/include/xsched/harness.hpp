#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xsched/config.hpp"
#include "xsched/scheduler.hpp"

namespace xsched {

enum class Regime { PowerOnly, RbgOnly, Both, Method1, Method2 };

std::string to_string(Regime regime);
Regime parse_regime(const std::string& name);
bool is_scheduled(Regime regime);

/// What to evaluate: regimes over a (arrival rate x mean speed) grid.
/// Every regime sees the same environment draws for a given
/// (seed, cell, episode), so regime differences come from control only.
struct ExperimentSpec {
  std::vector<Regime> regimes{Regime::PowerOnly, Regime::RbgOnly, Regime::Both, Regime::Method1, Regime::Method2};
  std::vector<double> arrival_rates_bps{2e6, 5e6, 8e6};
  std::vector<double> speeds_mps{5.0, 25.0, 45.0};
  int episodes = 50;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::filesystem::path pool_dir = "pool";

  int cells() const { return static_cast<int>(arrival_rates_bps.size() * speeds_mps.size()); }
  void validate() const;
};

/// Keys: regimes, arrival_rates_bps, speeds_mps, episodes, seeds, pool.
ExperimentSpec parse_experiment_spec(std::string_view text);
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);
std::string to_text(const ExperimentSpec& spec);

struct MetricsRow {
  Regime regime = Regime::PowerOnly;
  double d_bps = 0.0;
  double v_mps = 0.0;
  std::uint64_t seed = 0;
  int episode = 0;
  double tau_e = 0.0;
  double leftover_bits = 0.0;
  std::string trace;  // activation bits per period, '|' separated
};

struct ActivationTraceRow {
  long long episode = 0;
  int period = 0;
  double c1 = 0.0;
  double c2 = 0.0;
  double f = 0.0;
  std::string mu_bits;
  bool gated = false;
  double period_reward = 0.0;
};

/// Trained pool plus the schedulers the scheduled regimes need.
struct EvaluationPool {
  XAppPool xapps;
  std::optional<ActorCritic> scheduler_m1;
  std::optional<ActorCritic> scheduler_m2;
};

/// Loads power.ckpt and rbg.ckpt, plus scheduler_m1.ckpt / scheduler_m2.ckpt
/// when some regime in `spec` needs them.
EvaluationPool load_evaluation_pool(const ExperimentSpec& spec, const Config& cfg);

struct RegimeRun {
  std::vector<MetricsRow> rows;
  std::vector<ActivationTraceRow> trace;
};

/// Rows are ordered cell-major, then seed, then episode, whatever `jobs`.
RegimeRun run_regime(Regime regime, const ExperimentSpec& spec, const Config& cfg, const EvaluationPool& pool,
                     int jobs = 1);

/// Trailing mean; the first window - 1 entries average the available prefix.
std::vector<double> moving_average(const std::vector<double>& series, int window);

struct SummaryRow {
  Regime regime = Regime::PowerOnly;
  double d_bps = 0.0;
  double v_mps = 0.0;
  double mean_tau = 0.0;
  double mean_leftover = 0.0;
  std::optional<double> degradation_pct;
};

/// Per (regime, cell) means, sorted by regime then cell. Degradation of a
/// cell is 100 * (1 - tau(Both) / max(tau(PowerOnly), tau(RbgOnly))) and is
/// present when all three regimes cover the cell.
std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows);

std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string activation_trace_csv(const std::vector<ActivationTraceRow>& rows);

}  // namespace xsched
