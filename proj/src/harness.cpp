#include "xsched/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace xsched {

namespace {

constexpr std::uint64_t kEvalEnvStream = 0x21;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("experiment key '" + key + "': bad number '" + v + "'");
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<double> numbers(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v)) out.push_back(to_double(key, item));
  return out;
}

ActivationMessage fixed_message(Regime regime) {
  switch (regime) {
    case Regime::PowerOnly: return {Method::RetainPrevious, {1, 0}};
    case Regime::RbgOnly: return {Method::RetainPrevious, {0, 1}};
    case Regime::Both: return {Method::RetainPrevious, {1, 1}};
    default: throw std::logic_error("regime has no fixed activation");
  }
}

struct UnitResult {
  std::vector<MetricsRow> rows;
  std::vector<std::vector<PeriodRecord>> periods;
};

}  // namespace

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::PowerOnly: return "power_only";
    case Regime::RbgOnly: return "rbg_only";
    case Regime::Both: return "both";
    case Regime::Method1: return "method1";
    case Regime::Method2: return "method2";
  }
  return "unknown";
}

Regime parse_regime(const std::string& name) {
  for (Regime r : {Regime::PowerOnly, Regime::RbgOnly, Regime::Both, Regime::Method1, Regime::Method2})
    if (to_string(r) == name) return r;
  throw ConfigError("unknown regime '" + name + "'");
}

bool is_scheduled(Regime regime) { return regime == Regime::Method1 || regime == Regime::Method2; }

void ExperimentSpec::validate() const {
  if (regimes.empty()) throw ConfigError("experiment: no regimes");
  if (arrival_rates_bps.empty() || speeds_mps.empty()) throw ConfigError("experiment: empty context grid");
  for (double d : arrival_rates_bps)
    if (!(d > 0)) throw ConfigError("experiment: arrival rates must be positive");
  for (double v : speeds_mps)
    if (!(v > 0)) throw ConfigError("experiment: speeds must be positive");
  if (episodes < 1) throw ConfigError("experiment: episodes must be >= 1");
  if (seeds.empty()) throw ConfigError("experiment: no seeds");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("experiment: seeds must be distinct");
}

ExperimentSpec parse_experiment_spec(std::string_view text) {
  ExperimentSpec spec;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("experiment: expected key=value, got '" + body + "'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("experiment key '" + key + "' given twice");
    if (key == "regimes") {
      spec.regimes.clear();
      for (const auto& r : split(value)) spec.regimes.push_back(parse_regime(r));
    } else if (key == "arrival_rates_bps") {
      spec.arrival_rates_bps = numbers(key, value);
    } else if (key == "speeds_mps") {
      spec.speeds_mps = numbers(key, value);
    } else if (key == "episodes") {
      const double n = to_double(key, value);
      if (n != std::floor(n) || n > 1e9) throw ConfigError("experiment key 'episodes': expected an integer");
      spec.episodes = static_cast<int>(n);
    } else if (key == "seeds") {
      spec.seeds.clear();
      for (const auto& item : split(value)) {
        try {
          std::size_t used = 0;
          spec.seeds.push_back(std::stoull(item, &used));
          if (used != item.size() || item.front() == '-') throw std::invalid_argument(item);
        } catch (const std::exception&) {
          throw ConfigError("experiment key 'seeds': bad seed '" + item + "'");
        }
      }
    } else if (key == "pool") {
      spec.pool_dir = value;
    } else {
      throw ConfigError("experiment: unknown key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read experiment spec " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto spec = parse_experiment_spec(ss.str());
  if (spec.pool_dir.is_relative()) spec.pool_dir = path.parent_path() / spec.pool_dir;
  return spec;
}

EvaluationPool load_evaluation_pool(const ExperimentSpec& spec, const Config& cfg) {
  EvaluationPool pool{load_pool(spec.pool_dir, cfg.network), std::nullopt, std::nullopt};
  for (Regime r : spec.regimes) {
    if (!is_scheduled(r)) continue;
    const Method m = r == Regime::Method1 ? Method::RetainPrevious : Method::ExtendWithBaselines;
    auto& slot = m == Method::RetainPrevious ? pool.scheduler_m1 : pool.scheduler_m2;
    if (slot) continue;
    auto ckpt = load_checkpoint(spec.pool_dir / (scheduler_kind(m) + ".ckpt"));
    if (ckpt.kind != scheduler_kind(m) || ckpt.net.head_sizes != std::vector<int>{action_count(m)})
      throw CheckpointError(CheckpointError::Reason::Format, "checkpoint is not a " + scheduler_kind(m));
    slot = std::move(ckpt.net);
  }
  return pool;
}

RegimeRun run_regime(Regime regime, const ExperimentSpec& spec, const Config& cfg, const EvaluationPool& pool,
                     int jobs) {
  spec.validate();
  cfg.validate();
  const PowerSet powers = build_power_set(cfg.network);
  const Method method = regime == Regime::Method2 ? Method::ExtendWithBaselines : Method::RetainPrevious;
  const ActorCritic* scheduler = nullptr;
  if (regime == Regime::Method1) scheduler = pool.scheduler_m1 ? &*pool.scheduler_m1 : nullptr;
  if (regime == Regime::Method2) scheduler = pool.scheduler_m2 ? &*pool.scheduler_m2 : nullptr;
  if (is_scheduled(regime) && !scheduler) throw ConfigError("regime " + to_string(regime) + " needs a scheduler checkpoint");
  if (is_scheduled(regime) && cfg.safety.enabled) (void)fallback_message(method, cfg.safety.fallback);

  const int n_seeds = static_cast<int>(spec.seeds.size());
  const int n_units = spec.cells() * n_seeds;

  auto run_unit = [&](int unit) {
    const int cell = unit / n_seeds;
    const std::uint64_t seed = spec.seeds[static_cast<std::size_t>(unit % n_seeds)];
    const EpisodeContext ctx{spec.arrival_rates_bps[static_cast<std::size_t>(cell) / spec.speeds_mps.size()],
                             spec.speeds_mps[static_cast<std::size_t>(cell) % spec.speeds_mps.size()]};
    SafetyGateState gate = make_gate(cfg.safety);
    Decider decide;
    if (is_scheduled(regime)) {
      decide = [&, scheduler](const Eigen::VectorXd& s, int) {
        const auto choice = scheduler_act(method, *scheduler, s, nullptr);
        PeriodDecision d{choice.message, false, critic_value(*scheduler, s), {}, 0.0};
        if (cfg.safety.enabled) {
          auto g = safety_gate(gate, d.value, d.message);
          gate = g.gate;
          d.message = g.message;
          d.gated = g.gated;
        }
        return d;
      };
    } else {
      const ActivationMessage fixed = fixed_message(regime);
      decide = [fixed](const Eigen::VectorXd&, int) { return PeriodDecision{fixed, false, 0.0, {}, 0.0}; };
    }

    UnitResult res;
    for (int e = 0; e < spec.episodes; ++e) {
      Rng env_rng = make_rng(seed, {kEvalEnvStream, static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(e)});
      auto outcome = run_scheduled_episode(cfg, powers, pool.xapps, method, ctx, env_rng, decide, e);
      MetricsRow row{regime, ctx.arrival_rate_bps, ctx.mean_speed_mps, seed, e, outcome.tau_e, outcome.leftover_bits, {}};
      for (const auto& p : outcome.periods) {
        if (!row.trace.empty()) row.trace += '|';
        row.trace += p.message.bits();
      }
      res.rows.push_back(std::move(row));
      res.periods.push_back(std::move(outcome.periods));
    }
    return res;
  };

  std::vector<UnitResult> units(static_cast<std::size_t>(n_units));
  const int workers = std::clamp(jobs, 1, std::max(1, n_units));
  if (workers == 1) {
    for (int u = 0; u < n_units; ++u) units[static_cast<std::size_t>(u)] = run_unit(u);
  } else {
    std::vector<std::future<void>> futures;
    for (int w = 0; w < workers; ++w)
      futures.push_back(std::async(std::launch::async, [&, w] {
        for (int u = w; u < n_units; u += workers) units[static_cast<std::size_t>(u)] = run_unit(u);
      }));
    for (auto& f : futures) f.get();
  }

  RegimeRun run;
  long long episode_id = 0;
  for (auto& unit : units) {
    for (std::size_t i = 0; i < unit.rows.size(); ++i, ++episode_id) {
      if (is_scheduled(regime)) {
        for (const auto& p : unit.periods[i])
          run.trace.push_back({episode_id, p.period, p.context.arrival_rate_bps, p.context.mean_speed_mps,
                               p.previous_reward, p.message.bits(), p.gated, p.reward});
      }
      run.rows.push_back(std::move(unit.rows[i]));
    }
  }
  return run;
}

std::string to_text(const ExperimentSpec& spec) {
  auto list = [](const auto& values, auto&& one) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + one(values[i]);
    return out;
  };
  std::string out;
  out += "regimes=" + list(spec.regimes, [](Regime r) { return to_string(r); }) + "\n";
  out += "arrival_rates_bps=" + list(spec.arrival_rates_bps, fmt) + "\n";
  out += "speeds_mps=" + list(spec.speeds_mps, fmt) + "\n";
  out += "episodes=" + std::to_string(spec.episodes) + "\n";
  out += "seeds=" + list(spec.seeds, [](std::uint64_t s) { return std::to_string(s); }) + "\n";
  out += "pool=" + spec.pool_dir.string() + "\n";
  return out;
}

std::vector<double> moving_average(const std::vector<double>& series, int window) {
  if (series.empty()) throw std::invalid_argument("moving_average: empty series");
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  std::vector<double> out(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    if (i >= static_cast<std::size_t>(window)) sum -= series[i - static_cast<std::size_t>(window)];
    out[i] = sum / static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(window)));
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("summarize: no rows");
  struct Acc {
    double tau = 0.0;
    double leftover = 0.0;
    long long n = 0;
  };
  using Key = std::tuple<int, double, double>;
  std::map<Key, Acc> acc;
  // Sum in a canonical order so the means do not depend on row order.
  std::vector<const MetricsRow*> sorted;
  sorted.reserve(rows.size());
  for (const auto& r : rows) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const MetricsRow* a, const MetricsRow* b) {
    return std::tie(a->regime, a->d_bps, a->v_mps, a->seed, a->episode, a->tau_e, a->leftover_bits) <
           std::tie(b->regime, b->d_bps, b->v_mps, b->seed, b->episode, b->tau_e, b->leftover_bits);
  });
  for (const MetricsRow* r : sorted) {
    auto& a = acc[{static_cast<int>(r->regime), r->d_bps, r->v_mps}];
    a.tau += r->tau_e;
    a.leftover += r->leftover_bits;
    ++a.n;
  }

  std::vector<SummaryRow> out;
  for (const auto& [key, a] : acc) {
    const auto& [regime, d, v] = key;
    out.push_back({static_cast<Regime>(regime), d, v, a.tau / a.n, a.leftover / a.n, std::nullopt});
  }
  auto mean_of = [&acc](Regime r, double d, double v) -> std::optional<double> {
    const auto it = acc.find({static_cast<int>(r), d, v});
    if (it == acc.end()) return std::nullopt;
    return it->second.tau / it->second.n;
  };
  for (auto& row : out) {
    const auto both = mean_of(Regime::Both, row.d_bps, row.v_mps);
    const auto power = mean_of(Regime::PowerOnly, row.d_bps, row.v_mps);
    const auto rbg = mean_of(Regime::RbgOnly, row.d_bps, row.v_mps);
    if (both && power && rbg) {
      const double best = std::max(*power, *rbg);
      if (best > 0) row.degradation_pct = 100.0 * (1.0 - *both / best);
    }
  }
  return out;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  os << "regime,d_bps,v_mps,seed,episode,tau_e,leftover_bits\n";
  for (const auto& r : rows)
    os << to_string(r.regime) << ',' << fmt(r.d_bps) << ',' << fmt(r.v_mps) << ',' << r.seed << ',' << r.episode
       << ',' << fmt(r.tau_e) << ',' << fmt(r.leftover_bits) << '\n';
  return os.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "regime,d_bps,v_mps,mean_tau,mean_leftover,degradation_pct\n";
  for (const auto& r : rows) {
    os << to_string(r.regime) << ',' << fmt(r.d_bps) << ',' << fmt(r.v_mps) << ',' << fmt(r.mean_tau) << ','
       << fmt(r.mean_leftover) << ',';
    if (r.degradation_pct) os << fmt(*r.degradation_pct);
    os << '\n';
  }
  return os.str();
}

std::string activation_trace_csv(const std::vector<ActivationTraceRow>& rows) {
  std::ostringstream os;
  os << "episode,period,c1,c2,f,mu_bits,gated,period_reward\n";
  for (const auto& r : rows)
    os << r.episode << ',' << r.period << ',' << fmt(r.c1) << ',' << fmt(r.c2) << ',' << fmt(r.f) << ',' << r.mu_bits
       << ',' << (r.gated ? 1 : 0) << ',' << fmt(r.period_reward) << '\n';
  return os.str();
}

}  // namespace xsched
