// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "xsched/harness.hpp"

namespace fs = std::filesystem;
using namespace xsched;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1 .. 4

Result gradients() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) worst = std::max(worst, oracle::gradient_relative_error(oracle::random_instance(rng)));
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 60.0, fmt("max relative error %.3e over 100 instances, %.2f s", worst, t)};
}

Result returns_and_advantages() {
  Rng rng(2025);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto traj = oracle::random_trajectory(rng);
    std::vector<double> r;
    for (const auto& s : traj) r.push_back(s.reward);
    const double gamma = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto g = discounted_returns(r, gamma);
    const auto go = oracle::returns(r, gamma);
    for (std::size_t t = 0; t < r.size(); ++t) worst = std::max(worst, std::abs(g[t] - go[t]));
    for (auto mode : {AdvantageMode::FullReturn, AdvantageMode::OneStep}) {
      const auto a = advantages(traj, gamma, mode);
      const auto ao = oracle::advantages(traj, gamma, mode);
      for (std::size_t t = 0; t < r.size(); ++t) worst = std::max(worst, std::abs(a[t] - ao[t]));
    }
  }
  return {worst <= 1e-12, fmt("max abs deviation %.3e over 1000 trajectories, both advantage modes", worst)};
}

Result conservation() {
  NetworkConfig cfg;
  cfg.rayleigh_fading = true;
  const auto powers = build_power_set(cfg);
  Rng rng(31), policy(32);
  const std::vector<double> rates{3e6, 9e6};
  auto s = reset_episode(cfg, 9e6, 40.0, rng);
  long long bad_bits = 0, bad_owner = 0;
  const int slots = 10000;
  for (int slot = 0; slot < slots; ++slot) {
    if (s.slot == cfg.slots_per_episode) s = reset_episode(cfg, rates[(slot / 50) % 2], 10.0 + slot % 40, rng);
    AllocationState a{Eigen::MatrixXi(cfg.num_orus, cfg.rbgs_per_oru), Eigen::MatrixXi(cfg.num_orus, cfg.rbgs_per_oru)};
    const int per = cfg.users_per_oru();
    for (int b = 0; b < cfg.num_orus; ++b)
      for (int r = 0; r < cfg.rbgs_per_oru; ++r) {
        a.owner(b, r) = global_user(cfg, b, static_cast<int>(policy() % static_cast<unsigned>(per)));
        a.power(b, r) = static_cast<int>(policy() % powers.size());
      }
    auto res = step_env(cfg, powers, s, a, rng);
    const auto& l = res.state.links;
    // delivered is Psi*T_s rounded down to whole bits
    const bool bits_ok = ((l.delivered + l.leftover).array() == l.arrivals.array()).all() &&
                         (l.leftover.array() >= 0).all() &&
                         ((l.rate * cfg.slot_duration_s - l.delivered).array().abs() <= 1e-6).all();
    bad_bits += !bits_ok;
    try {
      check_allocation(cfg, powers, res.state.allocation);
      for (int b = 0; b < cfg.num_orus; ++b)
        for (int r = 0; r < cfg.rbgs_per_oru; ++r)
          if (res.state.allocation.owner(b, r) / per != b) throw std::logic_error("foreign owner");
    } catch (const std::exception&) {
      ++bad_owner;
    }
    s = std::move(res.state);
  }
  return {bad_bits == 0 && bad_owner == 0,
          fmt("%d slots: %lld with bit imbalance, %lld with ownership violations", slots, bad_bits, bad_owner)};
}

Result statistics() {
  NetworkConfig cfg;
  cfg.num_orus = 10;
  cfg.rbgs_per_oru = 10;
  cfg.num_users = 10;
  Rng rng(41);
  const double d = 5e6, lambda = d * cfg.slot_duration_s;
  double sum = 0.0;
  long long n = 0;
  while (n < 100000) {
    const auto a = draw_arrivals(cfg, d, rng);
    sum += a.sum();
    n += a.size();
  }
  const double mean = sum / static_cast<double>(n);
  const double se = std::sqrt(lambda / static_cast<double>(n));
  const double zs = std::abs(mean - lambda) / se;

  NetworkConfig m;
  m.num_orus = 1;
  m.rbgs_per_oru = 1;
  m.num_users = 1;
  auto st = reset_episode(m, 1e6, 1.0, rng);
  st.users[0].position = {0.0, 0.0};
  st.users[0].speed = 1e-9;
  int changes = 0;
  const int steps = 100000;
  for (int i = 0; i < steps; ++i) {
    const double before = st.users[0].direction;
    st = step_mobility(m, st, rng);
    changes += st.users[0].direction != before;
  }
  const double freq = static_cast<double>(changes) / steps;
  return {zs < 3.0 && std::abs(freq - 0.3) <= 0.01,
          fmt("Poisson mean %.1f vs %.1f (%.2f SE); direction changes %.4f vs 0.3", mean, lambda, zs, freq)};
}

// ---------------------------------------------------------------- 5 .. 7, 9

struct Pipeline {
  Config cfg;
  ExperimentSpec spec;
  EvaluationPool pool;
  std::map<Regime, std::vector<SummaryRow>> summary;  // per regime, cell order
  std::map<Regime, double> mean_tau, mean_leftover;
  std::vector<SummaryRow> rows;
  bool pool_unchanged_by_scheduler = false;
  double train_s = 0.0, eval_s = 0.0;
};

constexpr long long kXAppEpisodes = 20000;
constexpr long long kSchedulerEpisodes = 100000;

Pipeline run_pipeline(const fs::path& work) {
  Pipeline p;
  p.cfg = load_config(fs::path(XSCHED_SOURCE_DIR) / "configs" / "desk.cfg");
  fs::create_directories(work);
  const auto t0 = Clock::now();
  for (auto [kind, seed] : {std::pair{XAppKind::PowerA2C, 11ULL}, std::pair{XAppKind::RbgA2C, 12ULL}}) {
    std::cerr << "training " << to_string(kind) << " xApp\n";
    const auto t = train_xapp(kind, p.cfg, kXAppEpisodes, seed);
    save_checkpoint(work / (kind == XAppKind::PowerA2C ? "power.ckpt" : "rbg.ckpt"), t.checkpoint);
  }
  const XAppPool xapps = load_pool(work, p.cfg.network);
  const auto before = std::pair{parameter_checksum(xapps.power), parameter_checksum(xapps.rbg)};
  for (auto [method, seed] : {std::pair{Method::RetainPrevious, 13ULL}, std::pair{Method::ExtendWithBaselines, 14ULL}}) {
    std::cerr << "training " << scheduler_kind(method) << "\n";
    const auto t = train_scheduler(method, xapps, p.cfg, kSchedulerEpisodes, seed);
    save_checkpoint(work / (scheduler_kind(method) + ".ckpt"), t.checkpoint);
  }
  p.pool_unchanged_by_scheduler = before == std::pair{parameter_checksum(xapps.power), parameter_checksum(xapps.rbg)};
  p.train_s = seconds_since(t0);

  const auto t1 = Clock::now();
  p.spec.pool_dir = work;
  p.pool = load_evaluation_pool(p.spec, p.cfg);
  std::vector<MetricsRow> rows;
  for (Regime r : p.spec.regimes) {
    std::cerr << "evaluating " << to_string(r) << "\n";
    auto run = run_regime(r, p.spec, p.cfg, p.pool);
    rows.insert(rows.end(), run.rows.begin(), run.rows.end());
  }
  p.eval_s = seconds_since(t1);
  write_file(work / "metrics.csv", metrics_csv(rows));
  p.rows = summarize(rows);
  write_file(work / "summary.csv", summary_csv(p.rows));
  for (const auto& row : p.rows) {
    p.summary[row.regime].push_back(row);
    p.mean_tau[row.regime] += row.mean_tau / p.spec.cells();
    p.mean_leftover[row.regime] += row.mean_leftover / p.spec.cells();
  }
  return p;
}

const SummaryRow& cell(const Pipeline& p, Regime r, double d, double v) {
  for (const auto& row : p.summary.at(r))
    if (row.d_bps == d && row.v_mps == v) return row;
  throw std::logic_error("missing cell");
}

Result conflict(const Pipeline& p) {
  int below = 0;
  const int cells = static_cast<int>(p.summary.at(Regime::Both).size());
  for (int i = 0; i < cells; ++i) {
    const double best = std::max(p.summary.at(Regime::PowerOnly)[i].mean_tau, p.summary.at(Regime::RbgOnly)[i].mean_tau);
    below += p.summary.at(Regime::Both)[i].mean_tau < best;
  }
  const double hi = cell(p, Regime::Both, 8e6, 45.0).degradation_pct.value_or(NAN);
  const double lo = cell(p, Regime::Both, 2e6, 5.0).degradation_pct.value_or(NAN);
  const bool budget = p.train_s <= 4 * 3600.0 && p.eval_s <= 1800.0;
  return {below >= 8 && hi > lo && budget,
          fmt("both below best single in %d/%d cells; degradation %.2f%% at (8 Mbps, 45 m/s) vs %.2f%% at "
              "(2 Mbps, 5 m/s); training %.0f s, evaluation %.0f s",
              below, cells, hi, lo, p.train_s, p.eval_s)};
}

Result ordering(const Pipeline& p) {
  int ordered = 0;
  const int cells = static_cast<int>(p.summary.at(Regime::Both).size());
  for (int i = 0; i < cells; ++i) {
    const double m2 = p.summary.at(Regime::Method2)[i].mean_tau;
    const double m1 = p.summary.at(Regime::Method1)[i].mean_tau;
    const double both = p.summary.at(Regime::Both)[i].mean_tau;
    ordered += m2 >= m1 && m1 >= both;
  }
  bool best = true;
  for (const auto& [r, tau] : p.mean_tau) best = best && p.mean_tau.at(Regime::Method2) >= tau;
  std::ostringstream means;
  for (const auto& [r, tau] : p.mean_tau) means << " " << to_string(r) << "=" << fmt("%.5f", tau);
  return {ordered >= 7 && best, fmt("method2 >= method1 >= both in %d/%d cells; grid-mean tau", ordered, cells) +
                                    means.str() + (best ? "" : " (method2 not overall best)")};
}

Result leftover(const Pipeline& p) {
  const double m2 = p.mean_leftover.at(Regime::Method2);
  const double m1 = p.mean_leftover.at(Regime::Method1);
  const double both = p.mean_leftover.at(Regime::Both);
  return {m2 <= m1 && m1 <= both, fmt("grid-mean leftover bits method2 %.4e, method1 %.4e, both %.4e", m2, m1, both)};
}

Result immutability(const Pipeline& p) {
  const auto& pool = p.pool.xapps;
  const auto before = std::pair{parameter_checksum(pool.power), parameter_checksum(pool.rbg)};
  const auto& cfg = p.cfg.network;
  const auto powers = build_power_set(cfg);
  Rng rng(91);
  auto s = reset_episode(cfg, 5e6, 20.0, rng);
  for (int i = 0; i < 10000; ++i) {
    if (s.slot == cfg.slots_per_episode) s = reset_episode(cfg, 5e6, 20.0, rng);
    Rng* sampler = i % 2 ? &rng : nullptr;
    const auto pw = power_act(pool.power, cfg, xapp_input(XAppKind::PowerA2C, cfg, powers, s), sampler);
    const auto rb = rbg_act(pool.rbg, cfg, xapp_input(XAppKind::RbgA2C, cfg, powers, s), sampler);
    s = step_env(cfg, powers, s, AllocationState{rb.action.values, pw.action.values}, rng).state;
  }
  const bool same = before == std::pair{parameter_checksum(pool.power), parameter_checksum(pool.rbg)};
  return {same && p.pool_unchanged_by_scheduler,
          fmt("scheduler training %s checksums; 10000 inference calls per xApp %s them",
              p.pool_unchanged_by_scheduler ? "kept" : "CHANGED", same ? "kept" : "CHANGED")};
}

// ---------------------------------------------------------------- 8

Result safety() {
  bool ok = true;
  std::ostringstream detail;
  for (int t_back : {1, 3, 5}) {
    SafetyConfig sc;
    sc.enabled = true;
    sc.t_back = t_back;
    sc.fallback = FallbackPolicy::EqualAllocation;
    auto g = make_gate(sc);
    const ActivationMessage proposed = activation_from_index(Method::ExtendWithBaselines, 0);
    const ActivationMessage fallback = fallback_message(Method::ExtendWithBaselines, sc.fallback);
    for (int i = 0; i < 50; ++i) g = safety_gate(g, 1.0 + 0.02 * (i % 5), proposed).gate;
    auto out = safety_gate(g, g.mean - 10.0 * g.dispersion, proposed);
    bool case_ok = out.gated && out.message == fallback;
    const double m = out.gate.mean, sigma = out.gate.dispersion;
    int overridden = 1;
    while (true) {
      out = safety_gate(out.gate, 1.0, proposed);
      if (!out.gated) break;
      ++overridden;
      case_ok = case_ok && out.message == fallback && out.gate.mean == m && out.gate.dispersion == sigma;
      if (overridden > 100) break;
    }
    case_ok = case_ok && overridden == t_back && out.message == proposed && !out.gate.frozen;
    auto g2 = out.gate;
    for (int i = 0; i < 50; ++i) g2 = safety_gate(g2, 1.0 + 0.02 * (i % 5), proposed).gate;
    case_ok = case_ok && safety_gate(g2, g2.mean - 10.0 * g2.dispersion, proposed).gated;
    detail << "t_back=" << t_back << (case_ok ? " ok; " : " FAILED; ");
    ok = ok && case_ok;
  }

  Config cfg;
  cfg.network.num_orus = 2;
  cfg.network.num_users = 4;
  cfg.network.rbgs_per_oru = 3;
  cfg.network.power_levels = 4;
  Rng rng(77);
  A2CHyper h;
  h.hidden_units = 16;
  EvaluationPool pool;
  pool.xapps.power = make_actor_critic(power_input_size(cfg.network), power_head_sizes(cfg.network), h, rng);
  pool.xapps.rbg = make_actor_critic(rbg_input_size(cfg.network), rbg_head_sizes(cfg.network), h, rng);
  pool.scheduler_m2 = make_actor_critic(3, {action_count(Method::ExtendWithBaselines)}, h, rng);
  ExperimentSpec spec;
  spec.episodes = 10;
  spec.seeds = {7, 8};
  const auto plain = run_regime(Regime::Method2, spec, cfg, pool);
  cfg.safety.enabled = true;
  cfg.safety.warmup = 0;
  cfg.safety.z_threshold = -std::numeric_limits<double>::infinity();
  const auto gated = run_regime(Regime::Method2, spec, cfg, pool);
  const bool identical = activation_trace_csv(plain.trace) == activation_trace_csv(gated.trace) &&
                         metrics_csv(plain.rows) == metrics_csv(gated.rows);
  detail << "z_threshold=-inf trace " << (identical ? "bit-identical" : "DIFFERS") << " over " << plain.trace.size()
         << " decisions";
  return {ok && identical, detail.str()};
}

// ---------------------------------------------------------------- 10

int sh(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

Result determinism(const fs::path& work) {
  fs::remove_all(work);
  const fs::path a = work / "a", b = work / "b";
  fs::create_directories(a);
  const std::string cli = std::string("\"") + XSCHED_CLI + "\" ";
  const std::string cfg = "--config \"" + (fs::path(XSCHED_SOURCE_DIR) / "configs" / "desk.cfg").string() + "\" --log-every 0 ";
  write_file(a / "mini.spec", "arrival_rates_bps=2e6,8e6\nspeeds_mps=5,45\nepisodes=3\nseeds=1,2\npool=" + a.string() + "\n");
  write_file(a / "gate.grid", "parameter=safety.z_threshold\nvalues=-1,1\nexperiment=mini.spec\n");
  const std::vector<std::pair<std::string, std::string>> commands{
      {"train-xapp --kind power --episodes 40 --seed 5", "power"},
      {"train-xapp --kind rbg --episodes 40 --seed 6", "rbg"},
      {"train-scheduler --method 1 --pool \"" + a.string() + "\" --episodes 30 --seed 7", "scheduler_m1"},
      {"train-scheduler --method 2 --pool \"" + a.string() + "\" --episodes 30 --seed 8", "scheduler_m2"},
      {"evaluate --spec \"" + (a / "mini.spec").string() + "\" --jobs 2", "evaluate"},
      {"sweep --grid \"" + (a / "gate.grid").string() + "\" --set safety.fallback=rbg --set safety.warmup=2", "sweep"},
  };
  for (const auto& [args, artifact] : commands) {
    if (sh(cli + args.substr(0, args.find(' ')) + " " + cfg + args.substr(args.find(' ') + 1) + " --out \"" +
           a.string() + "\"") != 0)
      return {false, "command failed: " + args};
    const fs::path replay_out = artifact == "sweep" ? b / "sweep" : b;
    if (sh(cli + "replay --manifest \"" + (a / (artifact + ".manifest.json")).string() + "\" --out \"" +
           replay_out.string() + "\"") != 0)
      return {false, "replay failed for " + artifact};
  }
  int compared = 0;
  std::string mismatch;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    const auto ext = e.path().extension();
    if (ext != ".csv" && ext != ".ckpt") continue;
    fs::path rel = fs::relative(e.path(), a);
    if (rel.begin()->string().rfind("safety.", 0) == 0) rel = "sweep" / rel;
    const fs::path other = b / rel;
    ++compared;
    if (!fs::exists(other) || read_file(other) != read_file(e.path())) mismatch += " " + rel.string();
  }
  return {mismatch.empty() && compared > 0,
          fmt("%d CSV/checkpoint files replayed from manifests", compared) +
              (mismatch.empty() ? ", all byte-identical" : ", differing:" + mismatch)};
}

}  // namespace

int main() {
  const fs::path work = fs::path(XSCHED_WORK_DIR);
  const bool quick_only = std::getenv("XSCHED_ACCEPTANCE_SKIP_PIPELINE") != nullptr;
  std::vector<std::pair<int, std::function<Result()>>> quick{
      {1, gradients}, {2, returns_and_advantages}, {3, conservation}, {4, statistics}};
  std::map<int, Result> results;
  auto report = [&](int id, const Result& r) {
    results[id] = r;
    std::cout << "criterion " << id << ": " << (r.pass ? "PASS" : "FAIL") << "  " << r.detail << std::endl;
  };
  auto guarded = [&](int id, const std::function<Result()>& f) {
    try {
      report(id, f());
    } catch (const std::exception& e) {
      report(id, {false, std::string("exception: ") + e.what()});
    }
  };
  for (const auto& [id, f] : quick) guarded(id, f);

  auto attempt = [](const std::function<Result()>& f) -> Result {
    try {
      return f();
    } catch (const std::exception& e) {
      return {false, std::string("exception: ") + e.what()};
    }
  };
  const Result gate = attempt(safety);
  const Result replay = attempt([&] { return determinism(work / "replay"); });

  std::optional<Pipeline> pipeline;
  std::string pipeline_error = "desk pipeline did not complete";
  try {
    if (quick_only) throw std::runtime_error("skipped by XSCHED_ACCEPTANCE_SKIP_PIPELINE");
    pipeline = run_pipeline(work / "desk");
  } catch (const std::exception& e) {
    pipeline_error += std::string(": ") + e.what();
  }
  auto needs = [&](Result (*f)(const Pipeline&)) {
    return [&, f]() -> Result {
      if (!pipeline) return {false, pipeline_error};
      return f(*pipeline);
    };
  };
  guarded(5, needs(conflict));
  guarded(6, needs(ordering));
  guarded(7, needs(leftover));
  report(8, gate);
  guarded(9, needs(immutability));
  report(10, replay);

  int passed = 0;
  for (const auto& [id, r] : results) passed += r.pass;
  std::cout << passed << "/" << results.size() << " criteria passed" << std::endl;
  return passed == static_cast<int>(results.size()) ? 0 : 1;
}
