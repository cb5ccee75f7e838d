// xsched: train xApps and schedulers, evaluate regimes, sweep gate or power
// settings. Every run leaves a <artifact>.manifest.json that `replay` can
// execute again.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xsched/harness.hpp"

#ifndef XSCHED_VERSION
#define XSCHED_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace xsched;

namespace {

enum Exit { kOk = 0, kUsage = 2, kConfig = 3, kIo = 4, kInvariant = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

fs::path absolute_path(const fs::path& p) { return p.empty() ? p : fs::absolute(p).lexically_normal(); }

void write_text(const fs::path& path, const std::string& text) {
  try {
    write_file(path, text);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
}

std::string read_text(const fs::path& path) {
  try {
    return read_file(path);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
}

// ---------------------------------------------------------------- options

/// Everything a command needs, in a form the manifest can store and replay.
struct Run {
  std::string command;
  std::string config_text;
  fs::path out;
  int jobs = 1;
  long long log_every = 1000;
  // train-xapp
  std::string kind;
  // train-scheduler
  int method = 0;
  fs::path pool;
  // both trainers
  long long episodes = 0;
  std::uint64_t seed = 0;
  // evaluate / sweep
  std::string spec_text;
  std::string grid_text;
};

json to_json(const Run& r) {
  json j;
  j["command"] = r.command;
  j["jobs"] = r.jobs;
  j["log_every"] = r.log_every;
  if (r.command == "train-xapp") j["kind"] = r.kind;
  if (r.command == "train-scheduler") {
    j["method"] = r.method;
    j["pool"] = r.pool.string();
  }
  if (r.command == "train-xapp" || r.command == "train-scheduler") {
    j["episodes"] = r.episodes;
    j["seed"] = r.seed;
  }
  if (r.command == "evaluate" || r.command == "sweep") j["experiment"] = r.spec_text;
  if (r.command == "sweep") j["grid"] = r.grid_text;
  return j;
}

Run run_from_json(const json& j) {
  Run r;
  r.command = j.at("command").get<std::string>();
  r.jobs = j.value("jobs", 1);
  r.log_every = j.value("log_every", 1000LL);
  r.kind = j.value("kind", std::string{});
  r.method = j.value("method", 0);
  r.pool = j.value("pool", std::string{});
  r.episodes = j.value("episodes", 0LL);
  r.seed = j.value("seed", std::uint64_t{0});
  r.spec_text = j.value("experiment", std::string{});
  r.grid_text = j.value("grid", std::string{});
  return r;
}

struct Manifest {
  json body;
  fs::path path;

  Manifest(const fs::path& out, const std::string& artifact, const Run& run, const std::vector<std::string>& argv) {
    path = out / (artifact + ".manifest.json");
    body["tool"] = "xsched";
    body["version"] = XSCHED_VERSION;
    body["artifact"] = artifact;
    body["argv"] = argv;
    body["run"] = to_json(run);
    body["config_hash"] = hex64(fnv1a64(run.config_text));
    body["config"] = run.config_text;
    body["out"] = absolute_path(out).string();
    body["outputs"] = json::object();
    body["started_utc"] = utc_now();
  }

  void output(const std::string& name, const fs::path& file) {
    body["outputs"][name] = {{"path", absolute_path(file).string()}, {"fnv1a64", hex64(fnv1a64(read_text(file)))}};
  }

  void finish() {
    body["finished_utc"] = utc_now();
    write_text(path, body.dump(2) + "\n");
  }
};

Config config_of(const Run& run) { return parse_config(run.config_text); }

ExperimentSpec spec_of(const Run& run) {
  auto spec = parse_experiment_spec(run.spec_text);
  spec.pool_dir = absolute_path(spec.pool_dir);
  return spec;
}

std::string resolved_spec_text(const fs::path& file) {
  try {
    auto spec = load_experiment_spec(file);
    spec.pool_dir = absolute_path(spec.pool_dir);
    return to_text(spec);
  } catch (const ConfigError&) {
    if (!fs::exists(file)) throw IoError("cannot read experiment spec " + file.string());
    throw;
  }
}

// --------------------------------------------------------------- progress

ProgressFn progress_printer(const std::string& label, long long total, long long every) {
  if (every <= 0) return {};
  return [label, total, every, sum = 0.0, n = 0LL](long long e, double tau) mutable {
    sum += tau;
    ++n;
    if ((e + 1) % every == 0 || e + 1 == total) {
      std::cerr << label << " episode " << (e + 1) << "/" << total << " mean tau " << sum / static_cast<double>(n)
                << "\n";
      sum = 0.0;
      n = 0;
    }
  };
}

void check_history(const std::vector<RewardRecord>& history) {
  for (const auto& h : history)
    if (!std::isfinite(h.tau_e) || h.tau_e < 0.0)
      throw InvariantError("episode " + std::to_string(h.episode) + " produced tau_e = " + std::to_string(h.tau_e));
}

// --------------------------------------------------------------- commands

void require_finite(const ActorCritic& net, const std::string& what) {
  if (!all_finite(net.actor) || !all_finite(net.critic)) throw InvariantError(what + " has non-finite parameters");
}

void cmd_train_xapp(const Run& run, const std::vector<std::string>& argv) {
  const Config cfg = config_of(run);
  const XAppKind kind = run.kind == "power" ? XAppKind::PowerA2C : XAppKind::RbgA2C;
  Manifest manifest(run.out, run.kind, run, argv);
  manifest.body["seed"] = run.seed;

  const auto trained = train_xapp(kind, cfg, run.episodes, run.seed, progress_printer(run.kind, run.episodes, run.log_every));
  check_history(trained.history);
  require_finite(trained.checkpoint.net, "trained " + run.kind + " xApp");

  const fs::path ckpt = run.out / (run.kind + ".ckpt");
  const fs::path hist = run.out / (run.kind + "_history.csv");
  write_text(ckpt, serialize(trained.checkpoint));
  write_text(hist, history_csv(trained.history));
  manifest.output("checkpoint", ckpt);
  manifest.output("history", hist);
  manifest.body["parameter_checksum"] = hex64(parameter_checksum(trained.checkpoint.net));
  manifest.finish();
}

XAppPool load_pool_or_throw(const fs::path& dir, const NetworkConfig& cfg) {
  for (const char* f : {"power.ckpt", "rbg.ckpt"})
    if (!fs::exists(dir / f)) throw IoError("pool is missing " + (dir / f).string());
  auto pool = load_pool(dir, cfg);
  require_finite(pool.power, "power xApp");
  require_finite(pool.rbg, "rbg xApp");
  return pool;
}

void cmd_train_scheduler(const Run& run, const std::vector<std::string>& argv) {
  const Config cfg = config_of(run);
  const Method method = parse_method(run.method);
  const XAppPool pool = load_pool_or_throw(run.pool, cfg.network);
  const auto before = std::pair{parameter_checksum(pool.power), parameter_checksum(pool.rbg)};

  const std::string name = scheduler_kind(method);
  Manifest manifest(run.out, name, run, argv);
  manifest.body["seed"] = run.seed;
  manifest.body["pool"] = absolute_path(run.pool).string();

  const auto trained = train_scheduler(method, pool, cfg, run.episodes, run.seed,
                                       progress_printer(name, run.episodes, run.log_every));
  check_history(trained.history);
  const auto after = std::pair{parameter_checksum(pool.power), parameter_checksum(pool.rbg)};
  if (before != after) throw InvariantError("xApp parameters changed during scheduler training");

  const fs::path ckpt = run.out / (name + ".ckpt");
  const fs::path hist = run.out / (name + "_history.csv");
  write_text(ckpt, serialize(trained.checkpoint));
  write_text(hist, history_csv(trained.history));
  manifest.output("checkpoint", ckpt);
  manifest.output("history", hist);
  manifest.body["pool_checksums"] = {{"power", hex64(before.first)}, {"rbg", hex64(before.second)}};
  manifest.finish();
}

Method method_of(Regime r) { return r == Regime::Method1 ? Method::RetainPrevious : Method::ExtendWithBaselines; }

// Fail before any work if the gate fallback cannot serve a scheduled regime.
void check_fallback(const ExperimentSpec& spec, const Config& cfg) {
  if (!cfg.safety.enabled) return;
  for (Regime r : spec.regimes)
    if (is_scheduled(r)) fallback_message(method_of(r), cfg.safety.fallback);
}

/// Runs every regime of `spec` and writes metrics, summary and traces.
std::vector<SummaryRow> evaluate_into(const fs::path& out, const ExperimentSpec& spec, const Config& cfg, int jobs,
                                      Manifest& manifest) {
  check_fallback(spec, cfg);
  for (const char* f : {"power.ckpt", "rbg.ckpt"})
    if (!fs::exists(spec.pool_dir / f)) throw IoError("pool is missing " + (spec.pool_dir / f).string());
  for (Regime r : spec.regimes) {
    if (!is_scheduled(r)) continue;
    const auto f = spec.pool_dir / (scheduler_kind(method_of(r)) + ".ckpt");
    if (!fs::exists(f)) throw IoError("pool is missing " + f.string());
  }
  const EvaluationPool pool = load_evaluation_pool(spec, cfg);
  require_finite(pool.xapps.power, "power xApp");
  require_finite(pool.xapps.rbg, "rbg xApp");
  if (pool.scheduler_m1) require_finite(*pool.scheduler_m1, "scheduler_m1");
  if (pool.scheduler_m2) require_finite(*pool.scheduler_m2, "scheduler_m2");
  const auto before = std::pair{parameter_checksum(pool.xapps.power), parameter_checksum(pool.xapps.rbg)};

  std::vector<MetricsRow> rows;
  for (Regime r : spec.regimes) {
    std::cerr << "evaluate " << to_string(r) << "\n";
    auto result = run_regime(r, spec, cfg, pool, jobs);
    if (is_scheduled(r)) {
      const fs::path trace = out / ("activation_trace_" + to_string(r) + ".csv");
      write_text(trace, activation_trace_csv(result.trace));
      manifest.output("activation_trace_" + to_string(r), trace);
    }
    rows.insert(rows.end(), std::make_move_iterator(result.rows.begin()), std::make_move_iterator(result.rows.end()));
  }
  for (const auto& row : rows)
    if (!std::isfinite(row.tau_e) || row.tau_e < 0.0 || row.leftover_bits < 0.0)
      throw InvariantError("evaluation produced an invalid metrics row");
  const auto after = std::pair{parameter_checksum(pool.xapps.power), parameter_checksum(pool.xapps.rbg)};
  if (before != after) throw InvariantError("xApp parameters changed during evaluation");

  const auto summary = summarize(rows);
  const fs::path metrics = out / "metrics.csv";
  const fs::path summary_path = out / "summary.csv";
  write_text(metrics, metrics_csv(rows));
  write_text(summary_path, summary_csv(summary));
  manifest.output("metrics", metrics);
  manifest.output("summary", summary_path);
  manifest.body["pool"] = spec.pool_dir.string();
  manifest.body["pool_checksums"] = {{"power", hex64(before.first)}, {"rbg", hex64(before.second)}};
  return summary;
}

void cmd_evaluate(const Run& run, const std::vector<std::string>& argv) {
  const Config cfg = config_of(run);
  const ExperimentSpec spec = spec_of(run);
  Manifest manifest(run.out, "evaluate", run, argv);
  manifest.body["seed"] = spec.seeds;
  evaluate_into(run.out, spec, cfg, run.jobs, manifest);
  manifest.finish();
}

struct Grid {
  std::string parameter;
  std::vector<std::string> values;
  std::string spec_text;
  long long xapp_episodes = 20000;
  long long scheduler_episodes = 10000;
  std::uint64_t seed = 1;
};

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

/// Grid files are key=value: parameter, values (comma list), experiment
/// (spec path, relative to the grid file), and for power_levels sweeps the
/// retraining budget xapp_episodes, scheduler_episodes, seed.
std::string resolved_grid_text(const fs::path& file) {
  if (!fs::exists(file)) throw IoError("cannot read grid " + file.string());
  std::istringstream in(read_text(file));
  std::string line, out;
  while (std::getline(in, line)) {
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("grid: expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "experiment") {
      fs::path p = value;
      if (p.is_relative()) p = file.parent_path() / p;
      // inline, manifest stays self-contained
      std::string text = resolved_spec_text(p);
      for (auto& c : text)
        if (c == '\n') c = ';';
      value = text;
    }
    out += key + "=" + value + "\n";
  }
  return out;
}

Grid parse_grid(const std::string& text) {
  Grid g;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (!seen.insert(key).second) throw ConfigError("grid key '" + key + "' given twice");
    try {
      if (key == "parameter") {
        g.parameter = value;
      } else if (key == "values") {
        std::stringstream ss(value);
        std::string v;
        while (std::getline(ss, v, ',')) g.values.push_back(trim(v));
      } else if (key == "experiment") {
        g.spec_text = value;
        for (auto& c : g.spec_text)
          if (c == ';') c = '\n';
      } else if (key == "xapp_episodes") {
        g.xapp_episodes = std::stoll(value);
      } else if (key == "scheduler_episodes") {
        g.scheduler_episodes = std::stoll(value);
      } else if (key == "seed") {
        g.seed = std::stoull(value);
      } else {
        throw ConfigError("grid: unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw ConfigError("grid key '" + key + "': bad value '" + value + "'");
    }
  }
  if (g.parameter.empty() || g.values.empty() || g.spec_text.empty())
    throw ConfigError("grid needs parameter, values and experiment");
  const bool gate = g.parameter.rfind("safety.", 0) == 0;
  if (!gate && g.parameter != "power_levels")
    throw ConfigError("sweep supports safety.* keys and power_levels, got '" + g.parameter + "'");
  if (g.xapp_episodes < 0 || g.scheduler_episodes < 0) throw ConfigError("grid: negative episode budget");
  return g;
}

void cmd_sweep(const Run& run, const std::vector<std::string>& argv) {
  const Config base = config_of(run);
  const Grid grid = parse_grid(run.grid_text);
  Manifest manifest(run.out, "sweep", run, argv);
  manifest.body["parameter"] = grid.parameter;
  manifest.body["values"] = grid.values;

  const bool gate = grid.parameter.rfind("safety.", 0) == 0;
  const ExperimentSpec base_spec = [&] {
    ExperimentSpec s = parse_experiment_spec(grid.spec_text);
    s.pool_dir = absolute_path(s.pool_dir);
    return s;
  }();
  std::vector<std::pair<std::string, Config>> points;
  for (const auto& value : grid.values) {
    std::istringstream in(run.config_text);
    std::string line, text;
    bool found = false;
    while (std::getline(in, line)) {
      const auto key = line.substr(0, line.find('='));
      if (key == grid.parameter) {
        line = key + "=" + value;
        found = true;
      }
      if (gate && key == "safety.enabled") line = "safety.enabled=true";
      text += line + "\n";
    }
    if (!found) throw ConfigError("grid: unknown config key '" + grid.parameter + "'");
    const Config cfg = parse_config(text);
    check_fallback(base_spec, cfg);
    points.emplace_back(value, cfg);
  }

  for (const auto& [value, cfg] : points) {
    const fs::path dir = run.out / (grid.parameter + "_" + value);
    std::cerr << "sweep " << grid.parameter << "=" << value << "\n";
    Run point = run;
    point.command = "evaluate";
    point.config_text = to_text(cfg);
    ExperimentSpec spec = base_spec;

    if (!gate) {
      // new action space, retrain everything
      const fs::path pool = dir / "pool";
      for (XAppKind kind : {XAppKind::PowerA2C, XAppKind::RbgA2C}) {
        const auto t = train_xapp(kind, cfg, grid.xapp_episodes, grid.seed,
                                  progress_printer(to_string(kind), grid.xapp_episodes, run.log_every));
        write_text(pool / (kind == XAppKind::PowerA2C ? "power.ckpt" : "rbg.ckpt"), serialize(t.checkpoint));
      }
      const XAppPool xapps = load_pool(pool, cfg.network);
      for (Regime r : spec.regimes) {
        if (!is_scheduled(r)) continue;
        const Method m = method_of(r);
        const auto t = train_scheduler(m, xapps, cfg, grid.scheduler_episodes, grid.seed + 1,
                                       progress_printer(scheduler_kind(m), grid.scheduler_episodes, run.log_every));
        write_text(pool / (scheduler_kind(m) + ".ckpt"), serialize(t.checkpoint));
      }
      spec.pool_dir = absolute_path(pool);
    }
    point.spec_text = to_text(spec);
    Manifest sub(dir, "evaluate", point, argv);
    sub.body["sweep"] = {{"parameter", grid.parameter}, {"value", value}};
    evaluate_into(dir, spec, cfg, run.jobs, sub);
    sub.finish();
    manifest.output(grid.parameter + "=" + value, dir / "summary.csv");
  }
  manifest.finish();
}

void dispatch(const Run& run, const std::vector<std::string>& argv) {
  fs::create_directories(run.out);
  if (run.command == "train-xapp") return cmd_train_xapp(run, argv);
  if (run.command == "train-scheduler") return cmd_train_scheduler(run, argv);
  if (run.command == "evaluate") return cmd_evaluate(run, argv);
  if (run.command == "sweep") return cmd_sweep(run, argv);
  throw UsageError("manifest names an unknown command '" + run.command + "'");
}

// -------------------------------------------------------------------- main

std::string effective_config(const std::string& config_path, const std::vector<std::string>& sets) {
  std::string path = config_path;
  if (path.empty()) {
    const char* env = std::getenv("XSCHED_CONFIG");
    if (!env || !*env) throw UsageError("--config is required (or set XSCHED_CONFIG)");
    path = env;
  }
  if (!fs::exists(path)) throw IoError("cannot read config " + path);
  Config cfg = parse_config(read_text(path));
  if (sets.empty()) return to_text(cfg);
  std::map<std::string, std::string> overrides;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    overrides[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
  }
  std::istringstream in(to_text(cfg));
  std::string line, out;
  while (std::getline(in, line)) {
    const auto key = line.substr(0, line.find('='));
    if (const auto it = overrides.find(key); it != overrides.end()) {
      line = key + "=" + it->second;
      overrides.erase(it);
    }
    out += line + "\n";
  }
  if (!overrides.empty()) throw ConfigError("--set: unknown config key '" + overrides.begin()->first + "'");
  return to_text(parse_config(out));
}

int run_main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"xsched: xApp training, conflict scheduling and evaluation"};
  app.set_version_flag("--version", XSCHED_VERSION);
  app.require_subcommand(1);

  Run run;
  std::string config_path;
  std::vector<std::string> sets;
  std::string spec_path, grid_path, manifest_path;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (default: $XSCHED_CONFIG)");
    sub->add_option("--set", sets, "override a config key, key=value (repeatable)");
    sub->add_option("--out", run.out, "output directory")->required();
    sub->add_option("--log-every", run.log_every, "progress line every N episodes (0: quiet)");
  };

  auto* tx = app.add_subcommand("train-xapp", "train the power or RBG xApp");
  common(tx);
  tx->add_option("--kind", run.kind, "power|rbg")->required()->check(CLI::IsMember({"power", "rbg"}));
  tx->add_option("--episodes", run.episodes)->required()->check(CLI::NonNegativeNumber);
  tx->add_option("--seed", run.seed)->required();

  auto* ts = app.add_subcommand("train-scheduler", "train the activation scheduler against a frozen pool");
  common(ts);
  ts->add_option("--method", run.method, "1 (retain) or 2 (baselines)")->required()->check(CLI::IsMember({1, 2}));
  ts->add_option("--pool", run.pool, "directory holding power.ckpt and rbg.ckpt")->required();
  ts->add_option("--episodes", run.episodes)->required()->check(CLI::NonNegativeNumber);
  ts->add_option("--seed", run.seed)->required();

  auto* ev = app.add_subcommand("evaluate", "evaluate regimes over a context grid");
  common(ev);
  ev->add_option("--spec", spec_path, "experiment spec")->required();
  ev->add_option("--jobs", run.jobs, "parallel work units")->check(CLI::PositiveNumber);

  auto* sw = app.add_subcommand("sweep", "evaluate over a safety-gate or power-level grid");
  common(sw);
  sw->add_option("--grid", grid_path, "grid file")->required();
  sw->add_option("--jobs", run.jobs, "parallel work units")->check(CLI::PositiveNumber);

  auto* rp = app.add_subcommand("replay", "rerun the command recorded in a manifest");
  rp->add_option("--manifest", manifest_path)->required();
  rp->add_option("--out", run.out, "output directory (default: the recorded one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  if (rp->parsed()) {
    if (!fs::exists(manifest_path)) throw IoError("cannot read manifest " + manifest_path);
    json m;
    try {
      m = json::parse(read_text(manifest_path));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("manifest: ") + e.what());
    }
    const fs::path out = run.out;
    try {
      run = run_from_json(m.at("run"));
      run.config_text = m.at("config").get<std::string>();
      run.out = out.empty() ? fs::path(m.at("out").get<std::string>()) : out;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("manifest: ") + e.what());
    }
    if (hex64(fnv1a64(run.config_text)) != m.value("config_hash", std::string{}))
      throw ConfigError("manifest: config hash does not match the recorded config");
    dispatch(run, args);
    return kOk;
  }

  run.command = app.get_subcommands().front()->get_name();
  run.config_text = effective_config(config_path, sets);
  if (ev->parsed()) {
    if (!fs::exists(spec_path)) throw IoError("cannot read experiment spec " + spec_path);
    run.spec_text = resolved_spec_text(spec_path);
  }
  if (sw->parsed()) run.grid_text = resolved_grid_text(grid_path);
  dispatch(run, args);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kInvariant;
  } catch (const std::exception& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kInvariant;
  }
}
