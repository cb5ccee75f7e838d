#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <random>

#include "xsched/harness.hpp"

using namespace xsched;

namespace {

Config desk() {
  Config c;
  c.network.num_orus = 2;
  c.network.num_users = 4;
  c.network.rbgs_per_oru = 3;
  c.network.power_levels = 4;
  return c;
}

ActorCritic pinned_scheduler(Method m, int index) {
  ActorCritic net;
  net.head_sizes = {action_count(m)};
  net.actor = mlp_zeros<double>({3, action_count(m)});
  net.actor.layers[0].bias(index) = 5.0;
  net.critic = mlp_zeros<double>({3, 1});
  net.critic.layers[0].weight << 1.0, -2.0, 3.0;  // varies with the state
  return net;
}

EvaluationPool small_pool(const Config& cfg) {
  Rng rng(42);
  A2CHyper h;
  h.hidden_units = 8;
  EvaluationPool p;
  p.xapps.power = make_actor_critic(power_input_size(cfg.network), power_head_sizes(cfg.network), h, rng);
  p.xapps.rbg = make_actor_critic(rbg_input_size(cfg.network), rbg_head_sizes(cfg.network), h, rng);
  scale_in_place(p.xapps.power.actor, 100.0);
  scale_in_place(p.xapps.rbg.actor, 100.0);
  p.scheduler_m1 = pinned_scheduler(Method::RetainPrevious, 2);
  p.scheduler_m2 = pinned_scheduler(Method::ExtendWithBaselines, 1);
  return p;
}

ExperimentSpec small_spec() {
  ExperimentSpec s;
  s.episodes = 2;
  s.seeds = {1, 2};
  s.arrival_rates_bps = {2e6, 8e6};
  s.speeds_mps = {5.0, 45.0};
  return s;
}

MetricsRow row(Regime r, double d, double tau, int episode = 0) {
  return {r, d, 5.0, 1, episode, tau, 10.0 * tau, {}};
}

}  // namespace

TEST(Spec, DefaultsAreTheNineCellGrid) {
  const ExperimentSpec s;
  EXPECT_EQ(s.cells(), 9);
  EXPECT_EQ(s.regimes.size(), 5u);
  EXPECT_EQ(s.seeds.size(), 5u);
  EXPECT_EQ(s.episodes, 50);
}

TEST(Spec, ParseAndErrors) {
  const auto s = parse_experiment_spec("regimes=both, method2\narrival_rates_bps=2e6\nspeeds_mps=5,45\nepisodes=3\nseeds=7,8\npool=p\n");
  EXPECT_EQ(s.regimes, (std::vector<Regime>{Regime::Both, Regime::Method2}));
  EXPECT_EQ(s.cells(), 2);
  EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{7, 8}));
  EXPECT_EQ(s.pool_dir, "p");
  EXPECT_THROW(parse_experiment_spec("seeds=1,1\n"), ConfigError);
  EXPECT_THROW(parse_experiment_spec("speeds_mps=\n"), ConfigError);
  EXPECT_THROW(parse_experiment_spec("regimes=both,chaos\n"), ConfigError);
  EXPECT_THROW(parse_experiment_spec("what=1\n"), ConfigError);
  EXPECT_THROW(parse_experiment_spec("episodes=0\n"), ConfigError);
}

TEST(RunRegime, RowCountsAndOrder) {
  const auto cfg = desk();
  const auto pool = small_pool(cfg);
  ExperimentSpec spec;
  spec.seeds = {1, 2, 3};
  spec.episodes = 10;
  spec.regimes = {Regime::PowerOnly};
  cfg.validate();
  const auto run = run_regime(Regime::PowerOnly, spec, cfg, pool);
  ASSERT_EQ(run.rows.size(), 270u);
  EXPECT_TRUE(run.trace.empty());
  EXPECT_EQ(run.rows[0].d_bps, 2e6);
  EXPECT_EQ(run.rows[0].v_mps, 5.0);
  EXPECT_EQ(run.rows[0].seed, 1u);
  EXPECT_EQ(run.rows[10].seed, 2u);
  EXPECT_EQ(run.rows[30].v_mps, 25.0);
  for (const auto& r : run.rows) {
    EXPECT_GE(r.tau_e, 0.0);
    EXPECT_GE(r.leftover_bits, 0.0);
  }
}

TEST(RunRegime, DeterministicAndIndependentOfJobs) {
  const auto cfg = desk();
  const auto pool = small_pool(cfg);
  const auto spec = small_spec();
  const auto a = run_regime(Regime::Method1, spec, cfg, pool, 1);
  const auto b = run_regime(Regime::Method1, spec, cfg, pool, 3);
  EXPECT_EQ(metrics_csv(a.rows), metrics_csv(b.rows));
  EXPECT_EQ(activation_trace_csv(a.trace), activation_trace_csv(b.trace));
  EXPECT_EQ(metrics_csv(run_regime(Regime::PowerOnly, spec, cfg, pool).rows),
            metrics_csv(run_regime(Regime::PowerOnly, spec, cfg, pool).rows));
}

TEST(RunRegime, BothEqualsMethod1PinnedToBoth) {
  const auto cfg = desk();
  const auto pool = small_pool(cfg);
  const auto spec = small_spec();
  const auto both = run_regime(Regime::Both, spec, cfg, pool);
  const auto m1 = run_regime(Regime::Method1, spec, cfg, pool);
  ASSERT_EQ(both.rows.size(), m1.rows.size());
  for (std::size_t i = 0; i < both.rows.size(); ++i) {
    EXPECT_EQ(both.rows[i].tau_e, m1.rows[i].tau_e);
    EXPECT_EQ(both.rows[i].leftover_bits, m1.rows[i].leftover_bits);
  }
  ASSERT_EQ(m1.trace.size(), both.rows.size() * 5);
  for (const auto& t : m1.trace) EXPECT_EQ(t.mu_bits, "11");
}

TEST(RunRegime, PairedSeedsShareTraffic) {
  // RbgOnly and Method 2 pinned at 0110 issue the same allocations, so
  // shared environment draws give identical rows.
  auto cfg = desk();
  auto pool = small_pool(cfg);
  pool.scheduler_m2 = pinned_scheduler(Method::ExtendWithBaselines, 2);  // 0110
  const auto spec = small_spec();
  const auto rbg = run_regime(Regime::RbgOnly, spec, cfg, pool);
  const auto m2 = run_regime(Regime::Method2, spec, cfg, pool);
  for (std::size_t i = 0; i < rbg.rows.size(); ++i) EXPECT_EQ(rbg.rows[i].tau_e, m2.rows[i].tau_e);
}

TEST(RunRegime, MinusInfinityThresholdMatchesUngated) {
  auto cfg = desk();
  const auto pool = small_pool(cfg);
  auto spec = small_spec();
  spec.episodes = 8;
  const auto plain = run_regime(Regime::Method2, spec, cfg, pool);
  cfg.safety.enabled = true;
  cfg.safety.z_threshold = -std::numeric_limits<double>::infinity();
  cfg.safety.warmup = 0;
  const auto gated = run_regime(Regime::Method2, spec, cfg, pool);
  EXPECT_EQ(activation_trace_csv(plain.trace), activation_trace_csv(gated.trace));
  EXPECT_EQ(metrics_csv(plain.rows), metrics_csv(gated.rows));
}

TEST(RunRegime, GateCanFire) {
  auto cfg = desk();
  const auto pool = small_pool(cfg);
  auto spec = small_spec();
  spec.episodes = 8;
  cfg.safety.enabled = true;
  cfg.safety.z_threshold = 10.0;  // everything after warm-up looks anomalous
  cfg.safety.warmup = 2;
  const auto run = run_regime(Regime::Method2, spec, cfg, pool);
  EXPECT_TRUE(std::any_of(run.trace.begin(), run.trace.end(), [](const auto& t) { return t.gated && t.mu_bits == "0011"; }));
  cfg.safety.fallback = FallbackPolicy::EqualAllocation;
  EXPECT_THROW(run_regime(Regime::Method1, spec, cfg, pool), ConfigError);
}

TEST(RunRegime, MissingSchedulerIsAnError) {
  const auto cfg = desk();
  auto pool = small_pool(cfg);
  pool.scheduler_m1.reset();
  EXPECT_THROW(run_regime(Regime::Method1, small_spec(), cfg, pool), ConfigError);
}

TEST(MovingAverage, Examples) {
  EXPECT_EQ(moving_average({2, 2, 2, 2}, 3), (std::vector<double>{2, 2, 2, 2}));
  EXPECT_EQ(moving_average({1, 5, -3}, 1), (std::vector<double>{1, 5, -3}));
  EXPECT_THROW(moving_average({}, 3), std::invalid_argument);
  EXPECT_THROW(moving_average({1}, 0), std::invalid_argument);
}

TEST(MovingAverage, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int window : {1, 7, 500}) {
    std::vector<double> s(3000);
    for (auto& x : s) x = u(rng);
    const auto fast = moving_average(s, window);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - static_cast<std::size_t>(window) : 0;
      double sum = 0.0;
      for (std::size_t k = lo; k <= i; ++k) sum += s[k];
      ASSERT_NEAR(fast[i], sum / static_cast<double>(i + 1 - lo), 1e-12);
    }
  }
}

TEST(Summarize, DegradationExamples) {
  const std::vector<MetricsRow> rows{row(Regime::PowerOnly, 8e6, 0.5), row(Regime::RbgOnly, 8e6, 1.0),
                                     row(Regime::Both, 8e6, 0.84),     row(Regime::PowerOnly, 2e6, 1.0),
                                     row(Regime::RbgOnly, 2e6, 0.7),   row(Regime::Both, 2e6, 0.95)};
  const auto s = summarize(rows);
  ASSERT_EQ(s.size(), 6u);
  for (const auto& r : s) {
    ASSERT_TRUE(r.degradation_pct.has_value());
    EXPECT_NEAR(*r.degradation_pct, r.d_bps == 8e6 ? 16.0 : 5.0, 1e-12);
  }
  const std::vector<MetricsRow> same{row(Regime::PowerOnly, 2e6, 0.9), row(Regime::RbgOnly, 2e6, 0.9),
                                     row(Regime::Both, 2e6, 0.9)};
  EXPECT_EQ(*summarize(same)[0].degradation_pct, 0.0);
  const auto partial = summarize({row(Regime::Both, 2e6, 0.9)});
  EXPECT_FALSE(partial[0].degradation_pct.has_value());
  EXPECT_THROW(summarize({}), std::invalid_argument);
}

TEST(Summarize, PermutationInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<MetricsRow> rows;
  for (Regime r : {Regime::PowerOnly, Regime::RbgOnly, Regime::Both, Regime::Method1})
    for (double d : {2e6, 5e6})
      for (int e = 0; e < 40; ++e) rows.push_back(row(r, d, u(rng), e));
  const auto ref = summary_csv(summarize(rows));
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(rows.begin(), rows.end(), rng);
    ASSERT_EQ(summary_csv(summarize(rows)), ref);
  }
}

TEST(Csv, HeadersAndFormatting) {
  const std::vector<MetricsRow> rows{row(Regime::Method2, 2e6, 0.25)};
  EXPECT_EQ(metrics_csv(rows), "regime,d_bps,v_mps,seed,episode,tau_e,leftover_bits\nmethod2,2000000,5,1,0,0.25,2.5\n");
  EXPECT_EQ(summary_csv(summarize(rows)),
            "regime,d_bps,v_mps,mean_tau,mean_leftover,degradation_pct\nmethod2,2000000,5,0.25,2.5,\n");
  EXPECT_EQ(activation_trace_csv({{3, 1, 2e6, 5.0, 0.5, "0110", true, 0.75}}),
            "episode,period,c1,c2,f,mu_bits,gated,period_reward\n3,1,2000000,5,0.5,0110,1,0.75\n");
}
