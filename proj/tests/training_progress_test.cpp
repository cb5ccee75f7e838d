#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "xsched/harness.hpp"

using namespace xsched;

namespace {

Config desk() { return load_config(std::filesystem::path(XSCHED_SOURCE_DIR) / "configs" / "desk.cfg"); }

struct Progress {
  double first = 0.0;
  double last = 0.0;
};

Progress progress(XAppKind kind, std::uint64_t seed) {
  const auto t = train_xapp(kind, desk(), 20000, seed);
  std::vector<double> tau;
  for (const auto& h : t.history) tau.push_back(h.tau_e);
  const auto ma = moving_average(tau, 500);
  return {std::accumulate(tau.begin(), tau.begin() + 500, 0.0) / 500.0, ma.back()};
}

}  // namespace

TEST(TrainingProgress, PowerXAppGainsTwentyPercent) {
  const auto p = progress(XAppKind::PowerA2C, 11);
  RecordProperty("first_ma", std::to_string(p.first));
  RecordProperty("final_ma", std::to_string(p.last));
  EXPECT_GE(p.last, 1.2 * p.first) << "first " << p.first << " final " << p.last;
}

// The untrained RBG xApp already starts near the tau ceiling of 1 (about
// 0.92 at desk scale), so a 20% gain is out of reach; check that training
// still helps.
TEST(TrainingProgress, RbgXAppImproves) {
  const auto p = progress(XAppKind::RbgA2C, 12);
  EXPECT_GT(p.first, 1.0 / 1.2);
  EXPECT_GT(p.last, p.first) << "first " << p.first << " final " << p.last;
}
