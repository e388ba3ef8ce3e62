#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace lasca {
namespace {

const Design& bench() {
  static const Design d = generate_design(test::small_design_config(60, 1500, 12), 21);
  return d;
}

TEST(GtmSlack, DegeneratePath) {
  const Design& d = bench();
  TimingPath empty;
  empty.endpoint_setup_ps = 20.0;
  const auto g = gtm_slack(d, empty, GlobalPessimistic{});
  EXPECT_EQ(g.sta_delay_ps, 0.0);
  EXPECT_EQ(g.margin_ps, 25.0);
  EXPECT_EQ(g.slack_ps, d.clock_period_ps - 20.0 - 25.0);
  const auto p = gtm_slack(d, empty, PathSpecific{});
  EXPECT_EQ(p.margin_ps, 0.0);
  EXPECT_EQ(p.slack_ps, d.clock_period_ps - 20.0);
}

TEST(GtmSlack, SlackIdentityIsExact) {
  const Design& d = bench();
  for (const MarginMode& mode : {MarginMode{GlobalPessimistic{}}, MarginMode{PathSpecific{}}}) {
    const auto table = gtm_table(d, mode, VoltageNoiseModel{});
    ASSERT_EQ(table.size(), d.paths.size());
    for (const auto& r : table) {
      const auto& p = d.paths[r.path_id];
      EXPECT_EQ(r.slack_ps, d.clock_period_ps - r.sta_delay_ps - p.endpoint_setup_ps - r.margin_ps);
      EXPECT_EQ(r.sta_delay_ps, p.sta_delay_ps);
    }
  }
}

TEST(GtmSlack, PathSpecificMarginsAreSmallerOnAverage) {
  const Design& d = bench();
  ASSERT_GE(d.paths.size(), 500u);
  const auto g = gtm_table(d, GlobalPessimistic{}, VoltageNoiseModel{});
  const auto p = gtm_table(d, PathSpecific{}, VoltageNoiseModel{});
  double mg = 0.0;
  double mp = 0.0;
  std::size_t ps_wins = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    mg += g[i].margin_ps;
    mp += p[i].margin_ps;
    ps_wins += g[i].slack_ps <= p[i].slack_ps ? 1 : 0;
  }
  EXPECT_LT(mp / static_cast<double>(p.size()), mg / static_cast<double>(g.size()));
  EXPECT_GE(static_cast<double>(ps_wins), 0.9 * static_cast<double>(g.size()));
}

TEST(GtmSlack, PathSpecificMarginsVaryGlobalPolicyDoesNot) {
  const Design& d = bench();
  const GlobalPessimistic gp;
  const VoltageNoiseModel vm;
  const auto g = gtm_table(d, gp, vm);
  const auto p = gtm_table(d, PathSpecific{}, vm);
  std::vector<double> pm;
  for (const auto& r : p) pm.push_back(r.margin_ps);
  EXPECT_GT(stats::stddev(pm), 0.1);
  // One derate factor and one uncertainty for every path: the margin minus
  // the uncertainty is the same fraction of each path's intrinsic delay.
  const double f = vm.delay_factor(gp.rail_voltage) - 1.0;
  for (const auto& r : g) {
    const auto& path = d.paths[r.path_id];
    double intrinsic = 0.0;
    for (GateId x : path.lp.gates) intrinsic += d.gates[x].intrinsic_ps;
    for (GateId x : path.dp.gates) intrinsic += d.gates[x].intrinsic_ps;
    for (GateId x : path.cp.gates) intrinsic -= d.gates[x].intrinsic_ps;
    EXPECT_NEAR(r.margin_ps, gp.endpoint_uncertainty_ps + f * intrinsic, 1e-9);
  }
}

TEST(GtmSlack, QuietVoltageMeansNoPathSpecificMargin) {
  const Design& d = bench();
  for (const auto& r : gtm_table(d, PathSpecific{}, VoltageNoiseModel::quiet())) EXPECT_EQ(r.margin_ps, 0.0);
}

TEST(GtmSlack, RejectsBadRail) {
  const Design& d = bench();
  GlobalPessimistic gp;
  gp.rail_voltage = 1.2;
  EXPECT_THROW((void)gtm_slack(d, d.paths[0], gp), Error);
}

TEST(GtmTable, CsvRoundTripAndThreadIndependence) {
  const Design& d = bench();
  const auto one = gtm_table(d, PathSpecific{}, VoltageNoiseModel{}, 1);
  const auto many = gtm_table(d, PathSpecific{}, VoltageNoiseModel{}, 4);
  EXPECT_EQ(one, many);
  const auto back = gtm_from_csv(gtm_to_csv(one));
  ASSERT_EQ(back.size(), one.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(back[i].path_id, one[i].path_id);
    EXPECT_DOUBLE_EQ(back[i].slack_ps, one[i].slack_ps);
    EXPECT_EQ(back[i].mode, one[i].mode);
  }
}

TEST(StaticShift, Examples) {
  const std::vector<std::pair<double, double>> same(7, {100.0, 80.0});
  EXPECT_DOUBLE_EQ(static_shift(same), -20.0);
  try {
    (void)static_shift({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
}

TEST(StaticShift, MatchesRecomputedMean) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(50.0, 30.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::pair<double, double>> pairs(1 + t * 13);
    long double acc = 0.0;
    for (auto& [g, m] : pairs) {
      g = n(rng);
      m = n(rng);
      acc += static_cast<long double>(m) - static_cast<long double>(g);
    }
    EXPECT_NEAR(static_shift(pairs), static_cast<double>(acc / pairs.size()), 1e-9);
  }
}

}  // namespace
}  // namespace lasca
