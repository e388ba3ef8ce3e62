#include <gtest/gtest.h>

#include <random>
#include <set>

#include "test_support.hpp"

namespace lasca {
namespace {

double delay_of(const FabLot& lot, PathId p, std::size_t die = 0, std::uint64_t trial = 0) {
  const auto& path = lot.design.paths[p];
  return true_path_delay(path, lot, lot.dies[die], sample_noise(lot, lot.dies[die], path, trial));
}

// A data gate with paths through it, picked deterministically.
GateId victim_gate(const Design& d, std::uint64_t seed) {
  std::vector<GateId> cands;
  for (const auto& p : d.paths) {
    for (std::size_t i = 1; i < p.dp.gates.size(); ++i) cands.push_back(p.dp.gates[i]);
  }
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  std::mt19937_64 rng(seed);
  return cands[std::uniform_int_distribution<std::size_t>(0, cands.size() - 1)(rng)];
}

bool through(const TimingPath& p, GateId g) { return std::find(p.dp.gates.begin(), p.dp.gates.end(), g) != p.dp.gates.end(); }

TEST(MakeLot, DerivativesAndDeterminism) {
  const Design d = test::small_design(1);
  SiliconConfig c;
  c.skew = {5.0, 5.0};
  const FabLot lot = make_lot(d, c, 100, {}, 42);
  ASSERT_EQ(lot.dies.size(), 100u);
  std::map<double, int> count;
  for (const auto& die : lot.dies) ++count[die.persistent_mult];
  ASSERT_EQ(count.size(), 3u);
  for (const auto& [m, n] : count) {
    EXPECT_TRUE(m == 0.99 || m == 1.00 || m == 1.01) << m;
    EXPECT_GE(n, 33);
    EXPECT_LE(n, 34);
  }
  const FabLot again = make_lot(d, c, 100, {}, 42);
  EXPECT_EQ(lot_to_json(lot).dump(), lot_to_json(again).dump());
  std::set<std::uint64_t> seeds;
  for (const auto& die : lot.dies) seeds.insert(die.rng_stream_seed);
  EXPECT_EQ(seeds.size(), 100u);
}

TEST(MakeLot, Errors) {
  const Design d = test::small_design(1);
  try {
    (void)make_lot(d, SiliconConfig{}, 0, {}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyLot);
  }
  try {
    (void)make_lot(d, SiliconConfig{}, 3, {TrojanSpec::make(TrojanKind::TP, "n999999", SizeClass::Medium)}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownNet);
  }
  SiliconConfig bad;
  bad.skew.x_pct = 25.0;
  EXPECT_THROW((void)make_lot(d, bad, 3, {}, 1), Error);
}

TEST(MakeLot, RoundTripsThroughJson) {
  const Design d = test::small_design(2);
  const auto t = TrojanSpec::make(TrojanKind::TT, d.net_name(PinRef::output(victim_gate(d, 1))), SizeClass::Large);
  const FabLot lot = make_lot(d, SiliconConfig{}, 6, {t}, 9);
  const FabLot back = lot_from_json(nlohmann::json::parse(lot_to_json(lot).dump()), d);
  EXPECT_EQ(lot_to_json(back).dump(), lot_to_json(lot).dump());
  EXPECT_EQ(delay_of(back, 3, 2), delay_of(lot, 3, 2));
}

TEST(InsertTrojan, UnknownNet) {
  try {
    (void)insert_trojan(test::small_design(1), TrojanSpec::make(TrojanKind::TP, "nope", SizeClass::Small));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownNet);
  }
}

TEST(InsertTrojan, LeavesVisibleNetlistAlone) {
  const Design d = test::small_design(3);
  const auto t = TrojanSpec::make(TrojanKind::TP, d.net_name(PinRef::output(victim_gate(d, 2))), SizeClass::Medium);
  const Design infested = insert_trojan(d, t);
  EXPECT_EQ(design_to_json(infested).dump(), design_to_json(d).dump());
  for (const auto& p : d.paths) EXPECT_EQ(extract_features(infested, p), extract_features(d, p));
}

TEST(InsertTrojan, PayloadAddsDeltaPlusPinLoad) {
  const Design d = test::small_design(4);
  const auto sc = test::noiseless_silicon();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const GateId g = victim_gate(d, s);
    const auto t = TrojanSpec::make(TrojanKind::TP, d.net_name(PinRef::output(g)), SizeClass::Medium);
    ASSERT_EQ(t.delay_delta_ps, 45.0);
    const FabLot clean = make_lot(d, sc, 1, {}, 1);
    const FabLot bad = make_lot(d, sc, 1, {t}, 1);
    const double load = d.gates[g].load_coeff * sc.tp_pin_cap_ff;
    std::size_t hit = 0;
    for (const auto& p : d.paths) {
      const double diff = delay_of(bad, p.id) - delay_of(clean, p.id);
      if (through(p, g)) {
        ++hit;
        EXPECT_GE(diff, 45.0);
        EXPECT_NEAR(diff, 45.0 + load, 1e-9);
      } else {
        EXPECT_EQ(diff, 0.0);
      }
    }
    EXPECT_GT(hit, 0u);
  }
}

TEST(InsertTrojan, TriggerTapConfinedToVictimPaths) {
  const Design d = test::small_design(5);
  SiliconConfig sc;  // full noise: locality must hold die by die
  const GateId g = victim_gate(d, 7);
  const auto t = TrojanSpec::make(TrojanKind::TT, d.net_name(PinRef::output(g)), SizeClass::Large);
  const FabLot clean = make_lot(d, sc, 3, {}, 5);
  const FabLot bad = make_lot(d, sc, 3, {t}, 5);
  for (const auto& p : d.paths) {
    for (std::size_t die = 0; die < 3; ++die) {
      const double diff = delay_of(bad, p.id, die) - delay_of(clean, p.id, die);
      if (through(p, g)) {
        EXPECT_NEAR(diff, 20.0, 1e-9);
      } else {
        EXPECT_EQ(diff, 0.0);
      }
    }
  }
}

TEST(TruePathDelay, IdentityCornerEqualsNominalSta) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Design d = test::small_design(seed);
    const FabLot lot = make_lot(d, test::noiseless_silicon(), 1, {}, seed);
    for (const auto& p : d.paths) EXPECT_NEAR(delay_of(lot, p.id), p.sta_delay_ps, 1e-9);
  }
}

TEST(NoiseSample, ZeroSigmaAndDeterminism) {
  const Design d = test::small_design(6);
  auto sc = test::noiseless_silicon();
  sc.voltage.mean_drop = 0.0;
  const FabLot lot = make_lot(d, sc, 2, {}, 3);
  for (const auto& p : d.paths) {
    const auto s = sample_noise(lot, lot.dies[1], p, 4);
    for (std::size_t k = 0; k < 3; ++k) {
      for (double m : s.pv[k]) EXPECT_EQ(m, 1.0);
      for (double v : s.voltage[k]) EXPECT_EQ(v, sc.voltage.v_nom);
    }
  }
  const FabLot noisy = make_lot(d, SiliconConfig{}, 2, {}, 3);
  const auto a = sample_noise(noisy, noisy.dies[0], d.paths[0], 2);
  const auto b = sample_noise(noisy, noisy.dies[0], d.paths[0], 2);
  EXPECT_EQ(a.pv, b.pv);
  EXPECT_EQ(a.voltage, b.voltage);
}

TEST(NoiseSample, VoltagesStayInWindow) {
  const Design d = test::small_design(7);
  const FabLot lot = make_lot(d, SiliconConfig{}, 4, {}, 3);
  const double vn = lot.config.voltage.v_nom;
  for (const auto& die : lot.dies) {
    for (const auto& p : d.paths) {
      const auto s = sample_noise(lot, die, p, 0);
      for (const auto& vs : s.voltage) {
        for (double v : vs) {
          EXPECT_GT(v, 0.7 * vn);
          EXPECT_LE(v, vn);
        }
      }
    }
  }
}

TEST(NoiseSample, PvSpreadMatchesSigma) {
  const Design d = test::small_design(8, 40, 600);
  const FabLot lot = make_lot(d, SiliconConfig{}, 20, {}, 11);
  std::vector<double> m;
  for (const auto& die : lot.dies) {
    for (GateId g = 0; g < d.gates.size() && m.size() < 10000; ++g) m.push_back(lot.model.pv_multiplier(die.rng_stream_seed, g));
  }
  ASSERT_EQ(m.size(), 10000u);
  EXPECT_NEAR(stats::stddev(m), 0.03, 0.003);
}

// Property: over random paths and random corner pairs, delay never rises
// with X or Y and never falls with persistent, PV or Trojan size.
TEST(TruePathDelay, Monotonicity) {
  const Design d = test::small_design(9);
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> skew(-20.0, 20.0);
  std::uniform_int_distribution<std::size_t> pick(0, d.paths.size() - 1);
  auto delay_at = [&](double x, double y, double persistent, const std::vector<TrojanSpec>& trojans, PathId p,
                      double pv_scale) {
    SiliconConfig c;
    c.skew = {x, y};
    c.persistent_derivatives = {persistent};
    const FabLot lot = make_lot(d, c, 1, trojans, 77);
    auto s = sample_noise(lot, lot.dies[0], d.paths[p], 0);
    for (auto& v : s.pv) {
      for (auto& m : v) m *= pv_scale;
    }
    return true_path_delay(d.paths[p], lot, lot.dies[0], s);
  };
  for (int trial = 0; trial < 60; ++trial) {
    const PathId p = static_cast<PathId>(pick(rng));
    double x1 = skew(rng), x2 = skew(rng), y1 = skew(rng), y2 = skew(rng);
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    const double base = delay_at(x1, y1, 1.0, {}, p, 1.0);
    EXPECT_GT(base, 0.0);
    EXPECT_LE(delay_at(x2, y1, 1.0, {}, p, 1.0), base);
    EXPECT_LE(delay_at(x1, y2, 1.0, {}, p, 1.0), base);
    EXPECT_GE(delay_at(x1, y1, 1.01, {}, p, 1.0), base);
    EXPECT_GE(delay_at(x1, y1, 1.0, {}, p, 1.02), base);
    std::vector<GateId> dp(d.paths[p].dp.gates.begin() + 1, d.paths[p].dp.gates.end());
    if (dp.empty()) continue;
    const std::string net = d.net_name(PinRef::output(dp[trial % dp.size()]));
    double prev = base;
    for (auto size : {SizeClass::Small, SizeClass::Medium, SizeClass::Large}) {
      const double v = delay_at(x1, y1, 1.0, {TrojanSpec::make(TrojanKind::TP, net, size)}, p, 1.0);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(TruePathDelay, FastCornerIsFaster) {
  const Design d = test::small_design(10);
  auto c0 = test::noiseless_silicon();
  auto c5 = c0;
  c5.skew = {5.0, 5.0};
  const FabLot a = make_lot(d, c0, 1, {}, 1);
  const FabLot b = make_lot(d, c5, 1, {}, 1);
  for (const auto& p : d.paths) EXPECT_LT(delay_of(b, p.id), delay_of(a, p.id));
}

TEST(TruePathDelay, FastPathMatchesSampledPath) {
  const Design d = test::small_design(11);
  const FabLot lot = make_lot(d, SiliconConfig{}, 3, {}, 5);
  for (const auto& die : lot.dies) {
    const auto pv = die_pv_map(lot, die);
    for (const auto& p : d.paths) {
      EXPECT_DOUBLE_EQ(true_path_delay_fast(p, lot, die, pv, 1), true_path_delay(p, lot, die, sample_noise(lot, die, p, 1)));
    }
  }
}

TEST(GroundTruth, MarksPathsThroughVictims) {
  const Design d = test::small_design(12);
  const GateId g = victim_gate(d, 3);
  const FabLot lot = make_lot(d, SiliconConfig{}, 1, {TrojanSpec::make(TrojanKind::TP, d.net_name(PinRef::output(g)), SizeClass::Small)}, 1);
  const auto truth = trojan_ground_truth(lot);
  for (const auto& p : d.paths) EXPECT_EQ(truth[p.id], through(p, g) ? 0 : -1);
}

}  // namespace
}  // namespace lasca
