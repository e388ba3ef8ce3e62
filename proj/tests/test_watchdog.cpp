#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "test_support.hpp"

namespace lasca {
namespace {

// Rows with a smooth nonlinear label in a few features plus Gaussian noise.
Dataset synthetic(std::size_t rows, double noise_sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Dataset ds;
  for (std::size_t i = 0; i < rows; ++i) {
    FeatureVector f{};
    for (auto& v : f) v = n(rng);
    const double label = 12.0 * std::tanh(f[0]) + 6.0 * f[1] - 3.0 * f[2] * f[3] + noise_sd * n(rng);
    ds.push_back(static_cast<PathId>(i), f, label);
  }
  return ds;
}

TrainConfig quick_config(std::uint64_t seed = 1) {
  TrainConfig c;
  c.hidden = {28};
  c.activation = Activation::Tanh;
  c.epochs = 150;
  c.seed = seed;
  return c;
}

struct Lot {
  Design design;
  FabLot lot;
  std::vector<GtmRecord> gtm;
  MeasurementTable meas;
  std::vector<PathId> paths;
};

Lot noiseless_lot(std::uint64_t seed, double step) {
  Lot l{test::small_design(seed, 30, 500), {}, {}, {}, {}};
  l.lot = make_lot(l.design, test::noiseless_silicon(), 6, {}, seed);
  l.gtm = gtm_table(l.design, PathSpecific{}, VoltageNoiseModel::quiet());
  for (const auto& p : l.design.paths) l.paths.push_back(p.id);
  l.meas = measure_lot(l.lot, l.paths, CfstConfig{step, l.design.clock_period_ps, 1});
  return l;
}

std::vector<std::size_t> all_rows(const MeasurementTable& m) {
  std::vector<std::size_t> r(m.dies.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = i;
  return r;
}

TEST(TrainingSet, IdealLotLabelsLieWithinOneStep) {
  const double step = 15.0;
  const Lot l = noiseless_lot(31, step);
  const auto rows = all_rows(l.meas);
  const auto ds = build_training_set(l.design, l.gtm, l.meas, rows, l.paths);
  ASSERT_GT(ds.size(), 50u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_GT(ds.y[i], -step);
    EXPECT_LE(ds.y[i], 1e-9);
  }
}

TEST(TrainingSet, CsvRowsAreStableAndFortyNineWide) {
  const Lot l = noiseless_lot(32, 15.0);
  const auto rows = all_rows(l.meas);
  const auto a = dataset_to_csv(build_training_set(l.design, l.gtm, l.meas, rows, l.paths));
  const auto b = dataset_to_csv(build_training_set(l.design, l.gtm, l.meas, rows, l.paths));
  EXPECT_EQ(a, b);
  const auto back = dataset_from_csv(a);
  ASSERT_FALSE(back.x.empty());
  EXPECT_EQ(back.x[0].size() + 1, 49u);
  EXPECT_EQ(dataset_to_csv(back), a);
  const auto first_line = a.substr(0, a.find('\n'));
  EXPECT_EQ(std::count(first_line.begin(), first_line.end(), ','), 49);  // path_id + 48 features + label
  EXPECT_THROW((void)build_training_set(l.design, l.gtm, l.meas, rows, {}), Error);
}

TEST(TrainingSet, SelectionIsRoundRobinOverEndpoints) {
  const Design d = test::small_design(33, 30, 500);
  std::vector<PathId> all;
  for (const auto& p : d.paths) all.push_back(p.id);
  std::map<GateId, std::vector<PathId>> by_ep;
  for (PathId p : all) by_ep[d.paths[p].endpoint_register].push_back(p);
  ASSERT_GT(by_ep.size(), 3u);
  // Budget of exactly one path per endpoint: each endpoint gives its longest.
  const auto one = select_training_paths(d, all, 1, by_ep.size());
  ASSERT_EQ(one.size(), by_ep.size());
  std::set<GateId> eps;
  for (PathId p : one) {
    const auto& path = d.paths[p];
    EXPECT_TRUE(eps.insert(path.endpoint_register).second);
    for (PathId q : by_ep[path.endpoint_register]) EXPECT_GE(path.sta_delay_ps, d.paths[q].sta_delay_ps);
  }
  EXPECT_LE(select_training_paths(d, all, 1, 7).size(), 7u);
  EXPECT_EQ(select_training_paths(d, all, 1000, 1u << 30).size(), all.size());
  const double r = static_cast<double>(d.registers.size());
  EXPECT_LE(static_cast<double>(select_training_paths(d, all, 1, 1u << 30).size()), r * r);
  EXPECT_THROW((void)select_training_paths(d, all, 0, 10), Error);
  EXPECT_THROW((void)select_training_paths(d, {}, 1, 10), Error);
}

TEST(Mlp, ZeroWeightsReturnTheOutputBias) {
  Mlp net({48, 6, 1}, {Activation::Tanh});
  auto p = net.parameters();
  std::fill(p.begin(), p.end(), 0.0);
  p.back() = 3.25;  // output bias is the last parameter of a non-PReLU net
  net.set_parameters(p);
  std::vector<double> x(48, 1.7);
  EXPECT_EQ(net.forward(x), 3.25);

  WatchdogModel m;
  m.net = net;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    m.features.kept.push_back(i);
    m.features.mean.push_back(0.0);
    m.features.sd.push_back(1.0);
  }
  FeatureVector f{};
  EXPECT_EQ(m.predict(f), 3.25);
  const std::vector<double> short_input(47, 0.0);
  try {
    (void)m.predict(short_input);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Mlp, SingleLinearLayerIsADotProduct) {
  Mlp net({3, 1}, {});
  net.set_parameters(std::vector<double>{0.5, -2.0, 4.0, 0.25});
  const std::vector<double> x{2.0, 1.5, -0.5};
  EXPECT_DOUBLE_EQ(net.forward(x), 0.5 * 2.0 - 2.0 * 1.5 + 4.0 * -0.5 + 0.25);
  EXPECT_EQ(net.forward(x), net.forward(x));
  EXPECT_THROW((void)net.forward(std::vector<double>{1.0}), Error);
  EXPECT_THROW((Mlp({3, 2}, {})), Error);
  EXPECT_THROW((Mlp({3, 4, 1}, {})), Error);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(48);
  for (Activation act : kAllActivations) {
    Mlp net({48, 4, 1}, {act});
    net.init(7);
    auto g = test::random_grad_problem(rng, act);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<std::vector<double>> xs(3, std::vector<double>(48));
    for (auto& x : xs) {
      for (auto& v : x) v = n(rng);
    }
    const std::vector<double> ys{0.3, -1.0, 2.0};
    const auto r = test::gradient_check(net, xs, ys);
    EXPECT_LT(r.max_rel_err, 1e-4) << to_string(act);
    EXPECT_GT(r.checked, r.skipped) << to_string(act);
    const auto rg = test::gradient_check(g.net, g.xs, g.ys);
    EXPECT_LT(rg.max_rel_err, 1e-4) << to_string(act);
  }
}

TEST(Trainer, ConstantLabelFitsAlmostExactly) {
  Dataset ds = synthetic(600, 0.0, 3);
  for (auto& y : ds.y) y = -7.5;
  const auto r = train_watchdog(ds, quick_config());
  EXPECT_LE(r.model.stats.sigma_nn, 0.5);
  EXPECT_NEAR(r.model.stats.mu, 0.0, 0.5);
}

TEST(Trainer, FullBatchLossIsNonincreasingAtSmallRate) {
  const Dataset ds = synthetic(400, 1.0, 4);
  TrainConfig c = quick_config();
  c.learning_rate = 0.002;
  c.momentum = 0.0;
  c.batch_size = ds.size();
  c.epochs = 60;
  c.patience = 1000;
  const auto r = train_watchdog(ds, c);
  ASSERT_EQ(r.train_loss.size(), 60u);
  for (std::size_t i = 1; i < r.train_loss.size(); ++i) EXPECT_LE(r.train_loss[i], r.train_loss[i - 1] + 1e-12) << i;
}

TEST(Trainer, LearnsTheSignalAndTestMatchesValidation) {
  const Dataset ds = synthetic(3000, 2.0, 5);
  const auto r = train_watchdog(ds, quick_config());
  const auto& s = r.model.stats;
  EXPECT_LT(s.sigma_nn, 0.5 * stats::stddev(ds.y));
  EXPECT_NEAR(s.sigma_nn / s.validation_sigma, 1.0, 0.25);
  EXPECT_EQ(s.train_rows + s.validation_rows + s.test_rows, ds.size());
  EXPECT_NEAR(static_cast<double>(s.train_rows) / 3000.0, 0.6, 0.04);
  EXPECT_NEAR(static_cast<double>(s.validation_rows) / 3000.0, 0.2, 0.04);
  EXPECT_GT(s.epochs_run, 0u);
}

TEST(Trainer, IsDeterministicAndRejectsTinyData) {
  const Dataset ds = synthetic(300, 1.0, 6);
  const auto a = train_watchdog(ds, quick_config(9));
  const auto b = train_watchdog(ds, quick_config(9));
  EXPECT_EQ(a.model.net.parameters(), b.model.net.parameters());
  EXPECT_EQ(a.train_loss, b.train_loss);
  EXPECT_THROW((void)train_watchdog(synthetic(12, 1.0, 6), quick_config()), Error);
  TrainConfig bad = quick_config();
  bad.hidden = {8, 8, 8, 8};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Trainer, FortyOutlierRowsBarelyMoveSigma) {
  const Dataset clean = synthetic(10000, 5.0, 7);
  Dataset dirty = clean;
  std::vector<PathId> extra;
  std::mt19937_64 rng(70);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t i = 0; i < 40; ++i) {
    FeatureVector f{};
    for (auto& v : f) v = n(rng);
    const auto id = static_cast<PathId>(clean.size() + i);
    // A Trojan path measures slower than its features predict.
    dirty.push_back(id, f, 12.0 * std::tanh(f[0]) + 6.0 * f[1] - 3.0 * f[2] * f[3] - 45.0 + 5.0 * n(rng));
    extra.push_back(id);
  }
  TrainConfig c = quick_config(2);
  c.hidden = {32, 28};
  c.activation = Activation::Relu;
  const double s0 = train_watchdog(clean, c).model.stats.sigma_nn;
  const double s1 = train_watchdog(dirty, c, extra).model.stats.sigma_nn;
  EXPECT_LT(std::abs(s1 - s0) / s0, 0.10) << s0 << " -> " << s1;
}

TEST(Trainer, ModelJsonRoundTrip) {
  const Dataset ds = synthetic(300, 1.0, 8);
  TrainConfig c = quick_config();
  c.activation = Activation::Prelu;
  c.hidden = {26, 25};
  const auto m = train_watchdog(ds, c).model;
  const auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(back.predict(ds.x[i]), m.predict(ds.x[i]));
  EXPECT_EQ(back.stats.sigma_nn, m.stats.sigma_nn);
  const auto dir = test::scratch_dir("model");
  save_model(m, dir / "m.json");
  EXPECT_EQ(load_model(dir / "m.json").net.parameters(), m.net.parameters());
}

TEST(Trainer, SplitFractions) {
  std::size_t counts[3] = {0, 0, 0};
  for (PathId i = 0; i < 20000; ++i) ++counts[static_cast<int>(split_of(i, 11))];
  EXPECT_NEAR(counts[0] / 20000.0, 0.6, 0.02);
  EXPECT_NEAR(counts[1] / 20000.0, 0.2, 0.02);
  EXPECT_EQ(split_of(123, 11), split_of(123, 11));
}

TEST(ArchSearch, SingleConfigSpaceReturnsIt) {
  const Dataset ds = synthetic(400, 1.0, 9);
  const ArchSpace one{{1}, {28}, {Activation::Sigmoid}};
  const auto r = arch_search(one, ds, quick_config(), 1);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.best, 0u);
  EXPECT_EQ(r.log[0].candidate.hidden, (std::vector<std::size_t>{28}));
  EXPECT_EQ(r.log[0].candidate.activation, Activation::Sigmoid);
  EXPECT_EQ(r.best_model.net.activations(), (std::vector<Activation>{Activation::Sigmoid}));
}

TEST(ArchSearch, BestHasLowestValidationMse) {
  const Dataset ds = synthetic(400, 1.0, 10);
  TrainConfig base = quick_config();
  base.epochs = 40;
  const ArchSpace space{{1, 2}, {25, 32}, {Activation::Tanh, Activation::Relu}};
  const auto r = arch_search(space, ds, base, 2);
  ASSERT_EQ(r.log.size(), 2u * 2u * 2u);
  for (const auto& e : r.log) {
    EXPECT_GE(e.validation_mse, r.log[r.best].validation_mse);
    for (auto w : e.candidate.hidden) {
      EXPECT_GE(w, kMinHiddenWidth);
      EXPECT_LE(w, kMaxHiddenWidth);
    }
  }
  EXPECT_EQ(r.best_model.stats.validation_mse, r.log[r.best].validation_mse);
  const auto csv = sweep_log_to_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(r.log.size() + 1));
  EXPECT_EQ(sweep_log_to_csv(arch_search(space, ds, base, 1)), csv);
  EXPECT_THROW((void)enumerate_space(ArchSpace{{1}, {24}, {Activation::Relu}}), Error);
  EXPECT_THROW((void)enumerate_space(ArchSpace{{1}, {33}, {Activation::Relu}}), Error);
}

}  // namespace
}  // namespace lasca
