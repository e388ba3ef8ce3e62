#pragma once

// Watchdog training: standardization, hashed train/val/test split, mini-batch
// gradient descent with momentum and early stopping on validation MSE.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lasca/dataset.hpp"
#include "lasca/design_io.hpp"
#include "lasca/error.hpp"
#include "lasca/features.hpp"
#include "lasca/io.hpp"
#include "lasca/mlp.hpp"
#include "lasca/rng.hpp"
#include "lasca/stats.hpp"

namespace lasca {

enum class Split : std::uint8_t { Train, Validation, Test };

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 300;
  std::size_t batch_size = 64;
  std::size_t patience = 20;
  double train_fraction = 0.60;
  double validation_fraction = 0.20;
  std::vector<std::size_t> hidden{32, 28};
  Activation activation = Activation::Relu;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive", "train.learning_rate");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCode::InvalidArgument, "momentum must lie in [0, 1)", "train.momentum");
    if (epochs == 0) throw Error(ErrorCode::InvalidArgument, "epochs must be positive", "train.epochs");
    if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive", "train.batch_size");
    if (!(train_fraction > 0.0 && validation_fraction > 0.0 && train_fraction + validation_fraction < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "split fractions must leave a test share", "train.train_fraction");
    }
    if (hidden.empty() || hidden.size() > 3) throw Error(ErrorCode::InvalidArgument, "1 to 3 hidden layers", "train.hidden");
  }
};

inline Split split_of(PathId id, std::uint64_t seed, double train_fraction = 0.6, double validation_fraction = 0.2) {
  const double u = rng::keyed_uniform(rng::derive_seed(seed, 0x73706c6974ULL, id));
  if (u < train_fraction) return Split::Train;
  if (u < train_fraction + validation_fraction) return Split::Validation;
  return Split::Test;
}

struct Standardizer {
  std::vector<std::size_t> kept;  // feature indexes with nonzero training variance
  std::vector<double> mean;
  std::vector<double> sd;

  [[nodiscard]] std::vector<double> apply(std::span<const double> f) const {
    std::vector<double> out(kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k) out[k] = (f[kept[k]] - mean[k]) / sd[k];
    return out;
  }
};

struct WatchdogStats {
  double mu = 0.0;        // mean test residual (prediction - label), ps
  double sigma_nn = 0.0;  // sd of test residuals, ps
  double validation_sigma = 0.0;
  double validation_mse = 0.0;  // in standardized label units
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
  std::size_t test_rows = 0;
  std::size_t epochs_run = 0;
};

struct WatchdogModel {
  Mlp net;
  Standardizer features;
  double label_mean = 0.0;
  double label_sd = 1.0;
  WatchdogStats stats;

  [[nodiscard]] double predict(std::span<const double> f) const {
    if (f.size() != kFeatureCount) throw Error(ErrorCode::DimensionMismatch, "watchdog input must have 48 features");
    return net.forward(features.apply(f)) * label_sd + label_mean;
  }
};

namespace detail {

inline double mse(const Mlp& net, const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = net.forward(x[i]) - y[i];
    acc += e * e;
  }
  return acc / static_cast<double>(x.size());
}

}  // namespace detail

struct TrainResult {
  WatchdogModel model;
  std::vector<double> train_loss;  // per epoch, standardized units
  std::vector<double> validation_loss;
};

// `force_train` rows are placed in the training split regardless of hash.
inline TrainResult train_watchdog(const Dataset& ds, const TrainConfig& cfg, std::span<const PathId> force_train = {}) {
  cfg.validate();
  std::vector<Split> split(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    split[i] = split_of(ds.ids[i], cfg.seed, cfg.train_fraction, cfg.validation_fraction);
    if (std::find(force_train.begin(), force_train.end(), ds.ids[i]) != force_train.end()) split[i] = Split::Train;
  }
  std::vector<std::size_t> tr;
  std::vector<std::size_t> va;
  std::vector<std::size_t> te;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (split[i] == Split::Train ? tr : split[i] == Split::Validation ? va : te).push_back(i);
  }
  if (tr.size() < 10 || va.size() < 10 || te.size() < 10) {
    throw Error(ErrorCode::DegenerateData, "each split needs at least 10 rows (have " + std::to_string(tr.size()) + "/" +
                                               std::to_string(va.size()) + "/" + std::to_string(te.size()) + ")");
  }

  WatchdogModel model;
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    std::vector<double> col;
    col.reserve(tr.size());
    for (std::size_t i : tr) col.push_back(ds.x[i][f]);
    const double m = stats::mean(col);
    const double s = stats::stddev(col);
    if (!std::isfinite(m) || !std::isfinite(s)) throw Error(ErrorCode::DegenerateData, "non-finite feature " + feature_name(f));
    if (s > 1e-12 * std::max(1.0, std::abs(m))) {
      model.features.kept.push_back(f);
      model.features.mean.push_back(m);
      model.features.sd.push_back(s);
    }
  }
  if (model.features.kept.empty()) throw Error(ErrorCode::DegenerateData, "every feature is constant");
  {
    std::vector<double> ytr;
    for (std::size_t i : tr) ytr.push_back(ds.y[i]);
    model.label_mean = stats::mean(ytr);
    const double s = stats::stddev(ytr);
    model.label_sd = s > 1e-9 ? s : 1.0;
  }

  auto prepare = [&](const std::vector<std::size_t>& idx, std::vector<std::vector<double>>& x, std::vector<double>& y) {
    for (std::size_t i : idx) {
      x.push_back(model.features.apply(ds.x[i]));
      y.push_back((ds.y[i] - model.label_mean) / model.label_sd);
    }
  };
  std::vector<std::vector<double>> xtr, xva, xte;
  std::vector<double> ytr, yva, yte;
  prepare(tr, xtr, ytr);
  prepare(va, xva, yva);
  prepare(te, xte, yte);

  std::vector<std::size_t> sizes{model.features.kept.size()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  model.net = Mlp(sizes, std::vector<Activation>(cfg.hidden.size(), cfg.activation));
  model.net.init(cfg.seed);

  TrainResult result;
  std::vector<double> params = model.net.parameters();
  std::vector<double> velocity(params.size(), 0.0);
  std::vector<double> grad(params.size(), 0.0);
  std::vector<double> best = params;
  double best_val = detail::mse(model.net, xva, yva);
  std::size_t since_best = 0;
  std::vector<std::size_t> order(xtr.size());
  std::iota(order.begin(), order.end(), 0);
  rng::SplitMix64 shuffle_rng(rng::derive_seed(cfg.seed, 0x73687566ULL));
  Mlp::Workspace ws;
  std::size_t epoch = 0;
  for (; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        epoch_loss += model.net.accumulate_gradient(xtr[order[k]], ytr[order[k]], grad, ws);
      }
      // Gradient of the batch MSE is 2 / n * sum(err * d f / d theta).
      const double scale = 2.0 / static_cast<double>(end - start);
      for (std::size_t p = 0; p < params.size(); ++p) {
        velocity[p] = cfg.momentum * velocity[p] - cfg.learning_rate * scale * grad[p];
        params[p] += velocity[p];
      }
      model.net.set_parameters(params);
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    const double val = detail::mse(model.net, xva, yva);
    result.validation_loss.push_back(val);
    if (!std::isfinite(val)) break;
    if (val < best_val) {
      best_val = val;
      best = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      ++epoch;
      break;
    }
  }
  model.net.set_parameters(best);

  auto residuals = [&](const std::vector<std::size_t>& idx) {
    std::vector<double> r;
    r.reserve(idx.size());
    for (std::size_t i : idx) r.push_back(model.predict(ds.x[i]) - ds.y[i]);
    return r;
  };
  const auto rte = residuals(te);
  const auto rva = residuals(va);
  model.stats.mu = stats::mean(rte);
  model.stats.sigma_nn = stats::stddev(rte);
  model.stats.validation_sigma = stats::stddev(rva);
  model.stats.validation_mse = best_val;
  model.stats.train_rows = tr.size();
  model.stats.validation_rows = va.size();
  model.stats.test_rows = te.size();
  model.stats.epochs_run = epoch;
  result.model = std::move(model);
  return result;
}

inline nlohmann::json model_to_json(const WatchdogModel& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.net.layers()) {
    layers.push_back({{"in", l.in},
                      {"out", l.out},
                      {"activation", l.linear ? std::string("linear") : std::string(to_string(l.act))},
                      {"weights", l.w},
                      {"biases", l.b},
                      {"prelu_alpha", l.alpha}});
  }
  std::vector<std::string> acts;
  for (auto a : m.net.activations()) acts.emplace_back(to_string(a));
  return {{"schema_version", kSchemaVersion},
          {"layer_sizes", m.net.sizes()},
          {"activations", acts},
          {"layers", std::move(layers)},
          {"normalization", {{"kept_features", m.features.kept}, {"mean", m.features.mean}, {"sd", m.features.sd}}},
          {"label", {{"mean", m.label_mean}, {"sd", m.label_sd}}},
          {"stats",
           {{"mu_ps", m.stats.mu},
            {"sigma_nn_ps", m.stats.sigma_nn},
            {"validation_sigma_ps", m.stats.validation_sigma},
            {"validation_mse", m.stats.validation_mse},
            {"train_rows", m.stats.train_rows},
            {"validation_rows", m.stats.validation_rows},
            {"test_rows", m.stats.test_rows},
            {"epochs_run", m.stats.epochs_run}}}};
}

inline WatchdogModel model_from_json(const nlohmann::json& j) {
  detail::check_schema_version(j, "model");
  try {
    WatchdogModel m;
    std::vector<Activation> acts;
    for (const auto& a : j.at("activations")) acts.push_back(parse_activation(a.get<std::string>()));
    m.net = Mlp(j.at("layer_sizes").get<std::vector<std::size_t>>(), acts);
    auto& layers = m.net.layers();
    const auto& jl = j.at("layers");
    if (jl.size() != layers.size()) throw Error(ErrorCode::DimensionMismatch, "model layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].w = jl[l].at("weights").get<std::vector<double>>();
      layers[l].b = jl[l].at("biases").get<std::vector<double>>();
      layers[l].alpha = jl[l].at("prelu_alpha").get<std::vector<double>>();
      if (layers[l].w.size() != layers[l].in * layers[l].out || layers[l].b.size() != layers[l].out) {
        throw Error(ErrorCode::DimensionMismatch, "model layer " + std::to_string(l) + " has the wrong shape");
      }
    }
    const auto& n = j.at("normalization");
    m.features.kept = n.at("kept_features").get<std::vector<std::size_t>>();
    m.features.mean = n.at("mean").get<std::vector<double>>();
    m.features.sd = n.at("sd").get<std::vector<double>>();
    m.label_mean = j.at("label").at("mean").get<double>();
    m.label_sd = j.at("label").at("sd").get<double>();
    const auto& s = j.at("stats");
    m.stats.mu = s.at("mu_ps").get<double>();
    m.stats.sigma_nn = s.at("sigma_nn_ps").get<double>();
    m.stats.validation_sigma = s.at("validation_sigma_ps").get<double>();
    m.stats.validation_mse = s.at("validation_mse").get<double>();
    m.stats.train_rows = s.at("train_rows").get<std::size_t>();
    m.stats.validation_rows = s.at("validation_rows").get<std::size_t>();
    m.stats.test_rows = s.at("test_rows").get<std::size_t>();
    m.stats.epochs_run = s.at("epochs_run").get<std::size_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("malformed model JSON: ") + e.what());
  }
}

inline void save_model(const WatchdogModel& m, const std::filesystem::path& path) {
  io::write_file(path, model_to_json(m).dump(1) + "\n");
}

inline WatchdogModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what(), path.string());
  }
}

}  // namespace lasca
