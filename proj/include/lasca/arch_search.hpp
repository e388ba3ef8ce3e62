#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "lasca/error.hpp"
#include "lasca/io.hpp"
#include "lasca/mlp.hpp"
#include "lasca/parallel.hpp"
#include "lasca/trainer.hpp"

namespace lasca {

// Hidden widths between ceil((48 + 1) / 2) = 25 and floor(2 * (48 + 1) / 3) = 32.
inline constexpr std::size_t kMinHiddenWidth = 25;
inline constexpr std::size_t kMaxHiddenWidth = 32;

struct ArchSpace {
  std::vector<std::size_t> layer_counts{1, 2, 3};
  std::vector<std::size_t> widths{25, 28, 32};
  std::vector<Activation> activations{Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Prelu};
};

struct ArchCandidate {
  std::vector<std::size_t> hidden;
  Activation activation = Activation::Relu;

  [[nodiscard]] std::string topology() const {
    std::string s;
    for (std::size_t i = 0; i < hidden.size(); ++i) s += (i ? "-" : "") + std::to_string(hidden[i]);
    return s;
  }
  // Lexicographic key used to break validation-MSE ties.
  [[nodiscard]] auto key() const { return std::make_tuple(hidden, static_cast<int>(activation)); }
};

struct SweepEntry {
  ArchCandidate candidate;
  double validation_mse = 0.0;
  double sigma_nn = 0.0;
  std::size_t epochs_run = 0;
};

struct SweepResult {
  std::vector<SweepEntry> log;  // in enumeration order
  std::size_t best = 0;
  WatchdogModel best_model;
};

inline std::vector<ArchCandidate> enumerate_space(const ArchSpace& space) {
  std::vector<ArchCandidate> out;
  for (std::size_t layers : space.layer_counts) {
    if (layers < 1 || layers > 3) throw Error(ErrorCode::InvalidArgument, "1 to 3 hidden layers", "sweep.layer_counts");
    for (std::size_t w : space.widths) {
      if (w < kMinHiddenWidth || w > kMaxHiddenWidth) {
        throw Error(ErrorCode::InvalidArgument, "hidden widths must lie in [25, 32]", "sweep.widths");
      }
      for (Activation a : space.activations) out.push_back({std::vector<std::size_t>(layers, w), a});
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "architecture space is empty", "sweep");
  return out;
}

// Trains every candidate with the same split and base config; the winner has
// the lowest validation MSE, ties going to the lexicographically smallest
// topology. Candidates may train in parallel; the result never depends on it.
inline SweepResult arch_search(const ArchSpace& space, const Dataset& ds, const TrainConfig& base, unsigned threads = 0,
                               std::span<const PathId> force_train = {}) {
  const auto candidates = enumerate_space(space);
  std::vector<SweepEntry> log(candidates.size());
  std::vector<WatchdogModel> models(candidates.size());
  parallel_for(
      candidates.size(),
      [&](std::size_t i) {
        TrainConfig cfg = base;
        cfg.hidden = candidates[i].hidden;
        cfg.activation = candidates[i].activation;
        auto r = train_watchdog(ds, cfg, force_train);
        log[i] = SweepEntry{candidates[i], r.model.stats.validation_mse, r.model.stats.sigma_nn, r.model.stats.epochs_run};
        models[i] = std::move(r.model);
      },
      threads);
  std::size_t best = 0;
  for (std::size_t i = 1; i < log.size(); ++i) {
    const auto& a = log[i];
    const auto& b = log[best];
    if (a.validation_mse < b.validation_mse ||
        (a.validation_mse == b.validation_mse && a.candidate.key() < b.candidate.key())) {
      best = i;
    }
  }
  return SweepResult{std::move(log), best, std::move(models[best])};
}

inline constexpr std::string_view kSweepHeader = "index,topology,activation,validation_mse,sigma_nn_ps,epochs";

inline std::string sweep_log_to_csv(const SweepResult& r) {
  std::string out(kSweepHeader);
  out += '\n';
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    const auto& e = r.log[i];
    out += std::to_string(i) + ',' + e.candidate.topology() + ',' + std::string(to_string(e.candidate.activation)) + ',' +
           io::format_double(e.validation_mse) + ',' + io::format_double(e.sigma_nn) + ',' + std::to_string(e.epochs_run) +
           '\n';
  }
  return out;
}

}  // namespace lasca
