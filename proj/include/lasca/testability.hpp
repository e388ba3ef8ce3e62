#pragma once

// Test planning over P2P wires: pick N paths per wire, decide which can be
// swept on the tester, which are too short for it (left to power-based
// methods), and which ATPG cannot sensitize.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "lasca/design.hpp"
#include "lasca/error.hpp"
#include "lasca/paths.hpp"
#include "lasca/rng.hpp"

namespace lasca {

enum class Testability : std::uint8_t { Testable, PowerCandidate, Discarded };

inline std::string_view to_string(Testability t) {
  switch (t) {
    case Testability::Testable: return "Testable";
    case Testability::PowerCandidate: return "PowerCandidate";
    case Testability::Discarded: return "Discarded";
  }
  return "?";
}

inline bool atpg_succeeds(double atpg_fail_prob, std::uniform_random_bit_generator auto& rng) {
  return !std::bernoulli_distribution(atpg_fail_prob)(rng);
}

template <std::uniform_random_bit_generator Engine>
Testability classify_testability(const TimingPath& path, double tester_min_delay_ps, double atpg_fail_prob, Engine& rng) {
  if (tester_min_delay_ps < 0.0) throw Error(ErrorCode::InvalidArgument, "tester_min_delay must be nonnegative");
  if (!(atpg_fail_prob >= 0.0 && atpg_fail_prob <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "atpg_fail_prob must lie in [0, 1]");
  }
  if (path.sta_delay_ps < tester_min_delay_ps) return Testability::PowerCandidate;
  return atpg_succeeds(atpg_fail_prob, rng) ? Testability::Testable : Testability::Discarded;
}

struct TestPlanConfig {
  std::size_t paths_per_wire = 3;
  double tester_min_delay_ps = 200.0;
  double atpg_fail_prob = 0.05;
};

enum class WireStatus : std::uint8_t { Tested, PowerOnly, Discarded, NoPath };

struct WirePlan {
  WireId wire = 0;
  WireStatus status = WireStatus::NoPath;
  std::vector<PathId> tested;
};

struct TestPlan {
  std::vector<WirePlan> wires;          // every data-network wire, by id
  std::vector<PathId> tested_paths;     // union over wires, sorted
  std::vector<PathId> power_candidates; // too short for the tester, sorted
  std::size_t discarded_wires = 0;
  std::size_t unreachable_wires = 0;
};

inline bool is_data_wire(const Design& d, const P2PWire& w) {
  return w.driver.kind == PinKind::GateOutput && !d.gates[w.driver.index].clock;
}

inline TestPlan plan_path_delay_tests(const Design& design, const TestPlanConfig& cfg, std::uint64_t seed) {
  if (cfg.paths_per_wire == 0) throw Error(ErrorCode::InvalidArgument, "paths_per_wire must be at least 1");
  const WirePathIndex index(design);
  TestPlan plan;
  std::vector<char> tested(design.paths.size(), 0);
  std::vector<char> power(design.paths.size(), 0);
  for (const auto& w : design.wires) {
    if (!is_data_wire(design, w)) continue;
    WirePlan wp{w.id, WireStatus::NoPath, {}};
    if (index.paths_through(w.id).empty()) {
      ++plan.unreachable_wires;
      plan.wires.push_back(std::move(wp));
      continue;
    }
    bool any_power = false;
    for (PathId pid : index.select(w.id, cfg.paths_per_wire)) {
      rng::SplitMix64 eng(rng::derive_seed(seed, 0x61747067ULL, w.id, pid));
      switch (classify_testability(design.paths[pid], cfg.tester_min_delay_ps, cfg.atpg_fail_prob, eng)) {
        case Testability::Testable:
          wp.tested.push_back(pid);
          tested[pid] = 1;
          break;
        case Testability::PowerCandidate:
          any_power = true;
          power[pid] = 1;
          break;
        case Testability::Discarded: break;
      }
    }
    if (!wp.tested.empty()) {
      wp.status = WireStatus::Tested;
    } else if (any_power) {
      wp.status = WireStatus::PowerOnly;
    } else {
      wp.status = WireStatus::Discarded;
      ++plan.discarded_wires;
    }
    plan.wires.push_back(std::move(wp));
  }
  for (PathId p = 0; p < design.paths.size(); ++p) {
    if (tested[p]) plan.tested_paths.push_back(p);
    if (power[p]) plan.power_candidates.push_back(p);
  }
  return plan;
}

}  // namespace lasca
