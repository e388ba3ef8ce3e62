#pragma once

// Chooses victim nets so that each (kind, size) Trojan group slows a target
// number of tested paths, with no path slowed by two Trojans.

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lasca/design.hpp"
#include "lasca/error.hpp"
#include "lasca/rng.hpp"
#include "lasca/trojan.hpp"

namespace lasca {

// Target counts of affected tested paths, indexed [kind][size].
struct TrojanPlanConfig {
  std::array<std::array<std::size_t, 3>, 2> affected_paths{};
  std::array<double, 3> tp_delta_ps{kDefaultTpDeltaPs[0], kDefaultTpDeltaPs[1], kDefaultTpDeltaPs[2]};
  std::array<double, 3> tt_delta_ps{kDefaultTtDeltaPs[0], kDefaultTtDeltaPs[1], kDefaultTtDeltaPs[2]};

  [[nodiscard]] std::size_t total() const {
    std::size_t n = 0;
    for (const auto& k : affected_paths) {
      for (auto c : k) n += c;
    }
    return n;
  }
};

struct PlannedTrojan {
  TrojanSpec spec;
  std::vector<PathId> affected_tested;
};

// Candidate victims are combinational gate outputs. Groups are filled largest
// delta first; within a group nets are visited in seeded order and taken when
// they fit the remaining target and touch no path already claimed.
inline std::vector<PlannedTrojan> plan_trojans(const Design& design, std::span<const PathId> tested_paths,
                                               const TrojanPlanConfig& cfg, std::uint64_t seed) {
  std::vector<char> is_tested(design.paths.size(), 0);
  for (PathId p : tested_paths) is_tested[p] = 1;
  std::vector<std::vector<PathId>> through(design.gates.size());
  for (const auto& p : design.paths) {
    for (GateId g : p.dp.gates) through[g].push_back(p.id);
  }
  std::vector<GateId> candidates;
  for (const auto& g : design.gates) {
    if (g.kind == CellKind::DFF || g.clock || through[g.id].empty() || design.fanout(g.id) == 0) continue;
    candidates.push_back(g.id);
  }
  std::vector<char> claimed(design.paths.size(), 0);
  std::vector<char> used_gate(design.gates.size(), 0);
  std::vector<PlannedTrojan> out;

  struct Group {
    TrojanKind kind;
    SizeClass size;
    double delta;
    std::size_t target;
  };
  std::vector<Group> groups;
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t s = 0; s < 3; ++s) {
      const auto kind = k == 0 ? TrojanKind::TP : TrojanKind::TT;
      const double delta = k == 0 ? cfg.tp_delta_ps[s] : cfg.tt_delta_ps[s];
      groups.push_back({kind, static_cast<SizeClass>(s), delta, cfg.affected_paths[k][s]});
    }
  }
  std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.delta > b.delta; });

  for (const auto& grp : groups) {
    if (grp.target == 0) continue;
    std::vector<GateId> order = candidates;
    std::mt19937_64 eng(rng::derive_seed(seed, 0x706c616eULL, static_cast<unsigned>(grp.kind), static_cast<unsigned>(grp.size)));
    std::shuffle(order.begin(), order.end(), eng);
    std::size_t remaining = grp.target;
    for (GateId g : order) {
      if (remaining == 0) break;
      if (used_gate[g]) continue;
      std::vector<PathId> hit;
      bool clash = false;
      for (PathId p : through[g]) {
        if (claimed[p]) {
          clash = true;
          break;
        }
        if (is_tested[p]) hit.push_back(p);
      }
      if (clash || hit.empty() || hit.size() > remaining) continue;
      for (PathId p : through[g]) claimed[p] = 1;
      used_gate[g] = 1;
      remaining -= hit.size();
      out.push_back({TrojanSpec{grp.kind, design.net_name(PinRef::output(g)), grp.size, grp.delta}, std::move(hit)});
    }
    if (remaining > 0) {
      throw Error(ErrorCode::InsufficientPaths,
                  "cannot place " + std::to_string(grp.target) + " " + std::string(to_string(grp.kind)) + "-" +
                      std::string(to_string(grp.size)) + " paths on disjoint nets",
                  "trojans");
    }
  }
  return out;
}

}  // namespace lasca
