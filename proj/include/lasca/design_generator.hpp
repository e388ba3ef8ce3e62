#pragma once

// Random layered-DAG netlists standing in for placed-and-routed benchmarks.
// Registers, a balanced clock tree, levelized combinational logic with
// placement-local fanin, and lognormal per-layer routing for every P2P wire.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lasca/cell_library.hpp"
#include "lasca/design.hpp"
#include "lasca/error.hpp"
#include "lasca/paths.hpp"
#include "lasca/rng.hpp"

namespace lasca {

struct WirelengthDistribution {
  std::array<double, kLayerCount> layer_weight{0.25, 0.25, 0.15, 0.12, 0.10, 0.07, 0.06};
  std::array<double, kLayerCount> clock_layer_weight{0.0, 0.0, 0.10, 0.20, 0.30, 0.20, 0.20};
  std::array<double, kLayerCount> median_um{3.0, 6.0, 10.0, 15.0, 20.0, 25.0, 35.0};
  double sigma_log = 0.6;
  unsigned max_segments = 3;
};

struct DesignGenConfig {
  std::size_t registers = 200;
  std::size_t combinational_gates = 4000;
  std::size_t max_logic_depth = 16;
  WirelengthDistribution wirelength;
  std::size_t clock_fanout = 8;
  std::size_t paths_per_endpoint = 16;
  // Only paths within this distance of the critical path are kept.
  double slack_range_ps = 400.0;
  // 0 derives the period from the critical path plus headroom.
  double clock_period_ps = 0.0;
  double clock_headroom = 0.25;
  std::size_t locality_candidates = 6;
};

namespace detail {

template <typename Rng, std::size_t N>
std::size_t weighted_pick(Rng& rng, const std::array<double, N>& weights) {
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return dist(rng);
}

inline Drive pick_combinational_drive(std::mt19937_64& rng, std::size_t fanout) {
  // Weights over x0..x32.
  static constexpr std::array<double, kDriveCount> kSingle{0.25, 0.45, 0.20, 0.10, 0.0, 0.0, 0.0};
  static constexpr std::array<double, kDriveCount> kFew{0.0, 0.30, 0.40, 0.20, 0.10, 0.0, 0.0};
  static constexpr std::array<double, kDriveCount> kMany{0.0, 0.0, 0.20, 0.40, 0.25, 0.10, 0.05};
  const auto& w = fanout <= 1 ? kSingle : (fanout <= 3 ? kFew : kMany);
  return static_cast<Drive>(weighted_pick(rng, w));
}

inline Gate make_gate(GateId id, CellKind kind, Drive drive, double x, double y, bool clock) {
  return Gate{id, kind, drive, library::intrinsic_ps(kind, drive), library::load_coeff(kind, drive),
              library::pin_cap_ff(kind, drive), x, y, clock};
}

}  // namespace detail

inline Design generate_design(const DesignGenConfig& cfg, std::uint64_t seed) {
  if (cfg.registers < 2) throw Error(ErrorCode::ConfigTooSmall, "registers must be >= 2", "design.registers");
  if (cfg.combinational_gates < 1) {
    throw Error(ErrorCode::ConfigTooSmall, "combinational_gates must be >= 1", "design.combinational_gates");
  }
  if (cfg.max_logic_depth < 1) throw Error(ErrorCode::ConfigTooSmall, "max_logic_depth must be >= 1", "design.max_logic_depth");
  if (cfg.clock_fanout < 2) throw Error(ErrorCode::ConfigTooSmall, "clock_fanout must be >= 2", "design.clock_fanout");

  std::mt19937_64 rng(rng::derive_seed(seed, 0x6e65746c697374ULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t depth = std::min(cfg.max_logic_depth, cfg.combinational_gates);

  Design d;
  d.seed = seed;

  // Registers: ids [0, R).
  static constexpr std::array<double, kDriveCount> kRegDrive{0.0, 0.50, 0.35, 0.15, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < cfg.registers; ++i) {
    const auto drive = static_cast<Drive>(detail::weighted_pick(rng, kRegDrive));
    const double x = unit(rng);
    const double y = unit(rng);
    d.gates.push_back(detail::make_gate(static_cast<GateId>(i), CellKind::DFF, drive, x, y, false));
    d.registers.push_back(static_cast<GateId>(i));
  }

  // Combinational gates: ids [R, R + G), levelized so ids increase with level.
  static constexpr std::array<double, 5> kKindWeight{0.20, 0.30, 0.20, 0.15, 0.15};
  static constexpr std::array<CellKind, 5> kKinds{CellKind::INV, CellKind::NAND2, CellKind::NOR2, CellKind::AOI,
                                                  CellKind::BUF};
  std::vector<std::vector<GateId>> by_level(depth + 1);
  by_level[0] = d.registers;
  std::vector<std::size_t> level_of(cfg.registers + cfg.combinational_gates, 0);
  // The top level feeds registers only, so keep it narrower than the register
  // count; everything below is spread evenly.
  const std::size_t top = depth == 1 ? cfg.combinational_gates
                                     : std::clamp<std::size_t>(cfg.registers / 2, 1, cfg.combinational_gates / depth + 1);
  const std::size_t lower = cfg.combinational_gates - std::min(top, cfg.combinational_gates);
  for (std::size_t i = 0; i < cfg.combinational_gates; ++i) {
    const auto id = static_cast<GateId>(cfg.registers + i);
    const std::size_t level = i < lower ? 1 + (i * (depth - 1)) / lower : depth;
    const CellKind kind = kKinds[detail::weighted_pick(rng, kKindWeight)];
    const double x = unit(rng);
    const double y = unit(rng);
    d.gates.push_back(detail::make_gate(id, kind, Drive::X1, x, y, false));
    by_level[level].push_back(id);
    level_of[id] = level;
  }

  // Connectivity as (driver gate, sink pin) edges; routed into wires afterwards.
  struct Edge {
    PinRef driver;
    PinRef sink;
  };
  std::vector<Edge> edges;
  std::vector<std::size_t> fanout(d.gates.size(), 0);

  auto nearest_of = [&](const std::vector<GateId>& pool, std::size_t lo, std::size_t hi, const Gate& to,
                        const std::vector<GateId>& exclude) {
    // Tournament: the closest of a few random candidates, skipping excluded ones.
    GateId best = kInvalidId;
    double best_dist = 0.0;
    std::uniform_int_distribution<std::size_t> pick(lo, hi - 1);
    for (std::size_t t = 0; t < cfg.locality_candidates * 3 && (best == kInvalidId || t < cfg.locality_candidates); ++t) {
      const GateId c = pool[pick(rng)];
      if (std::find(exclude.begin(), exclude.end(), c) != exclude.end()) continue;
      const double dx = d.gates[c].x - to.x;
      const double dy = d.gates[c].y - to.y;
      const double dist = dx * dx + dy * dy;
      if (best == kInvalidId || dist < best_dist) {
        best = c;
        best_dist = dist;
      }
    }
    if (best == kInvalidId) best = pool[pick(rng)];
    return best;
  };

  // Sources below a level, concatenated level by level.
  std::vector<GateId> below;
  std::vector<std::size_t> below_end(depth + 1, 0);
  for (std::size_t l = 0; l <= depth; ++l) {
    below.insert(below.end(), by_level[l].begin(), by_level[l].end());
    below_end[l] = below.size();
  }

  // Every gate should reach a register: pin 0 sweeps the previous level in a
  // shuffled order and later pins prefer gates nobody has consumed yet.
  auto take_unused = [&](std::size_t from_level, std::size_t to_level, const std::vector<GateId>& exclude) {
    for (std::size_t l = to_level + 1; l-- > from_level;) {
      for (GateId c : by_level[l]) {
        if (fanout[c] == 0 && std::find(exclude.begin(), exclude.end(), c) == exclude.end()) return c;
      }
    }
    return kInvalidId;
  };
  for (std::size_t l = 1; l <= depth; ++l) {
    std::vector<GateId> sweep = by_level[l - 1];
    std::shuffle(sweep.begin(), sweep.end(), rng);
    std::size_t k = 0;
    for (GateId g : by_level[l]) {
      const Gate& gate = d.gates[g];
      std::vector<GateId> chosen;
      for (unsigned p = 0; p < input_count(gate.kind); ++p) {
        GateId src = kInvalidId;
        if (p == 0) {
          // Pin 0 always comes from the previous level, which pins the gate's depth.
          src = k < sweep.size() ? sweep[k] : nearest_of(by_level[l - 1], 0, by_level[l - 1].size(), gate, chosen);
          ++k;
        } else {
          src = take_unused(l >= 3 ? l - 3 : 0, l - 1, chosen);
          if (src == kInvalidId) src = nearest_of(below, 0, below_end[l - 1], gate, chosen);
        }
        chosen.push_back(src);
        edges.push_back({PinRef::output(src), PinRef::input(g, p)});
        ++fanout[src];
      }
    }
  }

  // Register D pins: unused logic first, highest level first, then the upper
  // third of the logic so endpoints land inside the kept slack range.
  const std::size_t min_level = std::max<std::size_t>(1, (2 * depth) / 3);
  std::uniform_int_distribution<std::size_t> level_pick(min_level, depth);
  std::vector<GateId> reg_order = d.registers;
  std::shuffle(reg_order.begin(), reg_order.end(), rng);
  for (GateId r : reg_order) {
    GateId src = take_unused(min_level, depth, {});
    if (src == kInvalidId) {
      std::size_t l = level_pick(rng);
      while (by_level[l].empty()) --l;
      src = nearest_of(by_level[l], 0, by_level[l].size(), d.gates[r], {});
    }
    edges.push_back({PinRef::output(src), PinRef::input(r, kDffDataPin)});
    ++fanout[src];
  }

  // Dangling logic becomes a primary output.
  for (std::size_t i = cfg.registers; i < d.gates.size(); ++i) {
    if (fanout[i] == 0) {
      edges.push_back({PinRef::output(static_cast<GateId>(i)), PinRef::primary_output(d.primary_outputs++)});
      ++fanout[i];
    }
  }

  for (std::size_t i = cfg.registers; i < d.gates.size(); ++i) {
    auto& g = d.gates[i];
    g = detail::make_gate(g.id, g.kind, detail::pick_combinational_drive(rng, fanout[i]), g.x, g.y, false);
  }

  // Clock tree: group by placement, one buffer per group, repeat to a root.
  std::vector<GateId> level_nodes = d.registers;
  bool first_level = true;
  while (true) {
    std::sort(level_nodes.begin(), level_nodes.end(), [&](GateId a, GateId b) {
      return std::tie(d.gates[a].x, d.gates[a].y, a) < std::tie(d.gates[b].x, d.gates[b].y, b);
    });
    std::vector<GateId> parents;
    for (std::size_t start = 0; start < level_nodes.size(); start += cfg.clock_fanout) {
      const std::size_t end = std::min(level_nodes.size(), start + cfg.clock_fanout);
      double cx = 0.0;
      double cy = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        cx += d.gates[level_nodes[k]].x;
        cy += d.gates[level_nodes[k]].y;
      }
      const double cnt = static_cast<double>(end - start);
      const auto id = static_cast<GateId>(d.gates.size());
      d.gates.push_back(detail::make_gate(id, CellKind::BUF, first_level ? Drive::X8 : Drive::X16, cx / cnt, cy / cnt, true));
      for (std::size_t k = start; k < end; ++k) {
        const GateId child = level_nodes[k];
        const unsigned pin = d.gates[child].is_register() ? kDffClockPin : 0;
        edges.push_back({PinRef::output(id), PinRef::input(child, pin)});
      }
      parents.push_back(id);
    }
    first_level = false;
    level_nodes = std::move(parents);
    if (level_nodes.size() == 1) break;
  }
  edges.push_back({PinRef::primary_input(0), PinRef::input(level_nodes.front(), 0)});

  // Route every edge.
  const auto& wl = cfg.wirelength;
  std::uniform_int_distribution<unsigned> seg_count(1, std::max(1u, wl.max_segments));
  std::normal_distribution<double> z(0.0, 1.0);
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return std::tie(a.driver, a.sink) < std::tie(b.driver, b.sink); });
  for (const auto& e : edges) {
    P2PWire w;
    w.id = static_cast<WireId>(d.wires.size());
    w.driver = e.driver;
    w.sink = e.sink;
    const bool clock_net = e.driver.kind == PinKind::PrimaryInput || d.gates[e.driver.index].clock;
    const unsigned n = seg_count(rng);
    for (unsigned s = 0; s < n; ++s) {
      const auto layer = static_cast<Layer>(detail::weighted_pick(rng, clock_net ? wl.clock_layer_weight : wl.layer_weight));
      const double len = wl.median_um[index(layer)] * std::exp(wl.sigma_log * z(rng)) / static_cast<double>(n);
      w.segments.push_back({layer, len, library::kCapPerUm[index(layer)], library::kResPerUm[index(layer)]});
    }
    d.wires.push_back(std::move(w));
  }

  d.finalize();

  auto paths = enumerate_covering_paths(d, cfg.paths_per_endpoint);
  double critical = 0.0;
  for (const auto& p : paths) {
    const double sta = d.subpath_delay_ps(p.lp) + d.subpath_delay_ps(p.dp) - d.subpath_delay_ps(p.cp);
    critical = std::max(critical, sta);
  }
  double worst_required = 0.0;
  for (auto& p : paths) {
    const double sta = d.subpath_delay_ps(p.lp) + d.subpath_delay_ps(p.dp) - d.subpath_delay_ps(p.cp);
    if (sta + cfg.slack_range_ps < critical) continue;
    p.id = static_cast<PathId>(d.paths.size());
    worst_required = std::max(worst_required, sta + p.endpoint_setup_ps);
    d.paths.push_back(std::move(p));
  }
  d.clock_period_ps = cfg.clock_period_ps > 0.0 ? cfg.clock_period_ps : worst_required * (1.0 + cfg.clock_headroom);
  d.finalize();
  d.validate();
  return d;
}

}  // namespace lasca
