#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <unordered_map>
#include <vector>

#include "lasca/design.hpp"
#include "lasca/error.hpp"

namespace lasca {

// Every driver-to-sink connection in canonical (driver, sink) order.
inline std::vector<P2PWire> enumerate_p2p_wires(const Design& design) {
  std::vector<P2PWire> out = design.wires;
  std::sort(out.begin(), out.end(), [](const P2PWire& a, const P2PWire& b) {
    return std::tie(a.driver, a.sink) < std::tie(b.driver, b.sink);
  });
  return out;
}

// Walks from a register's CK pin back to the clock primary input and returns the
// buffer chain in root-to-leaf order.
inline SubPath clock_subpath(const Design& design, GateId reg, SubPathKind kind) {
  SubPath sp{kind, {}, {}};
  WireId w = design.input_wire(reg, kDffClockPin);
  while (w != kInvalidId) {
    const auto& wire = design.wires[w];
    if (wire.driver.kind != PinKind::GateOutput) break;
    sp.gates.push_back(wire.driver.index);
    sp.wires.push_back(w);
    w = design.input_wire(wire.driver.index, 0);
    if (sp.gates.size() > design.gates.size()) throw Error(ErrorCode::InvalidArgument, "clock network has a cycle");
  }
  std::reverse(sp.gates.begin(), sp.gates.end());
  std::reverse(sp.wires.begin(), sp.wires.end());
  return sp;
}

// Topological order of the data network (registers act as sources). Throws if
// the combinational logic is cyclic.
inline std::vector<GateId> data_topological_order(const Design& design) {
  const std::size_t n = design.gates.size();
  std::vector<std::uint32_t> pending(n, 0);
  for (const auto& g : design.gates) {
    if (g.is_register() || g.clock) continue;
    for (unsigned p = 0; p < input_count(g.kind); ++p) {
      const WireId w = design.input_wire(g.id, p);
      if (w != kInvalidId && design.wires[w].driver.kind == PinKind::GateOutput) ++pending[g.id];
    }
  }
  std::vector<GateId> order;
  order.reserve(n);
  for (const auto& g : design.gates) {
    if (!g.clock && pending[g.id] == 0) order.push_back(g.id);
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (WireId w : design.fanout_wires(order[head])) {
      const auto& sink = design.wires[w].sink;
      if (sink.kind != PinKind::GateInput) continue;
      const auto& sg = design.gates[sink.index];
      if (sg.is_register() || sg.clock) continue;
      if (--pending[sink.index] == 0) order.push_back(sink.index);
    }
  }
  std::size_t data_gates = 0;
  for (const auto& g : design.gates) data_gates += g.clock ? 0 : 1;
  if (order.size() != data_gates) throw Error(ErrorCode::InvalidArgument, "combinational logic is not a DAG");
  return order;
}

// Forward arrival (launch latency included) and backward "suffix" bounds
// for the data network. suffix[g] is the largest delay from g's input to any
// endpoint D pin, minus that endpoint's capture latency.
struct PathBounds {
  std::vector<SubPath> clock_chains;  // per register, root to leaf
  std::vector<double> latency;        // per register
  std::vector<double> arrival;
  std::vector<double> suffix;
  std::vector<WireId> best_in;   // input wire that realizes arrival
  std::vector<WireId> best_out;  // output wire that realizes suffix

  explicit PathBounds(const Design& design) {
    const std::size_t n = design.gates.size();
    clock_chains.resize(n);
    latency.assign(n, 0.0);
    arrival.assign(n, 0.0);
    suffix.assign(n, -std::numeric_limits<double>::infinity());
    best_in.assign(n, kInvalidId);
    best_out.assign(n, kInvalidId);
    for (GateId r : design.registers) {
      clock_chains[r] = clock_subpath(design, r, SubPathKind::LaunchClock);
      latency[r] = design.subpath_delay_ps(clock_chains[r]);
    }
    const auto order = data_topological_order(design);
    for (GateId g : order) {
      const auto& gate = design.gates[g];
      if (gate.is_register()) {
        arrival[g] = latency[g] + design.nominal_gate_delay_ps(g);
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (unsigned p = 0; p < input_count(gate.kind); ++p) {
        const WireId w = design.input_wire(g, p);
        const auto& wire = design.wires[w];
        if (wire.driver.kind == PinKind::GateOutput && arrival[wire.driver.index] > best) {
          best = arrival[wire.driver.index];
          best_in[g] = w;
        }
      }
      arrival[g] = (best_in[g] == kInvalidId ? 0.0 : best) + design.nominal_gate_delay_ps(g);
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const GateId g = *it;
      double best = -std::numeric_limits<double>::infinity();
      for (WireId w : design.fanout_wires(g)) {
        const auto& sink = design.wires[w].sink;
        if (sink.kind != PinKind::GateInput) continue;
        const auto& sg = design.gates[sink.index];
        double v = -std::numeric_limits<double>::infinity();
        if (sg.is_register()) {
          if (sink.pin == kDffDataPin) v = -latency[sink.index];
        } else if (!sg.clock) {
          v = suffix[sink.index];
        }
        if (v > best) {
          best = v;
          best_out[g] = w;
        }
      }
      suffix[g] = best + design.nominal_gate_delay_ps(g);
    }
  }
};

namespace detail {

inline TimingPath make_path(const Design& design, const PathBounds& b, std::vector<GateId> gates,
                            std::vector<WireId> wires) {
  TimingPath path;
  const auto& last = design.wires[wires.back()];
  path.endpoint_register = last.sink.index;
  path.endpoint_setup_ps = library::setup_ps(design.gates[path.endpoint_register].drive);
  path.dp.gates = std::move(gates);
  path.dp.wires = std::move(wires);
  path.lp = b.clock_chains[path.dp.gates.front()];
  path.lp.kind = SubPathKind::LaunchClock;
  path.cp = b.clock_chains[path.endpoint_register];
  path.cp.kind = SubPathKind::CaptureClock;
  return path;
}

}  // namespace detail

// The `per_endpoint` longest register-to-register paths into every endpoint,
// ranked by nominal delay (launch latency + data delay - capture latency).
// Best-first search backwards from the endpoint using exact forward arrival
// times as the bound, so paths come out in nonincreasing delay order.
inline std::vector<TimingPath> enumerate_longest_paths(const Design& design, const PathBounds& bounds,
                                                       std::size_t per_endpoint) {
  const auto& arrival = bounds.arrival;
  struct Node {
    GateId gate;
    WireId wire_out;
    std::uint32_t parent;
    double suffix;
  };
  struct Entry {
    double key;
    std::uint32_t node;
    bool operator<(const Entry& o) const { return key < o.key || (key == o.key && node > o.node); }
  };

  std::vector<TimingPath> out;
  std::vector<Node> nodes;
  for (GateId endpoint : design.registers) {
    const WireId last = design.input_wire(endpoint, kDffDataPin);
    if (last == kInvalidId || design.wires[last].driver.kind != PinKind::GateOutput) continue;
    nodes.clear();
    std::priority_queue<Entry> heap;
    const GateId start = design.wires[last].driver.index;
    nodes.push_back({start, last, kInvalidId, 0.0});
    heap.push({arrival[start], 0});
    std::size_t found = 0;
    while (!heap.empty() && found < per_endpoint) {
      const auto [key, idx] = heap.top();
      heap.pop();
      const Node cur = nodes[idx];
      const auto& gate = design.gates[cur.gate];
      if (gate.is_register()) {
        std::vector<GateId> gates;
        std::vector<WireId> wires;
        for (std::uint32_t i = idx; i != kInvalidId; i = nodes[i].parent) {
          gates.push_back(nodes[i].gate);
          wires.push_back(nodes[i].wire_out);
        }
        out.push_back(detail::make_path(design, bounds, std::move(gates), std::move(wires)));
        ++found;
        continue;
      }
      const double suffix = cur.suffix + design.nominal_gate_delay_ps(cur.gate);
      for (unsigned p = 0; p < input_count(gate.kind); ++p) {
        const WireId w = design.input_wire(cur.gate, p);
        const auto& wire = design.wires[w];
        if (wire.driver.kind != PinKind::GateOutput) continue;
        nodes.push_back({wire.driver.index, w, idx, suffix});
        heap.push({arrival[wire.driver.index] + suffix, static_cast<std::uint32_t>(nodes.size() - 1)});
      }
    }
  }
  return out;
}

inline std::vector<TimingPath> enumerate_longest_paths(const Design& design, std::size_t per_endpoint) {
  return enumerate_longest_paths(design, PathBounds(design), per_endpoint);
}

// The single longest register-to-register path whose data portion uses
// wire `w`, or nullopt when no such path exists.
inline std::optional<TimingPath> longest_path_through(const Design& design, const PathBounds& b, WireId w) {
  const auto& wire = design.wires[w];
  if (wire.driver.kind != PinKind::GateOutput || wire.sink.kind != PinKind::GateInput) return std::nullopt;
  const auto& drv = design.gates[wire.driver.index];
  const auto& snk = design.gates[wire.sink.index];
  if (drv.clock || snk.clock) return std::nullopt;
  if (snk.is_register() && wire.sink.pin != kDffDataPin) return std::nullopt;
  if (!snk.is_register() && !std::isfinite(b.suffix[wire.sink.index])) return std::nullopt;

  std::vector<GateId> gates;
  std::vector<WireId> wires;
  // Prefix back to the launching register.
  GateId g = wire.driver.index;
  while (true) {
    gates.push_back(g);
    if (design.gates[g].is_register()) break;
    const WireId in = b.best_in[g];
    if (in == kInvalidId) return std::nullopt;
    g = design.wires[in].driver.index;
  }
  std::reverse(gates.begin(), gates.end());
  for (std::size_t i = 0; i + 1 < gates.size(); ++i) wires.push_back(b.best_in[gates[i + 1]]);
  wires.push_back(w);
  // Suffix forward to an endpoint D pin.
  PinRef at = wire.sink;
  while (!design.gates[at.index].is_register()) {
    const GateId h = at.index;
    const WireId out = b.best_out[h];
    if (out == kInvalidId) return std::nullopt;
    gates.push_back(h);
    wires.push_back(out);
    at = design.wires[out].sink;
  }
  return detail::make_path(design, b, std::move(gates), std::move(wires));
}

// Per-endpoint k-longest paths plus the longest path through every data wire,
// deduplicated and ordered by (endpoint, data wires).
inline std::vector<TimingPath> enumerate_covering_paths(const Design& design, std::size_t per_endpoint) {
  const PathBounds bounds(design);
  auto paths = enumerate_longest_paths(design, bounds, per_endpoint);
  for (const auto& w : design.wires) {
    if (auto p = longest_path_through(design, bounds, w.id)) paths.push_back(std::move(*p));
  }
  std::sort(paths.begin(), paths.end(), [](const TimingPath& a, const TimingPath& b) {
    return std::tie(a.endpoint_register, a.dp.wires) < std::tie(b.endpoint_register, b.dp.wires);
  });
  paths.erase(std::unique(paths.begin(), paths.end(),
                          [](const TimingPath& a, const TimingPath& b) {
                            return a.endpoint_register == b.endpoint_register && a.dp.wires == b.dp.wires;
                          }),
              paths.end());
  return paths;
}

// Inverted index from data wires to the design paths whose data portion uses them.
class WirePathIndex {
 public:
  explicit WirePathIndex(const Design& design) : by_wire_(design.wires.size()) {
    for (const auto& p : design.paths) {
      for (WireId w : p.dp.wires) {
        auto& v = by_wire_[w];
        if (v.empty() || v.back() != p.id) v.push_back(p.id);
      }
    }
    // Candidates ranked by data-portion delay, longest first, ties by id.
    for (auto& v : by_wire_) {
      std::sort(v.begin(), v.end(), [&](PathId a, PathId b) {
        const double da = design.paths[a].dp_delay_ps;
        const double db = design.paths[b].dp_delay_ps;
        return da > db || (da == db && a < b);
      });
    }
  }

  [[nodiscard]] std::span<const PathId> paths_through(WireId w) const { return by_wire_.at(w); }

  [[nodiscard]] std::vector<PathId> select(WireId w, std::size_t n) const {
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "N must be at least 1");
    const auto& v = by_wire_.at(w);
    if (v.empty()) {
      throw Error(ErrorCode::NoPathThroughWire, "wire " + std::to_string(w) + " lies on no register-to-register path",
                  std::to_string(w));
    }
    return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
  }

 private:
  std::vector<std::vector<PathId>> by_wire_;
};

inline std::vector<TimingPath> select_paths_for_wire(const Design& design, WireId wire, std::size_t n) {
  const WirePathIndex index(design);
  std::vector<TimingPath> out;
  for (PathId id : index.select(wire, n)) out.push_back(design.paths[id]);
  return out;
}

}  // namespace lasca
