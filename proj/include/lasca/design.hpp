#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lasca/cell_library.hpp"
#include "lasca/error.hpp"
#include "lasca/io.hpp"
#include "lasca/trojan.hpp"

namespace lasca {

using GateId = std::uint32_t;
using WireId = std::uint32_t;
using PathId = std::uint32_t;
inline constexpr std::uint32_t kInvalidId = 0xffffffffU;

struct Gate {
  GateId id = 0;
  CellKind kind = CellKind::INV;
  Drive drive = Drive::X1;
  double intrinsic_ps = 0.0;
  double load_coeff = 0.0;  // ps per fF
  double pin_cap_ff = 0.0;
  double x = 0.0;  // placement, unit square
  double y = 0.0;
  bool clock = false;  // clock-tree buffer

  [[nodiscard]] bool is_register() const { return kind == CellKind::DFF; }
};

enum class PinKind : std::uint8_t { GateOutput, GateInput, PrimaryInput, PrimaryOutput };

struct PinRef {
  PinKind kind = PinKind::GateOutput;
  std::uint32_t index = 0;
  std::uint8_t pin = 0;

  static PinRef output(GateId g) { return {PinKind::GateOutput, g, 0}; }
  static PinRef input(GateId g, unsigned pin) { return {PinKind::GateInput, g, static_cast<std::uint8_t>(pin)}; }
  static PinRef primary_input(std::uint32_t i) { return {PinKind::PrimaryInput, i, 0}; }
  static PinRef primary_output(std::uint32_t i) { return {PinKind::PrimaryOutput, i, 0}; }

  [[nodiscard]] bool is_gate() const { return kind == PinKind::GateOutput || kind == PinKind::GateInput; }

  auto operator<=>(const PinRef&) const = default;

  [[nodiscard]] std::string str() const {
    switch (kind) {
      case PinKind::GateOutput: return "out:" + std::to_string(index);
      case PinKind::GateInput: return "in:" + std::to_string(index) + ":" + std::to_string(pin);
      case PinKind::PrimaryInput: return "pi:" + std::to_string(index);
      case PinKind::PrimaryOutput: return "po:" + std::to_string(index);
    }
    return "?";
  }

  static PinRef parse(std::string_view s) {
    const auto parts = io::split(s, ':');
    if (parts.size() < 2) throw Error(ErrorCode::IoError, "bad pin reference '" + std::string(s) + "'");
    const auto idx = static_cast<std::uint32_t>(io::parse_u64(parts[1]));
    if (parts[0] == "out" && parts.size() == 2) return output(idx);
    if (parts[0] == "in" && parts.size() == 3) return input(idx, static_cast<unsigned>(io::parse_u64(parts[2])));
    if (parts[0] == "pi" && parts.size() == 2) return primary_input(idx);
    if (parts[0] == "po" && parts.size() == 2) return primary_output(idx);
    throw Error(ErrorCode::IoError, "bad pin reference '" + std::string(s) + "'");
  }
};

struct WireSegment {
  Layer layer = Layer::M1;
  double length_um = 0.0;
  double cap_per_um_ff = 0.0;
  double res_per_um_ohm = 0.0;

  [[nodiscard]] double cap_ff() const { return length_um * cap_per_um_ff; }
};

// One driver-pin to sink-pin connection. A driver with fanout k owns k of these.
struct P2PWire {
  WireId id = 0;
  PinRef driver;
  PinRef sink;
  std::vector<WireSegment> segments;

  [[nodiscard]] double cap_ff() const {
    double c = 0.0;
    for (const auto& s : segments) c += s.cap_ff();
    return c;
  }
};

enum class SubPathKind : std::uint8_t { LaunchClock, CaptureClock, Data };

// wires[i] connects gates[i] to gates[i + 1]; the last wire reaches the
// register pin that terminates the sub-path, so wires.size() == gates.size().
struct SubPath {
  SubPathKind kind = SubPathKind::Data;
  std::vector<GateId> gates;
  std::vector<WireId> wires;
};

struct TimingPath {
  PathId id = 0;
  SubPath lp{SubPathKind::LaunchClock, {}, {}};
  SubPath cp{SubPathKind::CaptureClock, {}, {}};
  SubPath dp{SubPathKind::Data, {}, {}};
  double endpoint_setup_ps = 0.0;
  GateId endpoint_register = kInvalidId;

  // Filled in by Design::finalize(); not persisted.
  double sta_delay_ps = 0.0;
  double dp_delay_ps = 0.0;

  [[nodiscard]] GateId launch_register() const { return dp.gates.empty() ? kInvalidId : dp.gates.front(); }
};

class Design {
 public:
  std::vector<Gate> gates;
  std::vector<P2PWire> wires;  // canonical order: sorted by (driver, sink)
  std::vector<TimingPath> paths;
  std::vector<GateId> registers;
  double clock_period_ps = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t primary_inputs = 1;  // pi:0 is the clock
  std::uint32_t primary_outputs = 0;

  // Fabrication-time modifications. They alter silicon, never the netlist the
  // designer sees, and are not part of the design serialization.
  std::vector<TrojanSpec> implants;

  // Rebuilds connectivity indexes and nominal delays, then validates the
  // structural invariants. Must be called after any edit to gates or wires.
  void finalize() {
    build_index();
    compute_nominal_delays();
    for (auto& p : paths) {
      p.dp_delay_ps = subpath_delay_ps(p.dp);
      p.sta_delay_ps = subpath_delay_ps(p.lp) + p.dp_delay_ps - subpath_delay_ps(p.cp);
    }
  }

  [[nodiscard]] const std::vector<WireId>& fanout_wires(GateId g) const { return fanout_.at(g); }
  [[nodiscard]] std::size_t fanout(GateId g) const { return fanout_.at(g).size(); }
  [[nodiscard]] WireId input_wire(GateId g, unsigned pin) const { return fanin_.at(g).at(pin); }
  [[nodiscard]] const std::vector<WireId>& primary_input_wires(std::uint32_t pi) const { return pi_fanout_.at(pi); }

  [[nodiscard]] double load_cap_ff(GateId g) const { return load_.at(g); }
  [[nodiscard]] double nominal_gate_delay_ps(GateId g) const { return delay_.at(g); }

  [[nodiscard]] double subpath_delay_ps(const SubPath& sp) const {
    double d = 0.0;
    for (GateId g : sp.gates) d += delay_[g];
    return d;
  }

  [[nodiscard]] double sink_pin_cap_ff(const PinRef& sink) const {
    if (sink.kind == PinKind::GateInput) return gates[sink.index].pin_cap_ff;
    return library::kPrimaryOutputCapFf;
  }

  [[nodiscard]] std::string net_name(const PinRef& driver) const {
    if (driver.kind == PinKind::PrimaryInput) return driver.index == 0 ? "clk" : "pi" + std::to_string(driver.index);
    return "n" + std::to_string(driver.index);
  }

  // Resolves a net name to its driver pin when the net exists and has sinks.
  [[nodiscard]] std::optional<PinRef> find_net(std::string_view name) const {
    if (name == "clk") return primary_inputs > 0 && !pi_fanout_.empty() && !pi_fanout_[0].empty()
                                  ? std::optional(PinRef::primary_input(0))
                                  : std::nullopt;
    if (name.size() < 2 || name[0] != 'n') return std::nullopt;
    std::uint64_t idx = 0;
    const auto body = name.substr(1);
    auto res = std::from_chars(body.data(), body.data() + body.size(), idx);
    if (res.ec != std::errc{} || res.ptr != body.data() + body.size()) return std::nullopt;
    if (idx >= gates.size() || fanout_[idx].empty()) return std::nullopt;
    return PinRef::output(static_cast<GateId>(idx));
  }

  // Rough structural check; throws on the first violated invariant.
  void validate() const {
    if (registers.size() < 2) throw Error(ErrorCode::ConfigTooSmall, "design needs at least 2 registers");
    if (!(clock_period_ps > 0.0)) throw Error(ErrorCode::InvalidArgument, "clock period must be positive");
    for (const auto& g : gates) {
      if (!(g.intrinsic_ps > 0.0)) throw Error(ErrorCode::InvalidArgument, "gate intrinsic delay must be positive");
      if (g.load_coeff < 0.0) throw Error(ErrorCode::InvalidArgument, "gate load coefficient must be nonnegative");
    }
    for (const auto& w : wires) {
      if (w.segments.empty()) throw Error(ErrorCode::InvalidArgument, "wire " + std::to_string(w.id) + " has no segments");
      for (const auto& s : w.segments) {
        if (s.length_um < 0.0) throw Error(ErrorCode::InvalidArgument, "negative wire length");
      }
      if (w.driver.is_gate() && w.sink.is_gate() && w.driver.index == w.sink.index) {
        throw Error(ErrorCode::InvalidArgument, "wire " + std::to_string(w.id) + " loops on one cell");
      }
    }
    for (const auto& p : paths) {
      if (!(p.endpoint_setup_ps > 0.0)) throw Error(ErrorCode::InvalidArgument, "endpoint setup must be positive");
      if (p.dp.gates.empty() || !gates[p.dp.gates.front()].is_register()) {
        throw Error(ErrorCode::InvalidArgument, "data path must start at a register");
      }
      const auto& last = wires.at(p.dp.wires.back());
      if (last.sink != PinRef::input(p.endpoint_register, kDffDataPin)) {
        throw Error(ErrorCode::InvalidArgument, "data path must end at its endpoint's D pin");
      }
      for (const SubPath* sp : {&p.lp, &p.cp, &p.dp}) {
        if (sp->gates.size() != sp->wires.size()) throw Error(ErrorCode::InvalidArgument, "sub-path gate/wire mismatch");
        for (std::size_t i = 0; i < sp->gates.size(); ++i) {
          const auto& w = wires.at(sp->wires[i]);
          if (w.driver != PinRef::output(sp->gates[i])) {
            throw Error(ErrorCode::InvalidArgument, "sub-path wire does not leave its gate");
          }
          if (i + 1 < sp->gates.size() && (w.sink.kind != PinKind::GateInput || w.sink.index != sp->gates[i + 1])) {
            throw Error(ErrorCode::InvalidArgument, "sub-path wire does not reach the next gate");
          }
        }
      }
    }
  }

 private:
  void build_index() {
    fanout_.assign(gates.size(), {});
    fanin_.assign(gates.size(), {});
    pi_fanout_.assign(primary_inputs, {});
    for (const auto& g : gates) fanin_[g.id].assign(input_count(g.kind), kInvalidId);
    for (const auto& w : wires) {
      if (w.driver.kind == PinKind::GateOutput) {
        fanout_.at(w.driver.index).push_back(w.id);
      } else if (w.driver.kind == PinKind::PrimaryInput) {
        pi_fanout_.at(w.driver.index).push_back(w.id);
      } else {
        throw Error(ErrorCode::InvalidArgument, "wire driver must be a gate output or primary input");
      }
      if (w.sink.kind == PinKind::GateInput) {
        auto& slot = fanin_.at(w.sink.index).at(w.sink.pin);
        if (slot != kInvalidId) throw Error(ErrorCode::InvalidArgument, "input pin driven twice: " + w.sink.str());
        slot = w.id;
      } else if (w.sink.kind != PinKind::PrimaryOutput) {
        throw Error(ErrorCode::InvalidArgument, "wire sink must be a gate input or primary output");
      }
    }
  }

  void compute_nominal_delays() {
    load_.assign(gates.size(), 0.0);
    delay_.assign(gates.size(), 0.0);
    for (const auto& g : gates) {
      double c = 0.0;
      for (WireId w : fanout_[g.id]) c += sink_pin_cap_ff(wires[w].sink) + wires[w].cap_ff();
      load_[g.id] = c;
      delay_[g.id] = g.intrinsic_ps + g.load_coeff * c;
    }
  }

  std::vector<std::vector<WireId>> fanout_;
  std::vector<std::vector<WireId>> fanin_;
  std::vector<std::vector<WireId>> pi_fanout_;
  std::vector<double> load_;
  std::vector<double> delay_;
};

}  // namespace lasca
