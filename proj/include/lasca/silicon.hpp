#pragma once

// Virtual silicon. A die's true path delay composes the foundry's drift away
// from the released cell models (skew), a persistent per-die offset, random
// per-gate process variation, per-gate supply droop, and any implanted
// Trojans. Nothing here is visible to the design-time STA.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "lasca/cell_library.hpp"
#include "lasca/design.hpp"
#include "lasca/error.hpp"
#include "lasca/rng.hpp"
#include "lasca/trojan.hpp"

namespace lasca {

struct ProcessSkew {
  double x_pct = 0.0;  // transistor speedup
  double y_pct = 0.0;  // metal capacitance derate

  void validate() const {
    if (!(std::abs(x_pct) <= 20.0)) throw Error(ErrorCode::InvalidArgument, "|x_pct| must be <= 20", "skew.x_pct");
    if (!(std::abs(y_pct) <= 20.0)) throw Error(ErrorCode::InvalidArgument, "|y_pct| must be <= 20", "skew.y_pct");
  }
  bool operator==(const ProcessSkew&) const = default;
};

// The drift does not move every cell and layer alike. A gate's intrinsic
// delay scales by exp(-X/100 * cell[kind] * drive[drive]) and a wire
// segment's cap by exp(-Y/100 * layer[layer]); to first order that is an
// X * cell * drive percent speedup. Positive entries keep delay monotone in
// X and Y, and the exponential keeps it positive across the whole skew range.
struct DriftSensitivity {
  std::array<double, kCellKindCount> cell{1.2, 0.9, 1.2, 0.7, 1.1, 1.0};
  std::array<double, kDriveCount> drive{5.0, 3.2, 1.8, 0.9, 0.4, 0.2, 0.1};
  std::array<double, kLayerCount> layer{0.1, 0.4, 1.0, 1.8, 2.6, 3.4, 4.5};

  static DriftSensitivity uniform() {
    DriftSensitivity s;
    s.cell.fill(1.0);
    s.drive.fill(1.0);
    s.layer.fill(1.0);
    return s;
  }

  void validate() const {
    auto positive = [](const auto& arr) { return std::all_of(arr.begin(), arr.end(), [](double v) { return v > 0.0; }); };
    if (!positive(cell) || !positive(drive) || !positive(layer)) {
      throw Error(ErrorCode::InvalidArgument, "drift sensitivities must be positive", "silicon.drift");
    }
  }
  bool operator==(const DriftSensitivity&) const = default;
};

struct RandomPvModel {
  double sigma_d = 0.03;  // lognormal sigma of the per-gate delay multiplier

  void validate() const {
    if (!(sigma_d >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_d must be nonnegative", "silicon.pv.sigma_d");
  }
  bool operator==(const RandomPvModel&) const = default;
};

struct VoltageNoiseModel {
  double v_nom = 1.05;
  double mean_drop = 0.03;  // fraction of v_nom
  double sd_drop = 0.015;
  double max_drop = 0.10;
  // The mean drop varies over the die as mean_drop * (1 + amplitude * f(x, y))
  // with f a smooth field in [-1, 1].
  double spatial_amplitude = 0.5;
  double alpha = 1.3;

  // No droop at all: every gate sits at v_nom.
  static VoltageNoiseModel quiet() {
    VoltageNoiseModel m;
    m.mean_drop = 0.0;
    m.sd_drop = 0.0;
    m.spatial_amplitude = 0.0;
    return m;
  }

  void validate() const {
    if (!(v_nom > 0.0)) throw Error(ErrorCode::InvalidArgument, "v_nom must be positive", "silicon.voltage.v_nom");
    if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive", "silicon.voltage.alpha");
    if (!(sd_drop >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sd_drop must be nonnegative", "silicon.voltage.sd_drop");
    if (!(max_drop >= 0.0 && max_drop < 0.3)) {
      throw Error(ErrorCode::InvalidArgument, "max_drop must lie in [0, 0.3)", "silicon.voltage.max_drop");
    }
    if (!(mean_drop >= 0.0 && mean_drop * (1.0 + std::abs(spatial_amplitude)) <= max_drop)) {
      throw Error(ErrorCode::InvalidArgument, "mean drop must stay within [0, max_drop]", "silicon.voltage.mean_drop");
    }
  }

  [[nodiscard]] double delay_factor(double v) const { return std::pow(v_nom / v, alpha); }

  bool operator==(const VoltageNoiseModel&) const = default;
};

// Smooth deterministic IR-drop map over the unit square, in [-1, 1].
inline double ir_field(std::uint64_t seed, double x, double y) {
  double acc = 0.0;
  for (std::uint64_t k = 0; k < 3; ++k) {
    rng::SplitMix64 eng(rng::derive_seed(seed, 0x6972ULL, k));
    std::uniform_int_distribution<int> freq(1, 2);
    const double fx = freq(eng);
    const double fy = freq(eng);
    const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(eng);
    acc += std::cos(2.0 * std::numbers::pi * (fx * x + fy * y) + phase);
  }
  return acc / 3.0;
}

// Expected supply drop fraction at each gate, as seen by both the silicon
// and a design-time voltage analysis.
inline std::vector<double> expected_drop_map(const Design& design, const VoltageNoiseModel& vm) {
  std::vector<double> out(design.gates.size());
  for (const auto& g : design.gates) {
    out[g.id] = vm.mean_drop * (1.0 + vm.spatial_amplitude * ir_field(design.seed, g.x, g.y));
  }
  return out;
}

struct SiliconConfig {
  ProcessSkew skew;
  DriftSensitivity drift;
  RandomPvModel pv;
  VoltageNoiseModel voltage;
  std::vector<double> persistent_derivatives{1.01, 1.00, 0.99};
  double tp_pin_cap_ff = 1.5;

  void validate() const {
    skew.validate();
    drift.validate();
    pv.validate();
    voltage.validate();
    if (persistent_derivatives.empty()) {
      throw Error(ErrorCode::InvalidArgument, "need at least one persistent derivative", "silicon.persistent_derivatives");
    }
    for (double m : persistent_derivatives) {
      if (!(m > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "persistent multipliers must be positive", "silicon.persistent_derivatives");
      }
    }
    if (!(tp_pin_cap_ff >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tp_pin_cap_ff must be nonnegative");
  }
};

struct Die {
  std::uint32_t die_id = 0;
  double persistent_mult = 1.0;
  std::uint64_t rng_stream_seed = 0;

  bool operator==(const Die&) const = default;
};

// Adds a Trojan to the fabricated netlist. The designer's view of the netlist
// (gates, wires, paths, features) is untouched.
inline Design insert_trojan(Design design, const TrojanSpec& spec) {
  if (!(spec.delay_delta_ps > 0.0)) throw Error(ErrorCode::InvalidArgument, "Trojan delay delta must be positive");
  if (!design.find_net(spec.target_net)) {
    throw Error(ErrorCode::UnknownNet, "no net named '" + spec.target_net + "'", spec.target_net);
  }
  design.implants.push_back(spec);
  return design;
}

// Per-gate silicon constants for one design under one configuration.
class SiliconModel {
 public:
  SiliconModel() = default;

  SiliconModel(const Design& design, const SiliconConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const std::size_t n = design.gates.size();
    intrinsic_.assign(n, 0.0);
    tp_intrinsic_.assign(n, 0.0);
    load_delay_.assign(n, 0.0);
    const double x = cfg.skew.x_pct / 100.0;
    const double y = cfg.skew.y_pct / 100.0;
    const auto& s = cfg.drift;
    std::vector<double> extra_cap(n, 0.0);
    for (const auto& t : design.implants) {
      const auto pin = design.find_net(t.target_net);
      if (!pin) throw Error(ErrorCode::UnknownNet, "no net named '" + t.target_net + "'", t.target_net);
      if (pin->kind != PinKind::GateOutput) continue;  // a clock-root implant shifts launch and capture alike
      const GateId g = pin->index;
      if (t.kind == TrojanKind::TP) {
        // A payload gate in series: its own delay, drifting like a NAND2, plus
        // its input pin on the victim's driver.
        const double k = s.cell[index(CellKind::NAND2)] * s.drive[index(Drive::X1)];
        tp_intrinsic_[g] += t.delay_delta_ps * std::exp(-x * k);
        extra_cap[g] += cfg.tp_pin_cap_ff;
      } else if (design.gates[g].load_coeff > 0.0) {
        extra_cap[g] += t.delay_delta_ps / design.gates[g].load_coeff;
      }
    }
    for (const auto& g : design.gates) {
      intrinsic_[g.id] = g.intrinsic_ps * std::exp(-x * s.cell[index(g.kind)] * s.drive[index(g.drive)]);
      double cap = 0.0;
      for (WireId w : design.fanout_wires(g.id)) {
        const auto& wire = design.wires[w];
        cap += design.sink_pin_cap_ff(wire.sink);
        for (const auto& seg : wire.segments) cap += seg.cap_ff() * std::exp(-y * s.layer[index(seg.layer)]);
      }
      load_delay_[g.id] = g.load_coeff * cap + g.load_coeff * extra_cap[g.id];
    }
    mean_drop_ = expected_drop_map(design, cfg.voltage);
  }

  [[nodiscard]] const SiliconConfig& config() const { return cfg_; }
  [[nodiscard]] double mean_drop(GateId g) const { return mean_drop_[g]; }

  [[nodiscard]] double gate_delay(GateId g, double persistent, double pv, double v) const {
    return (intrinsic_[g] + tp_intrinsic_[g]) * persistent * pv * cfg_.voltage.delay_factor(v) + load_delay_[g];
  }

  [[nodiscard]] double pv_multiplier(std::uint64_t die_seed, GateId g) const {
    if (cfg_.pv.sigma_d == 0.0) return 1.0;
    return std::exp(cfg_.pv.sigma_d * rng::keyed_normal(rng::derive_seed(die_seed, 0x7076ULL, g)));
  }

  [[nodiscard]] double gate_voltage(std::uint64_t die_seed, std::uint64_t trial, PathId path, GateId g) const {
    const auto& vm = cfg_.voltage;
    const double mean = mean_drop_[g];
    if (vm.sd_drop == 0.0) return vm.v_nom * (1.0 - mean);
    rng::SplitMix64 eng(rng::derive_seed(die_seed, 0x7664ULL, trial, path, g));
    return vm.v_nom * (1.0 - rng::truncated_normal(eng, mean, vm.sd_drop, 0.0, vm.max_drop));
  }

 private:
  SiliconConfig cfg_;
  std::vector<double> intrinsic_;
  std::vector<double> tp_intrinsic_;
  std::vector<double> load_delay_;
  std::vector<double> mean_drop_;
};

struct FabLot {
  Design design;  // carries the implants
  SiliconConfig config;
  std::vector<Die> dies;
  std::uint64_t seed = 0;
  SiliconModel model;

  [[nodiscard]] const std::vector<TrojanSpec>& trojans() const { return design.implants; }
  [[nodiscard]] const ProcessSkew& skew() const { return config.skew; }
};

inline FabLot make_lot(const Design& design, const SiliconConfig& cfg, std::size_t n_dies,
                       const std::vector<TrojanSpec>& trojans, std::uint64_t seed) {
  if (n_dies == 0) throw Error(ErrorCode::EmptyLot, "a lot needs at least one die");
  cfg.validate();
  FabLot lot;
  lot.design = design;
  lot.design.implants.clear();
  for (const auto& t : trojans) lot.design = insert_trojan(std::move(lot.design), t);
  lot.config = cfg;
  lot.seed = seed;
  // Equal shares of each derivative, in a seeded order.
  const std::size_t k = cfg.persistent_derivatives.size();
  std::vector<std::size_t> which(n_dies);
  for (std::size_t i = 0; i < n_dies; ++i) which[i] = i % k;
  std::mt19937_64 shuffle_rng(rng::derive_seed(seed, 0x6c6f74ULL));
  std::shuffle(which.begin(), which.end(), shuffle_rng);
  for (std::size_t i = 0; i < n_dies; ++i) {
    lot.dies.push_back(Die{static_cast<std::uint32_t>(i), cfg.persistent_derivatives[which[i]],
                           rng::derive_seed(seed, 0x646965ULL, i)});
  }
  lot.model = SiliconModel(lot.design, cfg);
  return lot;
}

// Per-gate PV multipliers and supply voltages for one CFST trial of one path
// on one die, laid out parallel to the path's LP, CP and DP gate lists.
struct NoiseSample {
  std::array<std::vector<double>, 3> pv;
  std::array<std::vector<double>, 3> voltage;
};

inline NoiseSample sample_noise(const FabLot& lot, const Die& die, const TimingPath& path, std::uint64_t trial) {
  NoiseSample s;
  const SubPath* parts[] = {&path.lp, &path.cp, &path.dp};
  for (std::size_t k = 0; k < 3; ++k) {
    for (GateId g : parts[k]->gates) {
      s.pv[k].push_back(lot.model.pv_multiplier(die.rng_stream_seed, g));
      s.voltage[k].push_back(lot.model.gate_voltage(die.rng_stream_seed, trial, path.id, g));
    }
  }
  return s;
}

// Launch + data - capture, the same composition the STA uses, in silicon.
inline double true_path_delay(const TimingPath& path, const FabLot& lot, const Die& die, const NoiseSample& noise) {
  const SubPath* parts[] = {&path.lp, &path.cp, &path.dp};
  std::array<double, 3> sum{};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& gates = parts[k]->gates;
    if (noise.pv[k].size() != gates.size() || noise.voltage[k].size() != gates.size()) {
      throw Error(ErrorCode::DimensionMismatch, "noise sample does not match the path");
    }
    for (std::size_t i = 0; i < gates.size(); ++i) {
      sum[k] += lot.model.gate_delay(gates[i], die.persistent_mult, noise.pv[k][i], noise.voltage[k][i]);
    }
  }
  return sum[0] + sum[2] - sum[1];
}

// Same value as sample_noise + true_path_delay without materializing the
// sample; `pv` holds the die's multiplier for every gate in the design.
inline double true_path_delay_fast(const TimingPath& path, const FabLot& lot, const Die& die,
                                   const std::vector<double>& pv, std::uint64_t trial) {
  auto part = [&](const SubPath& sp) {
    double s = 0.0;
    for (GateId g : sp.gates) {
      s += lot.model.gate_delay(g, die.persistent_mult, pv[g], lot.model.gate_voltage(die.rng_stream_seed, trial, path.id, g));
    }
    return s;
  };
  return part(path.lp) + part(path.dp) - part(path.cp);
}

inline std::vector<double> die_pv_map(const FabLot& lot, const Die& die) {
  std::vector<double> pv(lot.design.gates.size());
  for (GateId g = 0; g < pv.size(); ++g) pv[g] = lot.model.pv_multiplier(die.rng_stream_seed, g);
  return pv;
}

// Ground truth for metrics: which Trojan (by index into lot.trojans()) slows
// each design path, or -1 when the path is clean.
inline std::vector<int> trojan_ground_truth(const FabLot& lot) {
  const auto& d = lot.design;
  std::vector<int> victim_of(d.gates.size(), -1);
  for (std::size_t i = 0; i < d.implants.size(); ++i) {
    const auto pin = d.find_net(d.implants[i].target_net);
    if (pin && pin->kind == PinKind::GateOutput && victim_of[pin->index] < 0) victim_of[pin->index] = static_cast<int>(i);
  }
  std::vector<int> out(d.paths.size(), -1);
  for (const auto& p : d.paths) {
    for (GateId g : p.dp.gates) {
      if (victim_of[g] >= 0) {
        out[p.id] = victim_of[g];
        break;
      }
    }
  }
  return out;
}

}  // namespace lasca
