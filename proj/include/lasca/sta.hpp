#pragma once

// Golden timing model: nominal STA delays plus a voltage margin, either one
// pessimistic rail for every gate or a per-path launch/capture voltage pair
// with a statistically sized uncertainty.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "lasca/design.hpp"
#include "lasca/error.hpp"
#include "lasca/io.hpp"
#include "lasca/parallel.hpp"
#include "lasca/rng.hpp"
#include "lasca/silicon.hpp"
#include "lasca/stats.hpp"

namespace lasca {

struct GlobalPessimistic {
  double rail_voltage = 0.95 * 1.05;
  double endpoint_uncertainty_ps = 25.0;
};

struct PathSpecific {
  std::size_t mc_samples = 100;
  double sigma_multiplier = 3.0;
};

using MarginMode = std::variant<GlobalPessimistic, PathSpecific>;

enum class GtmMode : std::uint8_t { Global, PathSpecific };

inline std::string_view to_string(GtmMode m) { return m == GtmMode::Global ? "global" : "path_specific"; }

inline GtmMode parse_gtm_mode(std::string_view s) {
  if (s == "global") return GtmMode::Global;
  if (s == "path_specific") return GtmMode::PathSpecific;
  throw Error(ErrorCode::IoError, "unknown GTM mode '" + std::string(s) + "'");
}

struct GtmRecord {
  PathId path_id = 0;
  double sta_delay_ps = 0.0;
  double slack_ps = 0.0;
  double margin_ps = 0.0;
  GtmMode mode = GtmMode::PathSpecific;

  bool operator==(const GtmRecord&) const = default;
};

inline double gtm_slack_value(double period, double sta_delay, double setup, double margin) {
  return period - sta_delay - setup - margin;
}

class GtmEngine {
 public:
  GtmEngine(const Design& design, VoltageNoiseModel voltage)
      : design_(&design), vm_(voltage), drop_(expected_drop_map(design, voltage)) {
    vm_.validate();
  }

  [[nodiscard]] GtmRecord evaluate(const TimingPath& path, const MarginMode& mode) const {
    GtmRecord r;
    r.path_id = path.id;
    r.sta_delay_ps = design_->subpath_delay_ps(path.lp) + design_->subpath_delay_ps(path.dp) - design_->subpath_delay_ps(path.cp);
    if (const auto* g = std::get_if<GlobalPessimistic>(&mode)) {
      if (!(g->rail_voltage > 0.0 && g->rail_voltage < vm_.v_nom)) {
        throw Error(ErrorCode::InvalidArgument, "rail voltage must lie in (0, v_nom)", "sta.rail_voltage");
      }
      if (g->endpoint_uncertainty_ps < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "endpoint uncertainty must be nonnegative", "sta.endpoint_uncertainty_ps");
      }
      const double f = vm_.delay_factor(g->rail_voltage) - 1.0;
      const double push = (intrinsic_sum(path.lp) + intrinsic_sum(path.dp) - intrinsic_sum(path.cp)) * f;
      r.margin_ps = push + g->endpoint_uncertainty_ps;
      r.mode = GtmMode::Global;
    } else {
      const auto& ps = std::get<PathSpecific>(mode);
      r.margin_ps = path_specific_margin(path, ps);
      r.mode = GtmMode::PathSpecific;
    }
    r.slack_ps = gtm_slack_value(design_->clock_period_ps, r.sta_delay_ps, path.endpoint_setup_ps, r.margin_ps);
    return r;
  }

  // Mean expected supplies over the launch side (LP + DP) and the capture side.
  [[nodiscard]] std::pair<double, double> voltage_pair(const TimingPath& path) const {
    double launch = 0.0;
    std::size_t nl = 0;
    for (const SubPath* sp : {&path.lp, &path.dp}) {
      for (GateId g : sp->gates) {
        launch += drop_[g];
        ++nl;
      }
    }
    double capture = 0.0;
    for (GateId g : path.cp.gates) capture += drop_[g];
    const double vl = vm_.v_nom * (1.0 - (nl ? launch / static_cast<double>(nl) : 0.0));
    const double vc = vm_.v_nom * (1.0 - (path.cp.gates.empty() ? 0.0 : capture / static_cast<double>(path.cp.gates.size())));
    return {vl, vc};
  }

 private:
  [[nodiscard]] double intrinsic_sum(const SubPath& sp) const {
    double s = 0.0;
    for (GateId g : sp.gates) s += design_->gates[g].intrinsic_ps;
    return s;
  }

  [[nodiscard]] double path_specific_margin(const TimingPath& path, const PathSpecific& ps) const {
    const auto [vl, vc] = voltage_pair(path);
    const double pair_push = (intrinsic_sum(path.lp) + intrinsic_sum(path.dp)) * (vm_.delay_factor(vl) - 1.0) -
                             intrinsic_sum(path.cp) * (vm_.delay_factor(vc) - 1.0);
    if (ps.mc_samples < 2 || vm_.sd_drop == 0.0) return pair_push;
    std::vector<double> pushes(ps.mc_samples);
    for (std::size_t s = 0; s < ps.mc_samples; ++s) {
      auto part = [&](const SubPath& sp) {
        double acc = 0.0;
        for (GateId g : sp.gates) {
          rng::SplitMix64 eng(rng::derive_seed(design_->seed, 0x67746dULL, path.id, s, g));
          const double v = vm_.v_nom * (1.0 - rng::truncated_normal(eng, drop_[g], vm_.sd_drop, 0.0, vm_.max_drop));
          acc += design_->gates[g].intrinsic_ps * (vm_.delay_factor(v) - 1.0);
        }
        return acc;
      };
      pushes[s] = part(path.lp) + part(path.dp) - part(path.cp);
    }
    return pair_push + ps.sigma_multiplier * stats::stddev(pushes);
  }

  const Design* design_;
  VoltageNoiseModel vm_;
  std::vector<double> drop_;
};

inline GtmRecord gtm_slack(const Design& design, const TimingPath& path, const MarginMode& mode,
                           const VoltageNoiseModel& voltage = {}) {
  return GtmEngine(design, voltage).evaluate(path, mode);
}

inline std::vector<GtmRecord> gtm_table(const Design& design, const MarginMode& mode, const VoltageNoiseModel& voltage,
                                        unsigned threads = 0) {
  const GtmEngine engine(design, voltage);
  std::vector<GtmRecord> out(design.paths.size());
  parallel_for(
      design.paths.size(), [&](std::size_t i) { out[i] = engine.evaluate(design.paths[i], mode); }, threads);
  return out;
}

// Mean of (measured - gtm) over the sample.
inline double static_shift(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "static shift needs at least one (gtm, measured) pair");
  double acc = 0.0;
  for (const auto& [gtm, measured] : pairs) acc += measured - gtm;
  return acc / static_cast<double>(pairs.size());
}

inline constexpr std::string_view kGtmHeader = "path_id,sta_delay_ps,slack_ps,margin_ps,mode";

inline std::string gtm_to_csv(std::span<const GtmRecord> rows) {
  std::string out(kGtmHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.path_id) + ',' + io::format_double(r.sta_delay_ps) + ',' + io::format_double(r.slack_ps) + ',' +
           io::format_double(r.margin_ps) + ',' + std::string(to_string(r.mode)) + '\n';
  }
  return out;
}

inline std::vector<GtmRecord> gtm_from_csv(std::string_view text) {
  const auto table = io::parse_csv(text, kGtmHeader);
  std::vector<GtmRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.size() != 5) throw Error(ErrorCode::IoError, "GTM row needs 5 fields");
    out.push_back(GtmRecord{static_cast<PathId>(io::parse_u64(row[0])), io::parse_double(row[1]), io::parse_double(row[2]),
                            io::parse_double(row[3]), parse_gtm_mode(row[4])});
  }
  return out;
}

}  // namespace lasca
