#pragma once

// The 48-entry path descriptor the watchdog consumes:
//   [0] endpoint setup, [1] STA path delay, [2] sum of DP fanout, then for
//   LP, CP and DP in turn: gate count, sub-path delay, cell counts for
//   x0..x32, routed length on M1..M6.

#include <array>
#include <cstddef>
#include <string>

#include "lasca/cell_library.hpp"
#include "lasca/design.hpp"
#include "lasca/error.hpp"

namespace lasca {

inline constexpr std::size_t kFeatureCount = 48;
inline constexpr std::size_t kSubPathFeatureCount = 15;
inline constexpr std::size_t kSubPathFeatureOffset = 3;

using FeatureVector = std::array<double, kFeatureCount>;

inline std::string feature_name(std::size_t i) {
  std::string s = "f";
  if (i < 10) s += '0';
  return s + std::to_string(i);
}

namespace detail {

inline void fill_subpath_features(const Design& design, const SubPath& sp, double* out) {
  out[0] = static_cast<double>(sp.gates.size());
  out[1] = design.subpath_delay_ps(sp);
  for (GateId g : sp.gates) out[2 + index(design.gates[g].drive)] += 1.0;
  for (WireId w : sp.wires) {
    for (const auto& seg : design.wires[w].segments) {
      if (index(seg.layer) < kFeatureLayerCount) out[2 + kDriveCount + index(seg.layer)] += seg.length_um;
    }
  }
}

}  // namespace detail

inline FeatureVector extract_features(const Design& design, const TimingPath& path, double sta_delay_ps) {
  if (!(sta_delay_ps > 0.0)) throw Error(ErrorCode::InvalidArgument, "STA delay must be positive");
  FeatureVector f{};
  f[0] = path.endpoint_setup_ps;
  f[1] = sta_delay_ps;
  double fanout = 0.0;
  for (GateId g : path.dp.gates) fanout += static_cast<double>(design.fanout(g));
  f[2] = fanout;
  const SubPath* parts[] = {&path.lp, &path.cp, &path.dp};
  for (std::size_t k = 0; k < 3; ++k) {
    detail::fill_subpath_features(design, *parts[k], f.data() + kSubPathFeatureOffset + k * kSubPathFeatureCount);
  }
  return f;
}

inline FeatureVector extract_features(const Design& design, const TimingPath& path) {
  return extract_features(design, path, path.sta_delay_ps);
}

}  // namespace lasca
