#pragma once

// Watchdog training data: which paths to learn from and their labels, the
// gap between mean CFST slack and the GTM slack.

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lasca/cfst.hpp"
#include "lasca/design.hpp"
#include "lasca/error.hpp"
#include "lasca/features.hpp"
#include "lasca/io.hpp"
#include "lasca/sta.hpp"

namespace lasca {

struct Dataset {
  std::vector<PathId> ids;
  std::vector<FeatureVector> x;
  std::vector<double> y;  // label_ps

  [[nodiscard]] std::size_t size() const { return ids.size(); }

  void push_back(PathId id, const FeatureVector& f, double label) {
    ids.push_back(id);
    x.push_back(f);
    y.push_back(label);
  }
};

// NP = min(m * R^2, max_rows, |candidates|) paths, taken round-robin over
// endpoints with each endpoint's paths in decreasing STA delay, so every
// endpoint contributes up to m before any contributes more (once NP allows).
inline std::vector<PathId> select_training_paths(const Design& design, std::span<const PathId> candidates,
                                                 std::size_t m_per_endpoint, std::size_t max_rows) {
  if (m_per_endpoint == 0) throw Error(ErrorCode::InvalidArgument, "m must be at least 1", "train.m_per_endpoint");
  if (candidates.empty()) throw Error(ErrorCode::InsufficientPaths, "the design yields no register-to-register paths");
  const double r = static_cast<double>(design.registers.size());
  const double np_target = std::min({static_cast<double>(m_per_endpoint) * r * r, static_cast<double>(max_rows),
                                     static_cast<double>(candidates.size())});
  const auto np = static_cast<std::size_t>(np_target);
  std::map<GateId, std::vector<PathId>> by_endpoint;
  for (PathId p : candidates) by_endpoint[design.paths[p].endpoint_register].push_back(p);
  for (auto& [ep, v] : by_endpoint) {
    std::sort(v.begin(), v.end(), [&](PathId a, PathId b) {
      const double da = design.paths[a].sta_delay_ps;
      const double db = design.paths[b].sta_delay_ps;
      return da > db || (da == db && a < b);
    });
  }
  std::vector<PathId> out;
  for (std::size_t round = 0; out.size() < np; ++round) {
    bool any = false;
    for (const auto& [ep, v] : by_endpoint) {
      if (round < v.size() && out.size() < np) {
        out.push_back(v[round]);
        any = true;
      }
    }
    if (!any) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

// One row per path: design-time features, label = mean measured slack over
// the bin's dies minus the GTM slack. Paths that failed at T are skipped.
inline Dataset build_training_set(const Design& design, std::span<const GtmRecord> gtm, const MeasurementTable& meas,
                                  std::span<const std::size_t> die_rows, std::span<const PathId> paths) {
  Dataset ds;
  std::vector<char> failing(design.paths.size(), 0);
  for (PathId p : meas.failing) failing[p] = 1;
  for (PathId p : paths) {
    if (failing[p]) continue;
    const auto& rec = gtm[p];
    if (rec.path_id != p) throw Error(ErrorCode::InvalidArgument, "GTM table must be indexed by path id");
    const double mu_s = meas.mean_over(die_rows, meas.column_of(p));
    ds.push_back(p, extract_features(design, design.paths[p], rec.sta_delay_ps), mu_s - rec.slack_ps);
  }
  if (ds.size() == 0) throw Error(ErrorCode::InsufficientPaths, "no measurable register-to-register paths");
  return ds;
}

inline std::string dataset_header() {
  std::string h = "path_id";
  for (std::size_t i = 0; i < kFeatureCount; ++i) h += "," + feature_name(i);
  return h + ",label_ps";
}

inline std::string dataset_to_csv(const Dataset& ds) {
  std::string out = dataset_header() + "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += std::to_string(ds.ids[i]);
    for (double v : ds.x[i]) {
      out += ',';
      out += io::format_double(v);
    }
    out += ',';
    out += io::format_double(ds.y[i]);
    out += '\n';
  }
  return out;
}

inline Dataset dataset_from_csv(std::string_view text) {
  const auto header = dataset_header();
  const auto table = io::parse_csv(text, header);
  Dataset ds;
  for (const auto& row : table.rows) {
    if (row.size() != kFeatureCount + 2) throw Error(ErrorCode::DimensionMismatch, "dataset rows need 50 fields");
    FeatureVector f{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) f[i] = io::parse_double(row[i + 1]);
    ds.push_back(static_cast<PathId>(io::parse_u64(row[0])), f, io::parse_double(row.back()));
  }
  return ds;
}

}  // namespace lasca
