#pragma once

// Trojan classification on measured silicon. The score of a path is its slack
// shortfall: how much less slack the dies showed than the adjusted slack
// predicted. Trojans only add delay, so infested paths score high.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lasca/design_io.hpp"
#include "lasca/error.hpp"
#include "lasca/features.hpp"
#include "lasca/io.hpp"
#include "lasca/trainer.hpp"

namespace lasca {

enum class DetectionMode : std::uint8_t { Ssta, Sgtm, Ngtm };

inline constexpr DetectionMode kAllModes[] = {DetectionMode::Ssta, DetectionMode::Sgtm, DetectionMode::Ngtm};
inline constexpr double kFixedThresholdPs = 45.0;

inline std::string_view to_string(DetectionMode m) {
  switch (m) {
    case DetectionMode::Ssta: return "ssta";
    case DetectionMode::Sgtm: return "sgtm";
    case DetectionMode::Ngtm: return "ngtm";
  }
  return "?";
}

inline DetectionMode parse_detection_mode(std::string_view s) {
  for (auto m : kAllModes) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown detection mode '" + std::string(s) + "'", "mode");
}

inline double adjusted_slack(double gtm_slack_ps, double shift_ps) { return gtm_slack_ps + shift_ps; }

inline double threshold_4sigma(double sigma_nn) {
  if (sigma_nn < 0.0) throw Error(ErrorCode::NegativeThreshold, "sigma must be nonnegative");
  return 4.0 * sigma_nn;
}

// What the detector knows about a path: its GTM slack, its design features,
// and the bin's mean measured slack.
struct DetectionInput {
  PathId path_id = 0;
  double gtm_slack_ps = 0.0;
  double mean_measured_slack_ps = 0.0;
  FeatureVector features{};
};

struct PathVerdict {
  PathId path_id = 0;
  double score_ps = 0.0;
  double threshold_ps = 0.0;
  bool flagged = false;
  std::string bin;
};

struct DetectionReport {
  DetectionMode mode = DetectionMode::Ngtm;
  std::string bin;
  double threshold_ps = 0.0;
  double shift_ps = 0.0;  // static shift for SSTA/SGTM, 0 for NGTM
  std::vector<PathVerdict> verdicts;
};

// SSTA and SGTM adjust by one static shift; NGTM by the per-path watchdog
// prediction. Flags score > threshold.
inline DetectionReport detect(std::string bin, std::span<const DetectionInput> paths, DetectionMode mode,
                              const WatchdogModel* model, double threshold_ps, double static_shift_ps = 0.0) {
  if (threshold_ps < 0.0) throw Error(ErrorCode::NegativeThreshold, "detection threshold must be nonnegative");
  if (mode == DetectionMode::Ngtm && model == nullptr) throw Error(ErrorCode::MissingModel, "NGTM needs a watchdog model");
  DetectionReport r;
  r.mode = mode;
  r.bin = std::move(bin);
  r.threshold_ps = threshold_ps;
  r.shift_ps = mode == DetectionMode::Ngtm ? 0.0 : static_shift_ps;
  r.verdicts.reserve(paths.size());
  for (const auto& p : paths) {
    const double shift = mode == DetectionMode::Ngtm ? model->predict(p.features) : static_shift_ps;
    const double score = adjusted_slack(p.gtm_slack_ps, shift) - p.mean_measured_slack_ps;
    r.verdicts.push_back(PathVerdict{p.path_id, score, threshold_ps, score > threshold_ps, r.bin});
  }
  return r;
}

struct RocPoint {
  double threshold_ps = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // nondecreasing FPR
  double youden_threshold_ps = 0.0;
  double youden_j = 0.0;
};

// Thresholds: below every score, every midpoint between consecutive distinct
// scores, and the maximum score. t* is the lowest threshold attaining max J.
inline RocResult roc_and_youden(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw Error(ErrorCode::DimensionMismatch, "one label per score");
  std::size_t npos = 0;
  for (bool b : positive) npos += b ? 1 : 0;
  const std::size_t nneg = scores.size() - npos;
  if (npos == 0 || nneg == 0) throw Error(ErrorCode::SingleClass, "ROC needs both Trojan and clean paths");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Walk thresholds from high to low; each distinct score value, once passed,
  // becomes flagged.
  RocResult r;
  std::size_t tp = 0;
  std::size_t fp = 0;
  const double top = scores[order.front()];
  r.points.push_back({top, 0.0, 0.0});
  std::size_t i = 0;
  while (i < order.size()) {
    const double v = scores[order[i]];
    while (i < order.size() && scores[order[i]] == v) {
      (positive[order[i]] ? tp : fp) += 1;
      ++i;
    }
    const double below = i < order.size() ? 0.5 * (v + scores[order[i]]) : v - 1.0;
    r.points.push_back({below, static_cast<double>(tp) / static_cast<double>(npos),
                        static_cast<double>(fp) / static_cast<double>(nneg)});
  }
  r.youden_j = -1.0;
  for (const auto& p : r.points) {
    const double j = p.tpr - p.fpr;
    // Points run from high to low thresholds, so >= keeps the lowest.
    if (j >= r.youden_j) {
      r.youden_j = j;
      r.youden_threshold_ps = p.threshold_ps;
    }
  }
  return r;
}

struct Metrics {
  std::size_t trojan_paths = 0;
  std::size_t clean_paths = 0;
  std::size_t flagged_trojan = 0;
  std::size_t flagged_clean = 0;
  std::optional<double> tpo;  // percent; empty when there are no Trojan paths
  std::optional<double> fpo;
};

// `truth[path_id]` is the Trojan label ("TP-Medium", ...) or empty for clean
// paths. With `only_label` set, Trojan paths of other labels are ignored.
inline Metrics metrics(const DetectionReport& report, std::span<const std::string> truth,
                       std::string_view only_label = {}) {
  Metrics m;
  for (const auto& v : report.verdicts) {
    if (v.path_id >= truth.size()) throw Error(ErrorCode::InvalidArgument, "ground truth does not cover every path");
    const auto& t = truth[v.path_id];
    if (t.empty()) {
      ++m.clean_paths;
      m.flagged_clean += v.flagged ? 1 : 0;
    } else if (only_label.empty() || t == only_label) {
      ++m.trojan_paths;
      m.flagged_trojan += v.flagged ? 1 : 0;
    }
  }
  if (m.trojan_paths) m.tpo = 100.0 * static_cast<double>(m.flagged_trojan) / static_cast<double>(m.trojan_paths);
  if (m.clean_paths) m.fpo = 100.0 * static_cast<double>(m.flagged_clean) / static_cast<double>(m.clean_paths);
  return m;
}

// Scores and labels for ROC analysis, optionally restricted to one Trojan label.
inline std::pair<std::vector<double>, std::vector<bool>> roc_inputs(const DetectionReport& report,
                                                                    std::span<const std::string> truth,
                                                                    std::string_view only_label = {}) {
  std::vector<double> s;
  std::vector<bool> y;
  for (const auto& v : report.verdicts) {
    const auto& t = truth[v.path_id];
    if (!t.empty() && !only_label.empty() && t != only_label) continue;
    s.push_back(v.score_ps);
    y.push_back(!t.empty());
  }
  return {std::move(s), std::move(y)};
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json("N/A");
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
  return {{"trojan_paths", m.trojan_paths},       {"clean_paths", m.clean_paths},     {"flagged_trojan", m.flagged_trojan},
          {"flagged_clean", m.flagged_clean},     {"tpo_pct", optional_json(m.tpo)}, {"fpo_pct", optional_json(m.fpo)}};
}

inline nlohmann::json roc_to_json(const RocResult& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points) pts.push_back({{"threshold_ps", p.threshold_ps}, {"tpr", p.tpr}, {"fpr", p.fpr}});
  return {{"youden_threshold_ps", r.youden_threshold_ps}, {"youden_j", r.youden_j}, {"points", std::move(pts)}};
}

inline constexpr std::string_view kRocHeader = "threshold_ps,tpr,fpr";

inline std::string roc_to_csv(const RocResult& r) {
  std::string out(kRocHeader);
  out += '\n';
  for (const auto& p : r.points) {
    out += io::format_double(p.threshold_ps) + ',' + io::format_double(p.tpr) + ',' + io::format_double(p.fpr) + '\n';
  }
  return out;
}

// Report JSON: verdicts plus, when ground truth is supplied, overall and
// per-label metrics and the ROC summary.
inline nlohmann::json report_to_json(const DetectionReport& r, std::span<const std::string> truth = {}) {
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : r.verdicts) {
    nlohmann::json jv = {{"path_id", v.path_id},
                         {"score_ps", v.score_ps},
                         {"threshold_ps", v.threshold_ps},
                         {"flagged", v.flagged},
                         {"bin", v.bin}};
    if (!truth.empty()) jv["truth"] = truth[v.path_id].empty() ? "clean" : truth[v.path_id];
    verdicts.push_back(std::move(jv));
  }
  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"mode", to_string(r.mode)},
                      {"bin", r.bin},
                      {"threshold_ps", r.threshold_ps},
                      {"shift_ps", r.shift_ps},
                      {"verdicts", std::move(verdicts)}};
  if (!truth.empty()) {
    j["metrics"] = metrics_to_json(metrics(r, truth));
    std::map<std::string, Metrics> by_label;
    for (const auto& v : r.verdicts) {
      const auto& t = truth[v.path_id];
      if (!t.empty() && !by_label.count(t)) by_label[t] = metrics(r, truth, t);
    }
    nlohmann::json jb = nlohmann::json::object();
    for (const auto& [label, m] : by_label) jb[label] = metrics_to_json(m);
    j["metrics_by_label"] = std::move(jb);
    const auto [s, y] = roc_inputs(r, truth);
    const bool both = std::find(y.begin(), y.end(), true) != y.end() && std::find(y.begin(), y.end(), false) != y.end();
    j["roc"] = both ? roc_to_json(roc_and_youden(s, y)) : nlohmann::json("N/A");
  }
  return j;
}

inline DetectionReport report_from_json(const nlohmann::json& j, std::vector<std::string>* truth = nullptr) {
  detail::check_schema_version(j, "detection report");
  DetectionReport r;
  r.mode = parse_detection_mode(j.at("mode").get<std::string>());
  r.bin = j.at("bin").get<std::string>();
  r.threshold_ps = j.at("threshold_ps").get<double>();
  r.shift_ps = j.at("shift_ps").get<double>();
  for (const auto& v : j.at("verdicts")) {
    r.verdicts.push_back(PathVerdict{v.at("path_id").get<PathId>(), v.at("score_ps").get<double>(),
                                     v.at("threshold_ps").get<double>(), v.at("flagged").get<bool>(),
                                     v.at("bin").get<std::string>()});
    if (truth && v.contains("truth")) {
      const PathId id = r.verdicts.back().path_id;
      if (truth->size() <= id) truth->resize(id + 1);
      const auto t = v.at("truth").get<std::string>();
      (*truth)[id] = t == "clean" ? "" : t;
    }
  }
  return r;
}

}  // namespace lasca
