#pragma once

// Clock-frequency sweeping: the tester shortens the period from T in steps of
// S until the path fails, so a die reports the smallest passing period.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lasca/design.hpp"
#include "lasca/design_io.hpp"
#include "lasca/error.hpp"
#include "lasca/io.hpp"
#include "lasca/parallel.hpp"
#include "lasca/silicon.hpp"

namespace lasca {

struct CfstConfig {
  double step_ps = 15.0;
  double period_ps = 0.0;
  std::uint32_t trials = 1;

  void validate() const {
    if (!(step_ps > 0.0 && step_ps <= period_ps)) {
      throw Error(ErrorCode::InvalidArgument, "CFST step must satisfy 0 < S <= T", "cfst.step_ps");
    }
    if (trials == 0) throw Error(ErrorCode::InvalidArgument, "CFST needs at least one trial", "cfst.trials");
  }
};

struct Measurement {
  std::uint32_t die_id = 0;
  PathId path_id = 0;
  double measured_delay_ps = 0.0;  // T - k*S
  double measured_slack_ps = 0.0;  // k*S
};

// Largest k >= 0 with T - k*S >= delay. Delays above T cannot be swept.
inline Measurement start_to_fail_measure(double true_delay_ps, const CfstConfig& cfg, std::uint32_t die_id = 0,
                                         PathId path_id = 0) {
  if (!(true_delay_ps > 0.0)) throw Error(ErrorCode::InvalidArgument, "delay must be positive");
  const double T = cfg.period_ps;
  const double S = cfg.step_ps;
  if (true_delay_ps > T) {
    throw Error(ErrorCode::PathFailsAtNominal, "path fails at the nominal period", std::to_string(path_id));
  }
  auto k = static_cast<std::int64_t>(std::floor((T - true_delay_ps) / S));
  // The division can land one step off near grid points.
  while (k > 0 && T - static_cast<double>(k) * S < true_delay_ps) --k;
  while (T - static_cast<double>(k + 1) * S >= true_delay_ps) ++k;
  const double slack = static_cast<double>(k) * S;
  return Measurement{die_id, path_id, T - slack, slack};
}

inline double mean_slack(std::span<const double> slacks) {
  if (slacks.empty()) throw Error(ErrorCode::EmptyBin, "no measurements to average");
  return std::accumulate(slacks.begin(), slacks.end(), 0.0) / static_cast<double>(slacks.size());
}

// Measured slack for every (die, path) pair; rows are dies in lot order,
// columns are `paths` in the given order. Paths that fail at T on any die are
// listed in `failing` and their cells hold NaN.
struct MeasurementTable {
  std::vector<std::uint32_t> dies;
  std::vector<PathId> paths;
  std::vector<double> slack;  // dies.size() x paths.size(), row-major
  std::vector<PathId> failing;

  [[nodiscard]] double at(std::size_t die_row, std::size_t path_col) const { return slack[die_row * paths.size() + path_col]; }
  [[nodiscard]] double& at(std::size_t die_row, std::size_t path_col) { return slack[die_row * paths.size() + path_col]; }

  [[nodiscard]] std::size_t column_of(PathId p) const {
    const auto it = std::lower_bound(paths.begin(), paths.end(), p);
    if (it == paths.end() || *it != p) throw Error(ErrorCode::InvalidArgument, "path " + std::to_string(p) + " was not measured");
    return static_cast<std::size_t>(it - paths.begin());
  }

  // Mean measured slack of one path over a set of die rows.
  [[nodiscard]] double mean_over(std::span<const std::size_t> die_rows, std::size_t col) const {
    if (die_rows.empty()) throw Error(ErrorCode::EmptyBin, "no dies in bin");
    double acc = 0.0;
    for (std::size_t r : die_rows) acc += at(r, col);
    return acc / static_cast<double>(die_rows.size());
  }
};

inline void mark_failing(MeasurementTable& t) {
  t.failing.clear();
  for (std::size_t c = 0; c < t.paths.size(); ++c) {
    for (std::size_t r = 0; r < t.dies.size(); ++r) {
      if (std::isnan(t.at(r, c))) {
        t.failing.push_back(t.paths[c]);
        break;
      }
    }
  }
}

// Paths are measured in ascending id order. With several trials a die reports the
// mean of its per-trial slacks.
inline MeasurementTable measure_lot(const FabLot& lot, std::vector<PathId> paths, const CfstConfig& cfg,
                                    unsigned threads = 0) {
  cfg.validate();
  std::sort(paths.begin(), paths.end());
  paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
  MeasurementTable t;
  t.paths = paths;
  for (const auto& d : lot.dies) t.dies.push_back(d.die_id);
  t.slack.assign(t.dies.size() * paths.size(), 0.0);
  parallel_for(
      lot.dies.size(),
      [&](std::size_t r) {
        const Die& die = lot.dies[r];
        const auto pv = die_pv_map(lot, die);
        for (std::size_t c = 0; c < paths.size(); ++c) {
          const auto& path = lot.design.paths[paths[c]];
          double acc = 0.0;
          for (std::uint32_t trial = 0; trial < cfg.trials; ++trial) {
            const double d = true_path_delay_fast(path, lot, die, pv, trial) + path.endpoint_setup_ps;
            if (d > cfg.period_ps) {
              acc = std::numeric_limits<double>::quiet_NaN();
              break;
            }
            acc += start_to_fail_measure(d, cfg, die.die_id, path.id).measured_slack_ps;
          }
          t.at(r, c) = acc / static_cast<double>(cfg.trials);
        }
      },
      threads);
  mark_failing(t);
  return t;
}

inline constexpr std::string_view kMeasurementHeader = "die_id,path_id,measured_delay_ps,measured_slack_ps";

inline std::string measurements_to_csv(const MeasurementTable& t, double period_ps) {
  std::string out(kMeasurementHeader);
  out += '\n';
  for (std::size_t r = 0; r < t.dies.size(); ++r) {
    const std::string die = std::to_string(t.dies[r]) + ',';
    for (std::size_t c = 0; c < t.paths.size(); ++c) {
      const double s = t.at(r, c);
      if (std::isnan(s)) continue;
      out += die;
      out += std::to_string(t.paths[c]);
      out += ',';
      out += io::format_double(period_ps - s);
      out += ',';
      out += io::format_double(s);
      out += '\n';
    }
  }
  return out;
}

inline MeasurementTable measurements_from_csv(std::string_view text) {
  const auto table = io::parse_csv(text, kMeasurementHeader);
  MeasurementTable t;
  std::vector<std::tuple<std::uint32_t, PathId, double>> cells;
  for (const auto& row : table.rows) {
    if (row.size() != 4) throw Error(ErrorCode::IoError, "measurement row needs 4 fields");
    cells.emplace_back(static_cast<std::uint32_t>(io::parse_u64(row[0])), static_cast<PathId>(io::parse_u64(row[1])),
                       io::parse_double(row[3]));
  }
  for (const auto& [d, p, s] : cells) {
    t.dies.push_back(d);
    t.paths.push_back(p);
  }
  std::sort(t.dies.begin(), t.dies.end());
  t.dies.erase(std::unique(t.dies.begin(), t.dies.end()), t.dies.end());
  std::sort(t.paths.begin(), t.paths.end());
  t.paths.erase(std::unique(t.paths.begin(), t.paths.end()), t.paths.end());
  t.slack.assign(t.dies.size() * t.paths.size(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& [d, p, s] : cells) {
    const auto r = static_cast<std::size_t>(std::lower_bound(t.dies.begin(), t.dies.end(), d) - t.dies.begin());
    t.at(r, t.column_of(p)) = s;
  }
  mark_failing(t);
  return t;
}

struct SpeedBin {
  std::string label;
  std::vector<std::uint32_t> dies;      // die ids, ascending
  std::vector<double> probe_stat;       // parallel to dies
};

inline std::string bin_label(std::size_t i, std::size_t count) {
  if (count == 1) return "Typical";
  if (count == 2) return i == 0 ? "Fast" : "Slow";
  if (count == 3) {
    static constexpr const char* names[] = {"Fast", "Typical", "Slow"};
    return names[i];
  }
  return "Bin" + std::to_string(i);
}

// Quantile groups by probe statistic, fastest (smallest) first.
inline std::vector<SpeedBin> speed_bin_from_stats(std::span<const std::uint32_t> die_ids, std::span<const double> stat,
                                                  std::size_t count) {
  if (count == 0) throw Error(ErrorCode::InvalidArgument, "need at least one speed bin");
  if (die_ids.size() != stat.size()) throw Error(ErrorCode::DimensionMismatch, "one statistic per die");
  if (die_ids.size() < count) throw Error(ErrorCode::EmptyBin, "fewer dies than bins");
  std::vector<std::size_t> order(die_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return stat[a] < stat[b] || (stat[a] == stat[b] && die_ids[a] < die_ids[b]);
  });
  std::vector<SpeedBin> bins(count);
  const std::size_t n = order.size();
  for (std::size_t b = 0; b < count; ++b) {
    bins[b].label = bin_label(b, count);
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(b * n / count),
                                     order.begin() + static_cast<std::ptrdiff_t>((b + 1) * n / count));
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t c) { return die_ids[a] < die_ids[c]; });
    for (std::size_t m : members) {
      bins[b].dies.push_back(die_ids[m]);
      bins[b].probe_stat.push_back(stat[m]);
    }
  }
  return bins;
}

// Per-die statistic: mean measured delay over the probe paths.
inline std::vector<SpeedBin> speed_bin(const MeasurementTable& t, std::span<const PathId> probe_paths, double period_ps,
                                       std::size_t count) {
  if (probe_paths.empty()) throw Error(ErrorCode::EmptyInput, "speed binning needs probe paths");
  std::vector<std::size_t> cols;
  for (PathId p : probe_paths) cols.push_back(t.column_of(p));
  std::vector<double> stat(t.dies.size(), 0.0);
  for (std::size_t r = 0; r < t.dies.size(); ++r) {
    double acc = 0.0;
    for (std::size_t c : cols) acc += period_ps - t.at(r, c);
    stat[r] = acc / static_cast<double>(cols.size());
  }
  return speed_bin_from_stats(t.dies, stat, count);
}

inline std::vector<SpeedBin> speed_bin(const FabLot& lot, std::span<const PathId> probe_paths, const CfstConfig& cfg,
                                       std::size_t count = 3, unsigned threads = 0) {
  if (probe_paths.empty()) throw Error(ErrorCode::EmptyInput, "speed binning needs probe paths");
  const auto t = measure_lot(lot, {probe_paths.begin(), probe_paths.end()}, cfg, threads);
  if (!t.failing.empty()) {
    throw Error(ErrorCode::PathFailsAtNominal, "a probe path fails at the nominal period", std::to_string(t.failing.front()));
  }
  return speed_bin(t, probe_paths, cfg.period_ps, count);
}

inline nlohmann::json bins_to_json(const std::vector<SpeedBin>& bins, std::span<const PathId> probe_paths) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : bins) arr.push_back({{"label", b.label}, {"dies", b.dies}, {"probe_stat_ps", b.probe_stat}});
  return {{"schema_version", kSchemaVersion},
          {"count", bins.size()},
          {"probe_paths", std::vector<PathId>(probe_paths.begin(), probe_paths.end())},
          {"bins", std::move(arr)}};
}

inline std::vector<SpeedBin> bins_from_json(const nlohmann::json& j) {
  detail::check_schema_version(j, "bin manifest");
  std::vector<SpeedBin> out;
  for (const auto& b : j.at("bins")) {
    out.push_back(SpeedBin{b.at("label").get<std::string>(), b.at("dies").get<std::vector<std::uint32_t>>(),
                           b.at("probe_stat_ps").get<std::vector<double>>()});
  }
  return out;
}

// Row indexes into a measurement table for a bin's dies.
inline std::vector<std::size_t> die_rows(const MeasurementTable& t, const SpeedBin& bin) {
  std::vector<std::size_t> rows;
  for (auto id : bin.dies) {
    const auto it = std::lower_bound(t.dies.begin(), t.dies.end(), id);
    if (it == t.dies.end() || *it != id) throw Error(ErrorCode::InvalidArgument, "die " + std::to_string(id) + " not measured");
    rows.push_back(static_cast<std::size_t>(it - t.dies.begin()));
  }
  return rows;
}

}  // namespace lasca
