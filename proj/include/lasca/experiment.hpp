#pragma once

// End-to-end experiment: a fixed sequence of stages, each reading earlier
// artifacts from the output directory (or the in-memory cache) and writing
// its own. stages.json records output hashes so `resume` can skip stages
// whose outputs are intact.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lasca/arch_search.hpp"
#include "lasca/cfst.hpp"
#include "lasca/config.hpp"
#include "lasca/dataset.hpp"
#include "lasca/design_generator.hpp"
#include "lasca/design_io.hpp"
#include "lasca/detector.hpp"
#include "lasca/error.hpp"
#include "lasca/io.hpp"
#include "lasca/rng.hpp"
#include "lasca/silicon.hpp"
#include "lasca/silicon_io.hpp"
#include "lasca/sta.hpp"
#include "lasca/stats.hpp"
#include "lasca/testability.hpp"
#include "lasca/trainer.hpp"
#include "lasca/trojan_plan.hpp"

namespace lasca {

enum class Stage : std::uint8_t { Gen, Fab, Sta, Cfst, Bin, Trainset, Train, Sweep, Detect, Roc, Report };

inline constexpr Stage kAllStages[] = {Stage::Gen,      Stage::Fab,   Stage::Sta,   Stage::Cfst,   Stage::Bin,   Stage::Trainset,
                                       Stage::Train,    Stage::Sweep, Stage::Detect, Stage::Roc,   Stage::Report};

inline std::string_view to_string(Stage s) {
  static constexpr std::string_view names[] = {"gen",  "fab",   "sta",   "cfst",   "bin",   "trainset",
                                               "train", "sweep", "detect", "roc", "report"};
  return names[static_cast<std::size_t>(s)];
}

inline Stage parse_stage(std::string_view s) {
  for (auto st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown stage '" + std::string(s) + "'");
}

// A failure inside a stage. Keeps the underlying code so callers can map it
// to an exit status.
class StageError : public Error {
 public:
  StageError(Stage stage, ErrorCode cause, const std::string& message, std::string cause_detail)
      : Error(ErrorCode::StageFailure, "stage '" + std::string(to_string(stage)) + "' failed: " + message,
              std::string(to_string(stage))),
        cause_(cause),
        cause_detail_(std::move(cause_detail)) {}

  [[nodiscard]] ErrorCode cause() const noexcept { return cause_; }
  [[nodiscard]] const std::string& cause_detail() const noexcept { return cause_detail_; }

 private:
  ErrorCode cause_;
  std::string cause_detail_;
};

struct TestPlanArtifact {
  std::vector<PathId> tested_paths;
  std::vector<PathId> power_candidates;
  std::size_t data_wires = 0;
  std::size_t tested_wires = 0;
  std::size_t power_only_wires = 0;
  std::size_t discarded_wires = 0;
  std::size_t unreachable_wires = 0;
};

struct TrainsetManifest {
  std::vector<PathId> training_paths;       // clean selection shared by every bin
  std::vector<PathId> contamination_paths;  // extra Trojan rows, primary bin only
};

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

class Experiment {
 public:
  Experiment(ExperimentConfig cfg, std::filesystem::path out, unsigned threads = 0)
      : cfg_(std::move(cfg)), out_(std::move(out)), threads_(threads) {
    config_hash_ = io::hex64(io::fnv1a(config_to_json(cfg_).dump()));
  }

  [[nodiscard]] const ExperimentConfig& config() const { return cfg_; }
  [[nodiscard]] const std::filesystem::path& out_dir() const { return out_; }

  // Runs every stage in order. With `resume`, stages whose recorded outputs
  // still hash-match (and whose upstream is unchanged) are skipped.
  void run_all(bool resume = false) {
    write_resolved_config();
    for (auto s : kAllStages) run_stage(s, resume);
  }

  // Returns false when the stage was skipped on resume.
  bool run_stage(Stage s, bool resume = false) {
    write_resolved_config();
    load_records();
    const std::string name(to_string(s));
    const std::string upstream = upstream_hash(s);
    if (resume && stage_intact(name, upstream)) return false;
    outputs_.clear();
    try {
      switch (s) {
        case Stage::Gen: stage_gen(); break;
        case Stage::Fab: stage_fab(); break;
        case Stage::Sta: stage_sta(); break;
        case Stage::Cfst: stage_cfst(); break;
        case Stage::Bin: stage_bin(); break;
        case Stage::Trainset: stage_trainset(); break;
        case Stage::Train: stage_train(); break;
        case Stage::Sweep: stage_sweep(); break;
        case Stage::Detect: stage_detect(); break;
        case Stage::Roc: stage_roc(); break;
        case Stage::Report: stage_report(); break;
      }
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(s, e.code(), e.what(), e.detail());
    } catch (const std::exception& e) {
      throw StageError(s, ErrorCode::IoError, e.what(), {});
    }
    records_[name] = {{"config_hash", config_hash_}, {"upstream", upstream}, {"outputs", outputs_}};
    // Later stages depend on this one; their records no longer describe the
    // current upstream.
    bool after = false;
    for (auto t : kAllStages) {
      if (after) records_.erase(std::string(to_string(t)));
      if (t == s) after = true;
    }
    io::write_file(out_ / "stages.json", nlohmann::json{{"schema_version", kSchemaVersion}, {"stages", records_}}.dump(1) + "\n");
    return true;
  }

  // ---- artifacts (loaded lazily from the output directory) ----

  const Design& design() {
    if (!design_) design_ = load_design(need("design.json", Stage::Gen));
    return *design_;
  }

  const TestPlanArtifact& test_plan() {
    if (!plan_) {
      const auto j = parse_json(need("test_plan.json", Stage::Gen));
      detail::check_schema_version(j, "test plan");
      TestPlanArtifact p;
      p.tested_paths = j.at("tested_paths").get<std::vector<PathId>>();
      p.power_candidates = j.at("power_candidates").get<std::vector<PathId>>();
      const auto& w = j.at("wires");
      p.data_wires = w.at("data").get<std::size_t>();
      p.tested_wires = w.at("tested").get<std::size_t>();
      p.power_only_wires = w.at("power_only").get<std::size_t>();
      p.discarded_wires = w.at("discarded").get<std::size_t>();
      p.unreachable_wires = w.at("unreachable").get<std::size_t>();
      plan_ = std::move(p);
    }
    return *plan_;
  }

  const FabLot& lot() {
    if (!lot_) lot_ = load_lot(need("lot.json", Stage::Fab), design());
    return *lot_;
  }

  // Per design path: the affecting Trojan's label, or empty when clean.
  const std::vector<std::string>& truth() {
    if (!truth_) {
      const auto table = io::parse_csv(io::read_file(need("ground_truth.csv", Stage::Fab)), "path_id,truth");
      std::vector<std::string> t(design().paths.size());
      for (const auto& row : table.rows) {
        const auto id = static_cast<PathId>(io::parse_u64(row.at(0)));
        if (id >= t.size()) throw Error(ErrorCode::IoError, "ground truth names an unknown path");
        t[id] = row.at(1) == "clean" ? std::string() : std::string(row.at(1));
      }
      truth_ = std::move(t);
    }
    return *truth_;
  }

  const std::vector<GtmRecord>& gtm(GtmMode mode) {
    auto& slot = mode == GtmMode::Global ? gtm_global_ : gtm_ps_;
    if (!slot) slot = gtm_from_csv(io::read_file(need(gtm_file(mode), Stage::Sta)));
    return *slot;
  }

  const MeasurementTable& measurements() {
    if (!meas_) meas_ = measurements_from_csv(io::read_file(need("measurements.csv", Stage::Cfst)));
    return *meas_;
  }

  const std::vector<SpeedBin>& bins() {
    if (!bins_) bins_ = bins_from_json(parse_json(need("bins.json", Stage::Bin)));
    return *bins_;
  }

  const TrainsetManifest& trainset_manifest() {
    if (!manifest_) {
      const auto j = parse_json(need("trainset_manifest.json", Stage::Trainset));
      detail::check_schema_version(j, "training-set manifest");
      manifest_ = TrainsetManifest{j.at("training_paths").get<std::vector<PathId>>(),
                                   j.at("contamination_paths").get<std::vector<PathId>>()};
    }
    return *manifest_;
  }

  Dataset dataset(const std::string& name) {
    return dataset_from_csv(io::read_file(need("trainset_" + name + ".csv", Stage::Trainset)));
  }

  const WatchdogModel& model(const std::string& name) {
    auto it = models_.find(name);
    if (it == models_.end()) it = models_.emplace(name, load_model(need("model_" + name + ".json", Stage::Train))).first;
    return it->second;
  }

  // Dataset / model names: one per bin, then the no-binning and contaminated variants.
  std::vector<std::string> bin_names() {
    std::vector<std::string> n;
    for (const auto& b : bins()) n.push_back(lower(b.label));
    return n;
  }
  [[nodiscard]] bool has_nobin() const { return cfg_.no_binning && cfg_.bins > 1; }
  bool has_contaminated() { return !trainset_manifest().contamination_paths.empty(); }

  // Measured, never-failing paths: the ones that can be scored.
  std::vector<PathId> measurable(std::span<const PathId> paths) {
    const auto& m = measurements();
    std::set<PathId> failing(m.failing.begin(), m.failing.end());
    std::vector<PathId> out;
    for (PathId p : paths) {
      if (failing.count(p)) continue;
      if (!std::binary_search(m.paths.begin(), m.paths.end(), p)) continue;
      out.push_back(p);
    }
    return out;
  }

  std::vector<std::size_t> bin_rows(std::size_t b) { return die_rows(measurements(), bins().at(b)); }

 private:
  // ---- stages ----

  void stage_gen() {
    const auto d = generate_design(cfg_.design, cfg_.seed);
    const auto plan = plan_path_delay_tests(d, cfg_.test_plan, rng::derive_seed(cfg_.seed, 0x74657374ULL));
    TestPlanArtifact p;
    p.tested_paths = plan.tested_paths;
    p.power_candidates = plan.power_candidates;
    p.data_wires = plan.wires.size();
    for (const auto& w : plan.wires) {
      if (w.status == WireStatus::Tested) ++p.tested_wires;
      if (w.status == WireStatus::PowerOnly) ++p.power_only_wires;
    }
    p.discarded_wires = plan.discarded_wires;
    p.unreachable_wires = plan.unreachable_wires;
    emit("design.json", design_to_json(d).dump(1) + "\n");
    nlohmann::json jw = nlohmann::json::array();
    for (const auto& w : plan.wires) {
      static constexpr const char* status[] = {"tested", "power_only", "discarded", "no_path"};
      jw.push_back({{"wire", w.wire}, {"status", status[static_cast<int>(w.status)]}, {"paths", w.tested}});
    }
    emit("test_plan.json", nlohmann::json{{"schema_version", kSchemaVersion},
                                          {"tested_paths", p.tested_paths},
                                          {"power_candidates", p.power_candidates},
                                          {"wires",
                                           {{"data", p.data_wires},
                                            {"tested", p.tested_wires},
                                            {"power_only", p.power_only_wires},
                                            {"discarded", p.discarded_wires},
                                            {"unreachable", p.unreachable_wires}}},
                                          {"per_wire", std::move(jw)}}
                                   .dump(1) +
                               "\n");
    invalidate_from(Stage::Gen);
    design_ = d;
    plan_ = std::move(p);
  }

  void stage_fab() {
    const auto& d = design();
    const auto planned = plan_trojans(d, test_plan().tested_paths, cfg_.trojans, rng::derive_seed(cfg_.seed, 0x74726f6aULL));
    std::vector<TrojanSpec> specs;
    nlohmann::json jp = nlohmann::json::array();
    for (const auto& t : planned) {
      specs.push_back(t.spec);
      jp.push_back({{"trojan", trojan_to_json(t.spec)}, {"label", t.spec.label()}, {"affected_tested_paths", t.affected_tested}});
    }
    auto lot = make_lot(d, cfg_.silicon, cfg_.dies, specs, rng::derive_seed(cfg_.seed, 0x666162ULL));
    const auto gt = trojan_ground_truth(lot);
    std::string csv = "path_id,truth\n";
    std::vector<std::string> truth(d.paths.size());
    for (PathId p = 0; p < gt.size(); ++p) {
      truth[p] = gt[p] < 0 ? std::string() : lot.trojans()[static_cast<std::size_t>(gt[p])].label();
      csv += std::to_string(p) + ',' + (truth[p].empty() ? std::string("clean") : truth[p]) + '\n';
    }
    emit("lot.json", lot_to_json(lot).dump(1) + "\n");
    emit("trojan_plan.json", nlohmann::json{{"schema_version", kSchemaVersion}, {"trojans", std::move(jp)}}.dump(1) + "\n");
    emit("ground_truth.csv", csv);
    invalidate_from(Stage::Fab);
    lot_ = std::move(lot);
    truth_ = std::move(truth);
  }

  void stage_sta() {
    const auto& d = design();
    auto g = gtm_table(d, cfg_.global_margin, cfg_.silicon.voltage, threads_);
    auto p = gtm_table(d, cfg_.path_margin, cfg_.silicon.voltage, threads_);
    emit(gtm_file(GtmMode::Global), gtm_to_csv(g));
    emit(gtm_file(GtmMode::PathSpecific), gtm_to_csv(p));
    invalidate_from(Stage::Sta);
    // Reload through the CSV text so staged and monolithic runs see the same values.
    gtm_global_ = gtm_from_csv(gtm_to_csv(g));
    gtm_ps_ = gtm_from_csv(gtm_to_csv(p));
  }

  void stage_cfst() {
    const auto& l = lot();
    std::vector<PathId> all(l.design.paths.size());
    for (PathId p = 0; p < all.size(); ++p) all[p] = p;
    const CfstConfig cc = cfst_config();
    const auto table = measure_lot(l, all, cc, threads_);
    const std::string csv = measurements_to_csv(table, cc.period_ps);
    emit("measurements.csv", csv);
    auto reread = measurements_from_csv(csv);
    emit("cfst_summary.json", nlohmann::json{{"schema_version", kSchemaVersion},
                                             {"period_ps", cc.period_ps},
                                             {"step_ps", cc.step_ps},
                                             {"trials", cc.trials},
                                             {"dies", table.dies.size()},
                                             {"measured_paths", table.paths.size()},
                                             {"fails_at_nominal", table.failing}}
                                      .dump(1) +
                                  "\n");
    if (cfg_.raw_delays) {
      std::vector<RawDelay> raw;
      for (const auto& die : l.dies) {
        const auto pv = die_pv_map(l, die);
        for (PathId p : all) {
          for (std::uint32_t t = 0; t < cc.trials; ++t) {
            raw.push_back({die.die_id, p, t, true_path_delay_fast(l.design.paths[p], l, die, pv, t)});
          }
        }
      }
      emit("raw_delays.csv", raw_delays_to_csv(raw));
    }
    invalidate_from(Stage::Cfst);
    meas_ = std::move(reread);
  }

  void stage_bin() {
    const auto& d = design();
    auto probes = measurable(all_paths());
    // Longest paths make the most sensitive speed probes.
    std::stable_sort(probes.begin(), probes.end(),
                     [&](PathId a, PathId b) { return d.paths[a].sta_delay_ps > d.paths[b].sta_delay_ps; });
    if (probes.size() > cfg_.probe_paths) probes.resize(cfg_.probe_paths);
    std::sort(probes.begin(), probes.end());
    auto b = speed_bin(measurements(), probes, d.clock_period_ps, cfg_.bins);
    const std::string text = bins_to_json(b, probes).dump(1) + "\n";
    emit("bins.json", text);
    invalidate_from(Stage::Bin);
    bins_ = bins_from_json(nlohmann::json::parse(text));
  }

  void stage_trainset() {
    const auto& d = design();
    const auto& t = truth();
    // The watchdog learns from clean paths; the contaminated variant below
    // measures what a few Trojan rows do to it.
    std::vector<PathId> clean;
    std::vector<PathId> infested;
    for (PathId p : measurable(all_paths())) (t[p].empty() ? clean : infested).push_back(p);
    const auto selected = select_training_paths(d, clean, cfg_.m_per_endpoint, cfg_.max_rows);
    const auto& gps = gtm(GtmMode::PathSpecific);
    const auto& m = measurements();
    const auto names = bin_names();
    for (std::size_t b = 0; b < names.size(); ++b) {
      emit("trainset_" + names[b] + ".csv", dataset_to_csv(build_training_set(d, gps, m, bin_rows(b), selected)));
    }
    if (has_nobin()) {
      // Without binning the label of each path comes from whichever bin its
      // measurements happened to be drawn from.
      std::vector<std::vector<PathId>> by_bin(names.size());
      for (PathId p : selected) {
        by_bin[rng::derive_seed(cfg_.seed, 0x6e6f62696eULL, p) % names.size()].push_back(p);
      }
      Dataset mixed;
      for (std::size_t b = 0; b < names.size(); ++b) {
        if (by_bin[b].empty()) continue;
        const auto part = build_training_set(d, gps, m, bin_rows(b), by_bin[b]);
        for (std::size_t i = 0; i < part.size(); ++i) mixed.push_back(part.ids[i], part.x[i], part.y[i]);
      }
      emit("trainset_nobin.csv", dataset_to_csv(sorted(mixed)));
    }
    std::vector<PathId> contamination;
    if (cfg_.contamination_rows > 0 && !infested.empty()) {
      contamination = infested;
      std::mt19937_64 eng(rng::derive_seed(cfg_.seed, 0x636f6e74ULL));
      std::shuffle(contamination.begin(), contamination.end(), eng);
      if (contamination.size() > cfg_.contamination_rows) contamination.resize(cfg_.contamination_rows);
      std::sort(contamination.begin(), contamination.end());
      std::vector<PathId> merged = selected;
      merged.insert(merged.end(), contamination.begin(), contamination.end());
      std::sort(merged.begin(), merged.end());
      emit("trainset_contaminated.csv", dataset_to_csv(build_training_set(d, gps, m, bin_rows(0), merged)));
    }
    emit("trainset_manifest.json", nlohmann::json{{"schema_version", kSchemaVersion},
                                                  {"primary_bin", bins().front().label},
                                                  {"training_paths", selected},
                                                  {"contamination_paths", contamination}}
                                           .dump(1) +
                                       "\n");
    invalidate_from(Stage::Trainset);
    manifest_ = TrainsetManifest{selected, contamination};
  }

  void stage_train() {
    std::vector<std::string> names = bin_names();
    if (has_nobin()) names.emplace_back("nobin");
    if (has_contaminated()) names.emplace_back("contaminated");
    std::vector<TrainResult> results(names.size());
    const auto& contamination = trainset_manifest().contamination_paths;
    std::vector<Dataset> sets;
    for (const auto& n : names) sets.push_back(dataset(n));
    parallel_for(
        names.size(),
        [&](std::size_t i) {
          const std::span<const PathId> force =
              names[i] == "contaminated" ? std::span<const PathId>(contamination) : std::span<const PathId>{};
          results[i] = train_watchdog(sets[i], cfg_.train, force);
        },
        threads_);
    models_.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      const std::string text = model_to_json(results[i].model).dump(1) + "\n";
      emit("model_" + names[i] + ".json", text);
      std::string loss = "epoch,train_mse,validation_mse\n";
      for (std::size_t e = 0; e < results[i].train_loss.size(); ++e) {
        loss += std::to_string(e) + ',' + io::format_double(results[i].train_loss[e]) + ',' +
                io::format_double(results[i].validation_loss[e]) + '\n';
      }
      emit("plots/loss_" + names[i] + ".csv", loss);
      models_.emplace(names[i], model_from_json(nlohmann::json::parse(text)));
    }
    invalidate_from(Stage::Train);
  }

  void stage_sweep() {
    if (!cfg_.sweep_enabled) return;
    const auto ds = dataset(bin_names().front());
    const auto r = arch_search(cfg_.sweep, ds, cfg_.train, threads_);
    emit("sweep.csv", sweep_log_to_csv(r));
    auto j = model_to_json(r.best_model);
    j["topology"] = r.log[r.best].candidate.topology();
    j["activation"] = to_string(r.log[r.best].candidate.activation);
    emit("sweep_best.json", j.dump(1) + "\n");
  }

  struct ReportSpec {
    std::string file;  // detect_<name>.json
    DetectionMode mode;
    std::size_t bin;
    std::string model;  // empty for SSTA/SGTM
  };

  std::vector<ReportSpec> report_specs() {
    std::vector<ReportSpec> specs;
    const auto names = bin_names();
    for (auto mode : cfg_.modes) {
      for (std::size_t b = 0; b < names.size(); ++b) {
        specs.push_back({std::string(to_string(mode)) + "_" + names[b], mode, b,
                         mode == DetectionMode::Ngtm ? names[b] : std::string()});
      }
    }
    const bool ngtm = std::find(cfg_.modes.begin(), cfg_.modes.end(), DetectionMode::Ngtm) != cfg_.modes.end();
    if (ngtm && has_nobin()) {
      for (std::size_t b = 0; b < names.size(); ++b) specs.push_back({"ngtm_nobin_" + names[b], DetectionMode::Ngtm, b, "nobin"});
    }
    if (ngtm && has_contaminated()) specs.push_back({"ngtm_contaminated_" + names[0], DetectionMode::Ngtm, 0, "contaminated"});
    return specs;
  }

  void stage_detect() {
    const auto& d = design();
    const auto& m = measurements();
    const auto scored = measurable(test_plan().tested_paths);
    const auto& training = trainset_manifest().training_paths;
    std::vector<std::vector<std::size_t>> rows;
    for (std::size_t b = 0; b < bins().size(); ++b) rows.push_back(bin_rows(b));
    for (const auto& spec : report_specs()) {
      const GtmMode gm = spec.mode == DetectionMode::Ssta ? GtmMode::Global : GtmMode::PathSpecific;
      const auto& g = gtm(gm);
      std::vector<DetectionInput> inputs;
      for (PathId p : scored) {
        inputs.push_back({p, g[p].slack_ps, m.mean_over(rows[spec.bin], m.column_of(p)),
                          spec.mode == DetectionMode::Ngtm ? extract_features(d, d.paths[p], g[p].sta_delay_ps) : FeatureVector{}});
      }
      double threshold = cfg_.fixed_threshold_ps;
      double shift = 0.0;
      const WatchdogModel* wm = nullptr;
      if (spec.mode == DetectionMode::Ngtm) {
        wm = &model(spec.model);
        threshold = cfg_.sigma_multiplier * wm->stats.sigma_nn;
      } else {
        std::vector<std::pair<double, double>> pairs;
        for (PathId p : training) pairs.emplace_back(g[p].slack_ps, m.mean_over(rows[spec.bin], m.column_of(p)));
        shift = static_shift(pairs);
      }
      auto report = detect(bins()[spec.bin].label, inputs, spec.mode, wm, threshold, shift);
      auto j = report_to_json(report, truth());
      if (!spec.model.empty()) j["model"] = spec.model;
      emit("detect_" + spec.file + ".json", j.dump(1) + "\n");
    }
  }

  void stage_roc() {
    nlohmann::json summary = nlohmann::json::object();
    for (const auto& spec : report_specs()) {
      std::vector<std::string> t;
      const auto report = report_from_json(parse_json(need("detect_" + spec.file + ".json", Stage::Detect)), &t);
      t.resize(design().paths.size());
      nlohmann::json entry = nlohmann::json::object();
      std::set<std::string> labels;
      for (const auto& v : report.verdicts) {
        if (!t[v.path_id].empty()) labels.insert(t[v.path_id]);
      }
      auto one = [&](const std::string& label, bool write_csv) -> nlohmann::json {
        const auto [s, y] = roc_inputs(report, t, label);
        try {
          const auto r = roc_and_youden(s, y);
          if (write_csv) emit("roc_" + spec.file + ".csv", roc_to_csv(r));
          return {{"youden_threshold_ps", r.youden_threshold_ps}, {"youden_j", r.youden_j}, {"threshold_ps", report.threshold_ps}};
        } catch (const Error& e) {
          if (e.code() != ErrorCode::SingleClass) throw;
          return "N/A";
        }
      };
      entry["all"] = one({}, true);
      for (const auto& l : labels) entry[l] = one(l, false);
      summary[spec.file] = std::move(entry);
    }
    emit("roc.json", nlohmann::json{{"schema_version", kSchemaVersion}, {"reports", std::move(summary)}}.dump(1) + "\n");
  }

  void stage_report();  // defined below

  // ---- helpers ----

  CfstConfig cfst_config() { return CfstConfig{cfg_.cfst_step_ps, design().clock_period_ps, cfg_.cfst_trials}; }

  std::vector<PathId> all_paths() {
    std::vector<PathId> all(design().paths.size());
    for (PathId p = 0; p < all.size(); ++p) all[p] = p;
    return all;
  }

  static Dataset sorted(const Dataset& ds) {
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ds.ids[a] < ds.ids[b]; });
    Dataset out;
    for (auto i : idx) out.push_back(ds.ids[i], ds.x[i], ds.y[i]);
    return out;
  }

  static std::string gtm_file(GtmMode m) { return m == GtmMode::Global ? "gtm_global.csv" : "gtm_path_specific.csv"; }

  static nlohmann::json parse_json(const std::filesystem::path& p) {
    try {
      return nlohmann::json::parse(io::read_file(p));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::IoError, p.string() + ": " + e.what(), p.string());
    }
  }

  std::filesystem::path need(const std::string& file, Stage producer) {
    auto p = out_ / file;
    if (!std::filesystem::exists(p)) {
      throw Error(ErrorCode::IoError, "missing artifact " + file + "; run the '" + std::string(to_string(producer)) + "' stage first",
                  p.string());
    }
    return p;
  }

  void emit(const std::string& file, const std::string& content) {
    io::write_file(out_ / file, content);
    outputs_[file] = io::hex64(io::fnv1a(content));
  }

  void invalidate_from(Stage s) {
    const auto i = static_cast<int>(s);
    if (i <= static_cast<int>(Stage::Gen)) design_.reset(), plan_.reset();
    if (i <= static_cast<int>(Stage::Fab)) lot_.reset(), truth_.reset();
    if (i <= static_cast<int>(Stage::Sta)) gtm_global_.reset(), gtm_ps_.reset();
    if (i <= static_cast<int>(Stage::Cfst)) meas_.reset();
    if (i <= static_cast<int>(Stage::Bin)) bins_.reset();
    if (i <= static_cast<int>(Stage::Trainset)) manifest_.reset();
    if (i <= static_cast<int>(Stage::Train)) models_.clear();
  }

  void write_resolved_config() {
    std::filesystem::create_directories(out_);
    io::write_file(out_ / "config.resolved.json", config_to_json(cfg_).dump(1) + "\n");
  }

  void load_records() {
    records_ = nlohmann::json::object();
    const auto p = out_ / "stages.json";
    if (!std::filesystem::exists(p)) return;
    try {
      const auto j = nlohmann::json::parse(io::read_file(p));
      if (j.contains("stages") && j["stages"].is_object()) records_ = j["stages"];
    } catch (const nlohmann::json::exception&) {
      records_ = nlohmann::json::object();
    }
  }

  // Hash over the recorded outputs of every earlier stage.
  std::string upstream_hash(Stage s) {
    std::string acc = config_hash_;
    for (auto t : kAllStages) {
      if (t == s) break;
      const std::string n(to_string(t));
      if (records_.contains(n)) acc += records_[n]["outputs"].dump();
    }
    return io::hex64(io::fnv1a(acc));
  }

  bool stage_intact(const std::string& name, const std::string& upstream) {
    if (!records_.contains(name)) return false;
    const auto& r = records_[name];
    if (r.value("config_hash", "") != config_hash_ || r.value("upstream", "") != upstream) return false;
    for (const auto& [file, hash] : r["outputs"].items()) {
      const auto p = out_ / file;
      if (!std::filesystem::exists(p) || io::hex64(io::fnv1a(io::read_file(p))) != hash.get<std::string>()) return false;
    }
    return true;
  }

  ExperimentConfig cfg_;
  std::filesystem::path out_;
  unsigned threads_;
  std::string config_hash_;
  nlohmann::json records_ = nlohmann::json::object();
  nlohmann::json outputs_ = nlohmann::json::object();

  std::optional<Design> design_;
  std::optional<TestPlanArtifact> plan_;
  std::optional<FabLot> lot_;
  std::optional<std::vector<std::string>> truth_;
  std::optional<std::vector<GtmRecord>> gtm_global_;
  std::optional<std::vector<GtmRecord>> gtm_ps_;
  std::optional<MeasurementTable> meas_;
  std::optional<std::vector<SpeedBin>> bins_;
  std::optional<TrainsetManifest> manifest_;
  std::map<std::string, WatchdogModel> models_;
};

namespace detail {

inline std::string fmt(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string fmt_opt(const nlohmann::json& v) { return v.is_number() ? fmt(v.get<double>()) : std::string("N/A"); }

}  // namespace detail

// Summary tables and plot data. Everything here is a synthetic-model output.
inline void Experiment::stage_report() {
  const auto& d = design();
  const auto& plan = test_plan();
  const auto& t = truth();
  const auto names = bin_names();

  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["note"] = "all values are outputs of the synthetic simulation stack";
  j["primary_bin"] = bins().front().label;
  j["design"] = {{"gates", d.gates.size()},
                 {"registers", d.registers.size()},
                 {"wires", d.wires.size()},
                 {"paths", d.paths.size()},
                 {"clock_period_ps", d.clock_period_ps},
                 {"tested_paths", plan.tested_paths.size()},
                 {"power_candidates", plan.power_candidates.size()},
                 {"data_wires", plan.data_wires},
                 {"discarded_wires", plan.discarded_wires},
                 {"unreachable_wires", plan.unreachable_wires}};
  std::map<std::string, std::size_t> affected;
  for (PathId p : measurable(plan.tested_paths)) {
    if (!t[p].empty()) ++affected[t[p]];
  }
  j["trojans"] = {{"count", lot().trojans().size()}, {"affected_tested_paths", affected}};

  // Watchdog table: residual statistics against the spread of the raw shift.
  nlohmann::json wd = nlohmann::json::object();
  std::vector<std::string> model_names = names;
  if (has_nobin()) model_names.emplace_back("nobin");
  if (has_contaminated()) model_names.emplace_back("contaminated");
  std::string fig4 = "model,path_id,raw_residual_ps,nn_residual_ps\n";
  for (const auto& n : model_names) {
    const auto ds = dataset(n);
    const auto& m = model(n);
    std::vector<double> raw;
    std::vector<double> nn;
    std::vector<PathId> ids;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (split_of(ds.ids[i], cfg_.train.seed, cfg_.train.train_fraction, cfg_.train.validation_fraction) != Split::Test) continue;
      // Contamination rows are forced into training.
      if (n == "contaminated" && std::binary_search(trainset_manifest().contamination_paths.begin(),
                                                    trainset_manifest().contamination_paths.end(), ds.ids[i])) {
        continue;
      }
      raw.push_back(ds.y[i]);
      nn.push_back(m.predict(ds.x[i]) - ds.y[i]);
      ids.push_back(ds.ids[i]);
    }
    const double raw_mean = stats::mean(raw);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      fig4 += n + ',' + std::to_string(ids[i]) + ',' + io::format_double(raw[i] - raw_mean) + ',' + io::format_double(nn[i]) + '\n';
    }
    wd[n] = {{"rows", ds.size()},
             {"mu_ps", m.stats.mu},
             {"sigma_nn_ps", m.stats.sigma_nn},
             {"validation_sigma_ps", m.stats.validation_sigma},
             {"raw_residual_sd_ps", stats::stddev(raw)},
             {"threshold_ps", cfg_.sigma_multiplier * m.stats.sigma_nn},
             {"epochs_run", m.stats.epochs_run}};
  }
  j["watchdog"] = wd;
  emit("plots/fig4_residuals.csv", fig4);

  // Detection tables.
  const auto roc = parse_json(need("roc.json", Stage::Roc)).at("reports");
  nlohmann::json det = nlohmann::json::object();
  std::string fig6 = "report,mode,bin,group,tpo_pct,fpo_pct\n";
  std::string fig7 = "report,path_id,score_ps,truth\n";
  for (const auto& spec : report_specs()) {
    const auto jr = parse_json(need("detect_" + spec.file + ".json", Stage::Detect));
    nlohmann::json e = {{"mode", jr.at("mode")},
                        {"bin", jr.at("bin")},
                        {"threshold_ps", jr.at("threshold_ps")},
                        {"shift_ps", jr.at("shift_ps")},
                        {"metrics", jr.at("metrics")},
                        {"metrics_by_label", jr.at("metrics_by_label")},
                        {"roc", roc.contains(spec.file) ? roc.at(spec.file) : nlohmann::json("N/A")}};
    if (!spec.model.empty()) e["model"] = spec.model;
    fig6 += spec.file + ',' + jr.at("mode").get<std::string>() + ',' + jr.at("bin").get<std::string>() + ",all," +
            detail::fmt_opt(jr["metrics"]["tpo_pct"]) + ',' + detail::fmt_opt(jr["metrics"]["fpo_pct"]) + '\n';
    for (const auto& [label, m] : jr.at("metrics_by_label").items()) {
      fig6 += spec.file + ',' + jr.at("mode").get<std::string>() + ',' + jr.at("bin").get<std::string>() + ',' + label + ',' +
              detail::fmt_opt(m["tpo_pct"]) + ',' + detail::fmt_opt(m["fpo_pct"]) + '\n';
    }
    for (const auto& v : jr.at("verdicts")) {
      fig7 += spec.file + ',' + std::to_string(v.at("path_id").get<PathId>()) + ',' + io::format_double(v.at("score_ps").get<double>()) +
              ',' + v.at("truth").get<std::string>() + '\n';
    }
    det[spec.file] = std::move(e);
  }
  j["detection"] = det;
  emit("plots/fig6_detection.csv", fig6);
  emit("plots/fig7_scores.csv", fig7);

  // Human-readable tables.
  std::string txt = "LASCA-style detection summary (synthetic simulation outputs)\n\n";
  txt += "Design: " + std::to_string(d.gates.size()) + " gates, " + std::to_string(d.registers.size()) + " registers, " +
         std::to_string(d.paths.size()) + " paths, T = " + detail::fmt(d.clock_period_ps) + " ps\n";
  txt += "Tested paths: " + std::to_string(plan.tested_paths.size()) + ", power-analysis candidates: " +
         std::to_string(plan.power_candidates.size()) + "\n";
  txt += "Trojans: " + std::to_string(lot().trojans().size());
  for (const auto& [l, c] : affected) txt += ", " + l + " " + std::to_string(c) + " paths";
  txt += "\n\nWatchdog residuals (test split)\n";
  txt += "  model          rows    mu_ps  sigma_nn_ps  raw_sd_ps  4sigma_ps\n";
  for (const auto& n : model_names) {
    const auto& w = wd[n];
    char line[160];
    std::snprintf(line, sizeof line, "  %-12s %6zu %8.2f %12.2f %10.2f %10.2f\n", n.c_str(), w["rows"].get<std::size_t>(),
                  w["mu_ps"].get<double>(), w["sigma_nn_ps"].get<double>(), w["raw_residual_sd_ps"].get<double>(),
                  w["threshold_ps"].get<double>());
    txt += line;
  }
  txt += "\nDetection (TPo / FPo in percent)\n";
  txt += "  report                       threshold_ps    TPo     FPo   youden_ps\n";
  for (const auto& [file, e] : det.items()) {
    const auto& r = e["roc"];
    const std::string youden =
        r.is_object() && r["all"].is_object() ? detail::fmt(r["all"]["youden_threshold_ps"].get<double>()) : std::string("N/A");
    char line[200];
    std::snprintf(line, sizeof line, "  %-28s %12.2f %7s %7s %11s\n", file.c_str(), e["threshold_ps"].get<double>(),
                  detail::fmt_opt(e["metrics"]["tpo_pct"]).c_str(), detail::fmt_opt(e["metrics"]["fpo_pct"]).c_str(),
                  youden.c_str());
    txt += line;
  }
  txt += "\nPer Trojan group (primary bin)\n";
  for (auto mode : cfg_.modes) {
    const std::string file = std::string(to_string(mode)) + "_" + names.front();
    if (!det.contains(file)) continue;
    txt += "  " + std::string(to_string(mode)) + ":";
    for (const auto& [label, m] : det[file]["metrics_by_label"].items()) txt += "  " + label + " " + detail::fmt_opt(m["tpo_pct"]);
    txt += "\n";
  }
  emit("report.json", j.dump(1) + "\n");
  emit("report.txt", txt);
}

inline void run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out, bool resume = false,
                           unsigned threads = 0) {
  Experiment(cfg, out, threads).run_all(resume);
}

}  // namespace lasca
