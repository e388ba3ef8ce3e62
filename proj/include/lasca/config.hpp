#pragma once

// Experiment configuration. Reading is strict: unknown keys, wrong types and
// a missing seed are SchemaErrors whose detail is the dotted field path.

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "lasca/arch_search.hpp"
#include "lasca/cfst.hpp"
#include "lasca/design_generator.hpp"
#include "lasca/detector.hpp"
#include "lasca/error.hpp"
#include "lasca/io.hpp"
#include "lasca/rng.hpp"
#include "lasca/silicon.hpp"
#include "lasca/silicon_io.hpp"
#include "lasca/sta.hpp"
#include "lasca/testability.hpp"
#include "lasca/trainer.hpp"
#include "lasca/trojan_plan.hpp"

namespace lasca {

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DesignGenConfig design;
  SiliconConfig silicon;
  std::size_t dies = 300;
  TestPlanConfig test_plan;
  TrojanPlanConfig trojans;
  GlobalPessimistic global_margin;
  PathSpecific path_margin;
  double cfst_step_ps = 15.0;
  std::uint32_t cfst_trials = 1;
  bool raw_delays = false;
  std::size_t bins = 3;
  std::size_t probe_paths = 200;
  std::size_t m_per_endpoint = 1;
  std::size_t max_rows = 12000;
  std::size_t contamination_rows = 40;
  bool no_binning = true;
  TrainConfig train;  // seed is derived from the master seed
  bool sweep_enabled = false;
  ArchSpace sweep;
  std::vector<DetectionMode> modes{DetectionMode::Ssta, DetectionMode::Sgtm, DetectionMode::Ngtm};
  double fixed_threshold_ps = kFixedThresholdPs;
  double sigma_multiplier = 4.0;
};

namespace detail {

class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw Error(ErrorCode::SchemaError, "expected an object", path_.empty() ? "<root>" : path_);
  }

  [[nodiscard]] std::string field(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  template <typename T>
  bool read(std::string_view key, T& out) {
    const auto* v = find(key);
    if (!v) return false;
    out = convert<T>(*v, field(key));
    return true;
  }

  template <typename T>
  void require(std::string_view key, T& out) {
    if (!read(key, out)) throw Error(ErrorCode::SchemaError, "missing required field", field(key));
  }

  template <typename T, std::size_t N>
  bool read_array(std::string_view key, std::array<T, N>& out) {
    std::vector<T> v;
    if (!read(key, v)) return false;
    if (v.size() != N) {
      throw Error(ErrorCode::SchemaError, "expected " + std::to_string(N) + " entries", field(key));
    }
    std::copy(v.begin(), v.end(), out.begin());
    return true;
  }

  std::optional<Section> section(std::string_view key) {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    return Section(*v, field(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_->items()) {
      if (!seen_.count(k)) throw Error(ErrorCode::SchemaError, "unknown field", field(k));
    }
  }

 private:
  const nlohmann::json* find(std::string_view key) {
    seen_.emplace(key);
    const auto it = j_->find(std::string(key));
    return it == j_->end() ? nullptr : &*it;
  }

  template <typename T>
  static T convert(const nlohmann::json& v, const std::string& where) {
    auto bad = [&](std::string_view want) { return Error(ErrorCode::SchemaError, "expected " + std::string(want), where); };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw bad("a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) throw bad("a nonnegative integer");
      const auto u = v.get<std::uint64_t>();
      if (u > std::numeric_limits<T>::max()) throw bad("a smaller integer");
      return static_cast<T>(u);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw bad("a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw bad("a string");
      return v.get<std::string>();
    } else {
      if (!v.is_array()) throw bad("an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
  }

  const nlohmann::json* j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

template <typename Fn>
auto as_schema_error(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaError) throw;
    throw Error(ErrorCode::SchemaError, e.what(), e.detail().empty() ? field : e.detail());
  }
}

inline void read_design(Section s, DesignGenConfig& d) {
  s.read("registers", d.registers);
  s.read("combinational_gates", d.combinational_gates);
  s.read("max_logic_depth", d.max_logic_depth);
  s.read("clock_fanout", d.clock_fanout);
  s.read("paths_per_endpoint", d.paths_per_endpoint);
  s.read("slack_range_ps", d.slack_range_ps);
  s.read("clock_period_ps", d.clock_period_ps);
  s.read("clock_headroom", d.clock_headroom);
  s.read("locality_candidates", d.locality_candidates);
  if (auto w = s.section("wirelength")) {
    w->read_array("layer_weight", d.wirelength.layer_weight);
    w->read_array("clock_layer_weight", d.wirelength.clock_layer_weight);
    w->read_array("median_um", d.wirelength.median_um);
    w->read("sigma_log", d.wirelength.sigma_log);
    w->read("max_segments", d.wirelength.max_segments);
    w->finish();
  }
  s.finish();
}

inline void read_silicon(Section s, SiliconConfig& c) {
  if (auto k = s.section("skew")) {
    k->read("x_pct", c.skew.x_pct);
    k->read("y_pct", c.skew.y_pct);
    k->finish();
  }
  if (auto d = s.section("drift")) {
    d->read_array("cell", c.drift.cell);
    d->read_array("drive", c.drift.drive);
    d->read_array("layer", c.drift.layer);
    d->finish();
  }
  if (auto p = s.section("pv")) {
    p->read("sigma_d", c.pv.sigma_d);
    p->finish();
  }
  if (auto v = s.section("voltage")) {
    v->read("v_nom", c.voltage.v_nom);
    v->read("mean_drop", c.voltage.mean_drop);
    v->read("sd_drop", c.voltage.sd_drop);
    v->read("max_drop", c.voltage.max_drop);
    v->read("spatial_amplitude", c.voltage.spatial_amplitude);
    v->read("alpha", c.voltage.alpha);
    v->finish();
  }
  s.read("persistent_derivatives", c.persistent_derivatives);
  s.read("tp_pin_cap_ff", c.tp_pin_cap_ff);
  s.finish();
}

inline void read_trojans(Section s, TrojanPlanConfig& t) {
  static constexpr const char* kinds[] = {"TP", "TT"};
  static constexpr const char* sizes[] = {"Small", "Medium", "Large"};
  for (std::size_t k = 0; k < 2; ++k) {
    if (auto g = s.section(kinds[k])) {
      for (std::size_t z = 0; z < 3; ++z) g->read(sizes[z], t.affected_paths[k][z]);
      g->finish();
    }
  }
  s.read_array("tp_delta_ps", t.tp_delta_ps);
  s.read_array("tt_delta_ps", t.tt_delta_ps);
  s.finish();
  for (double d : t.tp_delta_ps) {
    if (!(d > 0.0)) throw Error(ErrorCode::SchemaError, "Trojan deltas must be positive", s.field("tp_delta_ps"));
  }
  for (double d : t.tt_delta_ps) {
    if (!(d > 0.0)) throw Error(ErrorCode::SchemaError, "Trojan deltas must be positive", s.field("tt_delta_ps"));
  }
}

inline void read_train(Section s, ExperimentConfig& c) {
  auto& t = c.train;
  s.read("m_per_endpoint", c.m_per_endpoint);
  s.read("max_rows", c.max_rows);
  s.read("contamination_rows", c.contamination_rows);
  s.read("no_binning", c.no_binning);
  s.read("learning_rate", t.learning_rate);
  s.read("momentum", t.momentum);
  s.read("epochs", t.epochs);
  s.read("batch_size", t.batch_size);
  s.read("patience", t.patience);
  s.read("train_fraction", t.train_fraction);
  s.read("validation_fraction", t.validation_fraction);
  s.read("hidden", t.hidden);
  std::string act;
  if (s.read("activation", act)) t.activation = as_schema_error(s.field("activation"), [&] { return parse_activation(act); });
  s.finish();
}

inline void read_sweep(Section s, ExperimentConfig& c) {
  s.read("enabled", c.sweep_enabled);
  s.read("layer_counts", c.sweep.layer_counts);
  s.read("widths", c.sweep.widths);
  std::vector<std::string> acts;
  if (s.read("activations", acts)) {
    c.sweep.activations.clear();
    for (const auto& a : acts) {
      c.sweep.activations.push_back(as_schema_error(s.field("activations"), [&] { return parse_activation(a); }));
    }
  }
  s.finish();
}

inline void read_detect(Section s, ExperimentConfig& c) {
  std::vector<std::string> modes;
  if (s.read("modes", modes)) {
    c.modes.clear();
    for (const auto& m : modes) {
      c.modes.push_back(as_schema_error(s.field("modes"), [&] { return parse_detection_mode(m); }));
    }
  }
  s.read("fixed_threshold_ps", c.fixed_threshold_ps);
  s.read("sigma_multiplier", c.sigma_multiplier);
  s.finish();
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  using detail::as_schema_error;
  as_schema_error("silicon", [&] { c.silicon.validate(); });
  as_schema_error("train", [&] { c.train.validate(); });
  as_schema_error("sweep", [&] { (void)enumerate_space(c.sweep); });
  as_schema_error("cfst", [&] { CfstConfig{c.cfst_step_ps, std::max(c.cfst_step_ps, 1.0), c.cfst_trials}.validate(); });
  auto fail = [](std::string msg, std::string field) { throw Error(ErrorCode::SchemaError, msg, std::move(field)); };
  if (c.dies == 0) fail("a lot needs at least one die", "lot.dies");
  if (c.bins == 0) fail("need at least one speed bin", "binning.bins");
  if (c.bins > c.dies) fail("more bins than dies", "binning.bins");
  if (c.probe_paths == 0) fail("need at least one probe path", "binning.probe_paths");
  if (c.m_per_endpoint == 0) fail("m must be at least 1", "train.m_per_endpoint");
  if (c.max_rows == 0) fail("max_rows must be positive", "train.max_rows");
  if (c.modes.empty()) fail("no detection modes", "detect.modes");
  if (!(c.fixed_threshold_ps >= 0.0)) fail("threshold must be nonnegative", "detect.fixed_threshold_ps");
  if (!(c.sigma_multiplier >= 0.0)) fail("multiplier must be nonnegative", "detect.sigma_multiplier");
  if (c.test_plan.paths_per_wire == 0) fail("paths_per_wire must be at least 1", "test_plan.paths_per_wire");
  if (!(c.test_plan.atpg_fail_prob >= 0.0 && c.test_plan.atpg_fail_prob <= 1.0)) {
    fail("probability must lie in [0, 1]", "test_plan.atpg_fail_prob");
  }
  if (!(c.test_plan.tester_min_delay_ps >= 0.0)) fail("must be nonnegative", "test_plan.tester_min_delay_ps");
  if (!(c.global_margin.endpoint_uncertainty_ps >= 0.0)) fail("must be nonnegative", "sta.global.endpoint_uncertainty_ps");
  if (!(c.global_margin.rail_voltage > 0.0 && c.global_margin.rail_voltage < c.silicon.voltage.v_nom)) {
    fail("rail voltage must lie in (0, v_nom)", "sta.global.rail_voltage");
  }
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::Section root(j, "");
  root.require("seed", c.seed);
  if (auto s = root.section("design")) detail::read_design(*s, c.design);
  if (auto s = root.section("silicon")) detail::read_silicon(*s, c.silicon);
  if (auto s = root.section("lot")) {
    s->read("dies", c.dies);
    s->finish();
  }
  if (auto s = root.section("test_plan")) {
    s->read("paths_per_wire", c.test_plan.paths_per_wire);
    s->read("tester_min_delay_ps", c.test_plan.tester_min_delay_ps);
    s->read("atpg_fail_prob", c.test_plan.atpg_fail_prob);
    s->finish();
  }
  if (auto s = root.section("trojans")) detail::read_trojans(*s, c.trojans);
  if (auto s = root.section("sta")) {
    if (auto g = s->section("global")) {
      g->read("rail_voltage", c.global_margin.rail_voltage);
      g->read("endpoint_uncertainty_ps", c.global_margin.endpoint_uncertainty_ps);
      g->finish();
    }
    if (auto p = s->section("path_specific")) {
      p->read("mc_samples", c.path_margin.mc_samples);
      p->read("sigma_multiplier", c.path_margin.sigma_multiplier);
      p->finish();
    }
    s->finish();
  }
  if (auto s = root.section("cfst")) {
    s->read("step_ps", c.cfst_step_ps);
    s->read("trials", c.cfst_trials);
    s->read("raw_delays", c.raw_delays);
    s->finish();
  }
  if (auto s = root.section("binning")) {
    s->read("bins", c.bins);
    s->read("probe_paths", c.probe_paths);
    s->finish();
  }
  if (auto s = root.section("train")) detail::read_train(*s, c);
  if (auto s = root.section("sweep")) detail::read_sweep(*s, c);
  if (auto s = root.section("detect")) detail::read_detect(*s, c);
  root.finish();
  c.train.seed = rng::derive_seed(c.seed, 0x747261696eULL);
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("config is not valid JSON: ") + e.what(), path.string());
  }
  return config_from_json(j);
}

// Every setting, defaults included, so an artifact directory describes itself.
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  const auto& d = c.design;
  const auto& t = c.train;
  std::vector<std::string> modes;
  for (auto m : c.modes) modes.emplace_back(to_string(m));
  std::vector<std::string> acts;
  for (auto a : c.sweep.activations) acts.emplace_back(to_string(a));
  const auto& ap = c.trojans.affected_paths;
  return {
      {"seed", c.seed},
      {"design",
       {{"registers", d.registers},
        {"combinational_gates", d.combinational_gates},
        {"max_logic_depth", d.max_logic_depth},
        {"clock_fanout", d.clock_fanout},
        {"paths_per_endpoint", d.paths_per_endpoint},
        {"slack_range_ps", d.slack_range_ps},
        {"clock_period_ps", d.clock_period_ps},
        {"clock_headroom", d.clock_headroom},
        {"locality_candidates", d.locality_candidates},
        {"wirelength",
         {{"layer_weight", d.wirelength.layer_weight},
          {"clock_layer_weight", d.wirelength.clock_layer_weight},
          {"median_um", d.wirelength.median_um},
          {"sigma_log", d.wirelength.sigma_log},
          {"max_segments", d.wirelength.max_segments}}}}},
      {"silicon", silicon_config_to_json(c.silicon)},
      {"lot", {{"dies", c.dies}}},
      {"test_plan",
       {{"paths_per_wire", c.test_plan.paths_per_wire},
        {"tester_min_delay_ps", c.test_plan.tester_min_delay_ps},
        {"atpg_fail_prob", c.test_plan.atpg_fail_prob}}},
      {"trojans",
       {{"TP", {{"Small", ap[0][0]}, {"Medium", ap[0][1]}, {"Large", ap[0][2]}}},
        {"TT", {{"Small", ap[1][0]}, {"Medium", ap[1][1]}, {"Large", ap[1][2]}}},
        {"tp_delta_ps", c.trojans.tp_delta_ps},
        {"tt_delta_ps", c.trojans.tt_delta_ps}}},
      {"sta",
       {{"global",
         {{"rail_voltage", c.global_margin.rail_voltage},
          {"endpoint_uncertainty_ps", c.global_margin.endpoint_uncertainty_ps}}},
        {"path_specific",
         {{"mc_samples", c.path_margin.mc_samples}, {"sigma_multiplier", c.path_margin.sigma_multiplier}}}}},
      {"cfst", {{"step_ps", c.cfst_step_ps}, {"trials", c.cfst_trials}, {"raw_delays", c.raw_delays}}},
      {"binning", {{"bins", c.bins}, {"probe_paths", c.probe_paths}}},
      {"train",
       {{"m_per_endpoint", c.m_per_endpoint},
        {"max_rows", c.max_rows},
        {"contamination_rows", c.contamination_rows},
        {"no_binning", c.no_binning},
        {"learning_rate", t.learning_rate},
        {"momentum", t.momentum},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"patience", t.patience},
        {"train_fraction", t.train_fraction},
        {"validation_fraction", t.validation_fraction},
        {"hidden", t.hidden},
        {"activation", to_string(t.activation)}}},
      {"sweep",
       {{"enabled", c.sweep_enabled},
        {"layer_counts", c.sweep.layer_counts},
        {"widths", c.sweep.widths},
        {"activations", acts}}},
      {"detect",
       {{"modes", modes}, {"fixed_threshold_ps", c.fixed_threshold_ps}, {"sigma_multiplier", c.sigma_multiplier}}},
  };
}

}  // namespace lasca
