// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>

#include "test_support.hpp"

namespace {

using namespace lasca;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const fs::path kConfigs = fs::path(LASCA_SOURCE_DIR) / "configs";

// Sub-path entries recounted from raw gates and wires, without the design's
// connectivity or delay caches.
std::array<double, kSubPathFeatureCount> recount(const Design& d, const SubPath& sp) {
  std::array<double, kSubPathFeatureCount> out{};
  out[0] = static_cast<double>(sp.gates.size());
  for (GateId g : sp.gates) {
    double load = 0.0;
    for (const auto& w : d.wires) {
      if (w.driver.kind != PinKind::GateOutput || w.driver.index != g) continue;
      const double sink = w.sink.kind == PinKind::GateInput ? d.gates[w.sink.index].pin_cap_ff : library::kPrimaryOutputCapFf;
      double wire = 0.0;
      for (const auto& s : w.segments) wire += s.length_um * s.cap_per_um_ff;
      load += sink + wire;
    }
    out[1] += d.gates[g].intrinsic_ps + d.gates[g].load_coeff * load;
    out[2 + static_cast<std::size_t>(d.gates[g].drive)] += 1.0;
  }
  for (WireId w : sp.wires) {
    for (const auto& s : d.wires[w].segments) {
      const auto layer = static_cast<std::size_t>(s.layer);
      if (layer < kFeatureLayerCount) out[2 + kDriveCount + layer] += s.length_um;
    }
  }
  return out;
}

Outcome feature_recount() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::size_t checked = 0;
  std::size_t mismatches = 0;
  for (std::uint64_t seed : {101, 102, 103, 104}) {
    const Design d = generate_design(test::small_design_config(40, 900, 12), seed);
    std::uniform_int_distribution<std::size_t> pick(0, d.paths.size() - 1);
    for (int i = 0; i < 250; ++i) {
      const auto& p = d.paths[pick(rng)];
      const auto f = extract_features(d, p);
      if (f.size() != 48) ++mismatches;
      const SubPath* parts[] = {&p.lp, &p.cp, &p.dp};
      for (std::size_t k = 0; k < 3; ++k) {
        const auto r = recount(d, *parts[k]);
        for (std::size_t e = 0; e < kSubPathFeatureCount; ++e) {
          if (f[kSubPathFeatureOffset + k * kSubPathFeatureCount + e] != r[e]) ++mismatches;
        }
      }
      ++checked;
    }
  }
  const double s = seconds_since(t0);
  return {mismatches == 0 && checked == 1000 && s < 10.0,
          std::to_string(checked) + " paths, " + std::to_string(mismatches) + " mismatches, " + num(s, 2) + " s"};
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2002);
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  for (int draw = 0; draw < 20; ++draw) {
    const Activation act = kAllActivations[draw % 4];
    const auto g = test::random_grad_problem(rng, act);
    const auto r = test::gradient_check(g.net, g.xs, g.ys, 1e-4);
    worst = std::max(worst, r.max_rel_err);
    checked += r.checked;
    skipped += r.skipped;
  }
  const double s = seconds_since(t0);
  return {worst < 1e-4 && checked > 0 && s < 30.0,
          "max rel err " + std::to_string(worst) + " over " + std::to_string(checked) + " parameters (" +
              std::to_string(skipped) + " at kinks skipped), " + num(s, 2) + " s"};
}

Outcome quantization() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(3003);
  std::uniform_real_distribution<double> period(200.0, 2000.0);
  std::uniform_real_distribution<double> step(0.5, 50.0);
  std::uniform_real_distribution<double> frac(1e-6, 1.0);
  std::size_t bad = 0;
  for (int i = 0; i < 100000; ++i) {
    const CfstConfig c{step(rng), period(rng), 1};
    const double t = c.period_ps * frac(rng);
    const auto m = start_to_fail_measure(t, c);
    const double over = m.measured_delay_ps - t;
    const bool on_grid = m.measured_slack_ps == std::round(m.measured_slack_ps / c.step_ps) * c.step_ps;
    if (!(over >= 0.0 && over < c.step_ps) || !on_grid) ++bad;
  }
  const double s = seconds_since(t0);
  return {bad == 0 && s < 5.0, std::to_string(bad) + " violations in 100000 delays, " + num(s, 2) + " s"};
}

Outcome sqrt_law() {
  const auto t0 = std::chrono::steady_clock::now();
  const Design d = generate_design(test::small_design_config(24, 300, 8), 404);
  SiliconConfig sc;
  sc.persistent_derivatives = {1.0};
  std::vector<PathId> paths;
  for (const auto& p : d.paths) paths.push_back(p.id);
  std::sort(paths.begin(), paths.end(), [&](PathId a, PathId b) { return d.paths[a].sta_delay_ps > d.paths[b].sta_delay_ps; });
  paths.resize(3);
  std::sort(paths.begin(), paths.end());
  const CfstConfig c{1.0, d.clock_period_ps, 1};
  constexpr std::size_t kDies = 100;
  constexpr std::size_t kLots = 300;
  std::vector<std::vector<double>> means(paths.size());
  std::vector<std::vector<double>> per_die(paths.size());
  for (std::size_t lot = 0; lot < kLots; ++lot) {
    const auto l = make_lot(d, sc, kDies, {}, 5000 + lot);
    const auto t = measure_lot(l, paths, c);
    for (std::size_t col = 0; col < paths.size(); ++col) {
      std::vector<double> s(kDies);
      for (std::size_t r = 0; r < kDies; ++r) s[r] = t.at(r, col);
      means[col].push_back(mean_slack(s));
      per_die[col].insert(per_die[col].end(), s.begin(), s.end());
    }
  }
  double worst = 0.0;
  std::string detail;
  for (std::size_t col = 0; col < paths.size(); ++col) {
    const double ratio = stats::stddev(means[col]) / (stats::stddev(per_die[col]) / std::sqrt(static_cast<double>(kDies)));
    worst = std::max(worst, std::abs(ratio - 1.0));
    detail += "path " + std::to_string(paths[col]) + " ratio " + num(ratio) + "; ";
  }
  const double s = seconds_since(t0);
  return {worst <= 0.20 && s < 60.0, detail + num(s, 2) + " s"};
}

// Everything below reads one full run of the acceptance config.
struct Run {
  fs::path dir;
  nlohmann::json report;
  nlohmann::json roc;
};

const nlohmann::json& detection(const Run& r, const std::string& name) { return r.report.at("detection").at(name); }

Outcome watchdog_beats_raw(const Run& r) {
  const auto& w = r.report["watchdog"]["fast"];
  const double sigma = w["sigma_nn_ps"].get<double>();
  const double raw = w["raw_residual_sd_ps"].get<double>();
  return {sigma <= 0.5 * raw, "sigma_NN " + num(sigma) + " ps vs raw residual sd " + num(raw) + " ps"};
}

Outcome tp_medium_detection(const Run& r) {
  const double sigma = r.report["watchdog"]["fast"]["sigma_nn_ps"].get<double>();
  const auto& e = detection(r, "ngtm_fast");
  const double threshold = e["threshold_ps"].get<double>();
  const auto& tp = e["metrics_by_label"]["TP-Medium"];
  const auto& all = e["metrics"];
  const auto trojans = tp["trojan_paths"].get<std::size_t>();
  const auto clean = all["clean_paths"].get<std::size_t>();
  const double tpo = tp["tpo_pct"].get<double>();
  const double fpo = all["fpo_pct"].get<double>();
  const bool setup = sigma <= 10.0 && std::abs(threshold - 4.0 * sigma) < 1e-9 && trojans >= 120 && clean >= 2000;
  return {setup && tpo >= 85.0 && fpo <= 1.0,
          "sigma_NN " + num(sigma) + ", threshold " + num(threshold) + ", " + std::to_string(trojans) + " Trojan / " +
              std::to_string(clean) + " clean paths, TPo " + num(tpo, 2) + "%, FPo " + num(fpo, 2) + "%"};
}

Outcome mode_ordering(const Run& r) {
  auto rate = [&](const std::string& n, const char* k) { return detection(r, n)["metrics"][k].get<double>(); };
  const double tn = rate("ngtm_fast", "tpo_pct");
  const double tg = rate("sgtm_fast", "tpo_pct");
  const double ts = rate("ssta_fast", "tpo_pct");
  const double fn = rate("ngtm_fast", "fpo_pct");
  const double fg = rate("sgtm_fast", "fpo_pct");
  return {tn > tg && tg >= ts && fn <= fg, "TPo NGTM " + num(tn, 2) + " / SGTM " + num(tg, 2) + " / SSTA " + num(ts, 2) +
                                               ", FPo NGTM " + num(fn, 2) + " / SGTM " + num(fg, 2)};
}

Outcome youden_near_4sigma(const Run& r) {
  // TP Trojans of every size against clean paths.
  std::vector<std::string> truth;
  const auto rep = report_from_json(nlohmann::json::parse(io::read_file(r.dir / "detect_ngtm_fast.json")), &truth);
  std::vector<double> s;
  std::vector<bool> y;
  for (const auto& v : rep.verdicts) {
    const auto& t = truth.at(v.path_id);
    if (!t.empty() && t.rfind("TP-", 0) != 0) continue;
    s.push_back(v.score_ps);
    y.push_back(!t.empty());
  }
  const auto roc = roc_and_youden(s, y);
  const double four = rep.threshold_ps;
  return {std::abs(roc.youden_threshold_ps - four) <= 0.5 * four,
          "t* " + num(roc.youden_threshold_ps) + " ps (J " + num(roc.youden_j) + ") vs 4 sigma " + num(four) + " ps"};
}

Outcome contamination(const Run& r) {
  const auto& clean = r.report["watchdog"]["fast"];
  const auto& dirty = r.report["watchdog"]["contaminated"];
  const auto manifest = nlohmann::json::parse(io::read_file(r.dir / "trainset_manifest.json"));
  const auto extra = manifest["contamination_paths"].size();
  const auto rows = clean["rows"].get<std::size_t>();
  const double s0 = clean["sigma_nn_ps"].get<double>();
  const double s1 = dirty["sigma_nn_ps"].get<double>();
  const double change = std::abs(s1 - s0) / s0;
  return {extra == 40 && rows >= 5000 && change < 0.10, std::to_string(extra) + " Trojan rows added to " +
                                                            std::to_string(rows) + ": sigma " + num(s0) + " -> " +
                                                            num(s1) + " ps (" + num(100.0 * change, 2) + "%)"};
}

Outcome binning_benefit(const Run& r) {
  auto pooled = [&](const std::string& prefix) {
    double flagged = 0.0;
    double total = 0.0;
    for (const char* b : {"fast", "typical", "slow"}) {
      const auto& m = detection(r, prefix + b)["metrics"];
      flagged += m["flagged_trojan"].get<double>();
      total += m["trojan_paths"].get<double>();
    }
    return 100.0 * flagged / total;
  };
  const double binned = pooled("ngtm_");
  const double nobin = pooled("ngtm_nobin_");
  return {binned >= nobin, "3-bin TPo " + num(binned, 2) + "% vs no-bin TPo " + num(nobin, 2) + "%"};
}

std::map<std::string, std::uint64_t> tree_hashes(const fs::path& root) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::fnv1a(io::read_file(e.path()));
  }
  return out;
}

Outcome determinism() {
  const auto cfg = load_config(kConfigs / "desk.json");
  const auto a = test::scratch_dir("acceptance_det_a");
  const auto b = test::scratch_dir("acceptance_det_b");
  run_experiment(cfg, a);
  run_experiment(cfg, b);
  const auto ha = tree_hashes(a);
  const auto hb = tree_hashes(b);
  std::size_t differ = ha.size() == hb.size() ? 0 : 1;
  for (const auto& [f, h] : ha) {
    const auto it = hb.find(f);
    if (it == hb.end() || it->second != h) ++differ;
  }
  return {differ == 0 && !ha.empty(), std::to_string(ha.size()) + " artifacts, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  C" << id << " " << name << ": " << o.detail << std::endl;
  };

  report(1, "feature recount", feature_recount);
  report(2, "MLP gradient check", gradient_check);
  report(3, "CFST quantization", quantization);
  report(4, "sqrt(m) law of the mean slack", sqrt_law);

  Run run;
  std::string setup_error;
  try {
    run.dir = test::scratch_dir("acceptance_run");
    run_experiment(load_config(kConfigs / "acceptance.json"), run.dir);
    run.report = nlohmann::json::parse(io::read_file(run.dir / "report.json"));
    run.roc = nlohmann::json::parse(io::read_file(run.dir / "roc.json"));
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  auto from_run = [&](Outcome (*fn)(const Run&)) {
    return [&, fn] {
      if (!setup_error.empty()) return Outcome{false, "acceptance run failed: " + setup_error};
      return fn(run);
    };
  };
  report(5, "watchdog vs raw residual", from_run(watchdog_beats_raw));
  report(6, "TP-Medium detection", from_run(tp_medium_detection));
  report(7, "mode ordering", from_run(mode_ordering));
  report(8, "Youden threshold near 4 sigma", from_run(youden_near_4sigma));
  report(9, "training-set contamination", from_run(contamination));
  report(10, "speed-binning benefit", from_run(binning_benefit));
  report(11, "determinism", determinism);

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
