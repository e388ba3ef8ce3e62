#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lasca/lasca.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "lasca_out";
  std::string mode;
  bool resume = false;
  unsigned threads = 0;
  std::string report;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "override the master seed");
  sub->add_option("--out", o.out, "artifact directory");
  sub->add_option("--mode", o.mode, "restrict detection to one mode")->check(CLI::IsMember({"ssta", "sgtm", "ngtm"}));
  sub->add_flag("--resume", o.resume, "skip stages whose outputs are intact");
  sub->add_option("--threads", o.threads, "worker threads (0 = all cores)");
}

int exit_code(lasca::ErrorCode code) {
  using lasca::ErrorCode;
  switch (code) {
    case ErrorCode::SchemaError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::SingleClass: return 2;
    default: return 1;
  }
}

void print_error(const lasca::Error& e) {
  nlohmann::json j = {{"error", std::string(lasca::to_string(e.code()))}, {"message", e.what()}, {"detail", e.detail()}};
  if (const auto* s = dynamic_cast<const lasca::StageError*>(&e)) {
    j["stage"] = e.detail();
    j["cause"] = std::string(lasca::to_string(s->cause()));
    j["cause_detail"] = s->cause_detail();
  }
  std::cerr << j.dump() << '\n';
}

lasca::ExperimentConfig resolve(const Options& o) {
  auto cfg = lasca::load_config(o.config);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.train.seed = lasca::rng::derive_seed(cfg.seed, 0x747261696eULL);
  }
  if (!o.mode.empty()) cfg.modes = {lasca::parse_detection_mode(o.mode)};
  return cfg;
}

// ROC of one detection report file; surfaces SingleClass.
void roc_of_report(const std::string& path) {
  const auto j = nlohmann::json::parse(lasca::io::read_file(path));
  std::vector<std::string> truth;
  const auto report = lasca::report_from_json(j, &truth);
  if (truth.empty()) throw lasca::Error(lasca::ErrorCode::SingleClass, "report carries no ground truth", path);
  for (const auto& v : report.verdicts) {
    if (v.path_id >= truth.size()) truth.resize(v.path_id + 1);
  }
  const auto [s, y] = lasca::roc_inputs(report, truth);
  const auto r = lasca::roc_and_youden(s, y);
  std::cout << lasca::roc_to_csv(r);
  std::cerr << "youden_threshold_ps=" << lasca::io::format_double(r.youden_threshold_ps)
            << " youden_j=" << lasca::io::format_double(r.youden_j) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Golden-IC-free hardware-Trojan detection simulator"};
  app.require_subcommand(1);
  Options opt;
  std::vector<std::pair<CLI::App*, std::optional<lasca::Stage>>> subs;
  for (auto s : lasca::kAllStages) {
    auto* sub = app.add_subcommand(std::string(lasca::to_string(s)), "run the " + std::string(lasca::to_string(s)) + " stage");
    add_common(sub, opt);
    if (s == lasca::Stage::Roc) sub->add_option("--report", opt.report, "score a single detection report instead");
    subs.emplace_back(sub, s);
  }
  auto* run = app.add_subcommand("run", "run every stage");
  add_common(run, opt);
  subs.emplace_back(run, std::nullopt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc != 0) {
      std::cerr << nlohmann::json{{"error", "UsageError"}, {"message", e.what()}}.dump() << '\n';
      return 2;
    }
    return 0;
  }

  try {
    for (const auto& [sub, stage] : subs) {
      if (!sub->parsed()) continue;
      if (stage == lasca::Stage::Roc && !opt.report.empty()) {
        roc_of_report(opt.report);
        return 0;
      }
      lasca::Experiment exp(resolve(opt), opt.out, opt.threads);
      if (stage) {
        const bool ran = exp.run_stage(*stage, opt.resume);
        std::cerr << lasca::to_string(*stage) << (ran ? ": done" : ": up to date") << '\n';
      } else {
        exp.run_all(opt.resume);
        std::cerr << "run: done, artifacts in " << opt.out << '\n';
      }
    }
  } catch (const lasca::StageError& e) {
    print_error(e);
    return e.cause() == lasca::ErrorCode::SchemaError || e.cause() == lasca::ErrorCode::SingleClass ? 2 : 1;
  } catch (const lasca::Error& e) {
    print_error(e);
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "IoError"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
