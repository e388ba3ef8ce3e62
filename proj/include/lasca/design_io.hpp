#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "lasca/design.hpp"
#include "lasca/error.hpp"
#include "lasca/io.hpp"

namespace lasca {

inline constexpr std::string_view kSchemaVersion = "1";

namespace detail {

inline nlohmann::json subpath_json(const SubPath& sp) {
  return {{"gates", sp.gates}, {"wires", sp.wires}};
}

inline SubPath subpath_from_json(const nlohmann::json& j, SubPathKind kind) {
  return SubPath{kind, j.at("gates").get<std::vector<GateId>>(), j.at("wires").get<std::vector<WireId>>()};
}

inline void check_schema_version(const nlohmann::json& j, std::string_view what) {
  if (!j.contains("schema_version") || j["schema_version"] != kSchemaVersion) {
    throw Error(ErrorCode::SchemaError, std::string(what) + " has a missing or unsupported schema_version", "schema_version");
  }
}

}  // namespace detail

inline nlohmann::json design_to_json(const Design& d) {
  nlohmann::json gates = nlohmann::json::array();
  for (const auto& g : d.gates) {
    gates.push_back({{"id", g.id},
                     {"kind", to_string(g.kind)},
                     {"drive", to_string(g.drive)},
                     {"intrinsic_ps", g.intrinsic_ps},
                     {"load_coeff", g.load_coeff},
                     {"pin_cap_ff", g.pin_cap_ff},
                     {"x", g.x},
                     {"y", g.y},
                     {"clock", g.clock}});
  }
  nlohmann::json wires = nlohmann::json::array();
  for (const auto& w : d.wires) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : w.segments) {
      segs.push_back({{"layer", to_string(s.layer)},
                      {"length_um", s.length_um},
                      {"cap_per_um_ff", s.cap_per_um_ff},
                      {"res_per_um_ohm", s.res_per_um_ohm}});
    }
    wires.push_back({{"id", w.id}, {"driver", w.driver.str()}, {"sink", w.sink.str()}, {"segments", std::move(segs)}});
  }
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& p : d.paths) {
    paths.push_back({{"id", p.id},
                     {"endpoint_register", p.endpoint_register},
                     {"endpoint_setup_ps", p.endpoint_setup_ps},
                     {"lp", detail::subpath_json(p.lp)},
                     {"cp", detail::subpath_json(p.cp)},
                     {"dp", detail::subpath_json(p.dp)}});
  }
  return {{"schema_version", kSchemaVersion},
          {"seed", d.seed},
          {"clock_period_ps", d.clock_period_ps},
          {"primary_inputs", d.primary_inputs},
          {"primary_outputs", d.primary_outputs},
          {"registers", d.registers},
          {"gates", std::move(gates)},
          {"wires", std::move(wires)},
          {"paths", std::move(paths)}};
}

inline Design design_from_json(const nlohmann::json& j) {
  detail::check_schema_version(j, "design");
  try {
    Design d;
    d.seed = j.at("seed").get<std::uint64_t>();
    d.clock_period_ps = j.at("clock_period_ps").get<double>();
    d.primary_inputs = j.at("primary_inputs").get<std::uint32_t>();
    d.primary_outputs = j.at("primary_outputs").get<std::uint32_t>();
    d.registers = j.at("registers").get<std::vector<GateId>>();
    for (const auto& g : j.at("gates")) {
      d.gates.push_back(Gate{g.at("id").get<GateId>(), parse_cell_kind(g.at("kind").get<std::string>()),
                             parse_drive(g.at("drive").get<std::string>()), g.at("intrinsic_ps").get<double>(),
                             g.at("load_coeff").get<double>(), g.at("pin_cap_ff").get<double>(), g.at("x").get<double>(),
                             g.at("y").get<double>(), g.at("clock").get<bool>()});
      if (d.gates.back().id != d.gates.size() - 1) throw Error(ErrorCode::IoError, "gate ids must be dense and ordered");
    }
    for (const auto& w : j.at("wires")) {
      P2PWire wire;
      wire.id = w.at("id").get<WireId>();
      wire.driver = PinRef::parse(w.at("driver").get<std::string>());
      wire.sink = PinRef::parse(w.at("sink").get<std::string>());
      for (const auto& s : w.at("segments")) {
        wire.segments.push_back({parse_layer(s.at("layer").get<std::string>()), s.at("length_um").get<double>(),
                                 s.at("cap_per_um_ff").get<double>(), s.at("res_per_um_ohm").get<double>()});
      }
      if (wire.id != d.wires.size()) throw Error(ErrorCode::IoError, "wire ids must be dense and ordered");
      d.wires.push_back(std::move(wire));
    }
    for (const auto& p : j.at("paths")) {
      TimingPath path;
      path.id = p.at("id").get<PathId>();
      path.endpoint_register = p.at("endpoint_register").get<GateId>();
      path.endpoint_setup_ps = p.at("endpoint_setup_ps").get<double>();
      path.lp = detail::subpath_from_json(p.at("lp"), SubPathKind::LaunchClock);
      path.cp = detail::subpath_from_json(p.at("cp"), SubPathKind::CaptureClock);
      path.dp = detail::subpath_from_json(p.at("dp"), SubPathKind::Data);
      if (path.id != d.paths.size()) throw Error(ErrorCode::IoError, "path ids must be dense and ordered");
      d.paths.push_back(std::move(path));
    }
    d.finalize();
    d.validate();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("malformed design JSON: ") + e.what());
  }
}

inline void save_design(const Design& d, const std::filesystem::path& path) {
  io::write_file(path, design_to_json(d).dump(1) + "\n");
}

inline Design load_design(const std::filesystem::path& path) {
  try {
    return design_from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what(), path.string());
  }
}

}  // namespace lasca
