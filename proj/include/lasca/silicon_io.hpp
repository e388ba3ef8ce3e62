#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lasca/design_io.hpp"
#include "lasca/io.hpp"
#include "lasca/silicon.hpp"

namespace lasca {

inline nlohmann::json trojan_to_json(const TrojanSpec& t) {
  return {{"kind", to_string(t.kind)},
          {"target_net", t.target_net},
          {"size_class", to_string(t.size_class)},
          {"delay_delta_ps", t.delay_delta_ps}};
}

inline TrojanSpec trojan_from_json(const nlohmann::json& j) {
  return TrojanSpec{parse_trojan_kind(j.at("kind").get<std::string>()), j.at("target_net").get<std::string>(),
                    parse_size_class(j.at("size_class").get<std::string>()), j.at("delay_delta_ps").get<double>()};
}

inline nlohmann::json silicon_config_to_json(const SiliconConfig& c) {
  return {{"skew", {{"x_pct", c.skew.x_pct}, {"y_pct", c.skew.y_pct}}},
          {"drift", {{"cell", c.drift.cell}, {"drive", c.drift.drive}, {"layer", c.drift.layer}}},
          {"pv", {{"sigma_d", c.pv.sigma_d}}},
          {"voltage",
           {{"v_nom", c.voltage.v_nom},
            {"mean_drop", c.voltage.mean_drop},
            {"sd_drop", c.voltage.sd_drop},
            {"max_drop", c.voltage.max_drop},
            {"spatial_amplitude", c.voltage.spatial_amplitude},
            {"alpha", c.voltage.alpha}}},
          {"persistent_derivatives", c.persistent_derivatives},
          {"tp_pin_cap_ff", c.tp_pin_cap_ff}};
}

inline SiliconConfig silicon_config_from_json(const nlohmann::json& j) {
  SiliconConfig c;
  c.skew = {j.at("skew").at("x_pct").get<double>(), j.at("skew").at("y_pct").get<double>()};
  const auto& d = j.at("drift");
  d.at("cell").get_to(c.drift.cell);
  d.at("drive").get_to(c.drift.drive);
  d.at("layer").get_to(c.drift.layer);
  c.pv.sigma_d = j.at("pv").at("sigma_d").get<double>();
  const auto& v = j.at("voltage");
  c.voltage.v_nom = v.at("v_nom").get<double>();
  c.voltage.mean_drop = v.at("mean_drop").get<double>();
  c.voltage.sd_drop = v.at("sd_drop").get<double>();
  c.voltage.max_drop = v.at("max_drop").get<double>();
  c.voltage.spatial_amplitude = v.at("spatial_amplitude").get<double>();
  c.voltage.alpha = v.at("alpha").get<double>();
  c.persistent_derivatives = j.at("persistent_derivatives").get<std::vector<double>>();
  c.tp_pin_cap_ff = j.at("tp_pin_cap_ff").get<double>();
  return c;
}

inline nlohmann::json lot_to_json(const FabLot& lot) {
  nlohmann::json dies = nlohmann::json::array();
  for (const auto& d : lot.dies) {
    dies.push_back({{"die_id", d.die_id}, {"persistent_mult", d.persistent_mult}, {"rng_stream_seed", d.rng_stream_seed}});
  }
  nlohmann::json trojans = nlohmann::json::array();
  for (const auto& t : lot.trojans()) trojans.push_back(trojan_to_json(t));
  return {{"schema_version", kSchemaVersion},
          {"seed", lot.seed},
          {"skew", {{"x_pct", lot.config.skew.x_pct}, {"y_pct", lot.config.skew.y_pct}}},
          {"silicon", silicon_config_to_json(lot.config)},
          {"dies", std::move(dies)},
          {"trojans", std::move(trojans)}};
}

// The manifest references the design rather than embedding it.
inline FabLot lot_from_json(const nlohmann::json& j, const Design& design) {
  detail::check_schema_version(j, "lot manifest");
  try {
    FabLot lot;
    lot.seed = j.at("seed").get<std::uint64_t>();
    lot.config = silicon_config_from_json(j.at("silicon"));
    lot.design = design;
    lot.design.implants.clear();
    for (const auto& t : j.at("trojans")) lot.design = insert_trojan(std::move(lot.design), trojan_from_json(t));
    for (const auto& d : j.at("dies")) {
      lot.dies.push_back(Die{d.at("die_id").get<std::uint32_t>(), d.at("persistent_mult").get<double>(),
                             d.at("rng_stream_seed").get<std::uint64_t>()});
    }
    if (lot.dies.empty()) throw Error(ErrorCode::EmptyLot, "lot manifest lists no dies");
    lot.model = SiliconModel(lot.design, lot.config);
    return lot;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("malformed lot manifest: ") + e.what());
  }
}

inline void save_lot(const FabLot& lot, const std::filesystem::path& path) {
  io::write_file(path, lot_to_json(lot).dump(1) + "\n");
}

inline FabLot load_lot(const std::filesystem::path& path, const Design& design) {
  try {
    return lot_from_json(nlohmann::json::parse(io::read_file(path)), design);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what(), path.string());
  }
}

struct RawDelay {
  std::uint32_t die_id = 0;
  PathId path_id = 0;
  std::uint32_t trial = 0;
  double true_delay_ps = 0.0;
};

inline constexpr std::string_view kRawDelayHeader = "die_id,path_id,trial,true_delay_ps";

inline std::string raw_delays_to_csv(const std::vector<RawDelay>& rows) {
  std::string out(kRawDelayHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.die_id) + ',' + std::to_string(r.path_id) + ',' + std::to_string(r.trial) + ',' +
           io::format_double(r.true_delay_ps) + '\n';
  }
  return out;
}

}  // namespace lasca
