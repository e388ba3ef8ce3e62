#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "lasca/error.hpp"

namespace lasca {

// TP: gate inserted in series on a victim net. TT: extra capacitive tap on an
// observed net's driver.
enum class TrojanKind : std::uint8_t { TP, TT };
enum class SizeClass : std::uint8_t { Small, Medium, Large };

inline constexpr std::array<double, 3> kDefaultTpDeltaPs{20.0, 45.0, 90.0};
inline constexpr std::array<double, 3> kDefaultTtDeltaPs{5.0, 10.0, 20.0};

inline std::string_view to_string(TrojanKind k) { return k == TrojanKind::TP ? "TP" : "TT"; }

inline std::string_view to_string(SizeClass s) {
  switch (s) {
    case SizeClass::Small: return "Small";
    case SizeClass::Medium: return "Medium";
    case SizeClass::Large: return "Large";
  }
  return "?";
}

inline TrojanKind parse_trojan_kind(std::string_view s) {
  if (s == "TP") return TrojanKind::TP;
  if (s == "TT") return TrojanKind::TT;
  throw Error(ErrorCode::IoError, "unknown trojan kind '" + std::string(s) + "'");
}

inline SizeClass parse_size_class(std::string_view s) {
  if (s == "Small") return SizeClass::Small;
  if (s == "Medium") return SizeClass::Medium;
  if (s == "Large") return SizeClass::Large;
  throw Error(ErrorCode::IoError, "unknown size class '" + std::string(s) + "'");
}

struct TrojanSpec {
  TrojanKind kind = TrojanKind::TP;
  std::string target_net;
  SizeClass size_class = SizeClass::Medium;
  double delay_delta_ps = 45.0;

  static TrojanSpec make(TrojanKind kind, std::string net, SizeClass size) {
    const auto& table = kind == TrojanKind::TP ? kDefaultTpDeltaPs : kDefaultTtDeltaPs;
    return TrojanSpec{kind, std::move(net), size, table[static_cast<std::size_t>(size)]};
  }

  [[nodiscard]] std::string label() const {
    return std::string(to_string(kind)) + "-" + std::string(to_string(size_class));
  }

  bool operator==(const TrojanSpec&) const = default;
};

}  // namespace lasca
