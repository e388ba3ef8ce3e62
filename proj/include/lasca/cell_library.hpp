#pragma once

// Synthetic standard-cell and metal-stack library. Values are first-order
// numbers for a 32nm-class process; a 2-input NAND at x1 with a typical load
// lands near 45 ps.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "lasca/error.hpp"

namespace lasca {

enum class CellKind : std::uint8_t { INV, NAND2, NOR2, AOI, BUF, DFF };
enum class Drive : std::uint8_t { X0, X1, X2, X4, X8, X16, X32 };
enum class Layer : std::uint8_t { M1, M2, M3, M4, M5, M6, M7 };

inline constexpr std::size_t kCellKindCount = 6;
inline constexpr std::size_t kDriveCount = 7;
inline constexpr std::size_t kLayerCount = 7;
// M7 is routed and derated like every other layer but is not a feature.
inline constexpr std::size_t kFeatureLayerCount = 6;

inline constexpr std::array<std::string_view, kCellKindCount> kCellKindNames{"INV", "NAND2", "NOR2", "AOI", "BUF", "DFF"};
inline constexpr std::array<std::string_view, kDriveCount> kDriveNames{"x0", "x1", "x2", "x4", "x8", "x16", "x32"};
inline constexpr std::array<std::string_view, kLayerCount> kLayerNames{"M1", "M2", "M3", "M4", "M5", "M6", "M7"};

constexpr std::size_t index(CellKind k) { return static_cast<std::size_t>(k); }
constexpr std::size_t index(Drive d) { return static_cast<std::size_t>(d); }
constexpr std::size_t index(Layer l) { return static_cast<std::size_t>(l); }

inline std::string_view to_string(CellKind k) { return kCellKindNames[index(k)]; }
inline std::string_view to_string(Drive d) { return kDriveNames[index(d)]; }
inline std::string_view to_string(Layer l) { return kLayerNames[index(l)]; }

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::string_view, N>& names, std::string_view what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  throw Error(ErrorCode::IoError, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

inline CellKind parse_cell_kind(std::string_view s) { return parse_enum<CellKind>(s, kCellKindNames, "cell kind"); }
inline Drive parse_drive(std::string_view s) { return parse_enum<Drive>(s, kDriveNames, "drive strength"); }
inline Layer parse_layer(std::string_view s) { return parse_enum<Layer>(s, kLayerNames, "metal layer"); }

constexpr unsigned input_count(CellKind k) {
  switch (k) {
    case CellKind::INV:
    case CellKind::BUF: return 1;
    case CellKind::NAND2:
    case CellKind::NOR2: return 2;
    case CellKind::AOI: return 3;
    case CellKind::DFF: return 2;  // pin 0 = D, pin 1 = CK
  }
  return 0;
}

inline constexpr unsigned kDffDataPin = 0;
inline constexpr unsigned kDffClockPin = 1;

namespace library {

inline constexpr std::array<double, kCellKindCount> kBaseIntrinsicPs{20.0, 28.0, 34.0, 42.0, 30.0, 62.0};
inline constexpr std::array<double, kCellKindCount> kBaseLoadCoeff{3.2, 4.0, 4.8, 5.5, 3.0, 4.0};
inline constexpr std::array<double, kCellKindCount> kBasePinCapFf{1.0, 1.2, 1.3, 1.5, 1.0, 1.1};
inline constexpr std::array<double, kDriveCount> kDriveFactor{0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0};
inline constexpr std::array<double, kDriveCount> kIntrinsicScale{1.25, 1.0, 0.95, 0.92, 0.90, 0.90, 0.92};

inline constexpr std::array<double, kLayerCount> kCapPerUm{0.16, 0.14, 0.13, 0.12, 0.115, 0.11, 0.10};
inline constexpr std::array<double, kLayerCount> kResPerUm{8.0, 6.0, 4.0, 2.5, 1.5, 1.0, 0.5};

inline constexpr double kPrimaryOutputCapFf = 2.0;

inline double intrinsic_ps(CellKind k, Drive d) { return kBaseIntrinsicPs[index(k)] * kIntrinsicScale[index(d)]; }
inline double load_coeff(CellKind k, Drive d) { return kBaseLoadCoeff[index(k)] / kDriveFactor[index(d)]; }
inline double pin_cap_ff(CellKind k, Drive d) { return kBasePinCapFf[index(k)] * std::sqrt(kDriveFactor[index(d)]); }
inline double setup_ps(Drive d) { return 18.0 + 6.0 / std::sqrt(kDriveFactor[index(d)]); }

}  // namespace library
}  // namespace lasca
