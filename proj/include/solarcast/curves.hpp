#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "solarcast/train.hpp"

namespace solarcast {

struct NamedCurve {
  std::string name;  ///< also the file stem
  std::vector<EpochStats> stats;
};

inline constexpr std::string_view kCurveCsvHeader = "epoch,mae,mse,wall_seconds,diverged,frozen";
inline constexpr std::string_view kCurveAxisLabel = "watts per square meter";

void write_curve_csv(const std::filesystem::path& path, std::span<const EpochStats> stats);
std::vector<EpochStats> read_curve_csv(const std::filesystem::path& path);

/// Line plot of per-epoch MAE, one polyline per curve.
std::string render_svg(std::span<const NamedCurve> curves, const std::string& title);

/// Writes <name>.csv and <name>.svg per curve into dir, plus comparison.svg
/// when there is more than one curve. Returns the written paths.
std::vector<std::filesystem::path> emit_curves(std::span<const NamedCurve> curves,
                                               const std::filesystem::path& dir);

}  // namespace solarcast
