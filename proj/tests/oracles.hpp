#pragma once

// Reference formulas kept separate from the library code paths they check.

#include <chrono>
#include <cmath>
#include <numbers>

namespace oracle {

inline constexpr double kDeg = std::numbers::pi / 180.0;

/// Solar declination from the Astronomical Almanac low-precision sun
/// (ecliptic longitude + obliquity), about 0.01 degree accurate.
inline double almanac_declination_deg(std::chrono::sys_seconds t) {
  const double unix_s = static_cast<double>(t.time_since_epoch().count());
  const double n = unix_s / 86400.0 + 2440587.5 - 2451545.0;
  const double L = 280.460 + 0.9856474 * n;
  const double g = (357.528 + 0.9856003 * n) * kDeg;
  const double lambda = (L + 1.915 * std::sin(g) + 0.020 * std::sin(2 * g)) * kDeg;
  const double eps = (23.439 - 0.0000004 * n) * kDeg;
  return std::asin(std::sin(eps) * std::sin(lambda)) / kDeg;
}

/// Altitude of the sun at local apparent noon.
inline double noon_altitude_deg(double lat_deg, double declination_deg) {
  return 90.0 - std::abs(lat_deg - declination_deg);
}

inline double haurwitz(double altitude_deg) {
  if (altitude_deg <= 0) return 0.0;
  const double s = std::sin(altitude_deg * kDeg);
  return 1098.0 * s * std::exp(-0.057 / s);
}

}  // namespace oracle
