#pragma once

#include <chrono>
#include <cstdint>
#include <vector>

#include "solarcast/dataset.hpp"
#include "solarcast/ingest.hpp"
#include "solarcast/solar_geometry.hpp"

namespace solarcast {

/// Grid node nearest the reference station; default synthetic location.
inline const GeoLocation kReferenceGridPoint{42.56000137, -83.63999939};

/// Irradiance fraction that survives humidity and rain, in (0, 1].
double synthetic_attenuation(double humidity_pct, double rain_in);

struct SyntheticOptions {
  std::size_t count = 2000;
  std::uint64_t seed = 1;
  GeoLocation station = kReferenceGridPoint;
  Instant start = std::chrono::sys_days{std::chrono::year{2024} / 6 / 1};
  std::chrono::seconds span = std::chrono::days{30};
  /// Fixed spacing between observations; zero draws instants uniformly
  /// over [start, start + span).
  std::chrono::seconds cadence{0};
  double noise_wm2 = 5.0;
};

/// Station reports whose radiation is potential_irradiance(altitude) *
/// synthetic_attenuation(humidity, rain) + Gaussian noise, floored at 0
/// (exactly 0 with the sun down).
std::vector<StationReport> synthetic_reports(const SyntheticOptions& options);

/// The same generator, already joined with the solar feature.
std::vector<Sample> synthetic_samples(const SyntheticOptions& options);

}  // namespace solarcast
