#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "solarcast/features.hpp"
#include "solarcast/model_io.hpp"
#include "solarcast/solar_geometry.hpp"
#include "solarcast/time.hpp"

namespace solarcast {

/// Forecast variables at one grid node, in the forecast model's SI units.
struct GridPoint {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
  double temp_k = 0.0;               ///< 2 m temperature
  double dewpoint_k = 0.0;           ///< 2 m dewpoint
  double wind_u_ms = 0.0;            ///< 10 m eastward wind
  double wind_v_ms = 0.0;            ///< 10 m northward wind
  double precip_m = 0.0;             ///< accumulated precipitation
  double surface_pressure_pa = 0.0;

  /// temp_k > 0, pressure > 0, precip >= 0, coordinates in range, finite.
  void validate() const;
  GeoLocation location() const { return {latitude_deg, longitude_deg}; }
  bool operator==(const GridPoint&) const = default;
};

struct GridSnapshot {
  Instant valid_time{};
  std::vector<GridPoint> points;

  bool operator==(const GridSnapshot&) const = default;
};

/// Grid snapshot file: JSON Lines, one grid point per line:
///
///   {"valid_time":"2024-06-21T18:00:00Z","latitude_deg":42.56000137,
///    "longitude_deg":-83.63999939,"temp_k":295.4,"dewpoint_k":285.1,
///    "wind_u_ms":2.1,"wind_v_ms":-0.7,"precip_m":0.0,
///    "surface_pressure_pa":98950.0}
///
/// Lines sharing a valid_time form one snapshot. Blank lines are ignored.
/// Returned snapshots are ordered by valid_time.
std::vector<GridSnapshot> read_grid_snapshots(const std::filesystem::path& path);
void write_grid_snapshots(const std::filesystem::path& path,
                          std::span<const GridSnapshot> snapshots);

/// IUGG mean Earth radius.
inline constexpr double kEarthRadiusM = 6371008.8;

double haversine_m(const GeoLocation& a, const GeoLocation& b);

struct NearestPoint {
  GridPoint point;
  std::size_t index = 0;
  double distance_m = 0.0;
};

/// Minimum haversine distance; exact ties go to the smaller (lat, lon).
/// Throws ValidationError on an empty snapshot.
NearestPoint nearest_grid_point(const GeoLocation& station, const GridSnapshot& snapshot);

double kelvin_to_fahrenheit(double k);
double fahrenheit_to_kelvin(double f);
double ms_to_mph(double ms);
double mph_to_ms(double mph);
double metres_to_inches(double m);
double inches_to_metres(double in);
double pascal_to_inhg(double pa);
double inhg_to_pascal(double inhg);

inline constexpr double kMagnusA = 17.625;
inline constexpr double kMagnusB = 243.04;  // °C

/// Relative humidity (%) from temperature and dewpoint in °C, clamped to [0, 100].
double magnus_relative_humidity(double temp_c, double dewpoint_c);
/// Dewpoint (°C) for a temperature (°C) and relative humidity (%) in (0, 100].
double magnus_dewpoint(double temp_c, double rh_pct);

/// Converts one grid point into station-unit model inputs; the solar feature
/// is evaluated at the station. Throws ValidationError when the dewpoint is
/// above temperature by more than 0.5 K.
FeatureVector to_features(const GridPoint& point, const GeoLocation& station, Instant valid_time);

struct BridgeOutput {
  FeatureVector features;
  GeoLocation source_point{0.0, 0.0};
  double distance_m = 0.0;
};

BridgeOutput bridge(const GeoLocation& station, const GridSnapshot& snapshot);

struct PredictionReport {
  Instant valid_time{};
  GeoLocation station{0.0, 0.0};
  BridgeOutput input;
  bool scaler_applied = false;
  double model_output_wm2 = 0.0;  ///< raw network output
  double prediction_wm2 = 0.0;    ///< floored at 0; 0 while the sun is down
  double sun_altitude_deg = 0.0;
  double potential_irradiance_wm2 = 0.0;
  double clear_sky_index = 0.0;
};

/// Throws FormatError if the model's feature order is not the station order.
PredictionReport predict(const ModelFile& model, const GridSnapshot& snapshot,
                         const GeoLocation& station);

/// Picks the snapshot at `time`, or the only snapshot when time is empty.
PredictionReport predict(const std::filesystem::path& model_path,
                         const std::filesystem::path& grid_path, const GeoLocation& station,
                         std::optional<Instant> time);

std::string prediction_to_json(const PredictionReport& report);

}  // namespace solarcast
