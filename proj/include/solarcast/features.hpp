#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace solarcast {

inline constexpr std::size_t kFeatureCount = 7;

/// Model input order. Persisted in model and dataset files; changing it is a
/// format break.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "temp_f",         "humidity_pct", "dew_point_f",       "wind_speed_mph",
    "rain_in",        "barometer_inhg", "solar_altitude_pct"};

inline constexpr std::string_view kTargetName = "solar_radiation_wm2";

/// The seven regressor inputs, in kFeatureNames order.
struct FeatureVector {
  double temp_f = 0.0;
  double humidity_pct = 0.0;
  double dew_point_f = 0.0;
  double wind_speed_mph = 0.0;
  double rain_in = 0.0;
  double barometer_inhg = 0.0;
  double solar_altitude_pct = 0.0;

  std::array<double, kFeatureCount> to_array() const {
    return {temp_f,  humidity_pct,   dew_point_f,       wind_speed_mph,
            rain_in, barometer_inhg, solar_altitude_pct};
  }

  /// Throws ValidationError on a non-finite entry.
  static FeatureVector from_array(std::span<const double> values);

  bool operator==(const FeatureVector&) const = default;
};

/// Per-feature affine standardization, fitted on a training partition.
/// A feature whose training variance is zero carries mean 0 / scale 1 and
/// passes through untouched.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  void apply(std::span<double> row) const;
  std::vector<double> applied(std::span<const double> row) const;

  bool operator==(const FeatureScaler&) const = default;
};

}  // namespace solarcast
