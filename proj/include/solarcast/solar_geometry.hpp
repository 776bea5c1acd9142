#pragma once

#include <chrono>

#include "solarcast/time.hpp"

namespace solarcast {

/// Latitude/longitude in degrees; out-of-range values are rejected at
/// construction.
class GeoLocation {
 public:
  GeoLocation(double latitude_deg, double longitude_deg);

  double latitude_deg() const noexcept { return lat_; }
  double longitude_deg() const noexcept { return lon_; }

  bool operator==(const GeoLocation&) const = default;

 private:
  double lat_;
  double lon_;
};

struct SunPosition {
  double altitude_deg = 0.0;     ///< [-90, 90], no refraction correction
  double azimuth_deg = 0.0;      ///< [0, 360), clockwise from north
  double declination_deg = 0.0;
  double hour_angle_deg = 0.0;   ///< [-180, 180), zero at local apparent noon
};

/// Current altitude over the same day's solar-noon altitude, clamped to [0, 1].
class SolarAltitudeRatio {
 public:
  explicit SolarAltitudeRatio(double v);
  double value() const noexcept { return v_; }

 private:
  double v_;
};

/// Low-precision NOAA ephemeris (fractional-year series for declination and
/// equation of time). Valid for 1950..2100; throws ValidationError outside it.
SunPosition sun_position(const GeoLocation& loc, Instant instant);

/// Instant of maximum solar altitude on the given local solar day, i.e. the
/// maximum nearest to 12:00 local mean solar time of `date`. Rounded to the
/// nearest second.
Instant solar_noon(const GeoLocation& loc, std::chrono::sys_days date);

/// The local mean-solar calendar day containing `instant`.
std::chrono::sys_days solar_day(const GeoLocation& loc, Instant instant);

SolarAltitudeRatio solar_altitude_ratio(const GeoLocation& loc, Instant instant);

/// Haurwitz clear-sky global horizontal irradiance, W/m².
inline constexpr double kHaurwitzScale = 1098.0;
inline constexpr double kHaurwitzExtinction = 0.057;
double potential_irradiance(double altitude_deg);
inline double potential_irradiance(const SunPosition& pos) {
  return potential_irradiance(pos.altitude_deg);
}

/// measured / potential, clamped to [0, 1.5]; 0 when potential is 0.
inline constexpr double kClearSkyIndexCap = 1.5;
double clear_sky_index(double measured_wm2, double potential_wm2);

}  // namespace solarcast
