#include "solarcast/solar_geometry.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "solarcast/errors.hpp"

namespace solarcast {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
constexpr int kFirstValidYear = 1950;
constexpr int kLastValidYear = 2100;

// Evaluated in continuous time (fractional unix seconds).
struct Ephemeris {
  double declination_rad;
  double eqtime_min;
};

Ephemeris ephemeris(double unix_seconds) {
  using namespace std::chrono;
  const auto whole = sys_seconds{seconds{static_cast<long long>(std::floor(unix_seconds))}};
  const auto day = floor<days>(whole);
  const year_month_day ymd{day};
  const auto jan1 = sys_days{ymd.year() / January / 1};
  const double doy = static_cast<double>((day - jan1).count()) + 1.0;
  const double hour = (unix_seconds - static_cast<double>(
                                          duration_cast<seconds>(day.time_since_epoch()).count())) /
                      3600.0;
  const double year_days = ymd.year().is_leap() ? 366.0 : 365.0;

  const double g = 2.0 * kPi / year_days * (doy - 1.0 + (hour - 12.0) / 24.0);
  const double eqtime =
      229.18 * (0.000075 + 0.001868 * std::cos(g) - 0.032077 * std::sin(g) -
                0.014615 * std::cos(2 * g) - 0.040849 * std::sin(2 * g));
  const double decl = 0.006918 - 0.399912 * std::cos(g) + 0.070257 * std::sin(g) -
                      0.006758 * std::cos(2 * g) + 0.000907 * std::sin(2 * g) -
                      0.002697 * std::cos(3 * g) + 0.00148 * std::sin(3 * g);
  return {decl, eqtime};
}

void check_window(double unix_seconds) {
  using namespace std::chrono;
  const auto whole = sys_seconds{seconds{static_cast<long long>(std::floor(unix_seconds))}};
  const int y = static_cast<int>(year_month_day{floor<days>(whole)}.year());
  if (y < kFirstValidYear || y > kLastValidYear) {
    throw ValidationError(fmt::format("year {} outside ephemeris window [{}, {}]", y,
                                      kFirstValidYear, kLastValidYear));
  }
}

SunPosition position_at(const GeoLocation& loc, double unix_seconds) {
  const Ephemeris e = ephemeris(unix_seconds);
  const double day_seconds = unix_seconds - 86400.0 * std::floor(unix_seconds / 86400.0);
  const double true_solar_min = day_seconds / 60.0 + e.eqtime_min + 4.0 * loc.longitude_deg();
  double ha_deg = std::fmod(true_solar_min / 4.0 - 180.0, 360.0);
  if (ha_deg < -180.0) ha_deg += 360.0;
  if (ha_deg >= 180.0) ha_deg -= 360.0;

  const double lat = loc.latitude_deg() * kDeg;
  const double ha = ha_deg * kDeg;
  const double sin_alt = std::clamp(std::sin(lat) * std::sin(e.declination_rad) +
                                        std::cos(lat) * std::cos(e.declination_rad) * std::cos(ha),
                                    -1.0, 1.0);
  const double az = std::atan2(std::sin(ha), std::cos(ha) * std::sin(lat) -
                                                 std::tan(e.declination_rad) * std::cos(lat)) /
                        kDeg +
                    180.0;

  SunPosition p;
  p.altitude_deg = std::asin(sin_alt) / kDeg;
  p.azimuth_deg = std::fmod(az, 360.0);
  if (p.azimuth_deg < 0.0) p.azimuth_deg += 360.0;
  if (p.azimuth_deg >= 360.0) p.azimuth_deg = 0.0;
  p.declination_deg = e.declination_rad / kDeg;
  p.hour_angle_deg = ha_deg;
  return p;
}

double unix_of(Instant t) { return static_cast<double>(t.time_since_epoch().count()); }

}  // namespace

GeoLocation::GeoLocation(double latitude_deg, double longitude_deg)
    : lat_(latitude_deg), lon_(longitude_deg) {
  if (!(latitude_deg >= -90.0 && latitude_deg <= 90.0)) {
    throw ValidationError(fmt::format("latitude {} outside [-90, 90]", latitude_deg));
  }
  if (!(longitude_deg >= -180.0 && longitude_deg <= 180.0)) {
    throw ValidationError(fmt::format("longitude {} outside [-180, 180]", longitude_deg));
  }
}

SolarAltitudeRatio::SolarAltitudeRatio(double v) : v_(std::clamp(v, 0.0, 1.0)) {
  if (std::isnan(v)) throw ValidationError("solar altitude ratio is NaN");
}

SunPosition sun_position(const GeoLocation& loc, Instant instant) {
  const double t = unix_of(instant);
  check_window(t);
  return position_at(loc, t);
}

std::chrono::sys_days solar_day(const GeoLocation& loc, Instant instant) {
  using namespace std::chrono;
  const auto offset = seconds{static_cast<long long>(std::lround(loc.longitude_deg() * 240.0))};
  return floor<days>(instant + offset);
}

Instant solar_noon(const GeoLocation& loc, std::chrono::sys_days date) {
  using namespace std::chrono;
  const double midnight = static_cast<double>(sys_seconds{date}.time_since_epoch().count());
  check_window(midnight);

  // Hour angle zero: 720 - 4*lon - EoT minutes after UTC midnight. EoT depends
  // weakly on the time itself, so iterate.
  double estimate = midnight + (720.0 - 4.0 * loc.longitude_deg()) * 60.0;
  for (int i = 0; i < 3; ++i) {
    estimate = midnight +
               (720.0 - 4.0 * loc.longitude_deg() - ephemeris(estimate).eqtime_min) * 60.0;
  }

  // The declination drifts during the day, so the altitude maximum sits a
  // little off hour-angle zero. Golden-section on altitude picks it up.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = estimate - 1200.0;
  double hi = estimate + 1200.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = position_at(loc, a).altitude_deg;
  double fb = position_at(loc, b).altitude_deg;
  while (hi - lo > 0.5) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = position_at(loc, b).altitude_deg;
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = position_at(loc, a).altitude_deg;
    }
  }
  const auto best = static_cast<long long>(std::llround(0.5 * (lo + hi)));
  return Instant{seconds{best}};
}

SolarAltitudeRatio solar_altitude_ratio(const GeoLocation& loc, Instant instant) {
  const double alt = sun_position(loc, instant).altitude_deg;
  const double noon_alt = sun_position(loc, solar_noon(loc, solar_day(loc, instant))).altitude_deg;
  if (noon_alt <= 0.0 || alt <= 0.0) return SolarAltitudeRatio{0.0};
  return SolarAltitudeRatio{alt / noon_alt};
}

double potential_irradiance(double altitude_deg) {
  if (!(altitude_deg > 0.0)) return 0.0;
  const double s = std::sin(altitude_deg * kDeg);
  return kHaurwitzScale * s * std::exp(-kHaurwitzExtinction / s);
}

double clear_sky_index(double measured_wm2, double potential_wm2) {
  if (!(measured_wm2 >= 0.0) || !(potential_wm2 >= 0.0)) {
    throw ValidationError(fmt::format(
        "clear-sky index needs non-negative irradiances, got measured={} potential={}",
        measured_wm2, potential_wm2));
  }
  if (potential_wm2 == 0.0) return 0.0;
  return std::min(measured_wm2 / potential_wm2, kClearSkyIndexCap);
}

}  // namespace solarcast
