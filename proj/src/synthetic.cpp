#include "solarcast/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "solarcast/forecast_bridge.hpp"

namespace solarcast {

double synthetic_attenuation(double humidity_pct, double rain_in) {
  const double h = std::clamp(humidity_pct, 0.0, 100.0) / 100.0;
  return (1.0 - 0.5 * h * h * h) * std::exp(-2.0 * std::max(rain_in, 0.0));
}

std::vector<StationReport> synthetic_reports(const SyntheticOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<StationReport> out;
  out.reserve(opt.count);
  for (std::size_t i = 0; i < opt.count; ++i) {
    Instant t;
    if (opt.cadence.count() > 0) {
      t = opt.start + opt.cadence * static_cast<long long>(i);
    } else {
      t = opt.start + std::chrono::seconds{static_cast<long long>(
                          unit(rng) * static_cast<double>(opt.span.count()))};
    }
    const SunPosition sun = sun_position(opt.station, t);
    const double daylight = std::max(0.0, std::sin(sun.altitude_deg * std::numbers::pi / 180.0));

    StationReport r;
    r.last_update = format_station_time(t);
    r.temp_f = 58.0 + 22.0 * daylight + 4.0 * gauss(rng);
    r.humidity_pct = std::clamp(25.0 + 70.0 * unit(rng), 1.0, 100.0);
    const double temp_c = (r.temp_f - 32.0) * 5.0 / 9.0;
    r.dew_point_f = magnus_dewpoint(temp_c, r.humidity_pct) * 9.0 / 5.0 + 32.0;
    r.dew_point_f = std::min(r.dew_point_f, r.temp_f);
    r.wind_speed_mph = 12.0 * unit(rng);
    r.rain_in = unit(rng) < 0.8 ? 0.0 : 0.4 * unit(rng);
    r.barometer_inhg = 29.92 + 0.15 * gauss(rng);

    const double potential = potential_irradiance(sun.altitude_deg);
    const double noise = opt.noise_wm2 * gauss(rng);
    r.solar_radiation_wm2 =
        potential > 0.0
            ? std::max(0.0, potential * synthetic_attenuation(r.humidity_pct, r.rain_in) + noise)
            : 0.0;
    r.uv_index = std::round(potential / 100.0);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Sample> synthetic_samples(const SyntheticOptions& opt) {
  std::vector<Sample> out;
  out.reserve(opt.count);
  for (const auto& r : synthetic_reports(opt)) {
    out.push_back(sample_from_record(enrich(r, opt.station, parse_timestamp(r.last_update))));
  }
  return out;
}

}  // namespace solarcast
