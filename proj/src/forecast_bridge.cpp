#include "solarcast/forecast_bridge.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <tuple>

#include "json.hpp"
#include "solarcast/errors.hpp"

namespace solarcast {

namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMphPerMs = 2.2369362921;
constexpr double kInchesPerMetre = 39.3700787402;
constexpr double kPascalPerInHg = 3386.389;
constexpr double kZeroCelsius = 273.15;
constexpr double kFeetPerMetre = 3.28083989501;

}  // namespace

void GridPoint::validate() const {
  const double all[] = {latitude_deg, longitude_deg, temp_k,  dewpoint_k,
                        wind_u_ms,    wind_v_ms,     precip_m, surface_pressure_pa};
  for (const double v : all) {
    if (!std::isfinite(v)) throw ValidationError("grid point has a non-finite value");
  }
  GeoLocation{latitude_deg, longitude_deg};
  if (!(temp_k > 0.0)) throw ValidationError(fmt::format("temp_k {} must be > 0", temp_k));
  if (!(dewpoint_k > 0.0)) throw ValidationError(fmt::format("dewpoint_k {} must be > 0", dewpoint_k));
  if (!(surface_pressure_pa > 0.0)) {
    throw ValidationError(fmt::format("surface_pressure_pa {} must be > 0", surface_pressure_pa));
  }
  if (!(precip_m >= 0.0)) throw ValidationError(fmt::format("precip_m {} must be >= 0", precip_m));
}

std::vector<GridSnapshot> read_grid_snapshots(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  std::map<Instant, GridSnapshot> by_time;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const Instant t = parse_timestamp(j.at("valid_time").get<std::string>());
      GridPoint p;
      p.latitude_deg = j.at("latitude_deg").get<double>();
      p.longitude_deg = j.at("longitude_deg").get<double>();
      p.temp_k = j.at("temp_k").get<double>();
      p.dewpoint_k = j.at("dewpoint_k").get<double>();
      p.wind_u_ms = j.at("wind_u_ms").get<double>();
      p.wind_v_ms = j.at("wind_v_ms").get<double>();
      p.precip_m = j.at("precip_m").get<double>();
      p.surface_pressure_pa = j.at("surface_pressure_pa").get<double>();
      p.validate();
      auto& snap = by_time[t];
      snap.valid_time = t;
      snap.points.push_back(p);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    } catch (const ValidationError& e) {
      throw FormatError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  std::vector<GridSnapshot> out;
  for (auto& [t, snap] : by_time) out.push_back(std::move(snap));
  return out;
}

void write_grid_snapshots(const fs::path& path, std::span<const GridSnapshot> snapshots) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  for (const auto& snap : snapshots) {
    for (const auto& p : snap.points) {
      nlohmann::ordered_json j;
      j["valid_time"] = format_rfc3339(snap.valid_time);
      j["latitude_deg"] = p.latitude_deg;
      j["longitude_deg"] = p.longitude_deg;
      j["temp_k"] = p.temp_k;
      j["dewpoint_k"] = p.dewpoint_k;
      j["wind_u_ms"] = p.wind_u_ms;
      j["wind_v_ms"] = p.wind_v_ms;
      j["precip_m"] = p.precip_m;
      j["surface_pressure_pa"] = p.surface_pressure_pa;
      out << j.dump() << '\n';
    }
  }
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

double haversine_m(const GeoLocation& a, const GeoLocation& b) {
  const double phi1 = a.latitude_deg() * kDeg;
  const double phi2 = b.latitude_deg() * kDeg;
  const double s_lat = std::sin((phi2 - phi1) / 2.0);
  const double s_lon = std::sin((b.longitude_deg() - a.longitude_deg()) * kDeg / 2.0);
  const double h = s_lat * s_lat + std::cos(phi1) * std::cos(phi2) * s_lon * s_lon;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

NearestPoint nearest_grid_point(const GeoLocation& station, const GridSnapshot& snapshot) {
  if (snapshot.points.empty()) throw ValidationError("grid snapshot has no points");
  NearestPoint best;
  bool have = false;
  for (std::size_t i = 0; i < snapshot.points.size(); ++i) {
    const GridPoint& p = snapshot.points[i];
    const double d = haversine_m(station, p.location());
    const bool better =
        !have || d < best.distance_m ||
        (d == best.distance_m && std::tie(p.latitude_deg, p.longitude_deg) <
                                     std::tie(best.point.latitude_deg, best.point.longitude_deg));
    if (better) {
      best = {p, i, d};
      have = true;
    }
  }
  return best;
}

double kelvin_to_fahrenheit(double k) { return (k - kZeroCelsius) * 9.0 / 5.0 + 32.0; }
double fahrenheit_to_kelvin(double f) { return (f - 32.0) * 5.0 / 9.0 + kZeroCelsius; }
double ms_to_mph(double ms) { return ms * kMphPerMs; }
double mph_to_ms(double mph) { return mph / kMphPerMs; }
double metres_to_inches(double m) { return m * kInchesPerMetre; }
double inches_to_metres(double in) { return in / kInchesPerMetre; }
double pascal_to_inhg(double pa) { return pa / kPascalPerInHg; }
double inhg_to_pascal(double inhg) { return inhg * kPascalPerInHg; }

double magnus_relative_humidity(double temp_c, double dewpoint_c) {
  const double rh = 100.0 * std::exp(kMagnusA * dewpoint_c / (kMagnusB + dewpoint_c)) /
                    std::exp(kMagnusA * temp_c / (kMagnusB + temp_c));
  return std::clamp(rh, 0.0, 100.0);
}

double magnus_dewpoint(double temp_c, double rh_pct) {
  if (!(rh_pct > 0.0 && rh_pct <= 100.0)) {
    throw ValidationError(fmt::format("relative humidity {} outside (0, 100]", rh_pct));
  }
  const double gamma = std::log(rh_pct / 100.0) + kMagnusA * temp_c / (kMagnusB + temp_c);
  return kMagnusB * gamma / (kMagnusA - gamma);
}

FeatureVector to_features(const GridPoint& p, const GeoLocation& station, Instant valid_time) {
  p.validate();
  if (p.dewpoint_k > p.temp_k + 0.5) {
    throw ValidationError(fmt::format("dewpoint {} K exceeds temperature {} K (supersaturation)",
                                      p.dewpoint_k, p.temp_k));
  }
  FeatureVector f;
  f.temp_f = kelvin_to_fahrenheit(p.temp_k);
  f.dew_point_f = kelvin_to_fahrenheit(p.dewpoint_k);
  f.humidity_pct =
      magnus_relative_humidity(p.temp_k - kZeroCelsius, p.dewpoint_k - kZeroCelsius);
  f.wind_speed_mph = ms_to_mph(std::hypot(p.wind_u_ms, p.wind_v_ms));
  f.rain_in = metres_to_inches(p.precip_m);
  f.barometer_inhg = pascal_to_inhg(p.surface_pressure_pa);
  f.solar_altitude_pct = solar_altitude_ratio(station, valid_time).value();
  return f;
}

BridgeOutput bridge(const GeoLocation& station, const GridSnapshot& snapshot) {
  const NearestPoint nearest = nearest_grid_point(station, snapshot);
  return {to_features(nearest.point, station, snapshot.valid_time), nearest.point.location(),
          nearest.distance_m};
}

PredictionReport predict(const ModelFile& mf, const GridSnapshot& snapshot,
                         const GeoLocation& station) {
  const auto expected = feature_order_for(kFeatureCount);
  if (mf.feature_order != expected) {
    throw FormatError(fmt::format("model feature order [{}] does not match the bridge order",
                                  fmt::join(mf.feature_order, ", ")));
  }
  PredictionReport r;
  r.valid_time = snapshot.valid_time;
  r.station = station;
  r.input = bridge(station, snapshot);

  auto x = r.input.features.to_array();
  if (mf.scaler) {
    mf.scaler->apply(x);
    r.scaler_applied = true;
  }
  r.model_output_wm2 = predict_one(mf.model, x);
  r.sun_altitude_deg = sun_position(station, snapshot.valid_time).altitude_deg;
  r.potential_irradiance_wm2 = potential_irradiance(r.sun_altitude_deg);
  r.prediction_wm2 = r.sun_altitude_deg > 0.0 ? std::max(0.0, r.model_output_wm2) : 0.0;
  r.clear_sky_index = clear_sky_index(r.prediction_wm2, r.potential_irradiance_wm2);
  return r;
}

PredictionReport predict(const fs::path& model_path, const fs::path& grid_path,
                         const GeoLocation& station, std::optional<Instant> time) {
  const ModelFile mf = load_model(model_path);
  const auto snapshots = read_grid_snapshots(grid_path);
  if (snapshots.empty()) throw ValidationError(fmt::format("{} has no grid points", grid_path.string()));
  if (!time) {
    if (snapshots.size() != 1) {
      throw ValidationError(fmt::format("{} holds {} valid times; pass --time",
                                        grid_path.string(), snapshots.size()));
    }
    return predict(mf, snapshots.front(), station);
  }
  for (const auto& s : snapshots) {
    if (s.valid_time == *time) return predict(mf, s, station);
  }
  throw ValidationError(
      fmt::format("{} has no snapshot at {}", grid_path.string(), format_rfc3339(*time)));
}

std::string prediction_to_json(const PredictionReport& r) {
  nlohmann::ordered_json j;
  j["valid_time"] = format_rfc3339(r.valid_time);
  j["station"] = {{"latitude_deg", r.station.latitude_deg()},
                  {"longitude_deg", r.station.longitude_deg()}};
  j["source_point"] = {{"latitude_deg", r.input.source_point.latitude_deg()},
                       {"longitude_deg", r.input.source_point.longitude_deg()}};
  j["distance_m"] = r.input.distance_m;
  j["distance_ft"] = r.input.distance_m * kFeetPerMetre;
  nlohmann::ordered_json features;
  const auto values = r.input.features.to_array();
  for (std::size_t i = 0; i < kFeatureCount; ++i) features[std::string(kFeatureNames[i])] = values[i];
  j["features"] = features;
  j["scaler_applied"] = r.scaler_applied;
  j["model_output_wm2"] = r.model_output_wm2;
  j["prediction_wm2"] = r.prediction_wm2;
  j["sun_altitude_deg"] = r.sun_altitude_deg;
  j["potential_irradiance_wm2"] = r.potential_irradiance_wm2;
  j["clear_sky_index"] = r.clear_sky_index;
  return j.dump();
}

}  // namespace solarcast
