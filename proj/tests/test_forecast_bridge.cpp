#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "solarcast/errors.hpp"
#include "solarcast/forecast_bridge.hpp"
#include "solarcast/model_io.hpp"
#include "solarcast/synthetic.hpp"
#include "test_util.hpp"

using namespace solarcast;
using namespace std::chrono;

namespace {

/// Great-circle distance from the chord between unit vectors.
double chord_distance_m(double lat1, double lon1, double lat2, double lon2) {
  constexpr double d2r = std::numbers::pi / 180.0;
  auto vec = [&](double lat, double lon) {
    return std::array<double, 3>{std::cos(lat * d2r) * std::cos(lon * d2r),
                                 std::cos(lat * d2r) * std::sin(lon * d2r), std::sin(lat * d2r)};
  };
  const auto a = vec(lat1, lon1), b = vec(lat2, lon2);
  const double chord = std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
  return 2.0 * 6371008.8 * std::asin(chord / 2.0);
}

GridPoint point_at(double lat, double lon) {
  GridPoint p;
  p.latitude_deg = lat;
  p.longitude_deg = lon;
  p.temp_k = 295.0;
  p.dewpoint_k = 285.0;
  p.wind_u_ms = 2.0;
  p.wind_v_ms = -1.0;
  p.precip_m = 0.0;
  p.surface_pressure_pa = 101325.0;
  return p;
}

GridSnapshot grid(double lat0, double lon0, double step, std::size_t n, Instant t = {}) {
  GridSnapshot s{t, {}};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      s.points.push_back(point_at(lat0 + step * static_cast<double>(i), lon0 + step * static_cast<double>(j)));
    }
  }
  return s;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("haversine_m") {
  const GeoLocation a(0, 0), b(0, 1);
  CHECK(haversine_m(a, a) == 0.0);
  CHECK(haversine_m(a, b) == doctest::Approx(2 * std::numbers::pi * 6371008.8 / 360).epsilon(1e-9));
  CHECK(std::abs(haversine_m(a, b) - 111195.0) / 111195.0 < 0.001);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180);
  for (int i = 0; i < 1000; ++i) {
    const GeoLocation p(lat(rng), lon(rng)), q(lat(rng), lon(rng));
    CHECK(haversine_m(p, q) == haversine_m(q, p));
    CHECK(haversine_m(p, q) ==
          doctest::Approx(chord_distance_m(p.latitude_deg(), p.longitude_deg(), q.latitude_deg(),
                                           q.longitude_deg()))
              .epsilon(1e-9));
    CHECK(haversine_m(p, q) > 0.0);
  }
}

TEST_CASE("nearest_grid_point") {
  SUBCASE("coincident station") {
    const auto g = grid(40, -90, 0.25, 10);
    const auto n = nearest_grid_point(GeoLocation(41.0, -89.0), g);
    CHECK(n.point.latitude_deg == 41.0);
    CHECK(n.point.longitude_deg == -89.0);
    CHECK(n.distance_m == 0.0);
    CHECK(g.points[n.index] == n.point);
  }
  SUBCASE("matches an exhaustive scan") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> lat0(-80, 70), lon0(-179, 170), step(0.05, 1.0);
    for (int c = 0; c < 1000; ++c) {
      const double s = step(rng);
      const auto g = grid(lat0(rng), lon0(rng), s, 10);
      std::uniform_real_distribution<double> dlat(-s, 10 * s), dlon(-s, 10 * s);
      const double slat = std::clamp(g.points[0].latitude_deg + dlat(rng), -90.0, 90.0);
      const double slon = std::clamp(g.points[0].longitude_deg + dlon(rng), -180.0, 180.0);
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t i = 0; i < g.points.size(); ++i) {
        const double d = chord_distance_m(slat, slon, g.points[i].latitude_deg, g.points[i].longitude_deg);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      const auto n = nearest_grid_point(GeoLocation(slat, slon), g);
      // A different index is only acceptable for a tie within rounding.
      CHECK((n.index == best || std::abs(n.distance_m - best_d) <= 1e-9 * best_d));
      CHECK(n.distance_m == doctest::Approx(best_d).epsilon(1e-9));
    }
  }
  SUBCASE("ties go to the smaller (lat, lon)") {
    GridSnapshot s{{}, {point_at(0, 1), point_at(0, -1)}};
    auto n = nearest_grid_point(GeoLocation(0, 0), s);
    CHECK(n.point.longitude_deg == -1.0);
    CHECK(n.index == 1);
    s.points = {point_at(1, 0), point_at(-1, 0), point_at(0, 1)};
    n = nearest_grid_point(GeoLocation(0, 0), s);
    CHECK(n.point.latitude_deg == -1.0);
  }
  SUBCASE("reference grid point is chosen inside its cell") {
    const double step = 0.25;
    const GeoLocation ref = kReferenceGridPoint;
    const auto g = grid(ref.latitude_deg() - 4 * step, ref.longitude_deg() - 4 * step, step, 9);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> off(-0.49 * step, 0.49 * step);
    for (int i = 0; i < 500; ++i) {
      const auto n = nearest_grid_point(GeoLocation(ref.latitude_deg() + off(rng), ref.longitude_deg() + off(rng)), g);
      CHECK(n.point.latitude_deg == doctest::Approx(42.56000137).epsilon(1e-12));
      CHECK(n.point.longitude_deg == doctest::Approx(-83.63999939).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(nearest_grid_point(GeoLocation(0, 0), GridSnapshot{}), ValidationError);
}

TEST_CASE("unit conversions") {
  CHECK(kelvin_to_fahrenheit(273.15) == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(kelvin_to_fahrenheit(373.15) == doctest::Approx(212.0).epsilon(1e-12));
  CHECK(ms_to_mph(std::hypot(3.0, 4.0)) == doctest::Approx(11.184681460499998).epsilon(1e-12));
  CHECK(metres_to_inches(0.0254) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(pascal_to_inhg(3386.389) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(1e-3, 1e5);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng);
    CHECK(rel_err(fahrenheit_to_kelvin(kelvin_to_fahrenheit(x)), x) < 1e-9);
    CHECK(rel_err(kelvin_to_fahrenheit(fahrenheit_to_kelvin(x)), x) < 1e-9);
    CHECK(rel_err(mph_to_ms(ms_to_mph(x)), x) < 1e-9);
    CHECK(rel_err(inches_to_metres(metres_to_inches(x)), x) < 1e-9);
    CHECK(rel_err(inhg_to_pascal(pascal_to_inhg(x)), x) < 1e-9);
  }
}

TEST_CASE("Magnus humidity") {
  for (double t = -40; t <= 50; t += 0.5) {
    CHECK(magnus_relative_humidity(t, t) == doctest::Approx(100.0).epsilon(1e-12));
    for (double td = t - 60; td <= t; td += 0.5) {
      const double rh = magnus_relative_humidity(t, td);
      CHECK(rh >= 0.0);
      CHECK(rh <= 100.0);
    }
  }
  CHECK(magnus_relative_humidity(20, 21) == 100.0);
  // Saturation vapour pressure ratio at 20 °C / 10 °C with the same constants.
  const double expected = 100 * std::exp(17.625 * 10 / (243.04 + 10)) / std::exp(17.625 * 20 / (243.04 + 20));
  CHECK(magnus_relative_humidity(20, 10) == doctest::Approx(expected).epsilon(1e-12));
  for (double t = -30; t <= 45; t += 5) {
    for (double rh = 5; rh <= 100; rh += 5) {
      CHECK(magnus_relative_humidity(t, magnus_dewpoint(t, rh)) == doctest::Approx(rh).epsilon(1e-9));
    }
  }
}

TEST_CASE("to_features") {
  const GeoLocation station(42.5601, -83.6399);
  const Instant t = parse_timestamp("2024-06-21T17:30:00Z");
  GridPoint p = point_at(42.56, -83.64);
  p.temp_k = 273.15;
  p.dewpoint_k = 273.15;
  p.wind_u_ms = 3;
  p.wind_v_ms = 4;
  p.precip_m = 0.001;
  p.surface_pressure_pa = 3386.389 * 30;
  const auto f = to_features(p, station, t);
  CHECK(f.temp_f == doctest::Approx(32.0));
  CHECK(f.dew_point_f == doctest::Approx(32.0));
  CHECK(f.humidity_pct == doctest::Approx(100.0));
  CHECK(f.wind_speed_mph == doctest::Approx(11.1847).epsilon(1e-5));
  CHECK(f.rain_in == doctest::Approx(0.0393700787402));
  CHECK(f.barometer_inhg == doctest::Approx(30.0));
  CHECK(f.solar_altitude_pct == solar_altitude_ratio(station, t).value());

  p.dewpoint_k = p.temp_k + 0.6;
  CHECK_THROWS_AS(to_features(p, station, t), ValidationError);
  p.dewpoint_k = p.temp_k + 0.4;
  CHECK(to_features(p, station, t).humidity_pct == 100.0);
  p.temp_k = -1;
  CHECK_THROWS_AS(to_features(p, station, t), ValidationError);
}

TEST_CASE("grid snapshot files") {
  testutil::TempDir dir;
  const Instant t1 = parse_timestamp("2024-06-21T18:00:00Z");
  const Instant t0 = parse_timestamp("2024-06-21T12:00:00Z");
  std::vector<GridSnapshot> snaps{grid(42, -84, 0.25, 3, t1), grid(42, -84, 0.25, 2, t0)};
  snaps[0].points[4].temp_k = 301.123456789012345;
  write_grid_snapshots(dir / "g.jsonl", snaps);
  const auto back = read_grid_snapshots(dir / "g.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0] == snaps[1]);
  CHECK(back[1] == snaps[0]);

  std::ofstream(dir / "bad.jsonl") << "{\"valid_time\":\"2024-06-21T18:00:00Z\",\"latitude_deg\":1}\n";
  CHECK_THROWS_AS(read_grid_snapshots(dir / "bad.jsonl"), FormatError);
  std::ofstream(dir / "neg.jsonl")
      << R"({"valid_time":"2024-06-21T18:00:00Z","latitude_deg":1,"longitude_deg":2,"temp_k":290,)"
      << R"("dewpoint_k":280,"wind_u_ms":0,"wind_v_ms":0,"precip_m":-1,"surface_pressure_pa":1e5})" << "\n";
  CHECK_THROWS_AS(read_grid_snapshots(dir / "neg.jsonl"), ValidationError);
  CHECK_THROWS_AS(read_grid_snapshots(dir / "absent.jsonl"), IoError);
}

TEST_CASE("predict") {
  testutil::TempDir dir;
  const GeoLocation station(42.5601, -83.6399);
  // 7 -> 1 -> 1: hidden = relu(w . x + b1), output = 2 * hidden - 5.
  MLPConfig cfg;
  cfg.hidden_widths = {1};
  Matrix w1(1, kFeatureCount);
  const std::array<double, kFeatureCount> w{0.5, -0.1, 0.2, 1.0, -3.0, 2.0, 400.0};
  std::copy(w.begin(), w.end(), w1.flat().begin());
  Matrix w2(1, 1);
  w2(0, 0) = 2.0;
  const MLPModel model(cfg, {{w1, {1.0}}, {w2, {-5.0}}});
  auto hand = [&](const FeatureVector& f) {
    const auto x = f.to_array();
    double z = 1.0;
    for (std::size_t j = 0; j < kFeatureCount; ++j) z += w[j] * x[j];
    return 2.0 * std::max(0.0, z) - 5.0;
  };

  const Instant noon = solar_noon(station, sys_days{year{2024} / 6 / 21});
  const auto day = grid(42.0, -84.0, 0.25, 5, noon);

  SUBCASE("hand evaluation") {
    const auto r = predict(ModelFile{model, std::nullopt, feature_order_for(kFeatureCount)}, day, station);
    const auto expected = bridge(station, day);
    CHECK(r.input.features == expected.features);
    CHECK(r.model_output_wm2 == doctest::Approx(hand(expected.features)).epsilon(1e-12));
    CHECK(r.prediction_wm2 == std::max(0.0, r.model_output_wm2));
    CHECK(r.sun_altitude_deg > 60);
    CHECK(r.potential_irradiance_wm2 == potential_irradiance(r.sun_altitude_deg));
    CHECK(r.clear_sky_index == clear_sky_index(r.prediction_wm2, r.potential_irradiance_wm2));
    CHECK_FALSE(r.scaler_applied);
  }
  SUBCASE("stored scaler is applied") {
    FeatureScaler sc{{50, 50, 40, 5, 0, 30, 0.5}, {10, 20, 10, 3, 1, 1, 0.25}};
    const auto r = predict(ModelFile{model, sc, feature_order_for(kFeatureCount)}, day, station);
    CHECK(r.scaler_applied);
    CHECK(r.model_output_wm2 ==
          doctest::Approx(hand(FeatureVector::from_array(sc.applied(r.input.features.to_array())))).epsilon(1e-12));
    // Reported features stay in station units.
    CHECK(r.input.features == bridge(station, day).features);
  }
  SUBCASE("night predicts zero") {
    MLPConfig relu_cfg = cfg;
    relu_cfg.final_relu = true;
    Matrix big(1, 1);
    big(0, 0) = 2.0;
    const MLPModel relu_model(relu_cfg, {{w1, {1.0}}, {big, {500.0}}});
    const auto night = grid(42.0, -84.0, 0.25, 5, noon + hours{12});
    const auto r = predict(ModelFile{relu_model, std::nullopt, feature_order_for(kFeatureCount)}, night, station);
    CHECK(r.sun_altitude_deg < 0);
    CHECK(r.model_output_wm2 > 0);
    CHECK(r.prediction_wm2 == 0.0);
    CHECK(r.clear_sky_index == 0.0);
  }
  SUBCASE("feature order mismatch") {
    auto order = feature_order_for(kFeatureCount);
    std::swap(order[0], order[1]);
    CHECK_THROWS_AS(predict(ModelFile{model, std::nullopt, order}, day, station), FormatError);
  }
  SUBCASE("from files") {
    save_model(dir / "m.bin", model);
    const auto night = grid(42.0, -84.0, 0.25, 5, noon + hours{12});
    write_grid_snapshots(dir / "g.jsonl", std::vector<GridSnapshot>{day, night});
    const auto r = predict(dir / "m.bin", dir / "g.jsonl", station, noon);
    CHECK(r.valid_time == noon);
    CHECK(r.model_output_wm2 == doctest::Approx(hand(bridge(station, day).features)).epsilon(1e-12));
    CHECK(predict(dir / "m.bin", dir / "g.jsonl", station, noon) .prediction_wm2 == r.prediction_wm2);
    CHECK_THROWS_AS(predict(dir / "m.bin", dir / "g.jsonl", station, std::nullopt), ValidationError);
    CHECK_THROWS_AS(predict(dir / "m.bin", dir / "g.jsonl", station, noon + hours{1}), ValidationError);

    const auto json = nlohmann::json::parse(prediction_to_json(r));
    CHECK(json.at("prediction_wm2").get<double>() == r.prediction_wm2);
    CHECK(json.at("valid_time").get<std::string>() == format_rfc3339(noon));
  }
}
