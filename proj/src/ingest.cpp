#include "solarcast/ingest.hpp"

#include <fmt/format.h>
#include <unistd.h>

#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "solarcast/errors.hpp"

namespace solarcast {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr std::string_view kDate = "dateutc";
constexpr std::string_view kTemp = "tempf";
constexpr std::string_view kHumidity = "humidity";
constexpr std::string_view kDewPoint = "dewptf";
constexpr std::string_view kWind = "windspeedmph";
constexpr std::string_view kRain = "eventrainin";
constexpr std::string_view kBarometer = "baromrelin";
constexpr std::string_view kRadiation = "solarradiation";
constexpr std::string_view kUv = "uv";

double parse_number(std::string_view field, std::string_view text) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc{} || ptr != last) {
    throw FieldTypeError(std::string(field), fmt::format("'{}' is not a number", text));
  }
  if (!std::isfinite(v)) {
    throw FieldTypeError(std::string(field), fmt::format("'{}' is not finite", text));
  }
  return v;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string percent_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out.push_back(' ');
    } else if (s[i] == '%' && i + 2 < s.size() && hex_value(s[i + 1]) >= 0 && hex_value(s[i + 2]) >= 0) {
      out.push_back(static_cast<char>(hex_value(s[i + 1]) * 16 + hex_value(s[i + 2])));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::string percent_encode(std::string_view s) {
  std::string out;
  for (const char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(c);
    } else if (c == ' ') {
      out.push_back('+');
    } else {
      out += fmt::format("%{:02X}", u);
    }
  }
  return out;
}

// Field lookup abstracted over both payload encodings.
struct FieldSource {
  std::function<std::optional<std::string>(std::string_view)> text;
  std::function<std::optional<double>(std::string_view)> number;
};

FieldSource json_source(const Json& obj) {
  FieldSource src;
  src.text = [&obj](std::string_view key) -> std::optional<std::string> {
    const auto it = obj.find(std::string(key));
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw FieldTypeError(std::string(key), "expected a string");
    return it->get<std::string>();
  };
  src.number = [&obj](std::string_view key) -> std::optional<double> {
    const auto it = obj.find(std::string(key));
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (it->is_number()) return it->get<double>();
    if (it->is_string()) return parse_number(key, it->get<std::string>());
    throw FieldTypeError(std::string(key), "expected a number");
  };
  return src;
}

FieldSource form_source(const std::map<std::string, std::string, std::less<>>& kv) {
  FieldSource src;
  src.text = [&kv](std::string_view key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  src.number = [&kv](std::string_view key) -> std::optional<double> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return parse_number(key, it->second);
  };
  return src;
}

StationReport read_fields(const FieldSource& src) {
  const auto require = [&](std::string_view key) {
    const auto v = src.number(key);
    if (!v) throw MissingFieldError(std::string(key));
    return *v;
  };
  StationReport r;
  const auto date = src.text(kDate);
  if (!date) throw MissingFieldError(std::string(kDate));
  r.last_update = *date;
  r.temp_f = require(kTemp);
  r.humidity_pct = require(kHumidity);
  r.dew_point_f = require(kDewPoint);
  r.wind_speed_mph = require(kWind);
  r.rain_in = require(kRain);
  r.barometer_inhg = require(kBarometer);
  r.solar_radiation_wm2 = require(kRadiation);
  r.uv_index = src.number(kUv);
  return r;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  }
  return true;
}

std::string_view trim_left(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  return s;
}

}  // namespace

StationReport parse_station_report(std::string_view body, std::string_view content_type) {
  if (body.empty()) throw ValidationError("empty report body");

  bool as_json;
  if (starts_with_ci(content_type, "application/json")) {
    as_json = true;
  } else if (starts_with_ci(content_type, "application/x-www-form-urlencoded")) {
    as_json = false;
  } else {
    as_json = trim_left(body).starts_with('{');
  }

  StationReport report;
  if (as_json) {
    Json obj;
    try {
      obj = Json::parse(body);
    } catch (const Json::parse_error& e) {
      throw ValidationError(fmt::format("report body is not valid JSON: {}", e.what()));
    }
    if (!obj.is_object()) throw ValidationError("report JSON must be an object");
    report = read_fields(json_source(obj));
  } else {
    std::map<std::string, std::string, std::less<>> kv;
    std::size_t start = 0;
    while (start <= body.size()) {
      const auto amp = body.find('&', start);
      const auto pair = body.substr(start, amp == std::string_view::npos ? body.size() - start
                                                                           : amp - start);
      if (!pair.empty()) {
        const auto eq = pair.find('=');
        const auto key = percent_decode(pair.substr(0, eq));
        const auto value = eq == std::string_view::npos ? std::string{}
                                                        : percent_decode(pair.substr(eq + 1));
        kv.insert_or_assign(key, value);
      }
      if (amp == std::string_view::npos) break;
      start = amp + 1;
    }
    report = read_fields(form_source(kv));
  }
  validate_report(report);
  return report;
}

void validate_report(const StationReport& r) {
  const auto bound = [](std::string_view field, double v, std::string_view range) {
    throw ValidationError(
        fmt::format("field '{}' = {} outside bound {}", field, v, range));
  };
  parse_timestamp(r.last_update);
  if (!(r.humidity_pct >= 0.0 && r.humidity_pct <= 100.0)) bound(kHumidity, r.humidity_pct, "[0,100]");
  if (!(r.wind_speed_mph >= 0.0)) bound(kWind, r.wind_speed_mph, "[0,inf)");
  if (!(r.rain_in >= 0.0)) bound(kRain, r.rain_in, "[0,inf)");
  if (!(r.barometer_inhg > 0.0)) bound(kBarometer, r.barometer_inhg, "(0,inf)");
  if (!(r.solar_radiation_wm2 >= 0.0)) bound(kRadiation, r.solar_radiation_wm2, "[0,inf)");
  if (r.uv_index && !(*r.uv_index >= 0.0)) bound(kUv, *r.uv_index, "[0,inf)");
  if (!(r.dew_point_f <= r.temp_f + 0.5)) {
    throw ValidationError(fmt::format("field '{}' = {} exceeds {} + 0.5 = {}", kDewPoint,
                                      r.dew_point_f, kTemp, r.temp_f + 0.5));
  }
}

std::string serialize_station_report(const StationReport& r, PayloadFormat format) {
  if (format == PayloadFormat::kJson) {
    Json j;
    j[std::string(kDate)] = r.last_update;
    j[std::string(kTemp)] = r.temp_f;
    j[std::string(kHumidity)] = r.humidity_pct;
    j[std::string(kDewPoint)] = r.dew_point_f;
    j[std::string(kWind)] = r.wind_speed_mph;
    j[std::string(kRain)] = r.rain_in;
    j[std::string(kBarometer)] = r.barometer_inhg;
    j[std::string(kRadiation)] = r.solar_radiation_wm2;
    if (r.uv_index) j[std::string(kUv)] = *r.uv_index;
    return j.dump();
  }
  std::string out = fmt::format(
      "{}={}&{}={}&{}={}&{}={}&{}={}&{}={}&{}={}&{}={}", kDate, percent_encode(r.last_update),
      kTemp, shortest(r.temp_f), kHumidity, shortest(r.humidity_pct), kDewPoint,
      shortest(r.dew_point_f), kWind, shortest(r.wind_speed_mph), kRain, shortest(r.rain_in),
      kBarometer, shortest(r.barometer_inhg), kRadiation, shortest(r.solar_radiation_wm2));
  if (r.uv_index) out += fmt::format("&{}={}", kUv, shortest(*r.uv_index));
  return out;
}

std::string_view content_type_for(PayloadFormat format) {
  return format == PayloadFormat::kJson ? "application/json"
                                        : "application/x-www-form-urlencoded";
}

StorageKey sanitize_key(std::string_view last_update) {
  std::string key = format_station_time(parse_timestamp(last_update));
  for (char& c : key) {
    if (c == ':') c = '-';
    if (c == ' ') c = 'T';
  }
  return StorageKey(std::move(key));
}

EnrichedRecord enrich(const StationReport& report, const GeoLocation& station, Instant now) {
  validate_report(report);
  EnrichedRecord rec;
  rec.report = report;
  rec.solar_altitude_pct =
      solar_altitude_ratio(station, parse_timestamp(report.last_update)).value();
  rec.station = station;
  rec.received_at = now;
  return rec;
}

std::string record_to_json(const EnrichedRecord& rec) {
  const StationReport& r = rec.report;
  Json j;
  j["last_update"] = r.last_update;
  j["temp_f"] = r.temp_f;
  j["humidity_pct"] = r.humidity_pct;
  j["dew_point_f"] = r.dew_point_f;
  j["wind_speed_mph"] = r.wind_speed_mph;
  j["rain_in"] = r.rain_in;
  j["barometer_inhg"] = r.barometer_inhg;
  j["solar_radiation_wm2"] = r.solar_radiation_wm2;
  j["uv_index"] = r.uv_index ? Json(*r.uv_index) : Json(nullptr);
  j["solar_altitude_pct"] = rec.solar_altitude_pct;
  j["station"] = {{"latitude_deg", rec.station.latitude_deg()},
                  {"longitude_deg", rec.station.longitude_deg()}};
  j["received_at"] = format_rfc3339(rec.received_at);
  return j.dump(2) + "\n";
}

EnrichedRecord record_from_json(std::string_view text) {
  try {
    const Json j = Json::parse(text);
    EnrichedRecord rec;
    StationReport& r = rec.report;
    r.last_update = j.at("last_update").get<std::string>();
    r.temp_f = j.at("temp_f").get<double>();
    r.humidity_pct = j.at("humidity_pct").get<double>();
    r.dew_point_f = j.at("dew_point_f").get<double>();
    r.wind_speed_mph = j.at("wind_speed_mph").get<double>();
    r.rain_in = j.at("rain_in").get<double>();
    r.barometer_inhg = j.at("barometer_inhg").get<double>();
    r.solar_radiation_wm2 = j.at("solar_radiation_wm2").get<double>();
    if (const auto it = j.find("uv_index"); it != j.end() && !it->is_null()) {
      r.uv_index = it->get<double>();
    }
    rec.solar_altitude_pct = j.at("solar_altitude_pct").get<double>();
    const auto& st = j.at("station");
    rec.station = GeoLocation(st.at("latitude_deg").get<double>(),
                              st.at("longitude_deg").get<double>());
    rec.received_at = parse_timestamp(j.at("received_at").get<std::string>());
    validate_report(r);
    if (!(rec.solar_altitude_pct >= 0.0 && rec.solar_altitude_pct <= 1.0)) {
      throw FormatError("solar_altitude_pct outside [0, 1]");
    }
    return rec;
  } catch (const FormatError&) {
    throw;
  } catch (const ValidationError& e) {
    throw FormatError(fmt::format("invalid record: {}", e.what()));
  } catch (const Json::exception& e) {
    throw FormatError(fmt::format("malformed record: {}", e.what()));
  }
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("read failed for {}", path.string()));
  return ss.str();
}

fs::path temp_name(const fs::path& root, const std::string& key) {
  static std::atomic<unsigned long long> counter{0};
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  return root / fmt::format(".{}.json.{}.{}.{}.tmp", key, ::getpid(), tid, counter++);
}

bool same_observation(const EnrichedRecord& a, const EnrichedRecord& b) {
  return a.report == b.report && a.solar_altitude_pct == b.solar_altitude_pct &&
         a.station == b.station;
}

}  // namespace

fs::path store_record(const EnrichedRecord& record, const fs::path& root) {
  const StorageKey key = sanitize_key(record.report.last_update);
  const fs::path target = root / (key.str() + ".json");
  const std::string content = record_to_json(record);

  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", root.string(), ec.message()));

  const fs::path tmp = temp_name(root, key.str());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write {}", tmp.string()));
    out << content;
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw IoError(fmt::format("write failed for {}", tmp.string()));
    }
  }

  // A hard link publishes the file only if the name is free, so concurrent
  // writers of one key cannot clobber each other.
  fs::create_hard_link(tmp, target, ec);
  if (!ec) {
    fs::remove(tmp, ec);
    return target;
  }
  if (ec != std::errc::file_exists) {
    std::error_code rename_ec;
    if (!fs::exists(target)) {
      fs::rename(tmp, target, rename_ec);
      if (!rename_ec) return target;
    }
    fs::remove(tmp, rename_ec);
    if (!fs::exists(target)) {
      throw IoError(fmt::format("cannot publish {}: {}", target.string(), ec.message()));
    }
  }
  fs::remove(tmp, ec);

  const EnrichedRecord existing = load_record(target);
  if (!same_observation(existing, record)) {
    throw ConflictError(fmt::format("{} already holds a different observation", target.string()));
  }
  return target;
}

EnrichedRecord load_record(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return record_from_json(text);
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

IngestResponse handle_report(std::string_view body, std::string_view content_type,
                             const GeoLocation& station, const fs::path& root, Instant now) {
  EnrichedRecord rec;
  try {
    rec = enrich(parse_station_report(body, content_type), station, now);
  } catch (const ValidationError& e) {
    return {400, e.what()};
  }
  try {
    store_record(rec, root);
  } catch (const ConflictError& e) {
    return {409, e.what()};
  } catch (const std::exception& e) {
    return {500, e.what()};
  }
  return {200, sanitize_key(rec.report.last_update).str()};
}

}  // namespace solarcast
