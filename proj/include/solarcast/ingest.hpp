#pragma once

#include <compare>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "solarcast/solar_geometry.hpp"
#include "solarcast/time.hpp"

namespace solarcast {

/// One observation as posted by the station, in station units.
///
/// Payload field names (the station's upload protocol):
///
///   dateutc        -> last_update          "YYYY-MM-DD HH:MM:SS" UTC
///   tempf          -> temp_f               °F
///   humidity       -> humidity_pct         [0, 100]
///   dewptf         -> dew_point_f          °F, <= temp_f + 0.5
///   windspeedmph   -> wind_speed_mph       >= 0
///   eventrainin    -> rain_in              >= 0
///   baromrelin     -> barometer_inhg       > 0
///   solarradiation -> solar_radiation_wm2  >= 0
///   uv             -> uv_index             optional, >= 0
struct StationReport {
  std::string last_update;
  double temp_f = 0.0;
  double humidity_pct = 0.0;
  double dew_point_f = 0.0;
  double wind_speed_mph = 0.0;
  double rain_in = 0.0;
  double barometer_inhg = 0.0;
  double solar_radiation_wm2 = 0.0;
  std::optional<double> uv_index;

  bool operator==(const StationReport&) const = default;
};

enum class PayloadFormat { kJson, kFormUrlEncoded };

/// Parses a JSON object or an application/x-www-form-urlencoded body. The
/// content type picks the decoder; when it names neither, a body starting
/// with '{' is read as JSON. Unknown fields are ignored.
/// Throws MissingFieldError, FieldTypeError or ValidationError.
StationReport parse_station_report(std::string_view body, std::string_view content_type);

/// Range checks; throws ValidationError naming the field and its bound.
void validate_report(const StationReport& report);

/// Encodes with the station's field names; parse_station_report inverts it.
std::string serialize_station_report(const StationReport& report, PayloadFormat format);
std::string_view content_type_for(PayloadFormat format);

/// Filesystem- and object-store-safe record name, "YYYY-MM-DDTHH-MM-SS".
/// Keys sort lexicographically in chronological order.
class StorageKey {
 public:
  const std::string& str() const noexcept { return key_; }
  auto operator<=>(const StorageKey&) const = default;

 private:
  friend StorageKey sanitize_key(std::string_view last_update);
  explicit StorageKey(std::string key) : key_(std::move(key)) {}
  std::string key_;
};

/// Throws ValidationError if `last_update` is not a timestamp.
StorageKey sanitize_key(std::string_view last_update);

struct EnrichedRecord {
  StationReport report;
  double solar_altitude_pct = 0.0;
  GeoLocation station{0.0, 0.0};
  Instant received_at{};

  bool operator==(const EnrichedRecord&) const = default;
};

/// Joins the report with the sun-position feature at its own timestamp.
EnrichedRecord enrich(const StationReport& report, const GeoLocation& station, Instant now);

std::string record_to_json(const EnrichedRecord& record);
/// Throws FormatError on schema violations.
EnrichedRecord record_from_json(std::string_view text);

/// Writes root/<key>.json atomically. Storing identical observation content
/// again is a no-op success; different content under an existing key throws
/// ConflictError. Other failures throw IoError.
std::filesystem::path store_record(const EnrichedRecord& record,
                                   const std::filesystem::path& root);

/// Throws IoError if unreadable, FormatError if malformed.
EnrichedRecord load_record(const std::filesystem::path& path);

/// Outcome of one POST /report, independent of the HTTP transport.
struct IngestResponse {
  int status = 200;
  std::string body;
};

IngestResponse handle_report(std::string_view body, std::string_view content_type,
                             const GeoLocation& station, const std::filesystem::path& root,
                             Instant now);

/// HTTP front end: POST /report and GET /healthz.
class IngestServer {
 public:
  IngestServer(GeoLocation station, std::filesystem::path root);
  ~IngestServer();
  IngestServer(const IngestServer&) = delete;
  IngestServer& operator=(const IngestServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen();
  /// Serves on a background thread.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace solarcast
