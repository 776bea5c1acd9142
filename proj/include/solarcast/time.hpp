#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace solarcast {

/// UTC instant at one-second resolution.
using Instant = std::chrono::sys_seconds;

/// Parses "YYYY-MM-DD HH:MM:SS" or RFC 3339 ("YYYY-MM-DDTHH:MM:SS[.fff](Z|±HH:MM)").
/// A missing zone designator means UTC. Fractional seconds are truncated.
/// Throws ValidationError on anything else.
Instant parse_timestamp(std::string_view text);

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_rfc3339(Instant t);

/// "YYYY-MM-DD HH:MM:SS", the layout the weather station reports.
std::string format_station_time(Instant t);

/// Seconds since midnight of the instant's UTC day.
double seconds_of_day(Instant t);

}  // namespace solarcast
