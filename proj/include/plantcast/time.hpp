#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace plantcast {

using Minutes = std::chrono::minutes;
// UTC instant at minute precision.
using Timestamp = std::chrono::sys_time<Minutes>;

// Accepts `YYYY-MM-DD[T| ]HH:MM[:SS[.fff]][Z|+00:00]`. Seconds are floored
// to the minute. Offsets other than UTC are rejected.
std::optional<Timestamp> try_parse_timestamp(std::string_view text);

// Throws FormatError on failure.
Timestamp parse_timestamp(std::string_view text);

// `YYYY-MM-DDTHH:MM:00Z`
std::string format_timestamp(Timestamp t);

inline std::int64_t minutes_since_epoch(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_epoch_minutes(std::int64_t m) { return Timestamp{Minutes{m}}; }

} // namespace plantcast
