#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace disinfo::timeutil {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d);

// "YYYY-MM-DDTHH:MM:SSZ" for epoch seconds (UTC).
std::string format_iso8601(std::int64_t epoch_seconds);

// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS][Z]" (space also allowed as
// separator). Returns nullopt on any other shape.
std::optional<std::int64_t> parse_iso8601(std::string_view s);

}  // namespace disinfo::timeutil
