#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace wtl {

/// UTC instant with millisecond resolution.
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// Parses `YYYY-MM-DD[T ]HH:MM:SS[.fff...](Z|+HH:MM|-HH:MM)`. A missing UTC
/// offset is rejected. Sub-millisecond digits are truncated.
std::optional<Timestamp> parse_iso8601(std::string_view text);

/// `YYYY-MM-DDTHH:MM:SS.mmmZ`
std::string format_iso8601(Timestamp t);

int year_of(Timestamp t);
/// 1..12
int month_of(Timestamp t);

/// Jan 1 00:00:00 UTC of `year`.
Timestamp year_start(int year);

/// Length of [a, b) in Julian years (365.25 d); 0 when b <= a.
double years_between(Timestamp a, Timestamp b);

}  // namespace wtl
