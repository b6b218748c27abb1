#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace vaxequity {

/// Calendar day. Stored as days since the Unix epoch so that consecutive
/// days differ by exactly one.
using Date = std::chrono::sys_days;

/// Parses an ISO-8601 calendar date (YYYY-MM-DD). Returns nullopt on any
/// malformed or non-existent date.
std::optional<Date> parse_date(std::string_view text);

/// Parses an ISO-8601 date or throws DomainError naming the offending text.
Date parse_date_or_throw(std::string_view text);

std::string format_date(Date d);

inline Date next_day(Date d) { return d + std::chrono::days{1}; }

} // namespace vaxequity
