#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vaxequity::csv {

/// A fully loaded comma-separated table. Fields are kept as text; callers
/// decide how to interpret each column.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column, or nullopt if absent.
    std::optional<std::size_t> column(std::string_view name) const;
};

/// Splits one CSV line. Handles double-quoted fields with embedded commas
/// and doubled quotes.
std::vector<std::string> split_line(std::string_view line);

/// Reads a whole file. Throws IoError if the file cannot be opened.
/// Blank lines are skipped, a trailing '\r' is stripped, and short rows are
/// padded with empty fields up to the header width.
Table read_file(const std::filesystem::path &path);

/// Parses a numeric cell. Empty or malformed text yields nullopt, as do
/// non-finite values.
std::optional<double> parse_number(std::string_view text);

/// Shortest text that round-trips to the same double; whole numbers below
/// 1e15 print in plain digits. Output is identical across runs, which keeps
/// written artifacts byte-stable.
std::string format_number(double value);

/// Quotes a field if it contains a comma, quote or newline.
std::string escape(std::string_view field);

} // namespace vaxequity::csv
