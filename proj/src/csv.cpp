#include "vaxequity/csv.hpp"

#include "vaxequity/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace vaxequity::csv {

std::optional<std::size_t> Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return i;
        }
    }
    return std::nullopt;
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

Table read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    Table table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!have_header) {
            // UTF-8 byte order mark
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) {
                line.erase(0, 3);
            }
            if (line.empty()) {
                continue;
            }
            table.header = split_line(line);
            have_header = true;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split_line(line);
        if (fields.size() < table.header.size()) {
            fields.resize(table.header.size());
        }
        table.rows.push_back(std::move(fields));
    }
    return table;
}

std::optional<double> parse_number(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
        text.remove_prefix(1);
    }
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) {
        text.remove_suffix(1);
    }
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    if (text.empty()) {
        return std::nullopt;
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

std::string format_number(double value) {
    if (value == 0.0) {
        return "0";
    }
    char buf[64];
    // Whole numbers such as dose counts print without an exponent.
    const bool whole = std::abs(value) < 1e15 && std::trunc(value) == value;
    auto [ptr, ec] = whole ? std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed)
                           : std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

} // namespace vaxequity::csv
