#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace seqdi::csv {

// Minimal comma-separated table: no quoting, header row required. Lines
// starting with '#' are comments and are skipped.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> find(std::string_view name) const;
    // Throws MissingColumn.
    std::size_t require(std::string_view name) const;
};

Table read(const std::string& path);

// Parses a finite double; throws ParseError tagged with 1-based row/column.
double parse_number(const std::string& field, std::size_t row, std::size_t column);

// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

}  // namespace seqdi::csv
