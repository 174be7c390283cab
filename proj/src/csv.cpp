#include "seqdi/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "seqdi/errors.hpp"

namespace seqdi::csv {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

}  // namespace

std::optional<std::size_t> Table::find(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] == name) return j;
    return std::nullopt;
}

std::size_t Table::require(std::string_view name) const {
    if (auto j = find(name)) return *j;
    throw MissingColumn("missing required column '" + std::string(name) + "'");
}

Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    Table table;
    std::string line;
    bool have_header = false;
    std::size_t data_row = 0;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto fields = split(t);
        if (!have_header) {
            if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        ++data_row;
        if (fields.size() != table.header.size())
            throw ParseError(data_row, fields.size(),
                             "expected " + std::to_string(table.header.size()) + " fields, found " +
                                 std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
    }
    if (!have_header) throw ParseError(0, 0, "file '" + path + "' has no header row");
    return table;
}

double parse_number(const std::string& field, std::size_t row, std::size_t column) {
    if (field.empty()) throw ParseError(row, column, "missing value");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(v))
        throw ParseError(row, column, "not a finite number: '" + field + "'");
    return v;
}

std::string format_double(double v) {
    // Shortest text that reads back to the same double.
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace seqdi::csv
