#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "zenosim/errors.hpp"

namespace zenosim {

using Cell = std::variant<double, std::int64_t, std::string>;

/// Tabular protocol output with a fixed column schema.
struct SweepResult {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::map<std::string, std::string> metadata;

    SweepResult() = default;
    explicit SweepResult(std::vector<std::string> cols) : columns(std::move(cols)) {}

    void add_row(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw DimensionError("row does not match the column schema");
        rows.push_back(std::move(row));
    }

    [[nodiscard]] std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw LabelError("no column named '" + name + "'");
    }

    [[nodiscard]] double number(std::size_t row, const std::string& name) const {
        const auto& c = rows.at(row).at(column(name));
        if (const auto* d = std::get_if<double>(&c)) return *d;
        if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
        throw LabelError("column '" + name + "' is not numeric");
    }

    [[nodiscard]] const std::string& text(std::size_t row, const std::string& name) const {
        return std::get<std::string>(rows.at(row).at(column(name)));
    }
};

/// Shortest round-trip decimal form.
inline std::string format_number(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string format_cell(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + '"';
}

/// CSV with one header row and '\n' line ends. Extra trailing columns are appended to every row.
inline void write_csv(std::ostream& os, const SweepResult& r,
                      const std::vector<std::pair<std::string, std::string>>& trailing = {}) {
    for (std::size_t i = 0; i < r.columns.size(); ++i) os << (i ? "," : "") << r.columns[i];
    for (const auto& [k, v] : trailing) os << ',' << k;
    os << '\n';
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i]);
        for (const auto& [k, v] : trailing) os << ',' << format_cell(v);
        os << '\n';
    }
}

}  // namespace zenosim
