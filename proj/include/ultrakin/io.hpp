#pragma once

// Named result tables and their serializations: CSV in the RFC-4180 style
// with full round-trip precision, and a JSON mirror of the same layout.

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ultrakin {

using Cell = std::variant<long long, double, std::string>;

struct DataTable {
    std::string name; // file stem
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> row) {
        if (row.size() != columns.size())
            throw std::invalid_argument("row width does not match table '" + name + "'");
        rows.push_back(std::move(row));
    }
};

namespace detail {

inline std::string round_trip_digits(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') out += '"';
    }
    out += '"';
    return out;
}

inline std::string cell_text(const Cell& cell) {
    if (const auto* i = std::get_if<long long>(&cell)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&cell)) return round_trip_digits(*d);
    return csv_field(std::get<std::string>(cell));
}

} // namespace detail

inline std::string render_csv(const DataTable& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out += ',';
        out += detail::csv_field(table.columns[c]);
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += detail::cell_text(row[c]);
        }
        out += '\n';
    }
    return out;
}

inline nlohmann::json table_to_json(const DataTable& table) {
    nlohmann::json j;
    j["columns"] = table.columns;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : table.rows) {
        nlohmann::json jr = nlohmann::json::array();
        for (const auto& cell : row) {
            if (const auto* i = std::get_if<long long>(&cell))
                jr.push_back(*i);
            else if (const auto* d = std::get_if<double>(&cell))
                jr.push_back(*d);
            else
                jr.push_back(std::get<std::string>(cell));
        }
        j["rows"].push_back(std::move(jr));
    }
    return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(text.data(), (std::streamsize)text.size());
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

} // namespace ultrakin
