#include "report.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "csv.hpp"
#include "kpool/error.hpp"

namespace kpool::cli {

namespace {

double no_negative_zero(double v) { return v == 0.0 ? 0.0 : v; }

}  // namespace

void Table::add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("row width does not match table " + name);
    rows.push_back(std::move(row));
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", no_negative_zero(v));
    return buf;
}

std::string render_csv(const Report& report) {
    std::string out;
    bool first = true;
    for (const Table& t : report.tables) {
        if (t.json_only) continue;
        if (!first) out += '\n';
        first = false;
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            if (c) out += ',';
            out += csv_escape(t.columns[c]);
        }
        out += '\n';
        for (const auto& row : t.rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c) out += ',';
                std::visit(
                    [&](const auto& v) {
                        using T = std::decay_t<decltype(v)>;
                        if constexpr (std::is_same_v<T, std::string>) out += csv_escape(v);
                        else if constexpr (std::is_same_v<T, double>) out += format_number(v);
                        else if constexpr (std::is_same_v<T, std::int64_t>) out += std::to_string(v);
                    },
                    row[c]);
            }
            out += '\n';
        }
    }
    return out;
}

std::string render_json(const Report& report) {
    nlohmann::ordered_json doc = report.meta;
    for (const Table& t : report.tables) {
        auto rows = nlohmann::ordered_json::array();
        for (const auto& row : t.rows) {
            nlohmann::ordered_json obj = nlohmann::ordered_json::object();
            for (std::size_t c = 0; c < row.size(); ++c) {
                std::visit(
                    [&](const auto& v) {
                        using T = std::decay_t<decltype(v)>;
                        if constexpr (std::is_same_v<T, std::monostate>) obj[t.columns[c]] = nullptr;
                        else if constexpr (std::is_same_v<T, double>) obj[t.columns[c]] = no_negative_zero(v);
                        else obj[t.columns[c]] = v;
                    },
                    row[c]);
            }
            rows.push_back(std::move(obj));
        }
        doc[t.name] = std::move(rows);
    }
    return doc.dump(2) + "\n";
}

void write_output(const std::string& text, const std::optional<std::string>& path) {
    if (!path) {
        std::cout << text << std::flush;
        return;
    }
    std::ofstream out(*path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open output file " + *path);
    out << text;
    if (!out) throw InputError("failed writing " + *path);
}

}  // namespace kpool::cli
