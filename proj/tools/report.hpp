#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace kpool::cli {

/// Empty cell = missing value (blank in CSV, null in JSON).
using Cell = std::variant<std::monostate, std::string, double, std::int64_t>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    bool json_only = false;  ///< omitted from CSV output

    void add(std::vector<Cell> row);
};

struct Report {
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
    std::vector<Table> tables;
    std::vector<nlohmann::ordered_json> warnings;  ///< written to stderr
};

/// CSV tables in order, separated by one blank line; doubles as %.12g.
std::string render_csv(const Report& report);
/// One JSON object: meta fields, then one array of row objects per table.
std::string render_json(const Report& report);

std::string format_number(double v);

/// Writes to `path`, or stdout when absent.
void write_output(const std::string& text, const std::optional<std::string>& path);

}  // namespace kpool::cli
