#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kpool::cli {

struct CsvRecord {
    std::size_t line;  ///< 1-based line where the record starts
    std::vector<std::string> fields;
};

/// A parsed CSV document: optional `# kpool-<kind> v<N>` tag, header row,
/// data rows.
///
/// Lines whose first character is '#' are comments. Fields are separated by
/// commas; a field may be wrapped in double quotes, inside which commas and
/// line breaks are literal and "" stands for one quote. Whitespace around
/// unquoted fields is trimmed. Blank lines are skipped.
struct CsvDocument {
    std::optional<std::string> format_tag;  ///< e.g. "kpool-panel v1"
    std::vector<CsvRecord> records;
};

CsvDocument parse_csv(std::string_view text, const std::string& source);
CsvDocument read_csv_file(const std::string& path);

/// Strict decimal parse of a whole field; InputError naming `line` otherwise.
double parse_number(const std::string& field, std::size_t line, const std::string& what);

/// Quotes a field when it contains a comma, quote, line break or leading
/// or trailing whitespace.
std::string csv_escape(const std::string& field);

}  // namespace kpool::cli
