#include "csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kpool/error.hpp"

namespace kpool::cli {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

CsvDocument parse_csv(std::string_view text, const std::string& source) {
    CsvDocument doc;
    std::size_t line = 1;
    std::size_t i = 0;
    bool seen_data = false;
    const std::size_t n = text.size();

    while (i < n) {
        const std::size_t start_line = line;
        // comment or blank line
        if (text[i] == '#') {
            const auto eol = text.find('\n', i);
            const std::string body = trim(text.substr(i + 1, eol == std::string_view::npos ? n - i - 1 : eol - i - 1));
            if (!seen_data && !doc.format_tag && body.rfind("kpool-", 0) == 0) doc.format_tag = body;
            i = eol == std::string_view::npos ? n : eol + 1;
            ++line;
            continue;
        }
        {
            std::size_t j = i;
            while (j < n && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r')) ++j;
            if (j == n || text[j] == '\n') {
                i = j == n ? n : j + 1;
                ++line;
                continue;
            }
        }

        CsvRecord rec{start_line, {}};
        std::string field;
        bool quoted = false;       // inside quotes
        bool was_quoted = false;   // current field started with a quote
        bool after_quote = false;  // closing quote seen, only whitespace may follow
        bool done = false;
        while (!done) {
            if (i == n) {
                if (quoted) throw InputError(source + ": unterminated quoted field", start_line);
                rec.fields.push_back(was_quoted ? field : trim(field));
                break;
            }
            const char c = text[i++];
            if (quoted) {
                if (c == '"') {
                    if (i < n && text[i] == '"') {
                        field.push_back('"');
                        ++i;
                    } else {
                        quoted = false;
                        after_quote = true;
                    }
                } else {
                    if (c == '\n') ++line;
                    field.push_back(c);
                }
                continue;
            }
            if (c == ',' || c == '\n') {
                rec.fields.push_back(was_quoted ? field : trim(field));
                field.clear();
                was_quoted = after_quote = false;
                if (c == '\n') {
                    ++line;
                    done = true;
                }
                continue;
            }
            if (after_quote) {
                if (c == ' ' || c == '\t' || c == '\r') continue;
                throw InputError(source + ": unexpected character after closing quote", line);
            }
            if (c == '"' && trim(field).empty()) {
                field.clear();
                quoted = was_quoted = true;
                continue;
            }
            field.push_back(c);
        }
        seen_data = true;
        doc.records.push_back(std::move(rec));
    }
    return doc;
}

CsvDocument read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path);
}

double parse_number(const std::string& field, std::size_t line, const std::string& what) {
    double v = 0.0;
    const char* b = field.data();
    const char* e = b + field.size();
    if (b != e && *b == '+') ++b;
    const auto [ptr, ec] = std::from_chars(b, e, v);
    if (field.empty() || ec != std::errc() || ptr != e || !std::isfinite(v)) {
        throw InputError("invalid " + what + " '" + field + "'", line);
    }
    return v;
}

std::string csv_escape(const std::string& field) {
    const bool needs = field.find_first_of(",\"\n\r") != std::string::npos ||
                       (!field.empty() && (field.front() == ' ' || field.back() == ' ' ||
                                           field.front() == '\t' || field.back() == '\t'));
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace kpool::cli
