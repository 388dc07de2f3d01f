#include "iceseg/io.hpp"

#include "iceseg/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace iceseg {

std::size_t CsvTable::column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw DataError(source + ": missing column '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(std::string_view name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

} // namespace

CsvTable parse_csv(std::string_view text, std::string source) {
    CsvTable table;
    table.source = std::move(source);
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool quoted = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    auto end_field = [&] {
        fields.push_back(quoted ? field : trim(field));
        field.clear();
        quoted = false;
    };
    auto end_record = [&] {
        end_field();
        const bool blank = fields.size() == 1 && fields[0].empty();
        if (!blank) {
            if (table.header.empty()) {
                table.header = std::move(fields);
            } else {
                if (fields.size() != table.header.size()) {
                    throw DataError(table.source + ":" + std::to_string(record_line) + ": expected " +
                                    std::to_string(table.header.size()) + " fields, found " +
                                    std::to_string(fields.size()));
                }
                table.rows.push_back({record_line, std::move(fields)});
            }
        }
        fields.clear();
        record_line = line;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') {
                    ++line;
                }
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            in_quotes = true;
            quoted = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            break;
        case '\n':
            ++line;
            end_record();
            break;
        default:
            field.push_back(c);
        }
    }
    if (in_quotes) {
        throw DataError(table.source + ":" + std::to_string(record_line) + ": unterminated quote");
    }
    if (!field.empty() || !fields.empty()) {
        end_record();
    }
    if (table.header.empty()) {
        throw DataError(table.source + ": empty CSV");
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path &path) {
    return parse_csv(read_text_file(path), path.string());
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) {
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

std::string format_double(double x) {
    if (std::isnan(x)) {
        return "NA";
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

long long parse_integer(const std::string &text, const std::string &context) {
    long long value = 0;
    const char *first = text.data();
    const char *last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw DataError(context + ": expected an integer, got '" + text + "'");
    }
    return value;
}

double parse_double(const std::string &text, const std::string &context) {
    double value = 0.0;
    const char *first = text.data();
    const char *last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw DataError(context + ": expected a number, got '" + text + "'");
    }
    return value;
}

void write_text_file(const std::filesystem::path &path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << contents;
    if (!out) {
        throw DataError("write failed: " + path.string());
    }
}

std::string read_text_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace iceseg
