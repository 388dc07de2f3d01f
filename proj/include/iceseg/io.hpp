#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace iceseg {

struct CsvRow {
    std::size_t line = 0; // 1-based line number in the source file
    std::vector<std::string> fields;
};

/// Minimal RFC-4180 style table: first line is the header, quoted fields may contain
/// commas and doubled quotes. Every row must have the header's field count.
struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<CsvRow> rows;

    /// Index of a header column; throws DataError naming the file when absent.
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path &path);
CsvTable parse_csv(std::string_view text, std::string source = "<memory>");

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

/// Fixed, locale-independent rendering used in every output file so reruns are
/// byte-identical: shortest round-trip representation.
std::string format_double(double x);

long long parse_integer(const std::string &text, const std::string &context);
double parse_double(const std::string &text, const std::string &context);

void write_text_file(const std::filesystem::path &path, std::string_view contents);
std::string read_text_file(const std::filesystem::path &path);

} // namespace iceseg
