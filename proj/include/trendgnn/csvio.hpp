#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace trendgnn::csvio {

/// Minimal CSV: comma-separated, newline rows, no quoting (none of our
/// formats needs it). CRLF input is tolerated.
std::vector<std::vector<std::string>> read_rows(const std::string& path);

std::string join_row(const std::vector<std::string>& fields);

/// Shortest decimal form that parses back to the identical double, so CSV
/// round-trips are lossless and reruns are byte-identical.
std::string format_double(double v);

/// Fixed-precision form for human-facing tables.
std::string format_fixed(double v, int decimals);

double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

/// ISO yyyy-mm-dd <-> days since civil epoch (1970-01-01).
std::int64_t parse_iso_date(const std::string& s);
std::string format_iso_date(std::int64_t day_number);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace trendgnn::csvio
