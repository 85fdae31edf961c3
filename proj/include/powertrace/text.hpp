#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace powertrace {

// Shortest decimal that round-trips to the same double.
std::string format_double(double value);
// Fixed 7 fractional digits, the telemetry clock resolution.
std::string format_time(double seconds);

// Throws ParseError(line) when the field is not a finite number.
double parse_double(std::string_view field, std::size_t line);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string_view trim(std::string_view s);

std::string read_file(const std::string& path);
// Writes atomically enough for our purposes: truncate + write + flush check.
void write_file(const std::string& path, std::string_view contents);

// 64-bit FNV-1a, used for manifest config hashes.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace powertrace
