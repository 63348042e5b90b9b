#pragma once

// Small text helpers shared by every file format: shortest round-trip number
// formatting, strict number parsing and field splitting.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace carfollow::text {

// Shortest decimal that parses back to the identical double.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);
// Fixed number of decimals, used only for presentation columns.
std::string format_fixed(double v, int decimals);

// Strict parsers: the whole field must be consumed. Throw FormatError naming
// `what` on failure.
double parse_double(std::string_view s, std::string_view what);
std::optional<double> parse_optional_double(std::string_view s, std::string_view what);
std::int64_t parse_int(std::string_view s, std::string_view what);
std::uint32_t parse_u32(std::string_view s, std::string_view what);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

// Lines without their terminators; a trailing "\r" is stripped.
std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary then renames over the target, so readers
// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace carfollow::text
