#pragma once

#include <charconv>
#include <filesystem>
#include <string>
#include <string_view>

namespace fedism::io {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

/// Strict parse of a whole string; throws std::invalid_argument on junk.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

/// Writes to `<path>.tmp` then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace fedism::io
