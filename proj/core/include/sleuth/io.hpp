#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sleuth::io {

// Writes via a temporary file in the same directory followed by rename, so
// readers never observe a partially written file.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

// RFC 4180-style CSV: quoted fields may contain commas, quotes ("") and
// newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_field(std::string_view value);
std::string csv_row(const std::vector<std::string>& fields);

// Shortest representation that round-trips a double.
std::string format_double(double value);

}  // namespace sleuth::io
