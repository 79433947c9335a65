#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace modal_attrib::io {

// A parsed CSV document: header plus rows of raw cells. Quoted fields follow
// RFC 4180 (doubled quotes inside quotes, embedded commas and newlines).
struct CsvDocument {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or nullopt.
  std::optional<std::size_t> find(std::string_view name) const;
};

CsvDocument parse_csv(std::string_view text);
CsvDocument read_csv(const std::filesystem::path& path);

// Quotes a cell when it contains a separator, quote or newline.
std::string csv_escape(std::string_view cell);
std::string csv_line(const std::vector<std::string>& cells);

// Shortest representation that round-trips to the same double.
std::string format_double(double value);

// Parses a full string as a double; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Reads non-empty lines of a JSON-lines file.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Hex SHA-256 of a byte string / file content.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace modal_attrib::io
