#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace parapack::csv {

// Minimal reader for the numeric CSV files this project exchanges: a
// header row followed by comma separated cells. No quoting.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers; // 1-based source line of each row

  // Index of a header column, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
};

// Throws ParseError when the file cannot be opened, has no header, or a
// row has a different number of cells than the header.
Table read(const std::filesystem::path &path);
Table parse(std::string_view text, std::string_view source = "<memory>");

// Strict number parse of one cell. Empty cells return nullopt; anything
// that is not a complete finite double throws ParseError.
std::optional<double> to_number(std::string_view cell, std::string_view context);

// Shortest round-trip decimal representation.
std::string format(double value);

} // namespace parapack::csv
