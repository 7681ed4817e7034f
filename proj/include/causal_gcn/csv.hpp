#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace causal_gcn::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Reads a UTF-8 CSV with a mandatory header row. Double-quoted fields are
// supported; every data row must have as many cells as the header.
Table read(const std::filesystem::path& path);

void write(const std::filesystem::path& path, const Table& table);

// Parses a full cell as a double; throws DataError naming `where` otherwise.
double parse_number(std::string_view cell, std::string_view where);

// Shortest round-trip decimal representation.
std::string format_number(double value);

}  // namespace causal_gcn::csv
