#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace alioth::csv {

// Minimal comma-separated table. Fields never contain commas, quotes or
// newlines in any file this project writes, so no quoting is supported.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a named column; throws UsageError when absent.
  std::size_t column(const std::string& name) const;
};

Table read(const std::filesystem::path& path);

// Writes header and rows, '\n' terminated. Throws UsageError when the path
// cannot be opened for writing.
void write(const std::filesystem::path& path, const Table& table);

std::vector<std::string> split_line(const std::string& line);

}  // namespace alioth::csv
