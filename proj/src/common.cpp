#include "alioth/common.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <system_error>

#include "alioth/csv.hpp"

#include <fstream>
#include <sstream>

namespace alioth {

double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string_view soi_name(SoIKind k) {
  switch (k) {
    case SoIKind::LLC: return "LLC";
    case SoIKind::MBW: return "MBW";
    case SoIKind::NBW: return "NBW";
    case SoIKind::DBW: return "DBW";
  }
  return "?";
}

SoIKind soi_from_name(std::string_view name) {
  for (SoIKind k : kAllSoI) {
    if (soi_name(k) == name) return k;
  }
  throw UsageError("unknown source of interference: " + std::string(name));
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw UsageError("cannot format number");
  return std::string(buf, end);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw UsageError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

namespace csv {

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw UsageError("missing column: " + name);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw UsageError("empty csv: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto row = split_line(line);
    if (row.size() != t.header.size()) {
      throw UsageError("ragged row in " + path.string());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write(const std::filesystem::path& path, const Table& table) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << fields[i];
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  if (!out) throw UsageError("write failed: " + path.string());
}

}  // namespace csv
}  // namespace alioth
