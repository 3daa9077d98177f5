#pragma once

#include <optional>
#include <string>
#include <vector>

#include "proxi2s/dataset.hpp"
#include "proxi2s/types.hpp"

namespace proxi2s {

// Shortest round-trip decimal form of a double (no locale, '.' separator).
std::string format_double(double value);

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;  // rows x columns

  int column(const std::string& name) const;  // -1 if absent
};

// Strict reader: UTF-8, comma separated, one header row, '.' decimals,
// finite numerics only. Errors cite the 1-based row and the column name.
CsvTable read_csv_file(const std::string& path);
CsvTable read_csv_text(const std::string& text, const std::string& origin);

struct ColumnRoles {
  std::string y, a, w;
  std::vector<std::string> z;
  std::vector<std::string> x;
  std::optional<std::string> u;

  void validate() const;  // roles disjoint, y/a/w present
};

Dataset dataset_from_table(const CsvTable& table, const ColumnRoles& roles);
Dataset load_csv(const std::string& path, const ColumnRoles& roles);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace proxi2s
