#include "proxi2s/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "proxi2s/error.hpp"

namespace proxi2s {

std::string format_double(double value) {
  char buffer[32];
  auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

int CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

std::string trimmed(const std::string& s) {
  auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

CsvTable read_csv_text(const std::string& text, const std::string& origin) {
  std::vector<std::string> lines;
  {
    std::string line;
    std::istringstream in(text);
    while (std::getline(in, line)) lines.push_back(line);
  }
  while (!lines.empty() && trimmed(lines.back()).empty()) lines.pop_back();
  if (lines.empty())
    throw DataError(origin + ": parse error at row 0: empty file");

  CsvTable table;
  for (const std::string& name : split_line(lines[0])) {
    const std::string label = trimmed(name);
    if (label.empty())
      throw DataError(origin + ": header has an empty column name");
    table.header.push_back(label);
  }
  {
    std::set<std::string> seen;
    for (const std::string& name : table.header)
      if (!seen.insert(name).second)
        throw DataError(origin + ": duplicate header column '" + name + "'");
  }

  const Eigen::Index rows = static_cast<Eigen::Index>(lines.size()) - 1;
  const Eigen::Index cols = static_cast<Eigen::Index>(table.header.size());
  if (rows == 0)
    throw DataError(origin + ": no data rows after the header");
  table.values.resize(rows, cols);

  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::vector<std::string> fields =
        split_line(lines[static_cast<std::size_t>(r) + 1]);
    if (static_cast<Eigen::Index>(fields.size()) != cols)
      throw DataError(origin + ": row " + std::to_string(r + 1) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(cols));
    for (Eigen::Index c = 0; c < cols; ++c) {
      const std::string cell = trimmed(fields[static_cast<std::size_t>(c)]);
      auto fail = [&](const std::string& why) {
        throw DataError(origin + ": row " + std::to_string(r + 1) +
                        ", column '" +
                        table.header[static_cast<std::size_t>(c)] + "': " +
                        why + " ('" + cell + "')");
      };
      if (cell.empty()) fail("empty cell");
      double value = 0.0;
      auto [ptr, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc() || ptr != cell.data() + cell.size())
        fail("not a number");
      if (!std::isfinite(value)) fail("non-finite value");
      table.values(r, c) = value;
    }
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  return read_csv_text(read_text_file(path), path);
}

void ColumnRoles::validate() const {
  if (y.empty() || a.empty() || w.empty())
    throw DataError("column roles y, a, and w are required");
  std::vector<std::string> all{y, a, w};
  all.insert(all.end(), z.begin(), z.end());
  all.insert(all.end(), x.begin(), x.end());
  if (u) all.push_back(*u);
  std::set<std::string> seen;
  for (const std::string& name : all)
    if (!seen.insert(name).second)
      throw DataError("column '" + name + "' is assigned to multiple roles");
}

Dataset dataset_from_table(const CsvTable& table, const ColumnRoles& roles) {
  roles.validate();
  auto pick = [&](const std::string& name) {
    const int c = table.column(name);
    if (c < 0) throw DataError("missing column '" + name + "'");
    return table.values.col(c);
  };
  Dataset data;
  data.y = pick(roles.y);
  data.a = pick(roles.a);
  data.w = pick(roles.w);
  data.z.resize(table.values.rows(), static_cast<Eigen::Index>(roles.z.size()));
  for (std::size_t j = 0; j < roles.z.size(); ++j)
    data.z.col(static_cast<Eigen::Index>(j)) = pick(roles.z[j]);
  data.x.resize(table.values.rows(), static_cast<Eigen::Index>(roles.x.size()));
  for (std::size_t j = 0; j < roles.x.size(); ++j)
    data.x.col(static_cast<Eigen::Index>(j)) = pick(roles.x[j]);
  if (roles.u) data.u = Vector(pick(*roles.u));
  data.validate();
  return data;
}

Dataset load_csv(const std::string& path, const ColumnRoles& roles) {
  return dataset_from_table(read_csv_file(path), roles);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace proxi2s
