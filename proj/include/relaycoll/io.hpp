#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace relaycoll::io {

using Json = nlohmann::ordered_json;

/// Shortest text that reads back to the same double.
std::string format_double(double x);

/// Comma-separated table with a header row. Cells never contain commas.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  explicit Table(std::vector<std::string> columns = {}) : header(std::move(columns)) {}
  void add_row(std::vector<std::string> cells);
  /// Throws FormatError for an unknown column.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
  const std::string& text(std::size_t row, const std::string& name) const;
  std::vector<double> numbers(const std::string& name) const;
};

void write_table(const std::string& path, const Table& t);
Table read_table(const std::string& path);

void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<Json>& lines);
std::vector<Json> read_jsonl(const std::string& path);

}  // namespace relaycoll::io
