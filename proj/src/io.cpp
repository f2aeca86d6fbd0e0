#include "relaycoll/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "relaycoll/types.hpp"

namespace relaycoll::io {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void Table::add_row(std::vector<std::string> cells) {
  if (cells.size() != header.size()) throw FormatError("row width does not match the header");
  rows.push_back(std::move(cells));
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw FormatError("no column named " + name);
}

const std::string& Table::text(std::size_t row, const std::string& name) const {
  return rows.at(row).at(column(name));
}

double Table::number(std::size_t row, const std::string& name) const {
  const std::string& cell = text(row, name);
  if (cell == "nan") return NAN;
  if (cell == "inf") return INFINITY;
  if (cell == "-inf") return -INFINITY;
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw FormatError("not a number in column " + name + ": '" + cell + "'");
  }
  return v;
}

std::vector<double> Table::numbers(const std::string& name) const {
  std::vector<double> out;
  for (std::size_t r = 0; r < rows.size(); ++r) out.push_back(number(r, name));
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return in;
}

}  // namespace

void write_table(const std::string& path, const Table& t) {
  auto out = open_out(path);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].find_first_of(",\n") != std::string::npos) {
        throw FormatError("cell contains a separator: " + cells[i]);
      }
      out << (i ? "," : "") << cells[i];
    }
    out << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

Table read_table(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw FormatError(path + ": missing header");
  Table t(split(line));
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " cells, got " +
                        std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

void write_json(const std::string& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

Json read_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_jsonl(const std::string& path, const std::vector<Json>& lines) {
  auto out = open_out(path);
  for (const auto& j : lines) out << j.dump() << '\n';
}

std::vector<Json> read_jsonl(const std::string& path) {
  auto in = open_in(path);
  std::vector<Json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace relaycoll::io
