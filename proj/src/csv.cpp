/* Copyright 2026 The spintk Authors. All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "spintk/csv.hpp"

#include "spintk/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace spintk {

bool DataTable::has_column(std::string_view name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

const std::vector<double>& DataTable::column(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ParseError("missing column '" + std::string(name) + "'");
  return values[static_cast<std::size_t>(it - columns.begin())];
}

void DataTable::add_column(std::string name, std::vector<double> data) {
  if (name.empty()) throw std::invalid_argument("column names must not be empty");
  if (has_column(name)) throw std::invalid_argument("duplicate column '" + name + "'");
  if (!values.empty() && data.size() != rows()) throw std::invalid_argument("column '" + name + "' has the wrong length");
  columns.push_back(std::move(name));
  values.push_back(std::move(data));
}

bool DataTable::identical(const DataTable& other) const {
  if (columns != other.columns || values.size() != other.values.size()) return false;
  for (std::size_t c = 0; c < values.size(); ++c) {
    if (values[c].size() != other.values[c].size()) return false;
    for (std::size_t r = 0; r < values[c].size(); ++r)
      if (std::bit_cast<std::uint64_t>(values[c][r]) != std::bit_cast<std::uint64_t>(other.values[c][r])) return false;
  }
  return true;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, int line, int column) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  double v = 0.0;
  std::string_view body = text;
  if (!body.empty() && body.front() == '+') body.remove_prefix(1);
  const auto res = std::from_chars(body.data(), body.data() + body.size(), v);
  if (body.empty() || res.ec != std::errc() || res.ptr != body.data() + body.size())
    throw ParseError("non-numeric value '" + std::string(text) + "'", line, column);
  return v;
}

namespace {

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
    cells.push_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

DataTable parse_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("CSV is empty; a header row is required", 1, 1);

  DataTable table;
  const auto header = split_line(lines.front());
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) throw ParseError("empty column name", 1, static_cast<int>(c + 1));
    if (table.has_column(header[c]))
      throw ParseError("duplicate column '" + std::string(header[c]) + "'", 1, static_cast<int>(c + 1));
    table.columns.emplace_back(header[c]);
  }
  table.values.resize(table.columns.size());

  for (std::size_t l = 1; l < lines.size(); ++l) {
    const int line_no = static_cast<int>(l + 1);
    if (lines[l].empty()) throw ParseError("blank line inside table", line_no, 1);
    const auto cells = split_line(lines[l]);
    if (cells.size() != table.columns.size())
      throw ParseError("expected " + std::to_string(table.columns.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no, 1);
    for (std::size_t c = 0; c < cells.size(); ++c)
      table.values[c].push_back(parse_double(cells[c], line_no, static_cast<int>(c + 1)));
  }
  return table;
}

std::string serialize_csv(const DataTable& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  const std::size_t rows = table.rows();
  for (const auto& col : table.values)
    if (col.size() != rows) throw std::invalid_argument("table is not rectangular");
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < table.values.size(); ++c) {
      if (c) out += ',';
      out += format_double(table.values[c][r]);
    }
    out += '\n';
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw ParseError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw ParseError("cannot replace '" + path.string() + "'");
  }
}

DataTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

void write_csv(const std::filesystem::path& path, const DataTable& table) {
  write_file_atomic(path, serialize_csv(table));
}

void require_columns(const DataTable& table, std::initializer_list<std::string_view> names) {
  for (auto name : names) table.column(name);
}

}  // namespace spintk
