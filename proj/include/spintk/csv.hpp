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
#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace spintk {

/// Rectangular numeric table with named columns, stored column-major.
struct DataTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> values;  // values[c][row]

  std::size_t rows() const { return values.empty() ? 0 : values.front().size(); }
  bool has_column(std::string_view name) const;
  // Throws ParseError naming the column when it is absent.
  const std::vector<double>& column(std::string_view name) const;
  void add_column(std::string name, std::vector<double> data);

  // Bitwise comparison of every value.
  bool identical(const DataTable& other) const;
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
// Strict full-string parse; throws ParseError with the given location.
double parse_double(std::string_view text, int line, int column);

DataTable parse_csv(std::string_view text);
std::string serialize_csv(const DataTable& table);

std::string read_text_file(const std::filesystem::path& path);
// Writes to a temporary sibling and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

DataTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const DataTable& table);

void require_columns(const DataTable& table, std::initializer_list<std::string_view> names);

}  // namespace spintk
