/*
 * Copyright 2026 The gsnas Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GSNAS_IO_H_
#define GSNAS_IO_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gsnas {

// Shortest decimal form that parses back to the same double ('.' decimal
// point, locale independent).
std::string FormatDouble(double value);
double ParseDouble(std::string_view text);
long long ParseInt(std::string_view text);

std::string Hex64(std::uint64_t value);

// Minimal CSV: no quoting; fields never contain commas.
std::vector<std::string> SplitCsvLine(std::string_view line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of `name` in the header; throws std::runtime_error if absent.
  std::size_t Column(std::string_view name) const;
};

CsvTable ReadCsv(const std::filesystem::path& path);

// Writes `contents` to `path` through a temporary file and a rename.
void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents);
std::string ReadFile(const std::filesystem::path& path);

}  // namespace gsnas

#endif  // GSNAS_IO_H_
