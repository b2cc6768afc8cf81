// Copyright 2026 The spincorr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPINCORR_SRC_IO_UTIL_H
#define SPINCORR_SRC_IO_UTIL_H

#include <filesystem>
#include <vector>

#include "json.hpp"

namespace spincorr::detail {

/// Writes `meta` to `<csv>.json`.
void write_sidecar(const std::filesystem::path &csv, const nlohmann::json &meta);
/// Numeric rows of a headed CSV; "raw"/"corrected" cells read as 0/1. Throws DataError
/// on a column-count mismatch.
std::vector<std::vector<double>> read_rows(const std::filesystem::path &csv, size_t cols);
/// Parsed `<csv>.json`, or an empty object when absent.
nlohmann::json read_sidecar(const std::filesystem::path &csv);

}  // namespace spincorr::detail

#endif
