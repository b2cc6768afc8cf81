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

#ifndef SPINCORR_UNITS_H
#define SPINCORR_UNITS_H

#include <string>
#include <string_view>

#include "json.hpp"

namespace spincorr {

enum class Dimension {
    Frequency,       // Hz
    Time,            // s
    Psd,             // Hz^2/Hz
    Dimensionless,   //
    PerFrequency,    // 1/Hz, e.g. d(visibility)/d(detuning)
    Phase,           // rad
    PhasePerFrequency,  // rad/Hz
    Field,           // field-unit
    FieldPsd,        // field-unit^2/Hz
    Susceptibility,  // Hz per field-unit
};

const char *dimension_name(Dimension d);

/// Parses "<number> <unit>" into SI (Hz, s, Hz^2/Hz, rad). Throws ConfigError naming `path`.
/// Bare numbers are accepted only for Dimensionless.
double parse_quantity(std::string_view text, Dimension dim, const std::string &path);

/// Reads j[key] as a quantity with units. Throws ConfigError when missing or malformed.
double quantity_at(const nlohmann::json &j, const std::string &key, Dimension dim, const std::string &path);

/// Like quantity_at but returns `fallback` when the key is absent.
double quantity_or(const nlohmann::json &j, const std::string &key, Dimension dim, const std::string &path,
                   double fallback);

}  // namespace spincorr

#endif
