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

#include "spincorr/units.h"

#include <charconv>
#include <cmath>
#include <map>
#include <numbers>

#include "spincorr/errors.h"

namespace spincorr {

namespace {

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        b++;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        e--;
    }
    return std::string(s.substr(b, e - b));
}

const std::map<std::string, double> &unit_table(Dimension dim) {
    static const std::map<std::string, double> freq = {{"Hz", 1.0}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}, {"mHz", 1e-3}};
    static const std::map<std::string, double> time = {{"s", 1.0},   {"sec", 1.0},  {"ms", 1e-3}, {"us", 1e-6},
                                                       {"μs", 1e-6}, {"ns", 1e-9}};
    static const std::map<std::string, double> psd = {
        {"Hz^2/Hz", 1.0}, {"kHz^2/Hz", 1e6}, {"MHz^2/Hz", 1e12}, {"Hz2/Hz", 1.0}, {"kHz2/Hz", 1e6}};
    static const std::map<std::string, double> none = {{"", 1.0}};
    static const std::map<std::string, double> per_freq = {{"1/Hz", 1.0}, {"1/kHz", 1e-3}, {"1/MHz", 1e-6}};
    static const std::map<std::string, double> phase = {{"rad", 1.0}, {"deg", std::numbers::pi / 180}};
    static const std::map<std::string, double> phase_per_freq = {{"rad/Hz", 1.0}, {"rad/kHz", 1e-3}, {"rad/MHz", 1e-6}};
    static const std::map<std::string, double> field = {{"field-unit", 1.0}};
    static const std::map<std::string, double> field_psd = {{"field-unit^2/Hz", 1.0}};
    static const std::map<std::string, double> chi = {{"Hz/field-unit", 1.0}, {"kHz/field-unit", 1e3}, {"MHz/field-unit", 1e6}};
    switch (dim) {
        case Dimension::Frequency:
            return freq;
        case Dimension::Time:
            return time;
        case Dimension::Psd:
            return psd;
        case Dimension::Dimensionless:
            return none;
        case Dimension::PerFrequency:
            return per_freq;
        case Dimension::Phase:
            return phase;
        case Dimension::PhasePerFrequency:
            return phase_per_freq;
        case Dimension::Field:
            return field;
        case Dimension::FieldPsd:
            return field_psd;
        case Dimension::Susceptibility:
            return chi;
    }
    return none;
}

}  // namespace

const char *dimension_name(Dimension d) {
    switch (d) {
        case Dimension::Frequency:
            return "frequency (Hz)";
        case Dimension::Time:
            return "time (s)";
        case Dimension::Psd:
            return "PSD (Hz^2/Hz)";
        case Dimension::Dimensionless:
            return "dimensionless";
        case Dimension::PerFrequency:
            return "1/Hz";
        case Dimension::Phase:
            return "phase (rad)";
        case Dimension::PhasePerFrequency:
            return "rad/Hz";
        case Dimension::Field:
            return "field-unit";
        case Dimension::FieldPsd:
            return "field-unit^2/Hz";
        case Dimension::Susceptibility:
            return "Hz/field-unit";
    }
    return "?";
}

double parse_quantity(std::string_view text, Dimension dim, const std::string &path) {
    std::string s = trim(text);
    double value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr == s.data()) {
        throw ConfigError(path, "expected '<number> <unit>', got '" + s + "'");
    }
    std::string unit = trim(std::string_view(ptr, s.data() + s.size() - ptr));
    const auto &table = unit_table(dim);
    auto it = table.find(unit);
    if (it == table.end()) {
        throw ConfigError(path, "unit '" + unit + "' is not a valid " + dimension_name(dim) + " unit");
    }
    if (!std::isfinite(value)) {
        throw ConfigError(path, "non-finite value");
    }
    return value * it->second;
}

double quantity_at(const nlohmann::json &j, const std::string &key, Dimension dim, const std::string &path) {
    std::string p = path.empty() ? key : path + "." + key;
    if (!j.is_object() || !j.contains(key)) {
        throw ConfigError(p, "missing required quantity");
    }
    const auto &v = j.at(key);
    if (v.is_number()) {
        if (dim != Dimension::Dimensionless) {
            throw ConfigError(p, std::string("bare number given; units required (") + dimension_name(dim) + ")");
        }
        return v.get<double>();
    }
    if (!v.is_string()) {
        throw ConfigError(p, "expected a string with units");
    }
    return parse_quantity(v.get<std::string>(), dim, p);
}

double quantity_or(const nlohmann::json &j, const std::string &key, Dimension dim, const std::string &path,
                   double fallback) {
    if (!j.is_object() || !j.contains(key)) {
        return fallback;
    }
    return quantity_at(j, key, dim, path);
}

}  // namespace spincorr
