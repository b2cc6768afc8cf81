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

#include "spincorr/rate_trace.h"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "spincorr/errors.h"

namespace spincorr {

double RateTrace::flagged_fraction() const {
    if (flags.empty()) {
        return 0;
    }
    size_t k = 0;
    for (uint32_t f : flags) {
        k += (f & trace_flags::kAnyDegenerate) != 0;
    }
    return static_cast<double>(k) / static_cast<double>(flags.size());
}

RateTrace RateTrace::without_burn_in() const {
    size_t start = 0;
    while (start < size() && (flags[start] & trace_flags::kBurnIn)) {
        start++;
    }
    RateTrace out;
    out.dt = dt;
    out.provenance = provenance;
    out.rates.assign(rates.begin() + static_cast<long>(start), rates.end());
    out.variances.assign(variances.begin() + static_cast<long>(start), variances.end());
    out.flags.assign(flags.begin() + static_cast<long>(start), flags.end());
    return out;
}

RateTrace RateTrace::head(size_t rows) const {
    rows = std::min(rows, size());
    RateTrace out;
    out.dt = dt;
    out.provenance = provenance;
    out.rates.assign(rates.begin(), rates.begin() + static_cast<long>(rows));
    out.variances.assign(variances.begin(), variances.begin() + static_cast<long>(rows));
    out.flags.assign(flags.begin(), flags.begin() + static_cast<long>(rows));
    return out;
}

std::vector<double> RateTrace::column(RateLabel r) const {
    std::vector<double> out(size());
    for (size_t i = 0; i < size(); i++) {
        out[i] = rates[i][r];
    }
    return out;
}

void write_rate_trace(const std::filesystem::path &csv, const RateTrace &t) {
    std::ofstream out(csv);
    if (!out) {
        throw DataError("cannot write " + csv.string());
    }
    out << "round,nu_A_up,nu_A_dn,nu_B_up,nu_B_dn,var_A_up,var_A_dn,var_B_up,var_B_dn,flags\n";
    out << std::setprecision(17);
    for (size_t i = 0; i < t.size(); i++) {
        out << i;
        for (RateLabel r : kAllRates) {
            out << "," << t.rates[i][r];
        }
        for (RateLabel r : kAllRates) {
            out << "," << t.variances[i][r];
        }
        out << "," << t.flags[i] << "\n";
    }
    nlohmann::json side = {{"format", "spincorr-rate-trace-v1"},
                           {"dt_round_s", t.dt},
                           {"rows", t.size()},
                           {"units", {{"rates", "Hz"}, {"variances", "Hz^2"}}},
                           {"provenance", t.provenance}};
    std::filesystem::path js = csv;
    js += ".json";
    std::ofstream(js) << std::setw(2) << side << "\n";
}

RateTrace read_rate_trace(const std::filesystem::path &csv) {
    std::filesystem::path js = csv;
    js += ".json";
    std::ifstream jin(js);
    if (!jin) {
        throw DataError("cannot read " + js.string());
    }
    nlohmann::json side;
    jin >> side;
    RateTrace t;
    t.dt = side.at("dt_round_s").get<double>();
    t.provenance = side.value("provenance", nlohmann::json::object());
    std::ifstream in(csv);
    if (!in) {
        throw DataError("cannot read " + csv.string());
    }
    std::string line;
    std::getline(in, line);
    size_t lineno = 1;
    while (std::getline(in, line)) {
        lineno++;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) {
            v.push_back(std::stod(cell));
        }
        if (v.size() != 10) {
            throw DataError(csv.string() + ":" + std::to_string(lineno) + ": expected 10 columns");
        }
        ConditionalRates r{v[1], v[2], v[3], v[4]};
        ConditionalRates var{v[5], v[6], v[7], v[8]};
        t.push_back(r, var, static_cast<uint32_t>(v[9]));
    }
    return t;
}

}  // namespace spincorr
