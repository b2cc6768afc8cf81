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

#ifndef SPINCORR_RATE_TRACE_H
#define SPINCORR_RATE_TRACE_H

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "spincorr/two_qubit.h"

namespace spincorr {

/// Per-row flag bits.
namespace trace_flags {
/// Posterior mass piled at the grid edge for rate r: bit (1 << r).
constexpr uint32_t degenerate(RateLabel r) {
    return 1u << static_cast<int>(r);
}
constexpr uint32_t kAnyDegenerate = 0xF;
/// Row lies in the rolling-prior burn-in and is dropped by spectral analysis.
constexpr uint32_t kBurnIn = 1u << 4;
}  // namespace trace_flags

/// Time series of the four conditional-rate estimates at a uniform cadence.
/// Rates are deviations (Hz) from each rate's nominal microwave reference.
struct RateTrace {
    double dt = 0.06;
    std::vector<ConditionalRates> rates;
    std::vector<ConditionalRates> variances;
    std::vector<uint32_t> flags;
    nlohmann::json provenance = nlohmann::json::object();

    size_t size() const {
        return rates.size();
    }
    void push_back(const ConditionalRates &r, const ConditionalRates &v, uint32_t f) {
        rates.push_back(r);
        variances.push_back(v);
        flags.push_back(f);
    }
    /// Fraction of rows with any degenerate-posterior flag.
    double flagged_fraction() const;
    /// Rows after dropping the leading burn-in rows.
    RateTrace without_burn_in() const;
    /// First `rows` rows.
    RateTrace head(size_t rows) const;
    std::vector<double> column(RateLabel r) const;
};

/// CSV columns: round, nu_A_up..nu_B_dn (Hz), var_A_up..var_B_dn (Hz^2), flags; plus `<file>.json` sidecar.
void write_rate_trace(const std::filesystem::path &csv, const RateTrace &trace);
RateTrace read_rate_trace(const std::filesystem::path &csv);

}  // namespace spincorr

#endif
