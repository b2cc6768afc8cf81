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

#ifndef SPINCORR_TWO_QUBIT_H
#define SPINCORR_TWO_QUBIT_H

#include <array>

namespace spincorr {

/// Bare precession rates of the two qubits and their exchange splitting, all in Hz.
struct TwoQubitParams {
    double nu_A = 0;
    double nu_B = 0;
    double J = 0;

    double sigma() const {
        return nu_A + nu_B;
    }
    double delta() const {
        return nu_A - nu_B;
    }
};

/// Index of a conditional rate: qubit Q precessing with the other qubit in state sigma.
enum class RateLabel : int { A_up = 0, A_dn = 1, B_up = 2, B_dn = 3 };

inline constexpr std::array<RateLabel, 4> kAllRates = {RateLabel::A_up, RateLabel::A_dn, RateLabel::B_up, RateLabel::B_dn};

const char *rate_name(RateLabel r);

/// The four conditional precession rates nu_Q^sigma (Hz).
struct ConditionalRates {
    double nu_A_up = 0;
    double nu_A_dn = 0;
    double nu_B_up = 0;
    double nu_B_dn = 0;

    double operator[](RateLabel r) const;
    double &operator[](RateLabel r);

    ConditionalRates operator+(const ConditionalRates &o) const;
    ConditionalRates operator*(double s) const;
};

/// Linear combinations of the four rates used by the analysis.
struct ReducedSet {
    double nu_A = 0;   // (A_up + A_dn) / 2
    double nu_B = 0;   // (B_up + B_dn) / 2
    double J_est = 0;  // (A_up - A_dn + B_up - B_dn) / 2
    double Z = 0;      // (A_up - A_dn - B_up + B_dn) / 2, zero for exact rates
    double Sigma = 0;  // nu_A + nu_B
    double Delta = 0;  // nu_A - nu_B

    ReducedSet operator+(const ReducedSet &o) const;
};

/// Exact conditional rates of the exchange-coupled pair.
///
/// The square-root term takes the + sign for the qubit with the larger bare rate;
/// for nu_A == nu_B qubit A is treated as the upper one.
ConditionalRates conditional_rates(const TwoQubitParams &params);

ReducedSet reduce_rates(const ConditionalRates &rates);

/// Largest deviation of the exact rates from the first-order form nu_Q +- J/2.
/// Throws std::domain_error when nu_A == nu_B.
double roundtrip_residual(const TwoQubitParams &params);

}  // namespace spincorr

#endif
