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

#include "spincorr/two_qubit.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spincorr {

const char *rate_name(RateLabel r) {
    switch (r) {
        case RateLabel::A_up:
            return "nu_A_up";
        case RateLabel::A_dn:
            return "nu_A_dn";
        case RateLabel::B_up:
            return "nu_B_up";
        case RateLabel::B_dn:
            return "nu_B_dn";
    }
    return "?";
}

double ConditionalRates::operator[](RateLabel r) const {
    switch (r) {
        case RateLabel::A_up:
            return nu_A_up;
        case RateLabel::A_dn:
            return nu_A_dn;
        case RateLabel::B_up:
            return nu_B_up;
        case RateLabel::B_dn:
            return nu_B_dn;
    }
    return 0;
}

double &ConditionalRates::operator[](RateLabel r) {
    switch (r) {
        case RateLabel::A_up:
            return nu_A_up;
        case RateLabel::A_dn:
            return nu_A_dn;
        case RateLabel::B_up:
            return nu_B_up;
        case RateLabel::B_dn:
            break;
    }
    return nu_B_dn;
}

ConditionalRates ConditionalRates::operator+(const ConditionalRates &o) const {
    return {nu_A_up + o.nu_A_up, nu_A_dn + o.nu_A_dn, nu_B_up + o.nu_B_up, nu_B_dn + o.nu_B_dn};
}

ConditionalRates ConditionalRates::operator*(double s) const {
    return {nu_A_up * s, nu_A_dn * s, nu_B_up * s, nu_B_dn * s};
}

ReducedSet ReducedSet::operator+(const ReducedSet &o) const {
    return {nu_A + o.nu_A, nu_B + o.nu_B, J_est + o.J_est, Z + o.Z, Sigma + o.Sigma, Delta + o.Delta};
}

ConditionalRates conditional_rates(const TwoQubitParams &p) {
    double sigma = p.sigma();
    double delta = p.delta();
    double root = std::sqrt(delta * delta + p.J * p.J);
    double sign_A = delta >= 0 ? 1.0 : -1.0;
    double center_A = (sigma + sign_A * root) / 2;
    double center_B = (sigma - sign_A * root) / 2;
    // The larger-magnitude pair is rounded first; its split (exact by Sterbenz) is reused
    // for the other pair so both splits are bitwise equal and Z vanishes identically.
    const double half = p.J / 2;
    const bool a_first = std::abs(center_A) >= std::abs(center_B);
    const double c1 = a_first ? center_A : center_B;
    const double c2 = a_first ? center_B : center_A;
    const double up1 = c1 + half, dn1 = c1 - half;
    const double split = up1 - dn1;
    double dn2 = c2 - half;
    double up2 = dn2 + split;
    if (up2 - dn2 != split) {
        // dn2 + split crossed a binade; anchor on the upper rate instead.
        up2 = c2 + half;
        dn2 = up2 - split;
        if (up2 - dn2 != split) dn2 = c2 - half;
    }
    ConditionalRates r;
    r.nu_A_up = a_first ? up1 : up2;
    r.nu_A_dn = a_first ? dn1 : dn2;
    r.nu_B_up = a_first ? up2 : up1;
    r.nu_B_dn = a_first ? dn2 : dn1;
    return r;
}

ReducedSet reduce_rates(const ConditionalRates &r) {
    ReducedSet s;
    s.nu_A = (r.nu_A_up + r.nu_A_dn) / 2;
    s.nu_B = (r.nu_B_up + r.nu_B_dn) / 2;
    double split_A = r.nu_A_up - r.nu_A_dn;
    double split_B = r.nu_B_up - r.nu_B_dn;
    s.J_est = (split_A + split_B) / 2;
    s.Z = (split_A - split_B) / 2;
    s.Sigma = s.nu_A + s.nu_B;
    s.Delta = s.nu_A - s.nu_B;
    return s;
}

double roundtrip_residual(const TwoQubitParams &p) {
    if (p.delta() == 0) {
        throw std::domain_error("roundtrip_residual: nu_A == nu_B, first-order form undefined");
    }
    ConditionalRates exact = conditional_rates(p);
    double half = p.J / 2;
    return std::max({std::abs(exact.nu_A_up - (p.nu_A + half)), std::abs(exact.nu_A_dn - (p.nu_A - half)),
                     std::abs(exact.nu_B_up - (p.nu_B + half)), std::abs(exact.nu_B_dn - (p.nu_B - half))});
}

}  // namespace spincorr
