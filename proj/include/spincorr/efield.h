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

#ifndef SPINCORR_EFIELD_H
#define SPINCORR_EFIELD_H

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "spincorr/noise_model.h"
#include "spincorr/noise_synth.h"
#include "spincorr/spectral.h"

namespace spincorr {

/// Linear map from site fields (E_A, E_B) to (d nu_A, d nu_B, d J), Hz per field-unit.
struct Susceptibility {
    enum Row { kRowA = 0, kRowB = 1, kRowJ = 2 };
    std::array<std::array<double, 2>, 3> G{};

    /// chi_Q on the qubit diagonal, kappa_Q in the J row, zero qubit off-diagonals.
    static Susceptibility diagonal(double chi_A, double chi_B, double kappa_A, double kappa_B);

    double chi_A() const {
        return G[kRowA][0];
    }
    double chi_B() const {
        return G[kRowB][1];
    }
    double kappa_A() const {
        return G[kRowJ][0];
    }
    double kappa_B() const {
        return G[kRowJ][1];
    }
    bool qubit_diagonal() const {
        return G[kRowA][1] == 0 && G[kRowB][0] == 0;
    }
    /// Throws ConfigError for non-finite entries.
    void validate() const;
};

struct FieldEntry {
    double f = 0;
    double S_EA = 0;
    double S_EB = 0;
    std::complex<double> C{};
    /// |C| / sqrt(S_EA S_EB) before clamping (0 when both are zero).
    double cs_ratio = 0;
    uint32_t flags = 0;
};

/// Site-field spectra in field-unit^2/Hz. Entries flagged kExceedsUnity had C clamped
/// radially onto the Cauchy-Schwarz boundary.
struct FieldSpectra {
    std::vector<FieldEntry> entries;
};

/// Row-major 3 x 3 Hermitian matrix over (nu_A, nu_B, J), entry (i, j) = <v_i conj(v_j)>.
using RateMatrix = std::array<std::complex<double>, 9>;

/// G S_e G^T for S_e = [[S_EA, C], [conj C, S_EB]].
RateMatrix propagate(const Susceptibility &G, double S_EA, double S_EB, std::complex<double> C);
std::vector<RateMatrix> propagate(const Susceptibility &G, const FieldSpectra &fields);

/// S_EA = S_A / chi_A^2, S_EB = S_B / chi_B^2, C = C_AB / (chi_A chi_B), with C clamped
/// when |C|^2 > S_EA S_EB. Throws std::domain_error for a zero chi and ConfigError
/// for non-diagonal qubit rows.
FieldEntry invert(double f, double S_A, double S_B, std::complex<double> C_AB, const Susceptibility &G);
/// Per-frequency inversion of aligned posterior means. Input flags are carried over.
FieldSpectra invert(const PsdPosterior &S_A, const PsdPosterior &S_B, const CrossPosterior &C_AB,
                    const Susceptibility &G);

struct PredictionEntry {
    double f = 0;
    double S_J = 0;
    std::complex<double> C_AJ{}, C_BJ{};
    /// C_QJ / sqrt(S_Q' S_J') with uncorrected denominators.
    std::complex<double> c_AJ{}, c_BJ{};
    /// sqrt(corrected S_Q S_J) / sqrt(uncorrected S_Q' S_J').
    double r_AJ = 0, r_BJ = 0;
    uint32_t flags = 0;
};

struct PredictionSet {
    std::vector<PredictionEntry> entries;
};

/// Denominator spectra on the field grid: uncorrected (prime) and floor-corrected.
struct Denominators {
    std::vector<double> S_A_raw, S_B_raw, S_J_raw;
    std::vector<double> S_A, S_B, S_J;
};

/// Exchange block of propagate() and its normalizations. Entries with a nonpositive
/// uncorrected denominator are flagged kUnresolvable and carry zero c and r.
PredictionSet predict_exchange(const FieldSpectra &fields, const Susceptibility &G, const Denominators &den);
/// Denominators taken from posterior means (aligned with `fields`).
Denominators denominators(const PsdPosterior &A_raw, const PsdPosterior &B_raw, const PsdPosterior &J_raw,
                          const PsdPosterior &A, const PsdPosterior &B, const PsdPosterior &J);

/// Rate channels (d nu_A, d nu_B, d J) = G (E_A, E_B) from a two-channel field trace.
TraceSet fields_to_rates(const TraceSet &fields, const Susceptibility &G);
/// Analytic rate spectral matrix of a two-channel field model at f > 0.
RateMatrix rate_spectral_matrix(const NoiseModel &field_model, const Susceptibility &G, double f);

/// CSV (f, S_EA, S_EB, C_re, C_im, cs_ratio, flags) + `<file>.json` with units.
void write_fields(const std::filesystem::path &csv, const FieldSpectra &fields, const nlohmann::json &meta);
FieldSpectra read_fields(const std::filesystem::path &csv);
/// CSV (f, S_J, C_AJ and C_BJ re/im, |c| and Arg c for AJ and BJ, r_AJ, r_BJ, flags) + sidecar.
void write_prediction(const std::filesystem::path &csv, const PredictionSet &pred, const nlohmann::json &meta);
PredictionSet read_prediction(const std::filesystem::path &csv);

nlohmann::json to_json(const Susceptibility &G);
/// Either {"chi_A", "chi_B", "kappa_A", "kappa_B"} or {"G": 3 x 2}; values in Hz/field-unit
/// unit strings or plain numbers.
Susceptibility susceptibility_from_json(const nlohmann::json &j, const std::string &path);

}  // namespace spincorr

#endif
