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

#ifndef SPINCORR_SPECTRAL_H
#define SPINCORR_SPECTRAL_H

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "spincorr/rate_trace.h"

namespace spincorr {

struct Band {
    double f_low = 0;
    double f_high = 0;
    size_t M = 0;
    size_t N = 0;
};

/// Frequency-dependent batching: each output frequency comes from exactly one band.
struct BatchingPlan {
    std::vector<Band> bands;

    /// M = 8 / 32 / 128 batches of N = 32752 / 8188 / 2047 samples, split at 2.7 and 27 mHz.
    static BatchingPlan standard();
    /// `standard()` with N and the band edges scaled so that the plan fits `total` samples
    /// at the standard batch counts.
    static BatchingPlan scaled(size_t total);
    void validate() const;
};

enum class Window { Rectangular, Hann };

/// Two-sided periodogram P_k = dt |X_k|^2 / (n U), k = 0..n/2, of the mean-removed
/// series, with U the mean squared window (1 for rectangular).
std::vector<double> periodogram(std::span<const double> x, double dt, Window window = Window::Rectangular);
/// dt X_k conj(Y_k) / (n U) under the same conventions.
std::vector<std::complex<double>> cross_periodogram(std::span<const double> x, std::span<const double> y, double dt,
                                                    Window window = Window::Rectangular);

/// Per-frequency sums over batches of the p x p periodogram matrix
/// W_ij = sum_m dt X_i,m conj(X_j,m) / (N U).
struct SpectralSamples {
    double dt = 1;
    size_t p = 0;
    std::vector<std::string> names;
    std::vector<double> freq;
    std::vector<size_t> M;
    std::vector<int> band;
    std::vector<std::complex<double>> W;  // freq-major, p x p row-major per frequency
    std::vector<Band> plan_used;
    std::vector<std::string> warnings;

    size_t size() const {
        return freq.size();
    }
    std::complex<double> w(size_t k, size_t i, size_t j) const {
        return W[(k * p + i) * p + j];
    }
    std::complex<double> &w(size_t k, size_t i, size_t j) {
        return W[(k * p + i) * p + j];
    }
    size_t channel(const std::string &name) const;
};

/// Batches `series` (equal lengths) per `plan`. Bands whose M exceeds the data are run
/// with the largest M that fits and a warning; bands left with M < 2 are dropped with a
/// warning.
SpectralSamples batch_periodograms(const std::vector<std::vector<double>> &series, double dt,
                                   const BatchingPlan &plan, const std::vector<std::string> &names = {},
                                   Window window = Window::Rectangular);

/// Pools adjacent bins of the same band whose frequencies lie within a factor
/// (1 + bandwidth) of the group's first bin, for bins at or above `min_freq`.
struct MergeScheme {
    double bandwidth = 0.1;
    double min_freq = 0;
};
SpectralSamples merge_bins(const SpectralSamples &samples, const MergeScheme &scheme);

namespace spectrum_flags {
constexpr uint32_t kDegenerate = 1;
constexpr uint32_t kSingular = 2;
constexpr uint32_t kUnresolvable = 4;
constexpr uint32_t kExceedsUnity = 8;
constexpr uint32_t kFloorExceeds = 16;
}  // namespace spectrum_flags

/// Inverse-gamma posterior of S with shape M and scale `sum` (Jeffreys prior 1/S),
/// optionally shifted down by `shift` and clipped at 0.
struct PsdEntry {
    double f = 0;
    double mean = 0;
    double q05 = 0;
    double q95 = 0;
    size_t M = 0;
    uint32_t flags = 0;
    double sum = 0;
    double shift = 0;
};

struct PsdPosterior {
    std::string name;
    bool corrected = false;
    std::vector<PsdEntry> entries;
};

PsdEntry auto_psd_posterior(double f, double sum, size_t M);
PsdPosterior auto_spectrum(const SpectralSamples &s, size_t channel);

struct CrossEntry {
    double f = 0;
    std::complex<double> mean;
    double re_q05 = 0, re_q95 = 0, im_q05 = 0, im_q95 = 0;
    double abs_mean = 0, abs_q05 = 0, abs_q95 = 0;
    double arg_mean = 0, arg_q05 = 0, arg_q95 = 0;
    size_t M = 0;
    uint32_t flags = 0;
    bool corrected = false;
};

struct CrossPosterior {
    std::string name;
    std::vector<CrossEntry> entries;
};

struct CrossOptions {
    size_t draws = 2000;
    uint64_t seed = 0;
};

/// Complex inverse-Wishart posterior of the 2 x 2 spectral matrix given the sample
/// matrix (w11, w22, w12) from M batches, under the prior det(S)^-2. C = S_12 and
/// c = S_12 / sqrt(S_11 S_22) are summarized from Monte-Carlo draws. Requires M >= 3.
/// When floor1 or floor2 is nonzero the coherence uses the shifted denominators
/// (S_11 - floor1)(S_22 - floor2) from the same draws.
CrossEntry cross_psd_posterior(double f, double w11, double w22, std::complex<double> w12, size_t M,
                               const CrossOptions &opt, double floor1 = 0, double floor2 = 0);

/// Draws S ~ CIW(M, W) for 2 x 2 W; returns (S11, S22, S12).
struct SpectralDraw {
    double s11, s22;
    std::complex<double> s12;
};
std::vector<SpectralDraw> draw_spectral_matrix(double w11, double w22, std::complex<double> w12, size_t M,
                                               size_t draws, uint64_t seed);

/// Linear combinations of a rate trace.
struct DerivedSeries {
    double dt = 0.06;
    std::vector<double> nu_A, nu_B, J, Z, Sigma, Delta;

    static const std::vector<std::string> &names();
    std::vector<std::vector<double>> all() const;
};
DerivedSeries derived_series(const RateTrace &trace);

enum class FloorMode { Plateau, Variance, Spectral };
const char *floor_mode_name(FloorMode m);
FloorMode floor_mode_from_name(const std::string &s);

/// Estimation-error floor. With independent, equal-power errors in the four rates and
/// F the Z' level: floor(nu'_Q) = F / 2 and floor(J') = floor(Sigma') = floor(Delta') = F.
struct ErrorFloor {
    FloorMode mode = FloorMode::Spectral;
    double dt = 0.06;
    /// Scalar Z' level (plateau mode), Hz^2/Hz.
    double level = 0;
    /// Mean per-estimate variances (variance mode), Hz^2.
    ConditionalRates mean_variance{};
    /// Smoothed S_Z' on a frequency grid (spectral mode).
    std::vector<double> f, zf;

    /// Floor of the named derived series at f.
    double at(const std::string &series, double f) const;
    nlohmann::json to_json() const;
};

struct FloorOptions {
    FloorMode mode = FloorMode::Spectral;
    /// Plateau mode: median of S_Z' means at f >= plateau_min_freq.
    double plateau_min_freq = 0;
    /// Spectral mode: pooling bandwidth for the smoothed S_Z'.
    double smoothing_bandwidth = 0.3;
};

/// Estimates the floor from unmerged samples containing a "Z" channel, or from the
/// trace variances (rows without degenerate flags).
ErrorFloor estimate_floor(const SpectralSamples &s, const RateTrace &trace, const FloorOptions &opt);

/// Shifts the posterior by floor.at(series, f), clipping at 0. `warnings` receives a
/// note when the floor exceeds the uncorrected mean at the lowest frequencies.
PsdPosterior correct_floor(const PsdPosterior &post, const ErrorFloor &floor, const std::string &series,
                           std::vector<std::string> *warnings = nullptr);
/// Cross spectra of independent-error series carry no floor; returned unchanged.
CrossPosterior correct_floor(const CrossPosterior &post);

enum class NormalizationMode { Raw, Corrected, Split };

struct NormalizationOptions {
    NormalizationMode mode = NormalizationMode::Split;
    /// Split mode: raw below, corrected at or above this frequency.
    double crossover = 1.5;
    CrossOptions draws;
};

/// Cross posterior of channels (i, j) with normalized coherence. Corrected entries use
/// floor-shifted denominators; those whose denominator is nonpositive in more than 5%
/// of draws are flagged unresolvable. |c| > 1 is flagged, never clipped.
CrossPosterior normalized_cross(const SpectralSamples &s, size_t i, size_t j, const ErrorFloor *floor,
                                const NormalizationOptions &opt);

/// CSV (f, mean, q05, q95, M_eff, flags, shift) + `<file>.json`.
void write_psd(const std::filesystem::path &csv, const PsdPosterior &post, const nlohmann::json &meta);
/// CSV (f, Re/Im/|c|/Arg mean q05 q95, M_eff, flags, mode) + `<file>.json`.
void write_cross(const std::filesystem::path &csv, const CrossPosterior &post, const nlohmann::json &meta);
PsdPosterior read_psd(const std::filesystem::path &csv);
CrossPosterior read_cross(const std::filesystem::path &csv);

nlohmann::json to_json(const BatchingPlan &plan);
BatchingPlan plan_from_json(const nlohmann::json &j, const std::string &path);

}  // namespace spincorr

#endif
