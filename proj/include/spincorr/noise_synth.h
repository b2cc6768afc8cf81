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

#ifndef SPINCORR_NOISE_SYNTH_H
#define SPINCORR_NOISE_SYNTH_H

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "spincorr/noise_model.h"

namespace spincorr {

/// Multi-channel real series sampled every `dt` seconds (values are Hz deviations).
struct TraceSet {
    double dt = 1;
    size_t n = 0;
    std::vector<std::vector<double>> data;
    uint64_t seed = 0;
    nlohmann::json metadata = nlohmann::json::object();

    size_t channels() const {
        return data.size();
    }
    /// Adds `other` channel-wise; shapes and dt must agree.
    TraceSet &operator+=(const TraceSet &other);
};

TraceSet zero_trace(size_t channels, size_t n, double dt);

struct SynthOptions {
    /// Realize the DC bin with S(f_1) (flattened power law) rather than zero.
    bool include_dc = true;
    /// Pivot tolerance for the per-frequency positive-semidefinite Cholesky factor.
    double psd_tolerance = 1e-10;
};

/// Lower-triangular L with L L^H = a for a Hermitian positive semidefinite p x p matrix
/// (row-major, overwritten). Pivots within `tol` * max diagonal of zero are treated as
/// rank deficiency; more negative ones throw NumericalError.
void psd_cholesky(std::span<std::complex<double>> a, size_t p, double tol);

/// Standard normal deviate addressed by (seed, counter); identical in every thread layout.
double counter_normal(uint64_t seed, uint64_t counter);

/// Fills `spectrum[c][k]`, k = 0..n/2, with the Gaussian-part DFT coefficients. Two
/// kernels with identical output: the serial reference and the OpenMP one.
void synth_spectrum_serial(const NoiseModel &model, size_t n, double dt, uint64_t seed, const SynthOptions &opt,
                           std::vector<std::vector<std::complex<double>>> &spectrum);
void synth_spectrum_omp(const NoiseModel &model, size_t n, double dt, uint64_t seed, const SynthOptions &opt,
                        std::vector<std::vector<std::complex<double>>> &spectrum);

/// Stationary Gaussian series realizing the Gaussian part of `model` (private and shared
/// non-tone components). With P(f_k) = dt |DFT_k|^2 / n, E[P(f_k)] equals the model PSD at
/// every DFT frequency of the trace. Requires n even, n >= 2, dt > 0.
TraceSet synth_gaussian(const NoiseModel &model, size_t n, double dt, uint64_t seed, const SynthOptions &opt = {});

/// Symmetric telegraph process with levels {0, shift[i]}, correlation time tau0
/// (each direction switches at rate 1 / (2 tau0)), stationary initial state.
TraceSet synth_rtn(double tau0, std::span<const double> shift, size_t n, double dt, uint64_t seed);

/// amp cos(2 pi f0 t + phase) * coupling[i] at t = m dt. Requires f0 below Nyquist.
TraceSet synth_tone(double amp, double f0, double phase, std::span<const double> coupling, size_t n, double dt);

/// Full model: Gaussian part + every fluctuator (stream-seeded) + every tone.
TraceSet synthesize(const NoiseModel &model, size_t n, double dt, uint64_t seed, const SynthOptions &opt = {});

/// Writes `<base>.bin` (little-endian float64, row-major n x channels) and `<base>.json`.
void write_trace(const std::filesystem::path &base, const TraceSet &trace);
TraceSet read_trace(const std::filesystem::path &base);
void write_trace_csv(const std::filesystem::path &file, const TraceSet &trace);

}  // namespace spincorr

#endif
