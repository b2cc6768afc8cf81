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

#ifndef SPINCORR_NOISE_MODEL_H
#define SPINCORR_NOISE_MODEL_H

#include <complex>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace spincorr {

// All spectra here are two-sided: the variance of a component is the integral of
// its PSD over f in (-inf, inf). Values are in Hz^2/Hz for rate noise.

/// a (f / 1 Hz)^-gamma, with a the PSD at 1 Hz.
struct PowerLaw {
    double a = 0;
    double gamma = 1;
};

/// 0.5 b^2 tau0 / (1 + (2 pi f tau0)^2): a symmetric two-level process with level
/// separation b and correlation time tau0 (variance b^2 / 4).
struct Lorentzian {
    double b = 0;
    double tau0 = 1;
};

struct White {
    double g = 0;
};

/// amp cos(2 pi f0 t + phase). A spectral line; contributes nothing to the continuous PSD.
struct Tone {
    double amp = 0;
    double f0 = 0;
    double phase = 0;
};

using SpectrumComponent = std::variant<PowerLaw, Lorentzian, White, Tone>;

/// Continuous two-sided PSD of one component at |f|. Tones return 0.
double component_psd(const SpectrumComponent &c, double f);

/// Throws std::invalid_argument naming `path` on a violated parameter guard.
void validate_component(const SpectrumComponent &c, const std::string &path);

bool is_tone(const SpectrumComponent &c);

/// A component injected coherently into every channel with weights `coupling`.
struct SharedComponent {
    SpectrumComponent component;
    std::vector<double> coupling;
};

/// Telegraph process occupying levels {0, shift[i]} in channel i.
struct Fluctuator {
    double tau0 = 1;
    std::vector<double> shift;
    uint64_t stream = 0;
};

struct NoiseModel {
    size_t channels = 0;
    std::vector<std::vector<SpectrumComponent>> private_components;
    std::vector<SharedComponent> shared;
    std::vector<Fluctuator> fluctuators;

    explicit NoiseModel(size_t num_channels = 0) : channels(num_channels), private_components(num_channels) {
    }

    void add_private(size_t channel, SpectrumComponent c);
    void add_shared(SpectrumComponent c, std::vector<double> coupling);
    void add_fluctuator(double tau0, std::vector<double> shift, uint64_t stream = 0);

    bool has_tones() const;
    void validate() const;
};

/// Analytic two-sided cross spectrum between channels i and j at f > 0, including
/// fluctuator Lorentzians and excluding tones. Throws std::domain_error for f <= 0.
std::complex<double> eval_psd(const NoiseModel &model, size_t i, size_t j, double f);

/// Gaussian part of the model's spectral matrix at f (row-major channels x channels).
/// Fluctuators and tones are excluded; they are synthesized in the time domain.
std::vector<std::complex<double>> gaussian_spectral_matrix(const NoiseModel &model, double f);

/// How a model is observed: sampled every `sample_dt`, then block-averaged over
/// `average_count` consecutive samples and decimated.
struct Acquisition {
    double sample_dt = 1;
    size_t average_count = 1;

    double output_dt() const {
        return sample_dt * static_cast<double>(average_count);
    }
};

/// Expected periodogram of the acquired series produced by `synthesize`: Gaussian
/// components are realized on the sample grid without aliasing, fluctuators are
/// sampled telegraph processes, and block averaging folds images into the output band.
std::complex<double> eval_psd_observed(const NoiseModel &model, size_t i, size_t j, double f, const Acquisition &acq);

/// Quantity family of a model: rate noise (Hz, Hz^2/Hz) or field noise (field-unit,
/// field-unit^2/Hz).
enum class NoiseUnits { Rate, Field };

nlohmann::json to_json(const NoiseModel &model, NoiseUnits units = NoiseUnits::Rate);
/// Parses a model whose quantities carry unit strings. Errors name `path`.
NoiseModel noise_model_from_json(const nlohmann::json &j, const std::string &path = "noise",
                                 NoiseUnits units = NoiseUnits::Rate);

nlohmann::json component_to_json(const SpectrumComponent &c, NoiseUnits units = NoiseUnits::Rate);
SpectrumComponent component_from_json(const nlohmann::json &j, const std::string &path,
                                      NoiseUnits units = NoiseUnits::Rate);

std::string format_quantity(double value, const char *unit);

}  // namespace spincorr

#endif
