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

#ifndef SPINCORR_FITTING_H
#define SPINCORR_FITTING_H

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>

#include "json.hpp"
#include "spincorr/spectral.h"

namespace spincorr {

/// Parameter order everywhere: a (Hz^2/Hz at 1 Hz), gamma, b (Hz), tau0 (s), g (Hz^2/Hz).
enum FitParam { kA = 0, kGamma = 1, kB = 2, kTau0 = 3, kG = 4 };
using FitParams = std::array<double, 5>;

enum class FitVariant { PowerLaw, PowerLawLorentzian, PowerLawLorentzianFloor };
const char *fit_variant_name(FitVariant v);
FitVariant fit_variant_from_name(const std::string &s);

/// a f^-gamma + 0.5 b^2 tau0 / (1 + (2 pi f tau0)^2) + g, dropping terms the variant lacks.
double model_psd(const FitParams &theta, FitVariant variant, double f);

struct FitModel {
    FitVariant variant = FitVariant::PowerLawLorentzian;
    FitParams lower = {1e-3, 0.0, 1.0, 1e-4, 1e-3};
    FitParams upper = {1e16, 3.0, 1e8, 1e3, 1e16};
    std::array<bool, 5> fixed = {false, false, false, false, false};

    explicit FitModel(FitVariant v = FitVariant::PowerLawLorentzian);
    /// True for parameters the variant uses and that are not fixed.
    bool is_free(int i) const;
    bool uses(int i) const;
    size_t free_count() const;
    void validate() const;
};

struct FitOptions {
    size_t starts = 8;
    uint64_t seed = 0;
    size_t max_iterations = 300;
    double f_min = 0;
    double f_max = std::numeric_limits<double>::infinity();
};

struct FitResult {
    FitVariant variant = FitVariant::PowerLawLorentzian;
    FitParams theta{};
    FitParams sigma{};
    double objective = 0;
    size_t points = 0;
    size_t starts = 0;
    bool converged = false;

    nlohmann::json to_json() const;
    /// One-line caption-style parameter summary in kHz^2/Hz, kHz and s.
    std::string caption() const;
};

/// Weighted least squares in log space:
///   sum_k ((ln mean_k - ln model(f_k)) / sigma_k)^2,  sigma_k = (ln q95 - ln q05) / (2 * 1.645),
/// over entries with positive mean inside [f_min, f_max]. Levenberg-Marquardt in
/// (ln a, gamma, ln b, ln tau0, ln g) with box bounds, best of `starts` starts (the
/// first is `init`, the rest are seeded perturbations). Uncertainties from the inverse
/// Gauss-Newton Hessian. Throws DataError with fewer than 2x as many points as free
/// parameters.
FitResult fit_psd(const PsdPosterior &spectrum, const FitModel &model, const FitParams &init,
                  const FitOptions &opt = {});

/// 2 * integral of S over [f_min, f_max] (positive frequencies of a two-sided PSD) by
/// adaptive quadrature, relative tolerance `tol`. f_max may be infinite.
double integrate_psd(const std::function<double(double)> &S, double f_min, double f_max, double tol = 1e-8);
/// Model version. Throws std::domain_error when the integral diverges (gamma >= 1 with
/// f_min = 0, or a non-decaying tail with f_max infinite).
double integrate_psd(const FitParams &theta, FitVariant variant, double f_min, double f_max, double tol = 1e-8);
/// Trapezoidal integral of the posterior means over [f_min, f_max], times 2.
double integrate_psd(const PsdPosterior &post, double f_min, double f_max);

struct T2Options {
    double t_floor = 1e-10;
    double t_ceiling = 1e-2;
    double tol = 1e-6;
};

struct T2Result {
    double t2 = 0;
    bool found = false;
};

/// chi(t) = (2 pi t)^2 int_{1/t_int}^{f_max} S(f) sinc^2(pi f t) df. With Gaussian phase
/// noise the Ramsey envelope is exp(-chi(t)), so the root of chi(t) = 1 is the 1/e time.
double ramsey_chi(const std::function<double(double)> &S, double t, double t_int, double f_max);
/// Bisection for chi(t) = 1 on [t_floor, t_ceiling]; `found` is false when chi stays
/// below 1 up to the ceiling.
T2Result t2_star(const std::function<double(double)> &S, double t_int, double f_max, const T2Options &opt = {});
T2Result t2_star(const FitParams &theta, FitVariant variant, double t_int, double f_max, const T2Options &opt = {});

nlohmann::json to_json(const FitModel &m);
FitModel fit_model_from_json(const nlohmann::json &j, const std::string &path);
/// Inverse of FitResult::to_json().
FitResult fit_result_from_json(const nlohmann::json &j, const std::string &path);
FitParams fit_params_from_json(const nlohmann::json &j, const std::string &path, const FitParams &fallback);

}  // namespace spincorr

#endif
