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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spincorr/errors.h"
#include "spincorr/fitting.h"

namespace spincorr {
namespace {

// Noise-free posterior: mean on the model, +-20% band.
PsdPosterior exact_spectrum(const FitParams &theta, FitVariant v, size_t n = 60) {
    PsdPosterior p;
    p.name = "x";
    for (size_t k = 0; k < n; k++) {
        double f = 1e-3 * std::pow(10.0, 3.5 * static_cast<double>(k) / static_cast<double>(n - 1));
        double s = model_psd(theta, v, f);
        PsdEntry e;
        e.f = f;
        e.mean = s;
        e.q05 = s * 0.8;
        e.q95 = s * 1.2;
        e.M = 32;
        p.entries.push_back(e);
    }
    return p;
}

TEST(Fitting, ModelTerms) {
    FitParams t{1e9, 1.2, 2e5, 0.2, 4e7};
    EXPECT_DOUBLE_EQ(model_psd(t, FitVariant::PowerLaw, 1.0), 1e9);
    double lor = 0.5 * 2e5 * 2e5 * 0.2 / (1 + std::pow(2 * M_PI * 0.2, 2));
    EXPECT_NEAR(model_psd(t, FitVariant::PowerLawLorentzian, 1.0), 1e9 + lor, 1e-3);
    EXPECT_NEAR(model_psd(t, FitVariant::PowerLawLorentzianFloor, 1.0), 1e9 + lor + 4e7, 1e-3);
}

TEST(Fitting, RecoversPowerLaw) {
    FitParams truth{1000e6, 1.2, 1, 1, 1};
    PsdPosterior p = exact_spectrum(truth, FitVariant::PowerLaw);
    FitModel m(FitVariant::PowerLaw);
    FitResult r = fit_psd(p, m, {3e9, 0.8, 1, 1, 1});
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.theta[kA] / truth[kA], 1, 1e-6);
    EXPECT_NEAR(r.theta[kGamma], truth[kGamma], 1e-6);
}

TEST(Fitting, RecoversLorentzianAndFloor) {
    FitParams truth{1860e6, 1.15, 282e3, 0.162, 43e6};
    PsdPosterior p = exact_spectrum(truth, FitVariant::PowerLawLorentzianFloor, 120);
    FitModel m(FitVariant::PowerLawLorentzianFloor);
    FitOptions opt;
    opt.starts = 12;
    FitResult r = fit_psd(p, m, {1e9, 1.2, 2e5, 0.2, 1e7}, opt);
    EXPECT_NEAR(r.theta[kA] / truth[kA], 1, 1e-4);
    EXPECT_NEAR(r.theta[kGamma], truth[kGamma], 1e-4);
    EXPECT_NEAR(r.theta[kB] / truth[kB], 1, 1e-4);
    EXPECT_NEAR(r.theta[kTau0] / truth[kTau0], 1, 1e-4);
    EXPECT_NEAR(r.theta[kG] / truth[kG], 1, 1e-4);
    EXPECT_LT(r.objective, 1e-10);
}

TEST(Fitting, FixedParametersStayPut) {
    FitParams truth{1e9, 1.3, 1, 1, 1};
    FitModel m(FitVariant::PowerLaw);
    m.fixed[kGamma] = true;
    FitResult r = fit_psd(exact_spectrum(truth, FitVariant::PowerLaw), m, {1e9, 1.1, 1, 1, 1});
    EXPECT_EQ(r.theta[kGamma], 1.1);
    EXPECT_EQ(m.free_count(), 1u);
}

TEST(Fitting, NoisyFitUncertaintyIsHonest) {
    // IG-distributed means at M = 32; the fitted gamma lies within 3 sigma of truth.
    FitParams truth{1e9, 1.2, 1, 1, 1};
    std::mt19937_64 rng(3);
    std::gamma_distribution<double> gd(32, 1.0);
    PsdPosterior p = exact_spectrum(truth, FitVariant::PowerLaw, 200);
    for (auto &e : p.entries) {
        double s = model_psd(truth, FitVariant::PowerLaw, e.f);
        double sum = 0;
        for (int m = 0; m < 32; m++) sum += s * gd(rng) / 32;
        e = auto_psd_posterior(e.f, sum, 32);
    }
    FitResult r = fit_psd(p, FitModel(FitVariant::PowerLaw), {1e9, 1.0, 1, 1, 1});
    EXPECT_GT(r.sigma[kGamma], 0);
    EXPECT_LT(std::abs(r.theta[kGamma] - 1.2), 3 * r.sigma[kGamma] + 0.01);
}

TEST(Fitting, TooFewPointsIsDataError) {
    PsdPosterior p = exact_spectrum({1e9, 1.2, 1, 1, 1}, FitVariant::PowerLaw, 3);
    EXPECT_THROW(fit_psd(p, FitModel(FitVariant::PowerLawLorentzian), {1e9, 1.2, 1e5, 0.1, 1}), DataError);
}

TEST(Fitting, WhiteIntegral) {
    const double g = 43e6;
    double v = integrate_psd([&](double) { return g; }, 0.1, 2.5, 1e-12);
    EXPECT_NEAR(v / (2 * g * 2.4), 1, 1e-12);
}

TEST(Fitting, LorentzianIntegral) {
    const double b = 282e3, tau = 0.162;
    double lor = integrate_psd([&](double f) { return 0.5 * b * b * tau / (1 + std::pow(2 * M_PI * f * tau, 2)); }, 0,
                               INFINITY, 1e-10);
    EXPECT_NEAR(lor / (b * b / 4), 1, 1e-7);
}

TEST(Fitting, PowerLawClosedForm) {
    FitParams t{1100e6, 1.21, 1, 1, 1};
    double v = integrate_psd(t, FitVariant::PowerLaw, 0.01, INFINITY, 1e-11);
    double exact = 2 * 1100e6 * std::pow(0.01, -0.21) / 0.21;
    EXPECT_NEAR(v / exact, 1, 1e-8);
}

TEST(Fitting, IntegralIsAdditive) {
    FitParams t{1e9, 1.1, 2e5, 0.3, 1e7};
    auto v = FitVariant::PowerLawLorentzianFloor;
    double whole = integrate_psd(t, v, 0.01, 10, 1e-12);
    double parts = integrate_psd(t, v, 0.01, 0.7, 1e-12) + integrate_psd(t, v, 0.7, 10, 1e-12);
    EXPECT_NEAR(whole / parts, 1, 1e-10);
}

TEST(Fitting, DivergentIntegralsThrow) {
    FitParams t{1e9, 1.2, 1, 1, 1e6};
    EXPECT_THROW(integrate_psd(t, FitVariant::PowerLaw, 0, 1, 1e-8), std::domain_error);
    EXPECT_THROW(integrate_psd(t, FitVariant::PowerLawLorentzianFloor, 0.1, INFINITY, 1e-8), std::domain_error);
    EXPECT_THROW(integrate_psd({1e9, 0.9, 1, 1, 1}, FitVariant::PowerLaw, 0.1, INFINITY, 1e-8), std::domain_error);
}

TEST(Fitting, PosteriorIntegralIsTrapezoid) {
    PsdPosterior p;
    for (double f : {1.0, 2.0, 3.0}) {
        PsdEntry e;
        e.f = f;
        e.mean = f;
        p.entries.push_back(e);
    }
    EXPECT_NEAR(integrate_psd(p, 1, 3), 2 * 4.0, 1e-12);
}

TEST(Fitting, QuasiStaticT2ScalesWithInverseRootPower) {
    // Slow Lorentzian: essentially all power below 1/t, so chi ~ t^2 sigma^2.
    const double b = 100e3, tau = 10;
    auto S1 = [&](double f) { return 0.5 * b * b * tau / (1 + std::pow(2 * M_PI * f * tau, 2)); };
    auto S4 = [&](double f) { return 4 * S1(f); };
    T2Result r1 = t2_star(S1, 1e4, INFINITY);
    T2Result r4 = t2_star(S4, 1e4, INFINITY);
    ASSERT_TRUE(r1.found && r4.found);
    EXPECT_NEAR(r4.t2 / r1.t2, 0.5, 1e-3);
    // Quasi-static limit chi = (2 pi t)^2 b^2 / 8 over the positive-frequency half.
    EXPECT_NEAR(r1.t2, 1 / (2 * M_PI * std::sqrt(b * b / 8)), 0.01 * r1.t2);
}

TEST(Fitting, T2DecreasesWithPowerAndIntegrationTime) {
    FitParams base{1e9, 1.2, 1, 1, 1};
    double prev = INFINITY;
    for (double a : {1e8, 1e9, 1e10}) {
        FitParams t = base;
        t[kA] = a;
        T2Result r = t2_star(t, FitVariant::PowerLaw, 100, INFINITY);
        ASSERT_TRUE(r.found);
        EXPECT_LT(r.t2, prev);
        prev = r.t2;
    }
    T2Result short_int = t2_star(base, FitVariant::PowerLaw, 1, INFINITY);
    T2Result long_int = t2_star(base, FitVariant::PowerLaw, 1000, INFINITY);
    EXPECT_GT(short_int.t2, long_int.t2);
}

TEST(Fitting, ChiIsMonotoneInTime) {
    FitParams t{1e9, 1.2, 2e5, 0.2, 1};
    auto S = [&](double f) { return model_psd(t, FitVariant::PowerLawLorentzian, f); };
    double prev = 0;
    for (double tt : {1e-8, 1e-7, 1e-6, 1e-5}) {
        double c = ramsey_chi(S, tt, 100, INFINITY);
        EXPECT_GT(c, prev);
        prev = c;
    }
}

TEST(Fitting, T2CeilingReportsNotFound) {
    T2Result r = t2_star([](double) { return 1e-6; }, 1, 10);
    EXPECT_FALSE(r.found);
}

TEST(Fitting, ResultJsonRoundTrip) {
    FitParams truth{1e9, 1.2, 1, 1, 1};
    FitResult r = fit_psd(exact_spectrum(truth, FitVariant::PowerLaw), FitModel(FitVariant::PowerLaw),
                          {2e9, 1.0, 1, 1, 1});
    FitResult back = fit_result_from_json(r.to_json(), "fit");
    EXPECT_EQ(back.variant, r.variant);
    EXPECT_NEAR(back.theta[kA] / r.theta[kA], 1, 1e-12);
    EXPECT_NEAR(back.theta[kGamma], r.theta[kGamma], 1e-12);
    EXPECT_EQ(back.points, r.points);
    EXPECT_FALSE(r.caption().empty());
}

TEST(Fitting, ModelJsonErrors) {
    EXPECT_THROW(fit_model_from_json({{"model", "cubic"}}, "fits[0]"), ConfigError);
    EXPECT_THROW(fit_model_from_json({{"model", "PL"}, {"fixed", {"zeta"}}}, "fits[0]"), ConfigError);
    EXPECT_EQ(fit_variant_from_name("PL+Lor"), FitVariant::PowerLawLorentzian);
}

}  // namespace
}  // namespace spincorr
