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
#include <filesystem>
#include <numeric>
#include <random>
#include <vector>

#include "spincorr/errors.h"
#include "spincorr/spectral.h"

namespace spincorr {
namespace {

std::vector<double> gaussian(size_t n, double sd, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0, sd);
    std::vector<double> x(n);
    for (auto &v : x) v = nd(rng);
    return x;
}

BatchingPlan single_band(size_t M, size_t N) {
    BatchingPlan p;
    p.bands = {{0, INFINITY, M, N}};
    return p;
}

TEST(Spectral, ConstantSeriesHasZeroPeriodogram) {
    std::vector<double> x(128, 3.7);
    for (double p : periodogram(x, 0.06)) EXPECT_NEAR(p, 0, 1e-20);
}

TEST(Spectral, ParsevalIdentity) {
    const double dt = 0.06;
    auto x = gaussian(1024, 2.0, 1);
    double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double var = 0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= x.size();
    auto p = periodogram(x, dt);
    const size_t n = x.size();
    double s = p[0] + p[n / 2];
    for (size_t k = 1; k < n / 2; k++) s += 2 * p[k];
    double df = 1.0 / (n * dt);
    EXPECT_NEAR(s * df / var, 1.0, 1e-9);
}

TEST(Spectral, HannWindowPreservesWhiteLevel) {
    const double dt = 0.06, sd = 1.5;
    auto x = gaussian(256 * 200, sd, 2);
    auto s = batch_periodograms({x}, dt, single_band(200, 256), {}, Window::Hann);
    double mean = 0;
    for (size_t k = 0; k < s.size(); k++) mean += s.w(k, 0, 0).real() / s.M[k];
    mean /= s.size();
    EXPECT_NEAR(mean / (sd * sd * dt), 1.0, 0.03);
}

TEST(Spectral, CrossPeriodogramIsHermitian) {
    auto x = gaussian(64, 1, 3), y = gaussian(64, 1, 4);
    auto cxy = cross_periodogram(x, y, 0.06);
    auto cyx = cross_periodogram(y, x, 0.06);
    for (size_t k = 0; k < cxy.size(); k++) EXPECT_NEAR(std::abs(cxy[k] - std::conj(cyx[k])), 0, 1e-12);
    auto cxx = cross_periodogram(x, x, 0.06);
    auto pxx = periodogram(x, 0.06);
    for (size_t k = 0; k < pxx.size(); k++) EXPECT_NEAR(cxx[k].real(), pxx[k], 1e-9 * (pxx[k] + 1e-9));
}

TEST(Spectral, InverseGammaPosteriorMean) {
    const double s = 2.5;
    PsdEntry e = auto_psd_posterior(1.0, 8 * s, 8);
    EXPECT_DOUBLE_EQ(e.mean, 8 * s / 7);
    EXPECT_LT(e.q05, e.mean);
    EXPECT_GT(e.q95, e.mean);
    PsdEntry big = auto_psd_posterior(1.0, 100000 * s, 100000);
    EXPECT_NEAR(big.mean / s, 1.0, 1e-4);
    EXPECT_NE(auto_psd_posterior(1.0, 0, 8).flags & spectrum_flags::kDegenerate, 0u);
}

TEST(Spectral, AutoIntervalsCover) {
    // White noise of known level: 90% intervals cover at 85-95%.
    const double dt = 0.06, sd = 1.0, S0 = sd * sd * dt;
    size_t hit = 0, total = 0;
    for (uint64_t run = 0; run < 20; run++) {
        auto x = gaussian(64 * 16, sd, 100 + run);
        auto s = batch_periodograms({x}, dt, single_band(16, 64));
        PsdPosterior post = auto_spectrum(s, 0);
        for (size_t k = 0; k + 1 < post.entries.size(); k++) {
            total++;
            hit += post.entries[k].q05 <= S0 && S0 <= post.entries[k].q95;
        }
    }
    double cov = static_cast<double>(hit) / total;
    EXPECT_GE(cov, 0.85);
    EXPECT_LE(cov, 0.95);
}

TEST(Spectral, CoherenceOfIdenticalAndNegatedChannels) {
    auto x = gaussian(64 * 32, 1, 5);
    std::vector<double> neg(x.size());
    for (size_t i = 0; i < x.size(); i++) neg[i] = -x[i];
    auto s = batch_periodograms({x, x, neg}, 0.06, single_band(32, 64));
    NormalizationOptions opt;
    opt.mode = NormalizationMode::Raw;
    opt.draws.draws = 500;
    CrossPosterior same = normalized_cross(s, 0, 1, nullptr, opt);
    CrossPosterior anti = normalized_cross(s, 0, 2, nullptr, opt);
    for (size_t k = 0; k < same.entries.size(); k += 5) {
        EXPECT_NEAR(same.entries[k].abs_mean, 1, 1e-6);
        EXPECT_NEAR(same.entries[k].arg_mean, 0, 1e-6);
        EXPECT_NEAR(std::abs(anti.entries[k].arg_mean), M_PI, 1e-6);
    }
}

TEST(Spectral, IndependentChannelsGiveSmallCoherence) {
    auto x = gaussian(32 * 128, 1, 6), y = gaussian(32 * 128, 1, 7);
    auto s = batch_periodograms({x, y}, 0.06, single_band(128, 32));
    NormalizationOptions opt;
    opt.mode = NormalizationMode::Raw;
    opt.draws.draws = 1000;
    CrossPosterior c = normalized_cross(s, 0, 1, nullptr, opt);
    for (const auto &e : c.entries) EXPECT_LT(e.abs_q05, 0.15);
}

TEST(Spectral, CrossIntervalsCoverTruth) {
    // Two channels sharing half their power: |c| = 0.5, C real.
    const double dt = 0.06, S0 = dt;
    size_t hit_re = 0, hit_im = 0, hit_abs = 0, total = 0;
    for (uint64_t run = 0; run < 40; run++) {
        auto a = gaussian(32 * 16, std::sqrt(0.5), 200 + run);
        auto b = gaussian(32 * 16, std::sqrt(0.5), 300 + run);
        auto c = gaussian(32 * 16, std::sqrt(0.5), 400 + run);
        std::vector<double> x(a.size()), y(a.size());
        for (size_t i = 0; i < a.size(); i++) {
            x[i] = a[i] + c[i];
            y[i] = b[i] + c[i];
        }
        auto s = batch_periodograms({x, y}, dt, single_band(16, 32));
        NormalizationOptions opt;
        opt.mode = NormalizationMode::Raw;
        opt.draws.draws = 1000;
        opt.draws.seed = run;
        for (const auto &e : normalized_cross(s, 0, 1, nullptr, opt).entries) {
            if (e.f >= 0.5 / dt) continue;
            total++;
            hit_re += e.re_q05 <= S0 / 2 && S0 / 2 <= e.re_q95;
            hit_im += e.im_q05 <= 0 && 0 <= e.im_q95;
            hit_abs += e.abs_q05 <= 0.5 && 0.5 <= e.abs_q95;
        }
    }
    EXPECT_GE(static_cast<double>(hit_re) / total, 0.85);
    EXPECT_LE(static_cast<double>(hit_re) / total, 0.95);
    EXPECT_GE(static_cast<double>(hit_im) / total, 0.85);
    EXPECT_LE(static_cast<double>(hit_im) / total, 0.95);
    EXPECT_GE(static_cast<double>(hit_abs) / total, 0.85);
}

TEST(Spectral, DrawsAreSeedReproducible) {
    auto a = draw_spectral_matrix(4, 3, {1, 0.5}, 10, 50, 9);
    auto b = draw_spectral_matrix(4, 3, {1, 0.5}, 10, 50, 9);
    for (size_t i = 0; i < a.size(); i++) {
        EXPECT_EQ(a[i].s11, b[i].s11);
        EXPECT_EQ(a[i].s12, b[i].s12);
        EXPECT_GE(a[i].s11 * a[i].s22, std::norm(a[i].s12));
    }
}

TEST(Spectral, MergeSingleBinIsIdentity) {
    auto x = gaussian(64 * 8, 1, 8);
    auto s = batch_periodograms({x}, 0.06, single_band(8, 64));
    auto m = merge_bins(s, MergeScheme{0.0, 0});
    ASSERT_EQ(m.size(), s.size());
    for (size_t k = 0; k < s.size(); k++) {
        EXPECT_EQ(m.freq[k], s.freq[k]);
        EXPECT_EQ(m.M[k], s.M[k]);
        EXPECT_EQ(m.w(k, 0, 0), s.w(k, 0, 0));
    }
}

TEST(Spectral, MergingNarrowsIntervals) {
    SpectralSamples s;
    s.dt = 1;
    s.p = 1;
    s.names = {"x"};
    for (int k = 0; k < 4; k++) {
        s.freq.push_back(1.0 + 0.01 * k);
        s.M.push_back(32);
        s.band.push_back(0);
        s.W.push_back(32.0);
    }
    auto m = merge_bins(s, MergeScheme{0.1, 0});
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m.M[0], 128u);
    PsdEntry one = auto_spectrum(s, 0).entries[0];
    PsdEntry four = auto_spectrum(m, 0).entries[0];
    double ratio = (four.q95 - four.q05) / (one.q95 - one.q05);
    EXPECT_NEAR(ratio, 0.5, 0.05);
    // A step between bins pools to an intermediate level.
    s.W = {32.0, 32.0, 96.0, 96.0};
    auto step = merge_bins(s, MergeScheme{0.1, 0});
    double level = auto_spectrum(step, 0).entries[0].mean;
    EXPECT_GT(level, 1.0);
    EXPECT_LT(level, 3.0);
}

TEST(Spectral, MergeRespectsBands) {
    SpectralSamples s;
    s.dt = 1;
    s.p = 1;
    s.names = {"x"};
    s.freq = {1.0, 1.01};
    s.M = {8, 32};
    s.band = {0, 1};
    s.W = {8.0, 32.0};
    EXPECT_EQ(merge_bins(s, MergeScheme{0.5, 0}).size(), 2u);
}

TEST(Spectral, StandardPlanBands) {
    BatchingPlan p = BatchingPlan::standard();
    ASSERT_EQ(p.bands.size(), 3u);
    EXPECT_EQ(p.bands[0].M, 8u);
    EXPECT_EQ(p.bands[0].N, 32752u);
    EXPECT_EQ(p.bands[1].M, 32u);
    EXPECT_EQ(p.bands[2].N, 2047u);
    EXPECT_DOUBLE_EQ(p.bands[1].f_low, 2.7e-3);
    BatchingPlan s = BatchingPlan::scaled(32752);
    EXPECT_EQ(s.bands[0].N, 4094u);
    EXPECT_NO_THROW(s.validate());
}

TEST(Spectral, ShortTraceDownscalesM) {
    auto x = gaussian(4000, 1, 9);
    auto s = batch_periodograms({x}, 0.06, single_band(8, 1000));
    ASSERT_EQ(s.warnings.size(), 1u);
    EXPECT_NE(s.warnings[0].find("M downscaled from 8 to 4"), std::string::npos);
    EXPECT_EQ(s.M[0], 4u);
    auto d = batch_periodograms({x}, 0.06, single_band(8, 3000));
    EXPECT_EQ(d.size(), 0u);
    EXPECT_NE(d.warnings.at(0).find("dropped"), std::string::npos);
}

TEST(Spectral, FloorAlgebraAndCorrection) {
    RateTrace t;
    t.dt = 0.06;
    for (int i = 0; i < 10; i++) t.push_back({}, {4e6, 4e6, 4e6, 4e6}, 0);
    SpectralSamples dummy;
    FloorOptions opt;
    opt.mode = FloorMode::Variance;
    ErrorFloor fl = estimate_floor(dummy, t, opt);
    double z = fl.at("Z", 1.0);
    EXPECT_NEAR(z, 4e6 * 0.06, 1e-6);
    EXPECT_NEAR(fl.at("nu_A", 1.0) / z, 0.5, 1e-12);
    EXPECT_NEAR(fl.at("J", 1.0) / z, 1.0, 1e-12);
    EXPECT_NEAR(fl.at("Sigma", 1.0) / z, 1.0, 1e-12);

    PsdPosterior p;
    p.name = "nu_A";
    p.entries = {auto_psd_posterior(0.1, 8 * 1e6, 8), auto_psd_posterior(0.2, 8 * 1e4, 8)};
    std::vector<std::string> warn;
    PsdPosterior c = correct_floor(p, fl, "nu_A", &warn);
    EXPECT_TRUE(c.corrected);
    EXPECT_NEAR(c.entries[0].mean, p.entries[0].mean - z / 2, 1e-6);
    EXPECT_EQ(c.entries[1].mean, 0);
    EXPECT_NE(c.entries[1].flags & spectrum_flags::kFloorExceeds, 0u);
    EXPECT_EQ(warn.size(), 1u);

    CrossPosterior cp;
    cp.entries.resize(2);
    cp.entries[0].mean = {1, 2};
    CrossPosterior cc = correct_floor(cp);
    EXPECT_EQ(cc.entries[0].mean, cp.entries[0].mean);
}

TEST(Spectral, PlateauFloorFromZChannel) {
    auto z = gaussian(64 * 32, 1, 10);
    auto s = batch_periodograms({z}, 0.06, single_band(32, 64), {"Z"});
    FloorOptions opt;
    opt.mode = FloorMode::Plateau;
    ErrorFloor fl = estimate_floor(s, RateTrace{}, opt);
    EXPECT_NEAR(fl.level / 0.06, 1.0, 0.1);
}

TEST(Spectral, DerivedSeriesFromTrace) {
    RateTrace t;
    t.push_back({10, 8, 7, 5}, {}, 0);
    DerivedSeries d = derived_series(t);
    EXPECT_DOUBLE_EQ(d.nu_A[0], 9);
    EXPECT_DOUBLE_EQ(d.J[0], 2);
    EXPECT_DOUBLE_EQ(d.Z[0], 0);
    EXPECT_DOUBLE_EQ(d.Delta[0], 3);
}

TEST(Spectral, FileRoundTrip) {
    auto x = gaussian(64 * 8, 1, 11), y = gaussian(64 * 8, 1, 12);
    auto s = batch_periodograms({x, y}, 0.06, single_band(8, 64), {"nu_A", "nu_B"});
    auto dir = std::filesystem::temp_directory_path();
    PsdPosterior p = auto_spectrum(s, 0);
    write_psd(dir / "spincorr_psd_rt.csv", p, {});
    PsdPosterior pr = read_psd(dir / "spincorr_psd_rt.csv");
    ASSERT_EQ(pr.entries.size(), p.entries.size());
    for (size_t k = 0; k < p.entries.size(); k++) {
        EXPECT_DOUBLE_EQ(pr.entries[k].mean, p.entries[k].mean);
        EXPECT_EQ(pr.entries[k].M, p.entries[k].M);
    }
    NormalizationOptions opt;
    opt.mode = NormalizationMode::Raw;
    opt.draws.draws = 200;
    CrossPosterior c = normalized_cross(s, 0, 1, nullptr, opt);
    write_cross(dir / "spincorr_cross_rt.csv", c, {});
    CrossPosterior cr = read_cross(dir / "spincorr_cross_rt.csv");
    ASSERT_EQ(cr.entries.size(), c.entries.size());
    EXPECT_DOUBLE_EQ(cr.entries[3].abs_mean, c.entries[3].abs_mean);
    EXPECT_EQ(cr.entries[3].mean, c.entries[3].mean);
}

TEST(Spectral, PlanJsonErrorsNamePath) {
    EXPECT_THROW(plan_from_json("weekly", "spectra.plan"), ConfigError);
    nlohmann::json bad = nlohmann::json::array({{{"f_low", "0 Hz"}, {"f_high", "1 Hz"}, {"M", 1}, {"N", 64}}});
    try {
        plan_from_json(bad, "spectra.plan");
        FAIL();
    } catch (const ConfigError &e) {
        EXPECT_EQ(e.path().rfind("spectra.plan", 0), 0u);
    }
}

}  // namespace
}  // namespace spincorr
