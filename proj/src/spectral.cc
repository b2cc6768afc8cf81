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

#include "spincorr/spectral.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "io_util.h"
#include "spincorr/errors.h"
#include "spincorr/fft.h"
#include "spincorr/rng.h"
#include "spincorr/units.h"

namespace spincorr {

BatchingPlan BatchingPlan::standard() {
    BatchingPlan p;
    p.bands = {{0, 2.7e-3, 8, 32752}, {2.7e-3, 27e-3, 32, 8188}, {27e-3, std::numeric_limits<double>::infinity(), 128, 2047}};
    return p;
}

BatchingPlan BatchingPlan::scaled(size_t total) {
    BatchingPlan p = standard();
    size_t need = 0;
    for (const auto &b : p.bands) need = std::max(need, b.M * b.N);
    if (total >= need) return p;
    double s = static_cast<double>(total) / static_cast<double>(need);
    for (auto &b : p.bands) {
        size_t n = static_cast<size_t>(std::floor(static_cast<double>(b.N) * s));
        double ratio = static_cast<double>(b.N) / static_cast<double>(std::max<size_t>(n, 1));
        b.N = std::max<size_t>(n, 4);
        b.f_low *= ratio;
        if (std::isfinite(b.f_high)) b.f_high *= ratio;
    }
    // Keep the bands contiguous after rounding.
    for (size_t i = 1; i < p.bands.size(); i++) p.bands[i].f_low = p.bands[i - 1].f_high;
    return p;
}

void BatchingPlan::validate() const {
    if (bands.empty()) throw std::invalid_argument("batching plan has no bands");
    for (size_t i = 0; i < bands.size(); i++) {
        const Band &b = bands[i];
        if (b.N < 4) throw std::invalid_argument("band " + std::to_string(i) + ": N must be >= 4");
        if (b.M < 2) throw std::invalid_argument("band " + std::to_string(i) + ": M must be >= 2");
        if (!(b.f_high > b.f_low)) throw std::invalid_argument("band " + std::to_string(i) + ": empty frequency range");
        if (i > 0 && b.f_low != bands[i - 1].f_high) {
            throw std::invalid_argument("band " + std::to_string(i) + " does not start where band " +
                                        std::to_string(i - 1) + " ends");
        }
    }
}

namespace {

std::vector<double> window_values(size_t n, Window w, double &u) {
    std::vector<double> v(n, 1.0);
    u = 1;
    if (w == Window::Hann) {
        double s = 0;
        for (size_t i = 0; i < n; i++) {
            v[i] = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
            s += v[i] * v[i];
        }
        u = s / static_cast<double>(n);
    }
    return v;
}

void prepared_dft(std::span<const double> x, const std::vector<double> &win, RealFft &fft, std::vector<double> &buf,
                  std::vector<std::complex<double>> &out) {
    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (size_t i = 0; i < x.size(); i++) buf[i] = (x[i] - mean) * win[i];
    fft.forward(buf, out);
}

}  // namespace

std::vector<double> periodogram(std::span<const double> x, double dt, Window window) {
    size_t n = x.size();
    double u;
    auto win = window_values(n, window, u);
    RealFft fft(n);
    std::vector<double> buf(n);
    std::vector<std::complex<double>> X(n / 2 + 1);
    prepared_dft(x, win, fft, buf, X);
    std::vector<double> p(X.size());
    double scale = dt / (static_cast<double>(n) * u);
    for (size_t k = 0; k < X.size(); k++) p[k] = scale * std::norm(X[k]);
    return p;
}

std::vector<std::complex<double>> cross_periodogram(std::span<const double> x, std::span<const double> y, double dt,
                                                    Window window) {
    if (x.size() != y.size()) throw std::invalid_argument("cross_periodogram: length mismatch");
    size_t n = x.size();
    double u;
    auto win = window_values(n, window, u);
    RealFft fft(n);
    std::vector<double> buf(n);
    std::vector<std::complex<double>> X(n / 2 + 1), Y(n / 2 + 1);
    prepared_dft(x, win, fft, buf, X);
    prepared_dft(y, win, fft, buf, Y);
    std::vector<std::complex<double>> c(X.size());
    double scale = dt / (static_cast<double>(n) * u);
    for (size_t k = 0; k < X.size(); k++) c[k] = scale * X[k] * std::conj(Y[k]);
    return c;
}

size_t SpectralSamples::channel(const std::string &name) const {
    for (size_t i = 0; i < names.size(); i++) {
        if (names[i] == name) return i;
    }
    throw std::out_of_range("spectral samples have no channel '" + name + "'");
}

SpectralSamples batch_periodograms(const std::vector<std::vector<double>> &series, double dt,
                                   const BatchingPlan &plan, const std::vector<std::string> &names, Window window) {
    plan.validate();
    if (series.empty()) throw DataError("batch_periodograms: no series");
    const size_t len = series[0].size();
    for (const auto &s : series) {
        if (s.size() != len) throw DataError("batch_periodograms: series lengths differ");
    }
    SpectralSamples out;
    out.dt = dt;
    out.p = series.size();
    out.names = names;
    if (out.names.empty()) {
        for (size_t i = 0; i < out.p; i++) out.names.push_back("ch" + std::to_string(i));
    }
    const size_t p = out.p;
    for (size_t bi = 0; bi < plan.bands.size(); bi++) {
        Band b = plan.bands[bi];
        size_t fit = len / b.N;
        if (fit < b.M) {
            if (fit < 2) {
                out.warnings.push_back("band " + std::to_string(bi) + " dropped: " + std::to_string(len) +
                                       " samples hold fewer than 2 batches of " + std::to_string(b.N));
                continue;
            }
            out.warnings.push_back("band " + std::to_string(bi) + ": M downscaled from " + std::to_string(b.M) +
                                   " to " + std::to_string(fit) + " (" + std::to_string(len) + " samples)");
            b.M = fit;
        }
        out.plan_used.push_back(b);
        std::vector<size_t> ks;
        for (size_t k = 1; k <= b.N / 2; k++) {
            double f = static_cast<double>(k) / (static_cast<double>(b.N) * dt);
            if (f >= b.f_low && f < b.f_high) ks.push_back(k);
        }
        if (ks.empty()) continue;
        double u;
        auto win = window_values(b.N, window, u);
        const double scale = dt / (static_cast<double>(b.N) * u);
        const size_t base = out.freq.size();
        for (size_t k : ks) {
            out.freq.push_back(static_cast<double>(k) / (static_cast<double>(b.N) * dt));
            out.M.push_back(b.M);
            out.band.push_back(static_cast<int>(bi));
        }
        out.W.resize(out.freq.size() * p * p);
        RealFft fft(b.N);
        std::vector<double> buf(b.N);
        std::vector<std::vector<std::complex<double>>> X(p, std::vector<std::complex<double>>(b.N / 2 + 1));
        for (size_t m = 0; m < b.M; m++) {
            for (size_t c = 0; c < p; c++) {
                prepared_dft(std::span<const double>(series[c]).subspan(m * b.N, b.N), win, fft, buf, X[c]);
            }
            for (size_t q = 0; q < ks.size(); q++) {
                size_t k = ks[q];
                for (size_t i = 0; i < p; i++) {
                    for (size_t j = 0; j < p; j++) {
                        out.w(base + q, i, j) += scale * X[i][k] * std::conj(X[j][k]);
                    }
                }
            }
        }
    }
    return out;
}

SpectralSamples merge_bins(const SpectralSamples &s, const MergeScheme &scheme) {
    SpectralSamples out;
    out.dt = s.dt;
    out.p = s.p;
    out.names = s.names;
    out.plan_used = s.plan_used;
    out.warnings = s.warnings;
    const size_t pp = s.p * s.p;
    size_t i = 0;
    while (i < s.size()) {
        size_t j = i + 1;
        if (s.freq[i] >= scheme.min_freq) {
            while (j < s.size() && s.band[j] == s.band[i] && s.freq[j] <= s.freq[i] * (1 + scheme.bandwidth)) j++;
        }
        double fsum = 0;
        size_t msum = 0;
        std::vector<std::complex<double>> w(pp);
        for (size_t k = i; k < j; k++) {
            fsum += s.freq[k];
            msum += s.M[k];
            for (size_t e = 0; e < pp; e++) w[e] += s.W[k * pp + e];
        }
        out.freq.push_back(fsum / static_cast<double>(j - i));
        out.M.push_back(msum);
        out.band.push_back(s.band[i]);
        out.W.insert(out.W.end(), w.begin(), w.end());
        i = j;
    }
    return out;
}

PsdEntry auto_psd_posterior(double f, double sum, size_t M) {
    if (M < 2) throw std::invalid_argument("auto_psd_posterior: M must be >= 2");
    PsdEntry e;
    e.f = f;
    e.M = M;
    e.sum = sum;
    if (!(sum > 0)) {
        e.flags |= spectrum_flags::kDegenerate;
        return e;
    }
    double a = static_cast<double>(M);
    e.mean = sum / (a - 1);
    e.q05 = sum / boost::math::gamma_p_inv(a, 0.95);
    e.q95 = sum / boost::math::gamma_p_inv(a, 0.05);
    return e;
}

PsdPosterior auto_spectrum(const SpectralSamples &s, size_t channel) {
    PsdPosterior out;
    out.name = s.names.at(channel);
    out.entries.reserve(s.size());
    for (size_t k = 0; k < s.size(); k++) {
        out.entries.push_back(auto_psd_posterior(s.freq[k], s.w(k, channel, channel).real(), s.M[k]));
    }
    return out;
}

std::vector<SpectralDraw> draw_spectral_matrix(double w11, double w22, std::complex<double> w12, size_t M,
                                               size_t draws, uint64_t seed) {
    double det = w11 * w22 - std::norm(w12);
    // Psi = W^-1 and its Cholesky factor L.
    double p11 = w22 / det, p22 = w11 / det;
    std::complex<double> p21 = -std::conj(w12) / det;
    double l11 = std::sqrt(p11);
    std::complex<double> l21 = p21 / l11;
    double l22 = std::sqrt(std::max(p22 - std::norm(l21), 0.0));
    Rng rng(seed);
    std::gamma_distribution<double> g1(static_cast<double>(M), 1.0), g2(static_cast<double>(M) - 1, 1.0);
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    std::vector<SpectralDraw> out(draws);
    for (auto &d : out) {
        double b11 = std::sqrt(g1(rng));
        double b22 = std::sqrt(g2(rng));
        std::complex<double> b21(nd(rng), nd(rng));
        double t11 = l11 * b11;
        std::complex<double> t21 = l21 * b11 + l22 * b21;
        double t22 = l22 * b22;
        double a11 = t11 * t11;
        std::complex<double> a21 = t21 * t11;
        double a22 = std::norm(t21) + t22 * t22;
        double deta = a11 * t22 * t22;
        d.s11 = a22 / deta;
        d.s22 = a11 / deta;
        d.s12 = -std::conj(a21) / deta;
    }
    return out;
}

namespace {

double quantile(std::vector<double> &v, double q) {
    if (v.empty()) return 0;
    double pos = q * static_cast<double>(v.size() - 1);
    size_t lo = static_cast<size_t>(std::floor(pos));
    std::nth_element(v.begin(), v.begin() + static_cast<long>(lo), v.end());
    double a = v[lo];
    if (lo + 1 >= v.size()) return a;
    double b = *std::min_element(v.begin() + static_cast<long>(lo) + 1, v.end());
    return a + (pos - static_cast<double>(lo)) * (b - a);
}

double wrap_pi(double x) {
    x = std::remainder(x, 2 * std::numbers::pi);
    return x <= -std::numbers::pi ? x + 2 * std::numbers::pi : x;
}

void summarize_coherence(const std::vector<std::complex<double>> &c, CrossEntry &e) {
    if (c.empty()) return;
    std::vector<double> a(c.size()), ph(c.size());
    std::complex<double> unit_sum = 0;
    double asum = 0;
    for (size_t i = 0; i < c.size(); i++) {
        a[i] = std::abs(c[i]);
        asum += a[i];
        if (a[i] > 0) unit_sum += c[i] / a[i];
    }
    e.abs_mean = asum / static_cast<double>(c.size());
    e.abs_q05 = quantile(a, 0.05);
    e.abs_q95 = quantile(a, 0.95);
    double center = std::arg(unit_sum);
    for (size_t i = 0; i < c.size(); i++) ph[i] = wrap_pi(std::arg(c[i]) - center);
    double dsum = 0;
    for (double v : ph) dsum += v;
    e.arg_mean = wrap_pi(center + dsum / static_cast<double>(ph.size()));
    double shift = e.arg_mean - (center + dsum / static_cast<double>(ph.size()));
    e.arg_q05 = center + quantile(ph, 0.05) + shift;
    e.arg_q95 = center + quantile(ph, 0.95) + shift;
    if (e.abs_mean > 1) e.flags |= spectrum_flags::kExceedsUnity;
}

}  // namespace

CrossEntry cross_psd_posterior(double f, double w11, double w22, std::complex<double> w12, size_t M,
                               const CrossOptions &opt, double floor1, double floor2) {
    if (M < 3) throw std::invalid_argument("cross_psd_posterior: M must be >= 3");
    CrossEntry e;
    e.f = f;
    e.M = M;
    if (!(w11 > 0) || !(w22 > 0)) {
        e.flags |= spectrum_flags::kSingular;
        return e;
    }
    double det = w11 * w22 - std::norm(w12);
    if (det <= 1e-12 * w11 * w22) {
        // Rank-deficient sample matrix: regularize the diagonal so draws stay finite.
        e.flags |= spectrum_flags::kSingular;
        double scale = std::sqrt(w11 * w22);
        double r = std::abs(w12) / scale;
        if (r > 1) w12 /= r;
        w11 *= 1 + 1e-9;
        w22 *= 1 + 1e-9;
    }
    e.mean = w12 / (static_cast<double>(M) - 2);
    auto draws = draw_spectral_matrix(w11, w22, w12, M, opt.draws, opt.seed);
    std::vector<double> re(draws.size()), im(draws.size());
    for (size_t i = 0; i < draws.size(); i++) {
        re[i] = draws[i].s12.real();
        im[i] = draws[i].s12.imag();
    }
    e.re_q05 = quantile(re, 0.05);
    e.re_q95 = quantile(re, 0.95);
    e.im_q05 = quantile(im, 0.05);
    e.im_q95 = quantile(im, 0.95);
    std::vector<std::complex<double>> c;
    c.reserve(draws.size());
    bool shifted = floor1 != 0 || floor2 != 0;
    size_t bad = 0;
    for (const auto &d : draws) {
        double den = (d.s11 - floor1) * (d.s22 - floor2);
        if (shifted && !(d.s11 - floor1 > 0 && d.s22 - floor2 > 0)) {
            bad++;
            continue;
        }
        c.push_back(d.s12 / std::sqrt(den));
    }
    e.corrected = shifted;
    if (static_cast<double>(bad) > 0.05 * static_cast<double>(draws.size())) {
        e.flags |= spectrum_flags::kUnresolvable;
    }
    summarize_coherence(c, e);
    return e;
}

const std::vector<std::string> &DerivedSeries::names() {
    static const std::vector<std::string> n = {"nu_A", "nu_B", "J", "Z", "Sigma", "Delta"};
    return n;
}

std::vector<std::vector<double>> DerivedSeries::all() const {
    return {nu_A, nu_B, J, Z, Sigma, Delta};
}

DerivedSeries derived_series(const RateTrace &trace) {
    DerivedSeries d;
    d.dt = trace.dt;
    size_t n = trace.size();
    for (auto *v : {&d.nu_A, &d.nu_B, &d.J, &d.Z, &d.Sigma, &d.Delta}) v->resize(n);
    for (size_t i = 0; i < n; i++) {
        ReducedSet r = reduce_rates(trace.rates[i]);
        d.nu_A[i] = r.nu_A;
        d.nu_B[i] = r.nu_B;
        d.J[i] = r.J_est;
        d.Z[i] = r.Z;
        d.Sigma[i] = r.Sigma;
        d.Delta[i] = r.Delta;
    }
    return d;
}

const char *floor_mode_name(FloorMode m) {
    switch (m) {
        case FloorMode::Plateau:
            return "plateau";
        case FloorMode::Variance:
            return "variance";
        case FloorMode::Spectral:
            return "spectral";
    }
    return "?";
}

FloorMode floor_mode_from_name(const std::string &s) {
    if (s == "plateau") return FloorMode::Plateau;
    if (s == "variance") return FloorMode::Variance;
    if (s == "spectral") return FloorMode::Spectral;
    throw std::invalid_argument("unknown floor mode '" + s + "' (plateau, variance, spectral)");
}

namespace {

double series_weight(const std::string &series) {
    if (series == "nu_A" || series == "nu_B") return 0.5;
    if (series == "J" || series == "Z" || series == "Sigma" || series == "Delta") return 1.0;
    throw std::invalid_argument("no error floor defined for series '" + series + "'");
}

}  // namespace

double ErrorFloor::at(const std::string &series, double freq) const {
    double w = series_weight(series);
    switch (mode) {
        case FloorMode::Plateau:
            return w * level;
        case FloorMode::Variance: {
            const ConditionalRates &v = mean_variance;
            if (series == "nu_A") return (v.nu_A_up + v.nu_A_dn) * dt / 4;
            if (series == "nu_B") return (v.nu_B_up + v.nu_B_dn) * dt / 4;
            return (v.nu_A_up + v.nu_A_dn + v.nu_B_up + v.nu_B_dn) * dt / 4;
        }
        case FloorMode::Spectral: {
            if (f.empty()) return 0;
            if (freq <= f.front()) return w * zf.front();
            if (freq >= f.back()) return w * zf.back();
            size_t hi = static_cast<size_t>(std::upper_bound(f.begin(), f.end(), freq) - f.begin());
            size_t lo = hi - 1;
            double t = std::log(freq / f[lo]) / std::log(f[hi] / f[lo]);
            return w * std::exp((1 - t) * std::log(zf[lo]) + t * std::log(zf[hi]));
        }
    }
    return 0;
}

nlohmann::json ErrorFloor::to_json() const {
    nlohmann::json j = {{"mode", floor_mode_name(mode)}, {"dt_round_s", dt}};
    if (mode == FloorMode::Plateau) j["Z_level_Hz2_per_Hz"] = level;
    if (mode == FloorMode::Variance) {
        j["mean_variance_Hz2"] = {mean_variance.nu_A_up, mean_variance.nu_A_dn, mean_variance.nu_B_up,
                                  mean_variance.nu_B_dn};
    }
    if (mode == FloorMode::Spectral) {
        j["f_Hz"] = f;
        j["Z_level_Hz2_per_Hz"] = zf;
    }
    return j;
}

ErrorFloor estimate_floor(const SpectralSamples &s, const RateTrace &trace, const FloorOptions &opt) {
    ErrorFloor fl;
    fl.mode = opt.mode;
    fl.dt = s.dt;
    switch (opt.mode) {
        case FloorMode::Plateau: {
            size_t z = s.channel("Z");
            double sum = 0;
            size_t m = 0;
            for (size_t k = 0; k < s.size(); k++) {
                if (s.freq[k] < opt.plateau_min_freq) continue;
                sum += s.w(k, z, z).real();
                m += s.M[k];
            }
            if (m == 0) throw DataError("floor: no Z' bins above the plateau frequency");
            fl.level = sum / static_cast<double>(m);
            break;
        }
        case FloorMode::Variance: {
            ConditionalRates acc{};
            size_t n = 0;
            for (size_t i = 0; i < trace.size(); i++) {
                if (trace.flags[i] & (trace_flags::kAnyDegenerate | trace_flags::kBurnIn)) continue;
                acc = acc + trace.variances[i];
                n++;
            }
            if (n == 0) throw DataError("floor: no usable rows for the variance estimate");
            fl.mean_variance = acc * (1.0 / static_cast<double>(n));
            fl.dt = trace.dt;
            break;
        }
        case FloorMode::Spectral: {
            size_t z = s.channel("Z");
            SpectralSamples wide = merge_bins(s, MergeScheme{opt.smoothing_bandwidth, 0});
            for (size_t k = 0; k < wide.size(); k++) {
                double level = wide.w(k, z, z).real() / static_cast<double>(wide.M[k]);
                if (!(level > 0)) continue;
                fl.f.push_back(wide.freq[k]);
                fl.zf.push_back(level);
            }
            if (fl.f.empty()) throw DataError("floor: Z' spectrum is empty");
            break;
        }
    }
    return fl;
}

PsdPosterior correct_floor(const PsdPosterior &post, const ErrorFloor &floor, const std::string &series,
                           std::vector<std::string> *warnings) {
    PsdPosterior out = post;
    out.corrected = true;
    size_t exceeded_low = 0;
    double f_first = post.entries.empty() ? 0 : post.entries.front().f;
    for (auto &e : out.entries) {
        double F = floor.at(series, e.f);
        e.shift = F;
        if (e.mean < F) {
            e.flags |= spectrum_flags::kFloorExceeds;
            if (e.f < 10 * f_first) exceeded_low++;
        }
        e.mean = std::max(e.mean - F, 0.0);
        e.q05 = std::max(e.q05 - F, 0.0);
        e.q95 = std::max(e.q95 - F, 0.0);
    }
    if (warnings && exceeded_low > 0) {
        warnings->push_back(series + ": error floor exceeds the uncorrected spectrum at " +
                            std::to_string(exceeded_low) + " of the lowest-decade frequencies");
    }
    return out;
}

CrossPosterior correct_floor(const CrossPosterior &post) {
    return post;
}

CrossPosterior normalized_cross(const SpectralSamples &s, size_t i, size_t j, const ErrorFloor *floor,
                                const NormalizationOptions &opt) {
    CrossPosterior out;
    out.name = s.names.at(i) + "," + s.names.at(j);
    out.entries.reserve(s.size());
    for (size_t k = 0; k < s.size(); k++) {
        bool corrected = opt.mode == NormalizationMode::Corrected ||
                         (opt.mode == NormalizationMode::Split && s.freq[k] >= opt.crossover);
        double f1 = 0, f2 = 0;
        if (corrected) {
            if (!floor) throw std::invalid_argument("normalized_cross: corrected mode needs an error floor");
            f1 = floor->at(s.names[i], s.freq[k]);
            f2 = floor->at(s.names[j], s.freq[k]);
        }
        CrossOptions co = opt.draws;
        co.seed = derive_seed(opt.draws.seed, {static_cast<uint64_t>(SeedStage::SpectralPosterior), i, j, k});
        CrossEntry e = cross_psd_posterior(s.freq[k], s.w(k, i, i).real(), s.w(k, j, j).real(), s.w(k, i, j), s.M[k],
                                           co, f1, f2);
        e.corrected = corrected;
        out.entries.push_back(e);
    }
    return out;
}

namespace detail {

void write_sidecar(const std::filesystem::path &csv, const nlohmann::json &meta) {
    std::filesystem::path js = csv;
    js += ".json";
    std::ofstream(js) << std::setw(2) << meta << "\n";
}

std::vector<std::vector<double>> read_rows(const std::filesystem::path &csv, size_t cols) {
    std::ifstream in(csv);
    if (!in) throw DataError("cannot read " + csv.string());
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        lineno++;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) {
            if (cell == "raw") v.push_back(0);
            else if (cell == "corrected") v.push_back(1);
            else v.push_back(std::stod(cell));
        }
        if (v.size() != cols) {
            throw DataError(csv.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                            " columns");
        }
        rows.push_back(std::move(v));
    }
    return rows;
}

nlohmann::json read_sidecar(const std::filesystem::path &csv) {
    std::filesystem::path js = csv;
    js += ".json";
    std::ifstream in(js);
    if (!in) return nlohmann::json::object();
    nlohmann::json m;
    in >> m;
    return m;
}

}  // namespace detail

void write_psd(const std::filesystem::path &csv, const PsdPosterior &post, const nlohmann::json &meta) {
    std::ofstream out(csv);
    if (!out) throw DataError("cannot write " + csv.string());
    out << "f_Hz,mean,q05,q95,M_eff,flags,shift\n" << std::setprecision(17);
    for (const auto &e : post.entries) {
        out << e.f << "," << e.mean << "," << e.q05 << "," << e.q95 << "," << e.M << "," << e.flags << "," << e.shift
            << "\n";
    }
    nlohmann::json m = meta;
    m["format"] = "spincorr-psd-v1";
    m["series"] = post.name;
    m["corrected"] = post.corrected;
    m["psd_convention"] = "two-sided";
    m["units"] = "Hz^2/Hz";
    detail::write_sidecar(csv, m);
}

void write_cross(const std::filesystem::path &csv, const CrossPosterior &post, const nlohmann::json &meta) {
    std::ofstream out(csv);
    if (!out) throw DataError("cannot write " + csv.string());
    out << "f_Hz,re_mean,re_q05,re_q95,im_mean,im_q05,im_q95,abs_mean,abs_q05,abs_q95,arg_mean,arg_q05,arg_q95,M_eff,"
           "flags,mode\n"
        << std::setprecision(17);
    for (const auto &e : post.entries) {
        out << e.f << "," << e.mean.real() << "," << e.re_q05 << "," << e.re_q95 << "," << e.mean.imag() << ","
            << e.im_q05 << "," << e.im_q95 << "," << e.abs_mean << "," << e.abs_q05 << "," << e.abs_q95 << ","
            << e.arg_mean << "," << e.arg_q05 << "," << e.arg_q95 << "," << e.M << "," << e.flags << ","
            << (e.corrected ? "corrected" : "raw") << "\n";
    }
    nlohmann::json m = meta;
    m["format"] = "spincorr-cross-v1";
    m["pair"] = post.name;
    m["psd_convention"] = "two-sided";
    m["units"] = {{"re_im", "Hz^2/Hz"}, {"abs", "1"}, {"arg", "rad"}};
    detail::write_sidecar(csv, m);
}

PsdPosterior read_psd(const std::filesystem::path &csv) {
    PsdPosterior p;
    std::filesystem::path js = csv;
    js += ".json";
    std::ifstream jin(js);
    if (jin) {
        nlohmann::json m;
        jin >> m;
        p.name = m.value("series", "");
        p.corrected = m.value("corrected", false);
    }
    for (const auto &r : detail::read_rows(csv, 7)) {
        PsdEntry e;
        e.f = r[0];
        e.mean = r[1];
        e.q05 = r[2];
        e.q95 = r[3];
        e.M = static_cast<size_t>(r[4]);
        e.flags = static_cast<uint32_t>(r[5]);
        e.shift = r[6];
        p.entries.push_back(e);
    }
    return p;
}

CrossPosterior read_cross(const std::filesystem::path &csv) {
    CrossPosterior p;
    std::filesystem::path js = csv;
    js += ".json";
    std::ifstream jin(js);
    if (jin) {
        nlohmann::json m;
        jin >> m;
        p.name = m.value("pair", "");
    }
    for (const auto &r : detail::read_rows(csv, 16)) {
        CrossEntry e;
        e.f = r[0];
        e.mean = {r[1], r[4]};
        e.re_q05 = r[2];
        e.re_q95 = r[3];
        e.im_q05 = r[5];
        e.im_q95 = r[6];
        e.abs_mean = r[7];
        e.abs_q05 = r[8];
        e.abs_q95 = r[9];
        e.arg_mean = r[10];
        e.arg_q05 = r[11];
        e.arg_q95 = r[12];
        e.M = static_cast<size_t>(r[13]);
        e.flags = static_cast<uint32_t>(r[14]);
        e.corrected = r[15] != 0;
        p.entries.push_back(e);
    }
    return p;
}

nlohmann::json to_json(const BatchingPlan &plan) {
    nlohmann::json bands = nlohmann::json::array();
    for (const auto &b : plan.bands) {
        bands.push_back({{"f_low_Hz", b.f_low},
                         {"f_high_Hz", std::isfinite(b.f_high) ? nlohmann::json(b.f_high) : nlohmann::json("inf")},
                         {"M", b.M},
                         {"N", b.N}});
    }
    return bands;
}

BatchingPlan plan_from_json(const nlohmann::json &j, const std::string &path) {
    BatchingPlan p;
    if (j.is_string()) {
        std::string name = j.get<std::string>();
        if (name == "standard") return BatchingPlan::standard();
        throw ConfigError(path, "unknown batching plan '" + name + "'");
    }
    if (!j.is_array()) throw ConfigError(path, "expected \"standard\" or a list of bands");
    for (size_t i = 0; i < j.size(); i++) {
        const auto &b = j[i];
        std::string bp = path + "[" + std::to_string(i) + "]";
        Band band;
        try {
            // Unit strings ("2.7 mHz", "inf") or the plain-Hz form written by to_json.
            if (b.contains("f_low")) {
                band.f_low = quantity_at(b, "f_low", Dimension::Frequency, bp);
            } else {
                band.f_low = b.at("f_low_Hz").get<double>();
            }
            const auto &hi = b.contains("f_high") ? b.at("f_high") : b.at("f_high_Hz");
            if (hi.is_string() && hi.get<std::string>() == "inf") {
                band.f_high = std::numeric_limits<double>::infinity();
            } else if (hi.is_string()) {
                band.f_high = parse_quantity(hi.get<std::string>(), Dimension::Frequency, bp + ".f_high");
            } else {
                band.f_high = hi.get<double>();
            }
            band.M = b.at("M").get<size_t>();
            band.N = b.at("N").get<size_t>();
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError(bp, e.what());
        }
        p.bands.push_back(band);
    }
    try {
        p.validate();
    } catch (const std::invalid_argument &e) {
        throw ConfigError(path, e.what());
    }
    return p;
}

}  // namespace spincorr
