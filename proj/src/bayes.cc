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

#include "spincorr/bayes.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>

#include <omp.h>

#include "spincorr/errors.h"
#include "spincorr/units.h"

namespace spincorr {

void EstimatorConfig::validate() const {
    if (grid_points < 16) {
        throw std::invalid_argument("estimator.grid_points must be >= 16");
    }
    if (!(grid_halfwidth >= 4)) {
        throw std::invalid_argument("estimator.grid_halfwidth must cover at least 4 prior sigma");
    }
    if (!(prior.sigma > 0)) {
        throw std::invalid_argument("estimator.prior.sigma must be > 0");
    }
    if (prior.window == 0) {
        throw std::invalid_argument("estimator.prior.window must be >= 1");
    }
    if (2 * edge_cells >= grid_points) {
        throw std::invalid_argument("estimator.edge_cells too large for the grid");
    }
}

std::pair<double, double> PosteriorGrid::moments() const {
    double peak = *std::max_element(log_post.begin(), log_post.end());
    double z = 0, s1 = 0;
    for (size_t k = 0; k < log_post.size(); k++) {
        double w = std::exp(log_post[k] - peak);
        z += w;
        s1 += w * x(k);
    }
    double mean = s1 / z;
    double s2 = 0;
    for (size_t k = 0; k < log_post.size(); k++) {
        double w = std::exp(log_post[k] - peak);
        double d = x(k) - mean;
        s2 += w * d * d;
    }
    return {mean, std::max(s2 / z, step * step / 12)};
}

double PosteriorGrid::edge_mass(size_t cells) const {
    double peak = *std::max_element(log_post.begin(), log_post.end());
    double z = 0, lo = 0, hi = 0;
    size_t n = log_post.size();
    for (size_t k = 0; k < n; k++) {
        double w = std::exp(log_post[k] - peak);
        z += w;
        if (k < cells) lo += w;
        if (k >= n - cells) hi += w;
    }
    return std::max(lo, hi) / z;
}

double cycle_likelihood(double signal, double detuning, double t, const FringeModel &fringe,
                        const QubitReadout &readout) {
    double p = p_up(detuning, t, fringe);
    return p * readout.density_up(signal) + (1 - p) * readout.density_dn(signal);
}

namespace {

/// Informative cycle of one rate: readout densities scaled so the larger is 1.
struct Informative {
    uint16_t time_index;
    double up;
    double dn;
};

double log_density(double s, double mu, double sigma) {
    double z = (s - mu) / sigma;
    return -0.5 * z * z - std::log(sigma);
}

double log_mix(double la, double lb, double wa) {
    // log((1 - wa) e^la + wa e^lb), stable for wa in [0, 0.5).
    if (wa == 0) return la;
    double m = std::max(la, lb);
    return m + std::log((1 - wa) * std::exp(la - m) + wa * std::exp(lb - m));
}

std::vector<Informative> gather(const RoundRecord &record, const MeasurementModel &meas, RateLabel label, int &qubit) {
    qubit = (label == RateLabel::A_up || label == RateLabel::A_dn) ? 0 : 1;
    const QubitReadout &ro = meas.readout.qubit[qubit];
    std::vector<Informative> out;
    out.reserve(record.cycles.size() / 2);
    for (const auto &c : record.cycles) {
        if (c.state_index >= meas.protocol.states.size() || c.time_index >= meas.protocol.evolution_times.size()) {
            throw DataError("round " + std::to_string(record.index) + ": cycle label outside the protocol");
        }
        if (informed_rate(meas.protocol.states[c.state_index], qubit) != label) continue;
        double s = c.signal[qubit];
        double lu = log_mix(log_density(s, ro.mean_up, ro.sigma_up), log_density(s, ro.mean_dn, ro.sigma_dn), ro.error_up);
        double ld = log_mix(log_density(s, ro.mean_dn, ro.sigma_dn), log_density(s, ro.mean_up, ro.sigma_up), ro.error_dn);
        double m = std::max(lu, ld);
        out.push_back({c.time_index, std::exp(lu - m), std::exp(ld - m)});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Informative &a, const Informative &b) { return a.time_index < b.time_index; });
    return out;
}

bool uniform_times(const std::vector<double> &t) {
    if (t.size() < 3) return true;
    double step = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    for (size_t i = 0; i < t.size(); i++) {
        if (std::abs(t[i] - (t.front() + step * static_cast<double>(i))) > 1e-9 * std::abs(step)) return false;
    }
    return true;
}

/// Likelihoods below this (relative to the larger readout density) are raised to it, so
/// a product of kFold factors stays a normal double.
constexpr double kLikelihoodFloor = 1e-18;
constexpr size_t kFold = 16;

/// Adds sum over cycles of log L(x_k) to out[k] for k in [k0, k1). Cycles run in the
/// outer loop so the grid loop vectorizes; every grid point sees the same operation
/// sequence whatever the range split.
void accumulate_block(const PosteriorGrid &g, size_t k0, size_t k1, const std::vector<Informative> &cycles,
                      const std::vector<double> &times, bool uniform, const FringeModel &f, double *out) {
    const double two_pi = 2 * std::numbers::pi;
    const size_t n = k1 - k0;
    std::vector<double> off(n), half_vis(n), zr(n), zi(n), rr(n), ri(n), prod(n, 1.0), phase(n);
    std::vector<int64_t> expo(n, 0);
    for (size_t i = 0; i < n; i++) {
        double d = g.x(k0 + i);
        off[i] = f.offset + f.d_offset * d;
        half_vis[i] = 0.5 * (f.visibility + f.d_visibility * d);
        phase[i] = f.phase0 + f.d_phase * d;
        if (uniform) {
            double dt = times.size() > 1 ? times[1] - times[0] : 0;
            zr[i] = std::cos(two_pi * d * times.front() + phase[i]);
            zi[i] = std::sin(two_pi * d * times.front() + phase[i]);
            rr[i] = std::cos(two_pi * d * dt);
            ri[i] = std::sin(two_pi * d * dt);
        }
    }
    uint16_t at = 0;
    size_t since_fold = 0;
    for (const auto &c : cycles) {
        if (uniform) {
            while (at < c.time_index) {
                for (size_t i = 0; i < n; i++) {
                    double a = zr[i] * rr[i] - zi[i] * ri[i];
                    double b = zr[i] * ri[i] + zi[i] * rr[i];
                    zr[i] = a;
                    zi[i] = b;
                }
                at++;
            }
        } else {
            double t = times[c.time_index];
            for (size_t i = 0; i < n; i++) {
                zr[i] = std::cos(two_pi * g.x(k0 + i) * t + phase[i]);
            }
        }
        const double up = c.up, dn = c.dn;
        for (size_t i = 0; i < n; i++) {
            double p = std::min(1.0, std::max(0.0, off[i] + half_vis[i] * zr[i]));
            double l = dn + (up - dn) * p;
            prod[i] *= std::max(l, kLikelihoodFloor);
        }
        if (++since_fold == kFold) {
            // Move the binary exponent of each product into an integer accumulator.
            for (size_t i = 0; i < n; i++) {
                uint64_t u = std::bit_cast<uint64_t>(prod[i]);
                expo[i] += static_cast<int64_t>((u >> 52) & 0x7FF) - 1023;
                prod[i] = std::bit_cast<double>((u & 0x800FFFFFFFFFFFFFULL) | 0x3FF0000000000000ULL);
            }
            since_fold = 0;
        }
    }
    for (size_t i = 0; i < n; i++) {
        out[k0 + i] += std::log(prod[i]) + static_cast<double>(expo[i]) * std::numbers::ln2;
    }
}

/// Grid points per cache-resident block.
constexpr size_t kBlock = 256;

void accumulate_range(const PosteriorGrid &g, size_t k0, size_t k1, const std::vector<Informative> &cycles,
                      const std::vector<double> &times, bool uniform, const FringeModel &f, double *out) {
    for (size_t b = k0; b < k1; b += kBlock) {
        accumulate_block(g, b, std::min(k1, b + kBlock), cycles, times, uniform, f, out);
    }
}

}  // namespace

PosteriorGrid rate_posterior(const RoundRecord &record, const MeasurementModel &meas, RateLabel label,
                             const RatePrior &prior, const EstimatorConfig &cfg, bool parallel) {
    int qubit = 0;
    std::vector<Informative> cycles = gather(record, meas, label, qubit);
    const FringeModel &fringe = meas.fringe[qubit];
    const std::vector<double> &times = meas.protocol.evolution_times;
    const bool uniform = uniform_times(times);

    PosteriorGrid g;
    const size_t n = cfg.grid_points;
    const double half = cfg.grid_halfwidth * prior.sigma;
    g.start = prior.mean - half;
    g.step = 2 * half / static_cast<double>(n - 1);
    g.log_post.resize(n);
    const double inv2s2 = 1 / (2 * prior.sigma * prior.sigma);
    for (size_t k = 0; k < n; k++) {
        double dp = g.x(k) - prior.mean;
        g.log_post[k] = -dp * dp * inv2s2;
    }
    if (parallel) {
#pragma omp parallel
        {
            int threads = omp_get_num_threads();
            int id = omp_get_thread_num();
            size_t k0 = n * static_cast<size_t>(id) / static_cast<size_t>(threads);
            size_t k1 = n * static_cast<size_t>(id + 1) / static_cast<size_t>(threads);
            if (k1 > k0) accumulate_range(g, k0, k1, cycles, times, uniform, fringe, g.log_post.data());
        }
    } else {
        accumulate_range(g, 0, n, cycles, times, uniform, fringe, g.log_post.data());
    }
    return g;
}

namespace {

std::array<RateEstimate, 4> estimate_round_impl(const RoundRecord &record, const MeasurementModel &meas,
                                                const std::array<RatePrior, 4> &priors, const EstimatorConfig &cfg,
                                                bool parallel) {
    std::array<RateEstimate, 4> out;
    for (RateLabel r : kAllRates) {
        int i = static_cast<int>(r);
        PosteriorGrid g = rate_posterior(record, meas, r, priors[i], cfg, parallel);
        auto [mean, var] = g.moments();
        RateEstimate &e = out[i];
        e.label = r;
        e.round = record.index;
        e.mean = mean;
        e.variance = var;
        e.degenerate = !std::isfinite(mean) || !std::isfinite(var) || g.edge_mass(cfg.edge_cells) > cfg.edge_mass;
    }
    return out;
}

}  // namespace

std::array<RateEstimate, 4> estimate_round_serial(const RoundRecord &record, const MeasurementModel &meas,
                                                  const std::array<RatePrior, 4> &priors,
                                                  const EstimatorConfig &cfg) {
    return estimate_round_impl(record, meas, priors, cfg, false);
}

std::array<RateEstimate, 4> estimate_round_omp(const RoundRecord &record, const MeasurementModel &meas,
                                               const std::array<RatePrior, 4> &priors, const EstimatorConfig &cfg) {
    return estimate_round_impl(record, meas, priors, cfg, true);
}

RatePrior rolling_prior(std::span<const double> history, const RatePrior &cold) {
    RatePrior p = cold;
    if (history.empty()) {
        return p;
    }
    size_t k = std::min(history.size(), cold.window);
    double s = 0;
    for (size_t i = history.size() - k; i < history.size(); i++) {
        s += history[i];
    }
    p.mean = s / static_cast<double>(k);
    return p;
}

RateTrace estimate_campaign(const std::vector<RoundRecord> &rounds, const MeasurementModel &meas,
                            const EstimatorConfig &cfg) {
    cfg.validate();
    meas.protocol.validate();
    RateTrace out;
    out.dt = meas.protocol.round_duration();
    out.provenance = {{"kind", "estimate"}, {"estimator", to_json(cfg)}};
    std::array<std::vector<double>, 4> history;
    for (size_t r = 0; r < rounds.size(); r++) {
        if (rounds[r].cycles.size() != meas.protocol.cycles_per_round()) {
            throw DataError("round " + std::to_string(r) + " has " + std::to_string(rounds[r].cycles.size()) +
                            " cycles, protocol expects " + std::to_string(meas.protocol.cycles_per_round()));
        }
        std::array<RatePrior, 4> priors;
        for (RateLabel l : kAllRates) {
            RatePrior cold = cfg.prior;
            cold.mean = cfg.cold_start[l];
            priors[static_cast<int>(l)] = rolling_prior(history[static_cast<int>(l)], cold);
        }
        auto est = cfg.parallel ? estimate_round_omp(rounds[r], meas, priors, cfg)
                                : estimate_round_serial(rounds[r], meas, priors, cfg);
        ConditionalRates mean, var;
        uint32_t flags = r < cfg.burn_in ? trace_flags::kBurnIn : 0;
        for (RateLabel l : kAllRates) {
            const RateEstimate &e = est[static_cast<int>(l)];
            mean[l] = e.mean;
            var[l] = e.variance;
            if (e.degenerate) flags |= trace_flags::degenerate(l);
            history[static_cast<int>(l)].push_back(e.mean);
        }
        out.push_back(mean, var, flags);
    }
    return out;
}

nlohmann::json to_json(const EstimatorConfig &cfg) {
    return {{"grid_points", cfg.grid_points},
            {"grid_halfwidth_sigma", cfg.grid_halfwidth},
            {"prior",
             {{"sigma", format_quantity(cfg.prior.sigma, "Hz")},
              {"window", cfg.prior.window}}},
            {"burn_in", cfg.burn_in},
            {"edge_mass", cfg.edge_mass},
            {"edge_cells", cfg.edge_cells}};
}

EstimatorConfig estimator_from_json(const nlohmann::json &j, const std::string &path) {
    EstimatorConfig c;
    c.grid_points = j.value("grid_points", c.grid_points);
    c.grid_halfwidth = j.value("grid_halfwidth_sigma", c.grid_halfwidth);
    c.burn_in = j.value("burn_in", c.burn_in);
    c.edge_mass = j.value("edge_mass", c.edge_mass);
    c.edge_cells = j.value("edge_cells", c.edge_cells);
    if (j.contains("prior")) {
        const auto &p = j["prior"];
        c.prior.sigma = quantity_or(p, "sigma", Dimension::Frequency, path + ".prior", c.prior.sigma);
        c.prior.window = p.value("window", c.prior.window);
    }
    try {
        c.validate();
    } catch (const std::invalid_argument &e) {
        throw ConfigError(path, e.what());
    }
    return c;
}

}  // namespace spincorr
