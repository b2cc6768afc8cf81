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

#ifndef SPINCORR_BAYES_H
#define SPINCORR_BAYES_H

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "spincorr/ramsey.h"
#include "spincorr/rate_trace.h"

namespace spincorr {

struct RatePrior {
    double mean = 0;
    double sigma = 100e3;
    /// Number of preceding round estimates averaged into the rolling mean.
    size_t window = 16;
};

struct EstimatorConfig {
    size_t grid_points = 2048;
    /// Grid spans prior mean +- grid_halfwidth * prior sigma.
    double grid_halfwidth = 5;
    /// Prior width and rolling window, applied to every round.
    RatePrior prior;
    /// Prior means of the first round, per rate (normally nominal_detuning()).
    ConditionalRates cold_start{};
    /// Leading rounds tagged kBurnIn.
    size_t burn_in = 16;
    /// A posterior is degenerate when more than this fraction of its mass sits in the
    /// outermost `edge_cells` grid cells on either side.
    double edge_mass = 0.5;
    size_t edge_cells = 4;
    bool parallel = true;

    void validate() const;
};

/// Log posterior on a uniform detuning grid x_k = start + k * step.
struct PosteriorGrid {
    double start = 0;
    double step = 1;
    std::vector<double> log_post;

    double x(size_t k) const {
        return start + step * static_cast<double>(k);
    }
    /// Posterior mean and variance by grid quadrature; variance is at least step^2 / 12.
    std::pair<double, double> moments() const;
    /// Posterior mass in the outer `cells` cells on the heavier side.
    double edge_mass(size_t cells) const;
};

struct RateEstimate {
    double mean = 0;
    double variance = 0;
    uint64_t round = 0;
    RateLabel label = RateLabel::A_up;
    bool degenerate = false;
};

/// L(s | d) = p_up(d, t) h_up(s) + (1 - p_up(d, t)) h_dn(s).
double cycle_likelihood(double signal, double detuning, double t, const FringeModel &fringe,
                        const QubitReadout &readout);

/// Posterior of rate `label` from its informative cycles of `record` under `prior`.
PosteriorGrid rate_posterior(const RoundRecord &record, const MeasurementModel &meas, RateLabel label,
                             const RatePrior &prior, const EstimatorConfig &cfg, bool parallel);

/// Four per-rate posteriors of one round. Both kernels give bit-identical output; the
/// OpenMP one splits each grid across threads.
std::array<RateEstimate, 4> estimate_round_serial(const RoundRecord &record, const MeasurementModel &meas,
                                                  const std::array<RatePrior, 4> &priors,
                                                  const EstimatorConfig &cfg);
std::array<RateEstimate, 4> estimate_round_omp(const RoundRecord &record, const MeasurementModel &meas,
                                               const std::array<RatePrior, 4> &priors, const EstimatorConfig &cfg);

/// Prior for the next round: mean of the last `cold.window` entries of `history`,
/// or `cold` itself for an empty history. Sigma is always cold.sigma.
RatePrior rolling_prior(std::span<const double> history, const RatePrior &cold);

/// Runs the rolling-prior chain over all rounds and returns the estimate trace.
RateTrace estimate_campaign(const std::vector<RoundRecord> &rounds, const MeasurementModel &meas,
                            const EstimatorConfig &cfg);

nlohmann::json to_json(const EstimatorConfig &cfg);
EstimatorConfig estimator_from_json(const nlohmann::json &j, const std::string &path);

}  // namespace spincorr

#endif
