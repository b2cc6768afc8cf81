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

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <array>
#include <complex>
#include <vector>

#include "spincorr/bayes.h"
#include "spincorr/noise_model.h"
#include "spincorr/noise_synth.h"
#include "spincorr/ramsey.h"

namespace spincorr {
namespace {

NoiseModel three_channel_model() {
    NoiseModel m(3);
    m.add_private(0, PowerLaw{1100e6, 1.21});
    m.add_private(1, PowerLaw{800e6, 1.14});
    m.add_private(2, PowerLaw{0.36e6, 1.37});
    m.add_shared(Lorentzian{200e3, 0.15}, {1.0, 0.8, 0.1});
    return m;
}

template <bool Parallel>
void BM_SynthSpectrum(benchmark::State &state) {
    NoiseModel m = three_channel_model();
    auto n = static_cast<size_t>(state.range(0));
    std::vector<std::vector<std::complex<double>>> out;
    for (auto _ : state) {
        if constexpr (Parallel) {
            synth_spectrum_omp(m, n, 0.06, 1, {}, out);
        } else {
            synth_spectrum_serial(m, n, 0.06, 1, {}, out);
        }
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_SynthSpectrum<false>)->Name("synth_spectrum/serial")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_SynthSpectrum<true>)->Name("synth_spectrum/omp")->Arg(1 << 16)->Arg(1 << 20);

struct RoundFixture {
    MeasurementModel meas = MeasurementModel::paper_scale();
    TwoQubitParams params{16.93e9, 16.30e9, 1.1e6};
    RoundRecord record;
    std::array<RatePrior, 4> priors;
    EstimatorConfig cfg;

    explicit RoundFixture(size_t grid) {
        NoiseModel none(2);
        Campaign c = run_campaign(none, params, meas, 1, 5, Fidelity::RoundResolved);
        record = c.rounds.at(0);
        cfg.grid_points = grid;
        ConditionalRates nominal = nominal_detuning(params, meas.protocol);
        for (RateLabel r : kAllRates) priors[static_cast<size_t>(r)] = RatePrior{nominal[r], 100e3, 16};
    }
};

template <bool Parallel>
void BM_EstimateRound(benchmark::State &state) {
    RoundFixture fx(static_cast<size_t>(state.range(0)));
    for (auto _ : state) {
        auto est = Parallel ? estimate_round_omp(fx.record, fx.meas, fx.priors, fx.cfg)
                            : estimate_round_serial(fx.record, fx.meas, fx.priors, fx.cfg);
        benchmark::DoNotOptimize(est);
    }
}
BENCHMARK(BM_EstimateRound<false>)->Name("estimate_round/serial")->Arg(512)->Arg(2048);
BENCHMARK(BM_EstimateRound<true>)->Name("estimate_round/omp")->Arg(512)->Arg(2048);

}  // namespace
}  // namespace spincorr

BENCHMARK_MAIN();
