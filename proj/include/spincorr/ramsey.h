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

#ifndef SPINCORR_RAMSEY_H
#define SPINCORR_RAMSEY_H

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "spincorr/noise_model.h"
#include "spincorr/noise_synth.h"
#include "spincorr/rate_trace.h"
#include "spincorr/rng.h"
#include "spincorr/two_qubit.h"

namespace spincorr {

/// Initial spin labels of a cycle; `a_up` is qubit A's label, `b_up` qubit B's.
struct InitialState {
    bool a_up = false;
    bool b_up = false;
};

/// Rate whose fringe qubit `qubit` (0 = A, 1 = B) shows in a cycle started in `s`:
/// A oscillates at nu_A^{sigma_B}, B at nu_B^{sigma_A}.
RateLabel informed_rate(const InitialState &s, int qubit);

struct ProtocolConfig {
    double cycle_duration = 150e-6;
    std::vector<double> evolution_times;
    std::array<InitialState, 4> states = {InitialState{false, false}, InitialState{true, false}, InitialState{false, true},
                                          InitialState{true, true}};
    /// Microwave reference of each qubit minus its bare rate nu_Q (Hz). Each conditional
    /// rate is measured as a detuning from its qubit's reference.
    std::array<double, 2> reference_offset{};

    /// 100 evolution times spaced linearly from 0.02 us to 2 us, 150 us cycles.
    static ProtocolConfig standard();

    size_t cycles_per_round() const {
        return evolution_times.size() * states.size();
    }
    double round_duration() const {
        return cycle_duration * static_cast<double>(cycles_per_round());
    }
    void validate() const;
};

/// Ramsey fringe P(up) = A(d) + V(d)/2 cos(2 pi d t + phi0(d)) with offset, visibility and
/// phase each linear in the detuning d.
struct FringeModel {
    double offset = 0.5;
    double visibility = 0.9;
    double phase0 = 0;
    double d_offset = 0;      // 1/Hz
    double d_visibility = 0;  // 1/Hz
    double d_phase = 0;       // rad/Hz

    double offset_at(double detuning) const {
        return offset + d_offset * detuning;
    }
    double visibility_at(double detuning) const {
        return visibility + d_visibility * detuning;
    }
    /// Checks 0 <= A +- V/2 <= 1 for |detuning| <= window.
    void validate(double window) const;
};

double p_up(double detuning, double t, const FringeModel &fringe);

/// Sensor-signal distribution of one qubit: a Gaussian per spin outcome, with
/// assignment errors mixing in the opposite lobe.
struct QubitReadout {
    double mean_up = 1.0;
    double mean_dn = 0.0;
    double sigma_up = 0.25;
    double sigma_dn = 0.25;
    double error_up = 0;  // P(signal from the down lobe | spin up)
    double error_dn = 0;  // P(signal from the up lobe | spin down)

    double density_up(double s) const;
    double density_dn(double s) const;
    double sample(bool spin_up, Rng &rng) const;
    void validate() const;
};

struct ReadoutModel {
    std::array<QubitReadout, 2> qubit;

    /// Lobes separated by 4 sigma, no assignment errors.
    static ReadoutModel near_ideal();
    /// Lobes separated by `separation_sigma` with symmetric assignment error `error`.
    static ReadoutModel degraded(double separation_sigma, double error);
};

/// Protocol, fringe and readout together; everything the estimator needs to know.
struct MeasurementModel {
    ProtocolConfig protocol = ProtocolConfig::standard();
    std::array<FringeModel, 2> fringe{};
    ReadoutModel readout = ReadoutModel::near_ideal();

    /// Low-visibility, 2-sigma readout with 5% assignment error. In a static campaign the
/// error floor of Z' sits near 300 kHz^2/Hz below 0.3 Hz and near 100 kHz^2/Hz above.
    static MeasurementModel paper_scale();
};

struct CycleRecord {
    uint8_t state_index = 0;
    uint16_t time_index = 0;
    std::array<float, 2> signal{};
};

struct RoundRecord {
    uint64_t index = 0;
    std::vector<CycleRecord> cycles;
};

enum class Fidelity {
    /// Noise sampled once per cycle; truth is the per-round average.
    CycleResolved,
    /// Noise sampled once per round and held for all of its cycles.
    RoundResolved,
};

const char *fidelity_name(Fidelity f);

struct Campaign {
    std::vector<RoundRecord> rounds;
    /// Per-round average detuning of each conditional rate: nominal detuning plus averaged noise.
    RateTrace truth;
    Fidelity fidelity = Fidelity::RoundResolved;
};

/// Simulates `n_rounds` rounds. `noise` has channels (d nu_A, d nu_B[, d J]) sampled at the
/// cycle duration (cycle-resolved) or at the round duration (round-resolved). Throws
/// DataError when the trace is too short or its cadence matches neither.
Campaign run_campaign(const TraceSet &noise, const TwoQubitParams &params, const MeasurementModel &meas,
                      size_t n_rounds, uint64_t seed);

/// Synthesizes noise from `model` at the requested fidelity, then runs the campaign.
Campaign run_campaign(const NoiseModel &model, const TwoQubitParams &params, const MeasurementModel &meas,
                      size_t n_rounds, uint64_t seed, Fidelity fidelity);

/// Noise-free detunings of the four conditional rates from their qubits' references:
/// exact conditional rate minus (nu_Q + reference_offset[Q]).
ConditionalRates nominal_detuning(const TwoQubitParams &params, const ProtocolConfig &protocol);

/// Noise deviations of the four conditional rates for channel values (dA, dB, dJ).
ConditionalRates rate_deviation(double d_nu_A, double d_nu_B, double d_J);

nlohmann::json to_json(const MeasurementModel &m);
MeasurementModel measurement_from_json(const nlohmann::json &j, const std::string &path);

/// `<base>.bin`: per cycle uint8 state, uint16 time index, 2 x float32 signal. `<base>.json` sidecar.
void write_rounds(const std::filesystem::path &base, const std::vector<RoundRecord> &rounds,
                  const MeasurementModel &meas);
std::vector<RoundRecord> read_rounds(const std::filesystem::path &base, MeasurementModel *meas = nullptr);

}  // namespace spincorr

#endif
