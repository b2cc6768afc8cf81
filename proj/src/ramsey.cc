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

#include "spincorr/ramsey.h"

#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <stdexcept>

#include "spincorr/errors.h"
#include "spincorr/units.h"

namespace spincorr {

RateLabel informed_rate(const InitialState &s, int qubit) {
    if (qubit == 0) {
        return s.b_up ? RateLabel::A_up : RateLabel::A_dn;
    }
    return s.a_up ? RateLabel::B_up : RateLabel::B_dn;
}

ProtocolConfig ProtocolConfig::standard() {
    ProtocolConfig p;
    const size_t count = 100;
    const double t0 = 0.02e-6;
    const double t1 = 2e-6;
    p.evolution_times.resize(count);
    for (size_t i = 0; i < count; i++) {
        p.evolution_times[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return p;
}

void ProtocolConfig::validate() const {
    if (!(cycle_duration > 0)) {
        throw std::invalid_argument("protocol.cycle_duration must be > 0");
    }
    if (evolution_times.empty()) {
        throw std::invalid_argument("protocol.evolution_times must not be empty");
    }
    for (size_t i = 0; i < evolution_times.size(); i++) {
        if (evolution_times[i] < 0 || (i > 0 && !(evolution_times[i] > evolution_times[i - 1]))) {
            throw std::invalid_argument("protocol.evolution_times must be non-negative and strictly increasing");
        }
    }
    if (evolution_times.size() > 65535) {
        throw std::invalid_argument("protocol.evolution_times: too many points for the record format");
    }
}

void FringeModel::validate(double window) const {
    for (double d : {-window, 0.0, window}) {
        double a = offset_at(d);
        double v = visibility_at(d);
        if (a - v / 2 < -1e-12 || a + v / 2 > 1 + 1e-12 || v < 0) {
            throw std::invalid_argument("fringe: offset +- visibility/2 leaves [0, 1] within the detuning window");
        }
    }
}

double p_up(double detuning, double t, const FringeModel &f) {
    double phase = 2 * std::numbers::pi * detuning * t + f.phase0 + f.d_phase * detuning;
    double p = f.offset_at(detuning) + 0.5 * f.visibility_at(detuning) * std::cos(phase);
    return std::clamp(p, 0.0, 1.0);
}

namespace {
double gauss(double x, double mu, double sigma) {
    double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2 * std::numbers::pi));
}
}  // namespace

double QubitReadout::density_up(double s) const {
    return (1 - error_up) * gauss(s, mean_up, sigma_up) + error_up * gauss(s, mean_dn, sigma_dn);
}

double QubitReadout::density_dn(double s) const {
    return (1 - error_dn) * gauss(s, mean_dn, sigma_dn) + error_dn * gauss(s, mean_up, sigma_up);
}

double QubitReadout::sample(bool spin_up, Rng &rng) const {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> norm(0.0, 1.0);
    double flip = spin_up ? error_up : error_dn;
    bool lobe_up = spin_up;
    if (flip > 0 && uni(rng) < flip) {
        lobe_up = !lobe_up;
    }
    double z = norm(rng);
    return lobe_up ? mean_up + sigma_up * z : mean_dn + sigma_dn * z;
}

void QubitReadout::validate() const {
    if (!(sigma_up > 0 && sigma_dn > 0)) {
        throw std::invalid_argument("readout: lobe widths must be > 0");
    }
    if (mean_up == mean_dn) {
        throw std::invalid_argument("readout: lobe means must differ");
    }
    if (!(error_up >= 0 && error_up < 0.5 && error_dn >= 0 && error_dn < 0.5)) {
        throw std::invalid_argument("readout: assignment errors must lie in [0, 0.5)");
    }
}

ReadoutModel ReadoutModel::near_ideal() {
    ReadoutModel r;
    for (auto &q : r.qubit) {
        q = QubitReadout{};
    }
    return r;
}

ReadoutModel ReadoutModel::degraded(double separation_sigma, double error) {
    ReadoutModel r;
    for (auto &q : r.qubit) {
        q.mean_dn = 0;
        q.mean_up = 1;
        q.sigma_up = q.sigma_dn = 1.0 / separation_sigma;
        q.error_up = q.error_dn = error;
    }
    return r;
}

MeasurementModel MeasurementModel::paper_scale() {
    MeasurementModel m;
    for (auto &f : m.fringe) {
        f.offset = 0.5;
        f.visibility = 0.3;
    }
    m.readout = ReadoutModel::degraded(2.0, 0.05);
    return m;
}

const char *fidelity_name(Fidelity f) {
    return f == Fidelity::CycleResolved ? "cycle-resolved" : "round-resolved";
}

ConditionalRates nominal_detuning(const TwoQubitParams &params, const ProtocolConfig &protocol) {
    ConditionalRates exact = conditional_rates(params);
    ConditionalRates out;
    out.nu_A_up = exact.nu_A_up - (params.nu_A + protocol.reference_offset[0]);
    out.nu_A_dn = exact.nu_A_dn - (params.nu_A + protocol.reference_offset[0]);
    out.nu_B_up = exact.nu_B_up - (params.nu_B + protocol.reference_offset[1]);
    out.nu_B_dn = exact.nu_B_dn - (params.nu_B + protocol.reference_offset[1]);
    return out;
}

ConditionalRates rate_deviation(double dA, double dB, double dJ) {
    return {dA + dJ / 2, dA - dJ / 2, dB + dJ / 2, dB - dJ / 2};
}

Campaign run_campaign(const TraceSet &noise, const TwoQubitParams &params, const MeasurementModel &meas,
                      size_t n_rounds, uint64_t seed) {
    const ProtocolConfig &proto = meas.protocol;
    proto.validate();
    for (const auto &q : meas.readout.qubit) {
        q.validate();
    }
    if (noise.channels() < 2 || noise.channels() > 3) {
        throw DataError("campaign: noise trace needs 2 (A, B) or 3 (A, B, J) channels, got " +
                        std::to_string(noise.channels()));
    }
    const size_t cpr = proto.cycles_per_round();
    const double round_dt = proto.round_duration();
    Fidelity fid;
    if (std::abs(noise.dt - proto.cycle_duration) <= 1e-9 * proto.cycle_duration) {
        fid = Fidelity::CycleResolved;
    } else if (std::abs(noise.dt - round_dt) <= 1e-9 * round_dt) {
        fid = Fidelity::RoundResolved;
    } else {
        throw DataError("campaign: noise cadence " + std::to_string(noise.dt) +
                        " s matches neither the cycle nor the round duration");
    }
    size_t needed = fid == Fidelity::CycleResolved ? n_rounds * cpr : n_rounds;
    if (noise.n < needed) {
        throw DataError("campaign: noise trace has " + std::to_string(noise.n) + " samples, " +
                        std::to_string(needed) + " needed");
    }
    bool has_J = noise.channels() == 3;
    auto sample = [&](size_t idx) {
        return rate_deviation(noise.data[0][idx], noise.data[1][idx], has_J ? noise.data[2][idx] : 0.0);
    };

    Campaign out;
    out.fidelity = fid;
    out.rounds.resize(n_rounds);
    out.truth.dt = round_dt;
    out.truth.provenance = {{"kind", "ground-truth"},
                            {"fidelity", fidelity_name(fid)},
                            {"seed", seed},
                            {"nu_A_Hz", params.nu_A},
                            {"nu_B_Hz", params.nu_B},
                            {"J_Hz", params.J}};
    const ConditionalRates nominal = nominal_detuning(params, proto);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (size_t r = 0; r < n_rounds; r++) {
        Rng rng(derive_seed(seed, {static_cast<uint64_t>(SeedStage::Campaign), r}));
        RoundRecord &rec = out.rounds[r];
        rec.index = r;
        rec.cycles.resize(cpr);
        ConditionalRates acc{};
        ConditionalRates held = sample(fid == Fidelity::RoundResolved ? r : 0);
        size_t c = 0;
        for (size_t ti = 0; ti < proto.evolution_times.size(); ti++) {
            double t = proto.evolution_times[ti];
            for (size_t si = 0; si < proto.states.size(); si++, c++) {
                ConditionalRates dev = fid == Fidelity::CycleResolved ? sample(r * cpr + c) : held;
                acc = acc + dev;
                CycleRecord &cyc = rec.cycles[c];
                cyc.state_index = static_cast<uint8_t>(si);
                cyc.time_index = static_cast<uint16_t>(ti);
                for (int q = 0; q < 2; q++) {
                    RateLabel lab = informed_rate(proto.states[si], q);
                    double detuning = nominal[lab] + dev[lab];
                    bool up = uni(rng) < p_up(detuning, t, meas.fringe[q]);
                    cyc.signal[q] = static_cast<float>(meas.readout.qubit[q].sample(up, rng));
                }
            }
        }
        ConditionalRates mean = acc * (1.0 / static_cast<double>(cpr));
        out.truth.push_back(nominal + mean, ConditionalRates{}, 0);
    }
    return out;
}

Campaign run_campaign(const NoiseModel &model, const TwoQubitParams &params, const MeasurementModel &meas,
                      size_t n_rounds, uint64_t seed, Fidelity fidelity) {
    const size_t cpr = meas.protocol.cycles_per_round();
    size_t n = fidelity == Fidelity::CycleResolved ? n_rounds * cpr : n_rounds;
    n += n % 2;
    double dt = fidelity == Fidelity::CycleResolved ? meas.protocol.cycle_duration : meas.protocol.round_duration();
    TraceSet noise = synthesize(model, n, dt, derive_seed(seed, {static_cast<uint64_t>(SeedStage::NoiseGaussian)}));
    return run_campaign(noise, params, meas, n_rounds, seed);
}

namespace {

nlohmann::json fringe_json(const FringeModel &f) {
    return {{"offset", f.offset},
            {"visibility", f.visibility},
            {"phase0", format_quantity(f.phase0, "rad")},
            {"d_offset", format_quantity(f.d_offset, "1/Hz")},
            {"d_visibility", format_quantity(f.d_visibility, "1/Hz")},
            {"d_phase", format_quantity(f.d_phase, "rad/Hz")}};
}

FringeModel fringe_from_json(const nlohmann::json &j, const std::string &p) {
    FringeModel f;
    f.offset = quantity_or(j, "offset", Dimension::Dimensionless, p, f.offset);
    f.visibility = quantity_or(j, "visibility", Dimension::Dimensionless, p, f.visibility);
    f.phase0 = quantity_or(j, "phase0", Dimension::Phase, p, 0.0);
    f.d_offset = quantity_or(j, "d_offset", Dimension::PerFrequency, p, 0.0);
    f.d_visibility = quantity_or(j, "d_visibility", Dimension::PerFrequency, p, 0.0);
    f.d_phase = quantity_or(j, "d_phase", Dimension::PhasePerFrequency, p, 0.0);
    return f;
}

nlohmann::json readout_json(const QubitReadout &q) {
    return {{"mean_up", q.mean_up}, {"mean_dn", q.mean_dn}, {"sigma_up", q.sigma_up},
            {"sigma_dn", q.sigma_dn}, {"error_up", q.error_up}, {"error_dn", q.error_dn}};
}

QubitReadout readout_from_json(const nlohmann::json &j, const std::string &p) {
    QubitReadout q;
    q.mean_up = quantity_or(j, "mean_up", Dimension::Dimensionless, p, q.mean_up);
    q.mean_dn = quantity_or(j, "mean_dn", Dimension::Dimensionless, p, q.mean_dn);
    q.sigma_up = quantity_or(j, "sigma_up", Dimension::Dimensionless, p, q.sigma_up);
    q.sigma_dn = quantity_or(j, "sigma_dn", Dimension::Dimensionless, p, q.sigma_dn);
    q.error_up = quantity_or(j, "error_up", Dimension::Dimensionless, p, q.error_up);
    q.error_dn = quantity_or(j, "error_dn", Dimension::Dimensionless, p, q.error_dn);
    try {
        q.validate();
    } catch (const std::invalid_argument &e) {
        throw ConfigError(p, e.what());
    }
    return q;
}

}  // namespace

nlohmann::json to_json(const MeasurementModel &m) {
    const auto &pr = m.protocol;
    nlohmann::json ref = {format_quantity(pr.reference_offset[0], "Hz"), format_quantity(pr.reference_offset[1], "Hz")};
    nlohmann::json times = nlohmann::json::array();
    for (double t : pr.evolution_times) {
        times.push_back(t);
    }
    return {{"protocol",
             {{"cycle_duration", format_quantity(pr.cycle_duration, "s")},
              {"evolution_times_s", times},
              {"reference_offset", ref}}},
            {"fringe", {fringe_json(m.fringe[0]), fringe_json(m.fringe[1])}},
            {"readout", {readout_json(m.readout.qubit[0]), readout_json(m.readout.qubit[1])}}};
}

MeasurementModel measurement_from_json(const nlohmann::json &j, const std::string &path) {
    MeasurementModel m;
    if (j.contains("preset")) {
        std::string preset = j["preset"].get<std::string>();
        if (preset == "paper-scale") {
            m = MeasurementModel::paper_scale();
        } else if (preset != "near-ideal") {
            throw ConfigError(path + ".preset", "unknown preset '" + preset + "'");
        }
    }
    if (j.contains("protocol")) {
        const auto &pj = j["protocol"];
        std::string p = path + ".protocol";
        m.protocol.cycle_duration = quantity_or(pj, "cycle_duration", Dimension::Time, p, m.protocol.cycle_duration);
        if (pj.contains("evolution_times_s")) {
            m.protocol.evolution_times = pj["evolution_times_s"].get<std::vector<double>>();
        } else if (pj.contains("evolution_time_start") || pj.contains("evolution_time_count")) {
            double t0 = quantity_at(pj, "evolution_time_start", Dimension::Time, p);
            double t1 = quantity_at(pj, "evolution_time_stop", Dimension::Time, p);
            size_t count = pj.at("evolution_time_count").get<size_t>();
            if (count < 2) throw ConfigError(p + ".evolution_time_count", "must be >= 2");
            m.protocol.evolution_times.resize(count);
            for (size_t i = 0; i < count; i++) {
                m.protocol.evolution_times[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(count - 1);
            }
        }
        if (pj.contains("reference_offset")) {
            const auto &ro = pj["reference_offset"];
            if (!ro.is_array() || ro.size() != 2) {
                throw ConfigError(p + ".reference_offset", "expected [offset_A, offset_B]");
            }
            for (int q = 0; q < 2; q++) {
                m.protocol.reference_offset[q] = parse_quantity(ro[q].get<std::string>(), Dimension::Frequency,
                                                                p + ".reference_offset[" + std::to_string(q) + "]");
            }
        }
        try {
            m.protocol.validate();
        } catch (const std::invalid_argument &e) {
            throw ConfigError(p, e.what());
        }
    }
    if (j.contains("fringe")) {
        const auto &fj = j["fringe"];
        for (int q = 0; q < 2; q++) {
            const auto &one = fj.is_array() ? fj.at(q) : fj;
            m.fringe[q] = fringe_from_json(one, path + ".fringe[" + std::to_string(q) + "]");
        }
    }
    if (j.contains("readout")) {
        const auto &rj = j["readout"];
        for (int q = 0; q < 2; q++) {
            const auto &one = rj.is_array() ? rj.at(q) : rj;
            m.readout.qubit[q] = readout_from_json(one, path + ".readout[" + std::to_string(q) + "]");
        }
    }
    return m;
}

void write_rounds(const std::filesystem::path &base, const std::vector<RoundRecord> &rounds,
                  const MeasurementModel &meas) {
    static_assert(std::endian::native == std::endian::little, "binary record format is little-endian");
    std::filesystem::path bin = base;
    bin += ".bin";
    std::ofstream out(bin, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + bin.string());
    }
    size_t cpr = meas.protocol.cycles_per_round();
    for (const auto &r : rounds) {
        if (r.cycles.size() != cpr) {
            throw DataError("write_rounds: round " + std::to_string(r.index) + " has the wrong cycle count");
        }
        for (const auto &c : r.cycles) {
            out.write(reinterpret_cast<const char *>(&c.state_index), 1);
            out.write(reinterpret_cast<const char *>(&c.time_index), 2);
            out.write(reinterpret_cast<const char *>(c.signal.data()), 8);
        }
    }
    nlohmann::json side = {{"format", "spincorr-rounds-v1"},
                           {"record", "uint8 state_index, uint16 time_index, float32 signal_A, float32 signal_B"},
                           {"record_bytes", 11},
                           {"rounds", rounds.size()},
                           {"cycles_per_round", cpr},
                           {"round_duration_s", meas.protocol.round_duration()},
                           {"measurement", to_json(meas)}};
    std::filesystem::path js = base;
    js += ".json";
    std::ofstream(js) << std::setw(2) << side << "\n";
}

std::vector<RoundRecord> read_rounds(const std::filesystem::path &base, MeasurementModel *meas) {
    std::filesystem::path js = base;
    js += ".json";
    std::ifstream jin(js);
    if (!jin) {
        throw DataError("cannot read " + js.string());
    }
    nlohmann::json side;
    jin >> side;
    size_t n = side.at("rounds").get<size_t>();
    size_t cpr = side.at("cycles_per_round").get<size_t>();
    if (meas) {
        *meas = measurement_from_json(side.at("measurement"), "rounds.measurement");
    }
    std::filesystem::path bin = base;
    bin += ".bin";
    std::ifstream in(bin, std::ios::binary);
    if (!in) {
        throw DataError("cannot read " + bin.string());
    }
    std::vector<RoundRecord> rounds(n);
    for (size_t r = 0; r < n; r++) {
        rounds[r].index = r;
        rounds[r].cycles.resize(cpr);
        for (auto &c : rounds[r].cycles) {
            in.read(reinterpret_cast<char *>(&c.state_index), 1);
            in.read(reinterpret_cast<char *>(&c.time_index), 2);
            in.read(reinterpret_cast<char *>(c.signal.data()), 8);
        }
        if (!in) {
            throw DataError(bin.string() + ": truncated in round " + std::to_string(r));
        }
    }
    return rounds;
}

}  // namespace spincorr
