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

#include "spincorr/noise_synth.h"

#include <omp.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <stdexcept>

#include "spincorr/errors.h"
#include "spincorr/fft.h"
#include "spincorr/rng.h"

namespace spincorr {

using cplx = std::complex<double>;

TraceSet &TraceSet::operator+=(const TraceSet &o) {
    if (o.channels() != channels() || o.n != n) {
        throw std::invalid_argument("TraceSet::operator+=: shape mismatch");
    }
    if (std::abs(o.dt - dt) > 1e-12 * dt) {
        throw std::invalid_argument("TraceSet::operator+=: dt mismatch");
    }
    for (size_t c = 0; c < channels(); c++) {
        for (size_t m = 0; m < n; m++) {
            data[c][m] += o.data[c][m];
        }
    }
    return *this;
}

TraceSet zero_trace(size_t channels, size_t n, double dt) {
    TraceSet t;
    t.dt = dt;
    t.n = n;
    t.data.assign(channels, std::vector<double>(n, 0.0));
    return t;
}

void psd_cholesky(std::span<cplx> a, size_t p, double tol) {
    double scale = 0;
    for (size_t i = 0; i < p; i++) {
        scale = std::max(scale, std::abs(a[i * p + i].real()));
    }
    double thresh = tol * scale;
    for (size_t j = 0; j < p; j++) {
        double d = a[j * p + j].real();
        for (size_t k = 0; k < j; k++) {
            d -= std::norm(a[j * p + k]);
        }
        if (d < -thresh) {
            throw NumericalError("psd_cholesky: spectral matrix is not positive semidefinite (pivot " +
                                 std::to_string(d) + ")");
        }
        if (d <= thresh) {
            for (size_t i = j; i < p; i++) {
                a[i * p + j] = 0;
            }
        } else {
            double ljj = std::sqrt(d);
            a[j * p + j] = ljj;
            for (size_t i = j + 1; i < p; i++) {
                cplx s = a[i * p + j];
                for (size_t k = 0; k < j; k++) {
                    s -= a[i * p + k] * std::conj(a[j * p + k]);
                }
                a[i * p + j] = s / ljj;
            }
        }
        for (size_t i = 0; i < j; i++) {
            a[i * p + j] = 0;
        }
    }
}

double counter_normal(uint64_t seed, uint64_t counter) {
    // Box-Muller on two 53-bit uniforms derived from the counter.
    uint64_t h1 = mix64(seed ^ mix64(2 * counter));
    uint64_t h2 = mix64(seed ^ mix64(2 * counter + 1));
    double u1 = (static_cast<double>(h1 >> 11) + 0.5) * 0x1.0p-53;
    double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
}

namespace {

void check_synth_args(size_t n, double dt) {
    if (n < 2 || n % 2 != 0) {
        throw std::invalid_argument("synth: n must be even and >= 2");
    }
    if (!(dt > 0)) {
        throw std::invalid_argument("synth: dt must be > 0");
    }
}

// One DFT bin of the Gaussian synthesis; `work` holds p*p scratch.
void synth_bin(const NoiseModel &model, size_t n, double dt, uint64_t seed, const SynthOptions &opt, size_t k,
               std::vector<cplx> &work, std::vector<std::vector<cplx>> &spectrum) {
    size_t p = model.channels;
    double T = static_cast<double>(n) * dt;
    if (k == 0 && !opt.include_dc) {
        for (size_t c = 0; c < p; c++) {
            spectrum[c][k] = 0;
        }
        return;
    }
    double f = k == 0 ? 1 / T : static_cast<double>(k) / T;
    work = gaussian_spectral_matrix(model, f);
    psd_cholesky(work, p, opt.psd_tolerance);
    bool real_bin = k == 0 || k == n / 2;
    double amp = std::sqrt(static_cast<double>(n) / dt);
    for (size_t c = 0; c < p; c++) {
        spectrum[c][k] = 0;
    }
    for (size_t l = 0; l < p; l++) {
        uint64_t ctr = (static_cast<uint64_t>(k) * p + l) * 2;
        cplx z;
        if (real_bin) {
            z = counter_normal(seed, ctr);
        } else {
            z = cplx(counter_normal(seed, ctr), counter_normal(seed, ctr + 1)) * (1.0 / std::numbers::sqrt2);
        }
        for (size_t c = l; c < p; c++) {
            spectrum[c][k] += amp * work[c * p + l] * z;
        }
    }
    if (real_bin) {
        for (size_t c = 0; c < p; c++) {
            spectrum[c][k] = spectrum[c][k].real();
        }
    }
}

void prepare_spectrum(size_t p, size_t n, std::vector<std::vector<cplx>> &spectrum) {
    spectrum.assign(p, std::vector<cplx>(n / 2 + 1));
}

}  // namespace

void synth_spectrum_serial(const NoiseModel &model, size_t n, double dt, uint64_t seed, const SynthOptions &opt,
                           std::vector<std::vector<cplx>> &spectrum) {
    check_synth_args(n, dt);
    prepare_spectrum(model.channels, n, spectrum);
    std::vector<cplx> work;
    for (size_t k = 0; k <= n / 2; k++) {
        synth_bin(model, n, dt, seed, opt, k, work, spectrum);
    }
}

void synth_spectrum_omp(const NoiseModel &model, size_t n, double dt, uint64_t seed, const SynthOptions &opt,
                        std::vector<std::vector<cplx>> &spectrum) {
    check_synth_args(n, dt);
    prepare_spectrum(model.channels, n, spectrum);
    long long bins = static_cast<long long>(n / 2 + 1);
    bool failed = false;
    std::string message;
#pragma omp parallel
    {
        std::vector<cplx> work;
#pragma omp for schedule(static)
        for (long long k = 0; k < bins; k++) {
            try {
                synth_bin(model, n, dt, seed, opt, static_cast<size_t>(k), work, spectrum);
            } catch (const std::exception &e) {
#pragma omp critical
                {
                    failed = true;
                    message = e.what();
                }
            }
        }
    }
    if (failed) {
        throw NumericalError(message);
    }
}

TraceSet synth_gaussian(const NoiseModel &model, size_t n, double dt, uint64_t seed, const SynthOptions &opt) {
    model.validate();
    std::vector<std::vector<cplx>> spectrum;
    synth_spectrum_omp(model, n, dt, seed, opt, spectrum);
    TraceSet t = zero_trace(model.channels, n, dt);
    t.seed = seed;
    RealFft fft(n);
    for (size_t c = 0; c < model.channels; c++) {
        fft.inverse(spectrum[c], t.data[c]);
        double inv_n = 1.0 / static_cast<double>(n);
        for (double &x : t.data[c]) {
            x *= inv_n;
        }
    }
    t.metadata["generator"] = "synth_gaussian";
    t.metadata["model"] = to_json(model);
    return t;
}

TraceSet synth_rtn(double tau0, std::span<const double> shift, size_t n, double dt, uint64_t seed) {
    if (!(tau0 > 0)) {
        throw std::invalid_argument("synth_rtn: tau0 must be > 0");
    }
    if (!(dt > 0)) {
        throw std::invalid_argument("synth_rtn: dt must be > 0");
    }
    TraceSet t = zero_trace(shift.size(), n, dt);
    t.seed = seed;
    Rng rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double p_flip = 0.5 * (1 - std::exp(-dt / tau0));
    bool state = uni(rng) < 0.5;
    for (size_t m = 0; m < n; m++) {
        if (m > 0 && uni(rng) < p_flip) {
            state = !state;
        }
        if (state) {
            for (size_t c = 0; c < shift.size(); c++) {
                t.data[c][m] = shift[c];
            }
        }
    }
    t.metadata["generator"] = "synth_rtn";
    t.metadata["tau0_s"] = tau0;
    t.metadata["shift_Hz"] = std::vector<double>(shift.begin(), shift.end());
    return t;
}

TraceSet synth_tone(double amp, double f0, double phase, std::span<const double> coupling, size_t n, double dt) {
    if (!(f0 >= 0) || !(f0 < 0.5 / dt)) {
        throw std::invalid_argument("synth_tone: f0 must lie below the Nyquist frequency");
    }
    TraceSet t = zero_trace(coupling.size(), n, dt);
    if (amp != 0) {
        for (size_t m = 0; m < n; m++) {
            double v = amp * std::cos(2 * std::numbers::pi * f0 * static_cast<double>(m) * dt + phase);
            for (size_t c = 0; c < coupling.size(); c++) {
                t.data[c][m] = v * coupling[c];
            }
        }
    }
    t.metadata["generator"] = "synth_tone";
    return t;
}

TraceSet synthesize(const NoiseModel &model, size_t n, double dt, uint64_t seed, const SynthOptions &opt) {
    model.validate();
    TraceSet t = synth_gaussian(model, n, dt, derive_seed(seed, {static_cast<uint64_t>(SeedStage::NoiseGaussian)}), opt);
    t.seed = seed;
    for (const auto &fl : model.fluctuators) {
        uint64_t s = derive_seed(seed, {static_cast<uint64_t>(SeedStage::NoiseFluctuator), fl.stream});
        t += synth_rtn(fl.tau0, fl.shift, n, dt, s);
    }
    std::vector<double> unit(model.channels, 0.0);
    for (size_t c = 0; c < model.channels; c++) {
        for (const auto &comp : model.private_components[c]) {
            if (auto *tone = std::get_if<Tone>(&comp)) {
                std::fill(unit.begin(), unit.end(), 0.0);
                unit[c] = 1;
                t += synth_tone(tone->amp, tone->f0, tone->phase, unit, n, dt);
            }
        }
    }
    for (const auto &sc : model.shared) {
        if (auto *tone = std::get_if<Tone>(&sc.component)) {
            t += synth_tone(tone->amp, tone->f0, tone->phase, sc.coupling, n, dt);
        }
    }
    t.metadata = {{"generator", "synthesize"}, {"model", to_json(model)}};
    return t;
}

void write_trace(const std::filesystem::path &base, const TraceSet &trace) {
    static_assert(std::endian::native == std::endian::little, "binary trace format is little-endian");
    std::filesystem::path bin = base;
    bin += ".bin";
    std::ofstream out(bin, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + bin.string());
    }
    std::vector<double> row(trace.channels());
    for (size_t m = 0; m < trace.n; m++) {
        for (size_t c = 0; c < trace.channels(); c++) {
            row[c] = trace.data[c][m];
        }
        out.write(reinterpret_cast<const char *>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
    nlohmann::json side = {{"format", "spincorr-trace-v1"},
                           {"encoding", "float64-le row-major"},
                           {"dt_s", trace.dt},
                           {"n", trace.n},
                           {"channels", trace.channels()},
                           {"seed", trace.seed},
                           {"psd_convention", "two-sided"},
                           {"units", "Hz"},
                           {"metadata", trace.metadata}};
    std::filesystem::path js = base;
    js += ".json";
    std::ofstream(js) << std::setw(2) << side << "\n";
}

TraceSet read_trace(const std::filesystem::path &base) {
    std::filesystem::path js = base;
    js += ".json";
    std::ifstream jin(js);
    if (!jin) {
        throw DataError("cannot read " + js.string());
    }
    nlohmann::json side;
    try {
        jin >> side;
    } catch (const std::exception &e) {
        throw DataError(js.string() + ": " + e.what());
    }
    size_t channels = side.at("channels").get<size_t>();
    size_t n = side.at("n").get<size_t>();
    TraceSet t = zero_trace(channels, n, side.at("dt_s").get<double>());
    t.seed = side.value("seed", uint64_t{0});
    t.metadata = side.value("metadata", nlohmann::json::object());
    std::filesystem::path bin = base;
    bin += ".bin";
    std::ifstream in(bin, std::ios::binary);
    if (!in) {
        throw DataError("cannot read " + bin.string());
    }
    std::vector<double> row(channels);
    for (size_t m = 0; m < n; m++) {
        in.read(reinterpret_cast<char *>(row.data()), static_cast<std::streamsize>(channels * sizeof(double)));
        if (!in) {
            throw DataError(bin.string() + ": truncated at sample " + std::to_string(m));
        }
        for (size_t c = 0; c < channels; c++) {
            t.data[c][m] = row[c];
        }
    }
    return t;
}

void write_trace_csv(const std::filesystem::path &file, const TraceSet &trace) {
    std::ofstream out(file);
    out << "t_s";
    for (size_t c = 0; c < trace.channels(); c++) {
        out << ",ch" << c << "_Hz";
    }
    out << "\n" << std::setprecision(17);
    for (size_t m = 0; m < trace.n; m++) {
        out << static_cast<double>(m) * trace.dt;
        for (size_t c = 0; c < trace.channels(); c++) {
            out << "," << trace.data[c][m];
        }
        out << "\n";
    }
}

}  // namespace spincorr
