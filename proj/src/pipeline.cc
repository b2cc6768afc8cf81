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

#include "spincorr/pipeline.h"

#include <omp.h>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <boost/version.hpp>

#include "spincorr/errors.h"
#include "spincorr/fft.h"
#include "spincorr/rng.h"
#include "spincorr/units.h"

namespace spincorr {

namespace fs = std::filesystem;

const char *version() {
    return "0.1.0";
}

// ---------------------------------------------------------------------------
// Hashing

namespace {

std::string hex(const unsigned char *d, unsigned n) {
    std::ostringstream os;
    for (unsigned i = 0; i < n; i++) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(d[i]);
    return os.str();
}

class Sha256 {
   public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init");
    }
    ~Sha256() {
        EVP_MD_CTX_free(ctx_);
    }
    Sha256(const Sha256 &) = delete;
    Sha256 &operator=(const Sha256 &) = delete;
    void update(const void *p, size_t n) {
        EVP_DigestUpdate(ctx_, p, n);
    }
    std::string finish() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned n = 0;
        EVP_DigestFinal_ex(ctx_, md, &n);
        return hex(md, n);
    }

   private:
    EVP_MD_CTX *ctx_;
};

}  // namespace

std::string sha256_hex(const std::string &data) {
    Sha256 h;
    h.update(data.data(), data.size());
    return h.finish();
}

std::string sha256_file(const fs::path &file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot read " + file.string());
    Sha256 h;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h.update(buf.data(), static_cast<size_t>(in.gcount()));
    }
    return h.finish();
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

bool is_series(const std::string &s) {
    const auto &n = DerivedSeries::names();
    return std::find(n.begin(), n.end(), s) != n.end();
}

void require_series(const std::string &s, const std::string &path) {
    if (!is_series(s)) {
        throw ConfigError(path, "unknown series '" + s + "' (expected nu_A, nu_B, J, Z, Sigma or Delta)");
    }
}

std::pair<std::string, std::string> series_pair(const nlohmann::json &j, const std::string &path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_string()) {
        throw ConfigError(path, "expected [series, series]");
    }
    auto p = std::make_pair(j[0].get<std::string>(), j[1].get<std::string>());
    require_series(p.first, path + "[0]");
    require_series(p.second, path + "[1]");
    return p;
}

FitParams default_fit_init() {
    return {1e9, 1.2, 2e5, 0.2, 1e7};
}

std::vector<FitJob> default_fits() {
    std::vector<FitJob> jobs;
    for (const char *s : {"nu_A", "nu_B", "Sigma", "Delta"}) {
        FitJob j;
        j.series = s;
        j.init = default_fit_init();
        jobs.push_back(j);
    }
    return jobs;
}

void parse_spectra(const nlohmann::json &j, SpectraConfig &s) {
    const std::string p = "spectra";
    s.source = j.value("source", s.source);
    if (s.source != "estimate" && s.source != "truth") {
        throw ConfigError(p + ".source", "expected \"estimate\" or \"truth\"");
    }
    if (j.contains("plan")) {
        const auto &pl = j["plan"];
        if (!(pl.is_string() && pl.get<std::string>() == "scaled")) s.plan = plan_from_json(pl, p + ".plan");
    }
    if (j.contains("window")) {
        std::string w = j["window"].get<std::string>();
        if (w == "rectangular") {
            s.window = Window::Rectangular;
        } else if (w == "hann") {
            s.window = Window::Hann;
        } else {
            throw ConfigError(p + ".window", "expected \"rectangular\" or \"hann\"");
        }
    }
    if (j.contains("merge")) {
        const auto &m = j["merge"];
        s.merge.bandwidth = m.value("bandwidth", s.merge.bandwidth);
        s.merge.min_freq = quantity_or(m, "min_freq", Dimension::Frequency, p + ".merge", s.merge.min_freq);
        if (s.merge.bandwidth < 0) throw ConfigError(p + ".merge.bandwidth", "must be >= 0");
    }
    if (j.contains("floor")) {
        const auto &f = j["floor"];
        if (f.contains("mode")) {
            try {
                s.floor.mode = floor_mode_from_name(f["mode"].get<std::string>());
            } catch (const std::invalid_argument &e) {
                throw ConfigError(p + ".floor.mode", e.what());
            }
        }
        s.floor.plateau_min_freq =
            quantity_or(f, "plateau_min_freq", Dimension::Frequency, p + ".floor", s.floor.plateau_min_freq);
        s.floor.smoothing_bandwidth = f.value("smoothing_bandwidth", s.floor.smoothing_bandwidth);
        if (!(s.floor.smoothing_bandwidth > 0)) throw ConfigError(p + ".floor.smoothing_bandwidth", "must be > 0");
    }
    if (j.contains("normalization")) {
        const auto &n = j["normalization"];
        if (n.contains("mode")) {
            std::string m = n["mode"].get<std::string>();
            if (m == "raw") {
                s.normalization.mode = NormalizationMode::Raw;
            } else if (m == "corrected") {
                s.normalization.mode = NormalizationMode::Corrected;
            } else if (m == "split") {
                s.normalization.mode = NormalizationMode::Split;
            } else {
                throw ConfigError(p + ".normalization.mode", "expected raw, corrected or split");
            }
        }
        s.normalization.crossover =
            quantity_or(n, "crossover", Dimension::Frequency, p + ".normalization", s.normalization.crossover);
        s.normalization.draws.draws = n.value("draws", s.normalization.draws.draws);
        if (s.normalization.draws.draws < 100) throw ConfigError(p + ".normalization.draws", "must be >= 100");
    }
    if (j.contains("pairs")) {
        s.pairs.clear();
        const auto &pr = j["pairs"];
        if (!pr.is_array()) throw ConfigError(p + ".pairs", "expected a list of [series, series]");
        for (size_t i = 0; i < pr.size(); i++) s.pairs.push_back(series_pair(pr[i], p + ".pairs[" + std::to_string(i) + "]"));
    }
}

FitJob parse_fit(const nlohmann::json &j, const std::string &p) {
    FitJob job;
    if (!j.contains("series")) throw ConfigError(p + ".series", "missing");
    job.series = j["series"].get<std::string>();
    require_series(job.series, p + ".series");
    job.model = fit_model_from_json(j, p);
    job.init = j.contains("init") ? fit_params_from_json(j["init"], p + ".init", default_fit_init()) : default_fit_init();
    if (j.contains("lower")) job.model.lower = fit_params_from_json(j["lower"], p + ".lower", job.model.lower);
    if (j.contains("upper")) job.model.upper = fit_params_from_json(j["upper"], p + ".upper", job.model.upper);
    try {
        job.model.validate();
    } catch (const std::invalid_argument &e) {
        throw ConfigError(p, e.what());
    }
    job.options.starts = j.value("starts", job.options.starts);
    job.options.max_iterations = j.value("max_iterations", job.options.max_iterations);
    job.options.f_min = quantity_or(j, "f_min", Dimension::Frequency, p, job.options.f_min);
    if (j.contains("f_max")) job.options.f_max = quantity_at(j, "f_max", Dimension::Frequency, p);
    std::string spec = j.value("spectrum", std::string("corrected"));
    if (spec != "corrected" && spec != "raw") throw ConfigError(p + ".spectrum", "expected corrected or raw");
    job.corrected = spec == "corrected";
    if (job.options.starts == 0) throw ConfigError(p + ".starts", "must be >= 1");
    return job;
}

RunConfig parse_config(const nlohmann::json &j) {
    if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
    static const std::set<std::string> known = {"seed",       "output_dir", "params",     "noise",   "noise_basis",
                                                "field_model", "synth",      "measurement", "campaign", "estimator",
                                                "spectra",    "fits",       "t2",         "efield",  "thresholds",
                                                "plotdata",   "description"};
    for (const auto &[k, v] : j.items()) {
        if (!known.count(k)) throw ConfigError(k, "unknown key");
    }
    RunConfig c;
    c.source = j;
    if (!j.contains("seed")) throw ConfigError("seed", "missing (the master seed is mandatory)");
    if (!j["seed"].is_number_integer() || j["seed"].get<int64_t>() < 0) {
        throw ConfigError("seed", "expected a non-negative integer");
    }
    c.seed = j["seed"].get<uint64_t>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();

    c.params = {16.93e9, 16.30e9, 1.1e6};
    if (j.contains("params")) {
        const auto &p = j["params"];
        c.params.nu_A = quantity_at(p, "nu_A", Dimension::Frequency, "params");
        c.params.nu_B = quantity_at(p, "nu_B", Dimension::Frequency, "params");
        c.params.J = quantity_at(p, "J", Dimension::Frequency, "params");
        if (c.params.J <= 0) throw ConfigError("params.J", "must be > 0");
        if (c.params.nu_A == c.params.nu_B) throw ConfigError("params", "nu_A and nu_B must differ");
    }

    if (j.contains("noise")) {
        c.noise = noise_model_from_json(j["noise"], "noise");
        if (c.noise->channels < 2 || c.noise->channels > 3) {
            throw ConfigError("noise.channels", "expected 2 or 3 channels");
        }
    }
    if (j.contains("noise_basis")) {
        std::string b = j["noise_basis"].get<std::string>();
        if (b == "rates") {
            c.basis = NoiseBasis::Rates;
        } else if (b == "sum-difference") {
            c.basis = NoiseBasis::SumDifference;
        } else {
            throw ConfigError("noise_basis", "expected \"rates\" or \"sum-difference\"");
        }
    }
    if (j.contains("field_model")) {
        const auto &f = j["field_model"];
        if (!f.contains("noise")) throw ConfigError("field_model.noise", "missing");
        if (!f.contains("susceptibility")) throw ConfigError("field_model.susceptibility", "missing");
        FieldModelConfig fm;
        fm.noise = noise_model_from_json(f["noise"], "field_model.noise", NoiseUnits::Field);
        if (fm.noise.channels != 2) throw ConfigError("field_model.noise.channels", "expected 2 (E_A, E_B)");
        fm.G = susceptibility_from_json(f["susceptibility"], "field_model.susceptibility");
        c.field = fm;
    }
    if (j.contains("synth")) c.synth.include_dc = j["synth"].value("include_dc", c.synth.include_dc);

    if (j.contains("measurement")) c.measurement = measurement_from_json(j["measurement"], "measurement");

    if (j.contains("campaign")) {
        const auto &cp = j["campaign"];
        c.rounds = cp.value("rounds", c.rounds);
        if (cp.contains("blocks")) {
            // rounds = blocks x rounds_per_block
            size_t blocks = cp["blocks"].get<size_t>();
            size_t per = cp.value("rounds_per_block", size_t{0});
            if (blocks == 0 || per == 0) throw ConfigError("campaign.blocks", "needs rounds_per_block > 0");
            c.rounds = blocks * per;
        }
        std::string fid = cp.value("fidelity", std::string(fidelity_name(c.fidelity)));
        if (fid == "cycle-resolved") {
            c.fidelity = Fidelity::CycleResolved;
        } else if (fid == "round-resolved") {
            c.fidelity = Fidelity::RoundResolved;
        } else {
            throw ConfigError("campaign.fidelity", "expected cycle-resolved or round-resolved");
        }
    }
    if (c.rounds < 64) throw ConfigError("campaign.rounds", "must be >= 64");

    if (j.contains("estimator")) {
        c.estimator = estimator_from_json(j["estimator"], "estimator");
        c.estimator.parallel = j["estimator"].value("parallel", c.estimator.parallel);
    }
    if (c.estimator.burn_in >= c.rounds) throw ConfigError("estimator.burn_in", "must be below campaign.rounds");
    c.estimator.cold_start = nominal_detuning(c.params, c.measurement.protocol);

    if (j.contains("spectra")) parse_spectra(j["spectra"], c.spectra);

    if (j.contains("fits")) {
        const auto &fl = j["fits"];
        if (!fl.is_array()) throw ConfigError("fits", "expected a list");
        for (size_t i = 0; i < fl.size(); i++) c.fits.push_back(parse_fit(fl[i], "fits[" + std::to_string(i) + "]"));
    } else {
        c.fits = default_fits();
    }

    if (j.contains("t2")) {
        const auto &t = j["t2"];
        c.t2.enabled = t.value("enabled", c.t2.enabled);
        c.t2.integration_time = quantity_or(t, "integration_time", Dimension::Time, "t2", c.t2.integration_time);
        if (t.contains("f_max")) c.t2.f_max = quantity_at(t, "f_max", Dimension::Frequency, "t2");
        if (!(c.t2.integration_time > 0)) throw ConfigError("t2.integration_time", "must be > 0");
    }

    if (j.contains("efield")) {
        const auto &e = j["efield"];
        if (e.contains("susceptibility")) c.efield = susceptibility_from_json(e["susceptibility"], "efield.susceptibility");
    }
    if (!c.efield && c.field) c.efield = c.field->G;

    if (j.contains("thresholds")) {
        const auto &t = j["thresholds"];
        c.thresholds.max_degenerate_fraction = t.value("max_degenerate_fraction", c.thresholds.max_degenerate_fraction);
        c.thresholds.max_unresolvable_fraction =
            t.value("max_unresolvable_fraction", c.thresholds.max_unresolvable_fraction);
    }
    if (j.contains("plotdata")) {
        const auto &p = j["plotdata"];
        if (p.contains("fig1c")) {
            c.plot.fig1c = p["fig1c"].get<std::vector<std::string>>();
            for (size_t i = 0; i < c.plot.fig1c.size(); i++) {
                require_series(c.plot.fig1c[i], "plotdata.fig1c[" + std::to_string(i) + "]");
            }
        }
        if (p.contains("fig2")) c.plot.fig2 = series_pair(p["fig2"], "plotdata.fig2");
        if (p.contains("fig3")) c.plot.fig3 = series_pair(p["fig3"], "plotdata.fig3");
    }
    return c;
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json &j) {
    try {
        return parse_config(j);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("config", e.what());
    } catch (const std::invalid_argument &e) {
        throw ConfigError("config", e.what());
    }
}

RunConfig load_run_config(const fs::path &file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(file.string(), "cannot open config file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(file.string(), e.what());
    }
    return run_config_from_json(j);
}

const char *stage_name(Stage s) {
    switch (s) {
        case Stage::Synth:
            return "synth";
        case Stage::Simulate:
            return "simulate";
        case Stage::Estimate:
            return "estimate";
        case Stage::Spectra:
            return "spectra";
        case Stage::Fit:
            return "fit";
        case Stage::Efield:
            return "efield";
        case Stage::Pipeline:
            return "pipeline";
    }
    return "?";
}

Stage stage_from_name(const std::string &s) {
    for (Stage st : {Stage::Synth, Stage::Simulate, Stage::Estimate, Stage::Spectra, Stage::Fit, Stage::Efield,
                     Stage::Pipeline}) {
        if (s == stage_name(st)) return st;
    }
    throw ConfigError("--stage", "unknown stage '" + s + "'");
}

int exit_code(const std::vector<StageReport> &reports) {
    for (const auto &r : reports) {
        if (!r.threshold_violations.empty()) return kExitThreshold;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Plot data

namespace {

std::string pair_key(const std::string &a, const std::string &b) {
    return a + ":" + b;
}

std::string pair_file(const std::string &a, const std::string &b, bool raw) {
    return "cross_" + a + "_" + b + (raw ? "_raw" : "") + ".csv";
}

std::ofstream open_csv(const fs::path &p) {
    std::ofstream out(p);
    if (!out) throw DataError("cannot write " + p.string());
    out << std::setprecision(17);
    return out;
}

const PsdPosterior *find_psd(const PlotInputs &in, const std::string &s, const std::string &key) {
    if (in.psd.empty()) return nullptr;
    auto it = in.psd.find(s);
    if (it == in.psd.end()) throw ConfigError(key, "series '" + s + "' has no spectrum");
    return &it->second;
}

void require_grid(const PsdPosterior &a, const PsdPosterior &b, const std::string &key) {
    if (a.entries.size() != b.entries.size()) throw ConfigError(key, "series are on different frequency grids");
}

std::string fit_value(const PlotInputs &in, const std::string &s, double f) {
    auto it = in.fits.find(s);
    if (it == in.fits.end()) return "nan";
    std::ostringstream os;
    os << std::setprecision(17) << model_psd(it->second.theta, it->second.variant, f);
    return os.str();
}

}  // namespace

std::vector<fs::path> emit_plotdata(const fs::path &dir, const PlotInputs &in, const PlotSpec &spec) {
    fs::create_directories(dir);
    std::vector<fs::path> written;

    {
        std::vector<const PsdPosterior *> cols;
        for (const auto &s : spec.fig1c) {
            if (auto *p = find_psd(in, s, "plotdata.fig1c")) cols.push_back(p);
        }
        for (size_t i = 1; i < cols.size(); i++) require_grid(*cols[0], *cols[i], "plotdata.fig1c");
        fs::path p = dir / "fig1c.csv";
        auto out = open_csv(p);
        out << "f_Hz";
        for (const auto &s : spec.fig1c) out << "," << s << "_mean," << s << "_q05," << s << "_q95," << s << "_fit";
        out << "\n";
        if (!cols.empty()) {
            for (size_t k = 0; k < cols[0]->entries.size(); k++) {
                double f = cols[0]->entries[k].f;
                out << f;
                for (size_t c = 0; c < cols.size(); c++) {
                    const auto &e = cols[c]->entries[k];
                    out << "," << e.mean << "," << e.q05 << "," << e.q95 << "," << fit_value(in, spec.fig1c[c], f);
                }
                out << "\n";
            }
        }
        written.push_back(p);
    }

    {
        fs::path p = dir / "fig2.csv";
        auto out = open_csv(p);
        out << "f_Hz,abs_mean,abs_q05,abs_q95,arg_mean,arg_q05,arg_q95,mode\n";
        if (!in.cross.empty()) {
            auto it = in.cross.find(pair_key(spec.fig2.first, spec.fig2.second));
            if (it == in.cross.end()) {
                throw ConfigError("plotdata.fig2", "pair " + spec.fig2.first + "," + spec.fig2.second +
                                                       " is not among spectra.pairs");
            }
            for (const auto &e : it->second.entries) {
                out << e.f << "," << e.abs_mean << "," << e.abs_q05 << "," << e.abs_q95 << "," << e.arg_mean << ","
                    << e.arg_q05 << "," << e.arg_q95 << "," << (e.corrected ? "corrected" : "raw") << "\n";
            }
        }
        written.push_back(p);
    }

    {
        const auto &[sa, sb] = spec.fig3;
        const PsdPosterior *a = find_psd(in, sa, "plotdata.fig3");
        const PsdPosterior *b = find_psd(in, sb, "plotdata.fig3");
        fs::path p = dir / "fig3.csv";
        auto out = open_csv(p);
        out << "f_Hz," << sa << "_mean," << sa << "_q05," << sa << "_q95," << sb << "_mean," << sb << "_q05," << sb
            << "_q95," << sa << "_minus_" << sb << "," << sa << "_fit," << sb << "_fit\n";
        if (a && b) {
            require_grid(*a, *b, "plotdata.fig3");
            for (size_t k = 0; k < a->entries.size(); k++) {
                const auto &ea = a->entries[k];
                const auto &eb = b->entries[k];
                out << ea.f << "," << ea.mean << "," << ea.q05 << "," << ea.q95 << "," << eb.mean << "," << eb.q05
                    << "," << eb.q95 << "," << ea.mean - eb.mean << "," << fit_value(in, sa, ea.f) << ","
                    << fit_value(in, sb, ea.f) << "\n";
            }
        }
        written.push_back(p);
    }

    if (in.prediction) {
        fs::path p = dir / "fig4.csv";
        auto out = open_csv(p);
        out << "f_Hz,S_J_mean,S_J_q05,S_J_q95,S_J_E,abs_C_AJ_mean,abs_C_AJ_E,abs_c_AJ_mean,abs_c_AJ_q05,abs_c_AJ_q95,"
               "abs_c_AJ_E,r_AJ,abs_c_BJ_mean,abs_c_BJ_q05,abs_c_BJ_q95,abs_c_BJ_E,r_BJ,flags\n";
        const auto &pred = in.prediction->entries;
        if (!pred.empty()) {
            const PsdPosterior *sj = find_psd(in, "J", "plotdata.fig4");
            auto cross_of = [&](const char *q) -> const CrossPosterior & {
                auto it = in.cross_raw.find(pair_key(q, "J"));
                if (it == in.cross_raw.end()) {
                    throw ConfigError("plotdata.fig4", std::string("needs the ") + q + ",J pair in spectra.pairs");
                }
                return it->second;
            };
            if (!sj) throw ConfigError("plotdata.fig4", "needs the J spectrum");
            const CrossPosterior &aj = cross_of("nu_A");
            const CrossPosterior &bj = cross_of("nu_B");
            if (sj->entries.size() != pred.size() || aj.entries.size() != pred.size() ||
                bj.entries.size() != pred.size()) {
                throw ConfigError("plotdata.fig4", "prediction and measured spectra are on different grids");
            }
            for (size_t k = 0; k < pred.size(); k++) {
                const auto &e = pred[k];
                const auto &s = sj->entries[k];
                const auto &a = aj.entries[k];
                const auto &b = bj.entries[k];
                out << e.f << "," << s.mean << "," << s.q05 << "," << s.q95 << "," << e.S_J << ","
                    << std::abs(a.mean) << "," << std::abs(e.C_AJ) << "," << a.abs_mean << "," << a.abs_q05 << ","
                    << a.abs_q95 << "," << std::abs(e.c_AJ) << "," << e.r_AJ << "," << b.abs_mean << "," << b.abs_q05
                    << "," << b.abs_q95 << "," << std::abs(e.c_BJ) << "," << e.r_BJ << "," << e.flags << "\n";
            }
        }
        written.push_back(p);
    }
    return written;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

using Clock = std::chrono::steady_clock;

struct Context {
    const RunConfig &cfg;
    const RunOptions &opt;
    fs::path out;

    std::ostream &log() const {
        return opt.log ? *opt.log : std::cerr;
    }
    void note(Stage s, const std::string &msg) const {
        if (opt.verbose) log() << "[" << stage_name(s) << "] " << msg << "\n";
    }
    fs::path need(const std::string &rel, Stage producer) const {
        fs::path p = out / rel;
        if (!fs::exists(p)) {
            throw DataError("missing upstream artifact " + p.string() + " (run stage '" + stage_name(producer) +
                            "' first)");
        }
        return p;
    }
};

double synth_dt(const RunConfig &c) {
    return c.fidelity == Fidelity::CycleResolved ? c.measurement.protocol.cycle_duration
                                                 : c.measurement.protocol.round_duration();
}

void to_rate_basis(TraceSet &t, NoiseBasis basis) {
    if (basis == NoiseBasis::SumDifference) {
        for (size_t m = 0; m < t.n; m++) {
            double s = t.data[0][m], d = t.data[1][m];
            t.data[0][m] = 0.5 * (s + d);
            t.data[1][m] = 0.5 * (s - d);
        }
    }
    if (t.channels() == 2) t.data.emplace_back(t.n, 0.0);
}

void stage_synth(const Context &ctx, StageReport &rep) {
    const RunConfig &c = ctx.cfg;
    const size_t cpr = c.measurement.protocol.cycles_per_round();
    size_t n = c.fidelity == Fidelity::CycleResolved ? c.rounds * cpr : c.rounds;
    n += n % 2;
    const double dt = synth_dt(c);
    TraceSet total = zero_trace(3, n, dt);
    total.seed = c.seed;
    nlohmann::json meta = {{"channels", {"nu_A", "nu_B", "J"}}, {"fidelity", fidelity_name(c.fidelity)}};
    if (c.noise) {
        TraceSet t = synthesize(*c.noise, n, dt, derive_seed(c.seed, {static_cast<uint64_t>(SeedStage::NoiseGaussian)}),
                                c.synth);
        to_rate_basis(t, c.basis);
        total += t;
        meta["noise"] = to_json(*c.noise);
        meta["noise_basis"] = c.basis == NoiseBasis::Rates ? "rates" : "sum-difference";
    }
    if (c.field) {
        TraceSet e = synthesize(c.field->noise, n, dt,
                                derive_seed(c.seed, {static_cast<uint64_t>(SeedStage::NoiseGaussian), 1}), c.synth);
        e.metadata = {{"channels", {"E_A", "E_B"}}, {"units", "field-unit"}};
        write_trace(ctx.out / "fields", e);
        rep.outputs.push_back("fields.bin");
        rep.outputs.push_back("fields.json");
        total += fields_to_rates(e, c.field->G);
        meta["field_model"] = {{"noise", to_json(c.field->noise, NoiseUnits::Field)},
                               {"susceptibility", to_json(c.field->G)}};
    }
    if (!c.noise && !c.field) rep.warnings.push_back("no noise configured: static-truth campaign");
    total.metadata = meta;
    write_trace(ctx.out / "noise", total);
    rep.outputs.push_back("noise.bin");
    rep.outputs.push_back("noise.json");
    ctx.note(Stage::Synth, std::to_string(n) + " samples at dt = " + format_quantity(dt, "s"));
}

void stage_simulate(const Context &ctx, StageReport &rep) {
    const RunConfig &c = ctx.cfg;
    ctx.need("noise.bin", Stage::Synth);
    rep.inputs = {"noise.bin", "noise.json"};
    TraceSet noise = read_trace(ctx.out / "noise");
    Campaign camp = run_campaign(noise, c.params, c.measurement, c.rounds, c.seed);
    write_rounds(ctx.out / "rounds", camp.rounds, c.measurement);
    camp.truth.provenance["stage"] = "simulate";
    write_rate_trace(ctx.out / "truth.csv", camp.truth);
    rep.outputs = {"rounds.bin", "rounds.json", "truth.csv", "truth.csv.json"};
    ctx.note(Stage::Simulate, std::to_string(camp.rounds.size()) + " rounds");
}

void stage_estimate(const Context &ctx, StageReport &rep) {
    const RunConfig &c = ctx.cfg;
    ctx.need("rounds.bin", Stage::Simulate);
    rep.inputs = {"rounds.bin", "rounds.json"};
    std::vector<RoundRecord> rounds = read_rounds(ctx.out / "rounds");
    RateTrace trace = estimate_campaign(rounds, c.measurement, c.estimator);
    write_rate_trace(ctx.out / "trace.csv", trace);
    rep.outputs = {"trace.csv", "trace.csv.json"};
    double frac = trace.flagged_fraction();
    if (frac > 0) {
        std::ostringstream os;
        os << "degenerate posteriors in " << frac * 100 << "% of rounds";
        rep.warnings.push_back(os.str());
    }
    if (frac > c.thresholds.max_degenerate_fraction) {
        std::ostringstream os;
        os << "degenerate-posterior fraction " << frac << " exceeds thresholds.max_degenerate_fraction = "
           << c.thresholds.max_degenerate_fraction;
        rep.threshold_violations.push_back(os.str());
    }
    ctx.note(Stage::Estimate, std::to_string(trace.size()) + " rows");
}

void stage_spectra(const Context &ctx, StageReport &rep) {
    const RunConfig &c = ctx.cfg;
    const std::string in = c.spectra.source == "truth" ? "truth.csv" : "trace.csv";
    ctx.need(in, c.spectra.source == "truth" ? Stage::Simulate : Stage::Estimate);
    rep.inputs = {in, in + ".json"};
    RateTrace trace = read_rate_trace(ctx.out / in).without_burn_in();
    if (c.spectra.source == "truth" && trace.size() > c.estimator.burn_in) {
        // Same rows as the estimate trace would keep.
        RateTrace t;
        t.dt = trace.dt;
        t.provenance = trace.provenance;
        auto skip = static_cast<long>(c.estimator.burn_in);
        t.rates.assign(trace.rates.begin() + skip, trace.rates.end());
        t.variances.assign(trace.variances.begin() + skip, trace.variances.end());
        t.flags.assign(trace.flags.begin() + skip, trace.flags.end());
        trace = std::move(t);
    }
    DerivedSeries d = derived_series(trace);
    BatchingPlan plan = c.spectra.plan ? *c.spectra.plan : BatchingPlan::scaled(trace.size());
    SpectralSamples samples = batch_periodograms(d.all(), d.dt, plan, DerivedSeries::names(), c.spectra.window);
    for (const auto &w : samples.warnings) rep.warnings.push_back(w);
    ErrorFloor floor = estimate_floor(samples, trace, c.spectra.floor);
    SpectralSamples merged = merge_bins(samples, c.spectra.merge);

    fs::create_directories(ctx.out / "spectra");
    nlohmann::json meta = {{"source", c.spectra.source},
                           {"plan", to_json(samples.plan_used.empty() ? plan : BatchingPlan{samples.plan_used})},
                           {"merge_bandwidth", c.spectra.merge.bandwidth},
                           {"window", c.spectra.window == Window::Hann ? "hann" : "rectangular"},
                           {"rows", trace.size()}};
    auto emit = [&](const std::string &rel) {
        rep.outputs.push_back(rel);
        rep.outputs.push_back(rel + ".json");
    };
    for (size_t ch = 0; ch < merged.p; ch++) {
        const std::string &s = merged.names[ch];
        PsdPosterior raw = auto_spectrum(merged, ch);
        write_psd(ctx.out / "spectra" / ("psd_" + s + ".csv"), raw, meta);
        emit("spectra/psd_" + s + ".csv");
        PsdPosterior cor = correct_floor(raw, floor, s, &rep.warnings);
        nlohmann::json m = meta;
        m["floor"] = floor.to_json();
        write_psd(ctx.out / "spectra" / ("psd_" + s + "_corrected.csv"), cor, m);
        emit("spectra/psd_" + s + "_corrected.csv");
    }
    {
        std::ofstream fl(ctx.out / "spectra" / "floor.json");
        fl << std::setw(2) << floor.to_json() << "\n";
        rep.outputs.push_back("spectra/floor.json");
    }
    for (size_t pi = 0; pi < c.spectra.pairs.size(); pi++) {
        const auto &[a, b] = c.spectra.pairs[pi];
        size_t i = merged.channel(a), j = merged.channel(b);
        NormalizationOptions no = c.spectra.normalization;
        no.draws.seed = derive_seed(c.seed, {static_cast<uint64_t>(SeedStage::SpectralPosterior), pi});
        nlohmann::json m = meta;
        m["normalization"] = no.mode == NormalizationMode::Raw         ? "raw"
                             : no.mode == NormalizationMode::Corrected ? "corrected"
                                                                       : "split";
        m["crossover_Hz"] = no.crossover;
        m["draws"] = no.draws.draws;
        CrossPosterior cp = normalized_cross(merged, i, j, &floor, no);
        write_cross(ctx.out / "spectra" / pair_file(a, b, false), cp, m);
        emit("spectra/" + pair_file(a, b, false));
        size_t unres = 0;
        for (const auto &e : cp.entries) unres += (e.flags & spectrum_flags::kUnresolvable) != 0;
        double frac = cp.entries.empty() ? 0.0 : static_cast<double>(unres) / static_cast<double>(cp.entries.size());
        if (frac > c.thresholds.max_unresolvable_fraction) {
            std::ostringstream os;
            os << a << "," << b << ": unresolvable fraction " << frac
               << " exceeds thresholds.max_unresolvable_fraction = " << c.thresholds.max_unresolvable_fraction;
            rep.threshold_violations.push_back(os.str());
        }
        if (no.mode != NormalizationMode::Raw) {
            no.mode = NormalizationMode::Raw;
            m["normalization"] = "raw";
            write_cross(ctx.out / "spectra" / pair_file(a, b, true), normalized_cross(merged, i, j, &floor, no), m);
            emit("spectra/" + pair_file(a, b, true));
        }
    }
    ctx.note(Stage::Spectra, std::to_string(merged.size()) + " merged frequencies from " +
                                 std::to_string(trace.size()) + " rows");
}

void stage_fit(const Context &ctx, StageReport &rep) {
    const RunConfig &c = ctx.cfg;
    nlohmann::json out = nlohmann::json::object();
    for (size_t i = 0; i < c.fits.size(); i++) {
        const FitJob &job = c.fits[i];
        std::string rel = "spectra/psd_" + job.series + (job.corrected ? "_corrected" : "") + ".csv";
        ctx.need(rel, Stage::Spectra);
        rep.inputs.push_back(rel);
        PsdPosterior post = read_psd(ctx.out / rel);
        FitOptions fo = job.options;
        fo.seed = derive_seed(c.seed, {static_cast<uint64_t>(SeedStage::Fit), i});
        nlohmann::json entry;
        try {
            FitResult r = fit_psd(post, job.model, job.init, fo);
            entry = r.to_json();
            entry["caption"] = r.caption();
            if (!r.converged) rep.warnings.push_back("fit of " + job.series + " did not converge");
            if (c.t2.enabled) {
                try {
                    T2Result t2 = t2_star(r.theta, r.variant, c.t2.integration_time, c.t2.f_max);
                    entry["t2_star_s"] = t2.found ? nlohmann::json(t2.t2) : nlohmann::json(nullptr);
                    if (!t2.found) rep.warnings.push_back("t2_star of " + job.series + " beyond search ceiling");
                } catch (const std::domain_error &e) {
                    entry["t2_star_s"] = nullptr;
                    rep.warnings.push_back("t2_star of " + job.series + ": " + e.what());
                }
            }
        } catch (const DataError &e) {
            rep.warnings.push_back("fit of " + job.series + " skipped: " + e.what());
            continue;
        }
        entry["spectrum"] = job.corrected ? "corrected" : "raw";
        entry["fixed"] = to_json(job.model)["fixed"];
        out[job.series] = entry;
    }
    nlohmann::json doc = {{"format", "spincorr-fits-v1"},
                          {"t2_integration_time_s", c.t2.integration_time},
                          {"t2_f_max_Hz", std::isfinite(c.t2.f_max) ? nlohmann::json(c.t2.f_max) : "inf"},
                          {"fits", out}};
    std::ofstream(ctx.out / "fits.json") << std::setw(2) << doc << "\n";
    rep.outputs.push_back("fits.json");
    ctx.note(Stage::Fit, std::to_string(out.size()) + " fits");
}

void stage_efield(const Context &ctx, StageReport &rep) {
    const RunConfig &c = ctx.cfg;
    if (!c.efield) throw ConfigError("efield.susceptibility", "missing (and no field_model to take it from)");
    auto psd = [&](const std::string &s, bool corrected) {
        std::string rel = "spectra/psd_" + s + (corrected ? "_corrected" : "") + ".csv";
        ctx.need(rel, Stage::Spectra);
        rep.inputs.push_back(rel);
        return read_psd(ctx.out / rel);
    };
    std::string xrel = "spectra/" + pair_file("nu_A", "nu_B", false);
    if (!fs::exists(ctx.out / xrel)) {
        throw DataError("efield needs " + xrel + " (add [\"nu_A\", \"nu_B\"] to spectra.pairs)");
    }
    rep.inputs.push_back(xrel);
    CrossPosterior cab = read_cross(ctx.out / xrel);
    PsdPosterior A = psd("nu_A", true), B = psd("nu_B", true), J = psd("J", true);
    FieldSpectra fields = invert(A, B, cab, *c.efield);
    size_t clamped = 0;
    for (const auto &e : fields.entries) clamped += (e.flags & spectrum_flags::kExceedsUnity) != 0;
    if (clamped) rep.warnings.push_back(std::to_string(clamped) + " field cross entries clamped to |C|^2 = S_EA S_EB");
    Denominators den = denominators(psd("nu_A", false), psd("nu_B", false), psd("J", false), A, B, J);
    PredictionSet pred = predict_exchange(fields, *c.efield, den);
    fs::create_directories(ctx.out / "efield");
    nlohmann::json meta = {{"susceptibility", to_json(*c.efield)}};
    write_fields(ctx.out / "efield" / "fields.csv", fields, meta);
    write_prediction(ctx.out / "efield" / "prediction.csv", pred, meta);
    rep.outputs = {"efield/fields.csv", "efield/fields.csv.json", "efield/prediction.csv",
                   "efield/prediction.csv.json"};
    ctx.note(Stage::Efield, std::to_string(pred.entries.size()) + " predicted frequencies");
}

PlotInputs load_plot_inputs(const Context &ctx) {
    PlotInputs in;
    fs::path sp = ctx.out / "spectra";
    for (const auto &s : DerivedSeries::names()) {
        fs::path p = sp / ("psd_" + s + "_corrected.csv");
        if (fs::exists(p)) in.psd[s] = read_psd(p);
    }
    for (const auto &[a, b] : ctx.cfg.spectra.pairs) {
        fs::path p = sp / pair_file(a, b, false);
        if (fs::exists(p)) in.cross[pair_key(a, b)] = read_cross(p);
        fs::path r = sp / pair_file(a, b, true);
        if (fs::exists(r)) {
            in.cross_raw[pair_key(a, b)] = read_cross(r);
        } else if (fs::exists(p)) {
            in.cross_raw[pair_key(a, b)] = in.cross[pair_key(a, b)];
        }
    }
    if (fs::exists(ctx.out / "fits.json")) {
        std::ifstream f(ctx.out / "fits.json");
        nlohmann::json j;
        f >> j;
        for (const auto &[k, v] : j.at("fits").items()) in.fits[k] = fit_result_from_json(v, "fits.json:" + k);
    }
    if (fs::exists(ctx.out / "efield" / "prediction.csv")) in.prediction = read_prediction(ctx.out / "efield" / "prediction.csv");
    return in;
}

// Manifest

nlohmann::json load_manifest(const fs::path &p) {
    std::ifstream in(p);
    if (!in) return nlohmann::json::object();
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception &) {
        return nlohmann::json::object();
    }
}

nlohmann::json digests(const fs::path &root, const std::vector<std::string> &files) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto &f : files) {
        if (fs::exists(root / f)) j[f] = sha256_file(root / f);
    }
    return j;
}

void write_manifest(const Context &ctx, const std::vector<StageReport> &reports, const std::vector<std::string> &plots,
                    int workers) {
    fs::path mp = ctx.out / "manifest.json";
    nlohmann::json m = load_manifest(mp);
    // Where the run was written is not part of what was computed.
    nlohmann::json hashed = ctx.cfg.source;
    hashed.erase("output_dir");
    const std::string cfg_hash = sha256_hex(hashed.dump());
    m["format"] = "spincorr-manifest-v1";
    m["config_sha256"] = cfg_hash;
    m["config"] = ctx.cfg.source;
    m["seed"] = ctx.cfg.seed;
    m["versions"] = {{"spincorr", version()},
                     {"fftw", fft_backend_version()},
                     {"boost", BOOST_LIB_VERSION},
                     {"openssl", OPENSSL_VERSION_TEXT},
                     {"compiler", __VERSION__}};
    if (!m.contains("stages")) m["stages"] = nlohmann::json::object();
    for (const auto &r : reports) {
        m["stages"][stage_name(r.stage)] = {{"config_sha256", cfg_hash},
                                            {"inputs", digests(ctx.out, r.inputs)},
                                            {"outputs", digests(ctx.out, r.outputs)},
                                            {"seconds", r.seconds},
                                            {"workers", workers},
                                            {"warnings", r.warnings},
                                            {"threshold_violations", r.threshold_violations}};
    }
    if (!plots.empty()) m["stages"]["plotdata"] = {{"outputs", digests(ctx.out, plots)}};
    nlohmann::json files = nlohmann::json::object();
    for (const auto &[name, st] : m["stages"].items()) {
        for (const auto &[f, h] : st["outputs"].items()) files[f] = h;
    }
    m["files"] = files;
    std::ofstream(mp) << std::setw(2) << m << "\n";
}

}  // namespace

std::vector<StageReport> run_stage(const RunConfig &cfg, Stage stage, const RunOptions &opt) {
    Context ctx{cfg, opt, cfg.output_dir};
    fs::create_directories(ctx.out);
    int workers = opt.workers > 0 ? opt.workers : omp_get_num_procs();
    omp_set_num_threads(workers);

    std::vector<Stage> order;
    if (stage == Stage::Pipeline) {
        order = {Stage::Synth, Stage::Simulate, Stage::Estimate, Stage::Spectra, Stage::Fit};
        if (cfg.efield) order.push_back(Stage::Efield);
    } else {
        order = {stage};
    }
    std::vector<StageReport> reports;
    std::vector<std::string> plots;
    for (Stage s : order) {
        StageReport rep;
        rep.stage = s;
        auto t0 = Clock::now();
        switch (s) {
            case Stage::Synth:
                stage_synth(ctx, rep);
                break;
            case Stage::Simulate:
                stage_simulate(ctx, rep);
                break;
            case Stage::Estimate:
                stage_estimate(ctx, rep);
                break;
            case Stage::Spectra:
                stage_spectra(ctx, rep);
                break;
            case Stage::Fit:
                stage_fit(ctx, rep);
                break;
            case Stage::Efield:
                stage_efield(ctx, rep);
                break;
            case Stage::Pipeline:
                break;
        }
        if (s == Stage::Spectra || s == Stage::Fit || s == Stage::Efield) {
            plots.clear();
            for (const auto &p : emit_plotdata(ctx.out / "plotdata", load_plot_inputs(ctx), cfg.plot)) {
                plots.push_back(fs::relative(p, ctx.out).string());
            }
        }
        rep.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        for (const auto &w : rep.warnings) ctx.note(s, "warning: " + w);
        for (const auto &v : rep.threshold_violations) ctx.note(s, "threshold: " + v);
        reports.push_back(std::move(rep));
        write_manifest(ctx, {reports.back()}, plots, workers);
    }
    return reports;
}

}  // namespace spincorr
