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

#include "spincorr/efield.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

#include "io_util.h"
#include "spincorr/errors.h"
#include "spincorr/units.h"

namespace spincorr {

Susceptibility Susceptibility::diagonal(double chi_A, double chi_B, double kappa_A, double kappa_B) {
    Susceptibility s;
    s.G[kRowA] = {chi_A, 0.0};
    s.G[kRowB] = {0.0, chi_B};
    s.G[kRowJ] = {kappa_A, kappa_B};
    return s;
}

void Susceptibility::validate() const {
    for (const auto &row : G) {
        for (double g : row) {
            if (!std::isfinite(g)) throw ConfigError("efield.susceptibility", "entries must be finite");
        }
    }
}

RateMatrix propagate(const Susceptibility &s, double S_EA, double S_EB, std::complex<double> C) {
    const std::complex<double> Se[2][2] = {{S_EA, C}, {std::conj(C), S_EB}};
    RateMatrix out{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            std::complex<double> acc = 0;
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) acc += s.G[i][a] * Se[a][b] * s.G[j][b];
            }
            out[i * 3 + j] = acc;
        }
    }
    // Exact real diagonal.
    for (int i = 0; i < 3; ++i) out[i * 3 + i] = out[i * 3 + i].real();
    return out;
}

std::vector<RateMatrix> propagate(const Susceptibility &G, const FieldSpectra &fields) {
    std::vector<RateMatrix> out;
    out.reserve(fields.entries.size());
    for (const auto &e : fields.entries) out.push_back(propagate(G, e.S_EA, e.S_EB, e.C));
    return out;
}

FieldEntry invert(double f, double S_A, double S_B, std::complex<double> C_AB, const Susceptibility &G) {
    if (!G.qubit_diagonal()) {
        throw ConfigError("efield.susceptibility", "inversion needs zero qubit off-diagonals");
    }
    const double ca = G.chi_A(), cb = G.chi_B();
    if (ca == 0 || cb == 0) throw std::domain_error("invert: zero qubit susceptibility");
    FieldEntry e;
    e.f = f;
    e.S_EA = S_A / (ca * ca);
    e.S_EB = S_B / (cb * cb);
    e.C = C_AB / (ca * cb);
    const double bound = std::sqrt(std::max(e.S_EA, 0.0) * std::max(e.S_EB, 0.0));
    const double mag = std::abs(e.C);
    if (mag == 0) {
        e.cs_ratio = 0;
    } else {
        e.cs_ratio = bound > 0 ? mag / bound : std::numeric_limits<double>::infinity();
        if (mag > bound) {
            e.C *= bound / mag;
            e.flags |= spectrum_flags::kExceedsUnity;
        }
    }
    return e;
}

namespace {

void check_aligned(double f1, double f2, const char *what) {
    if (std::abs(f1 - f2) > 1e-9 * std::max(std::abs(f1), std::abs(f2))) {
        throw DataError(std::string(what) + ": frequency grids differ");
    }
}

}  // namespace

FieldSpectra invert(const PsdPosterior &S_A, const PsdPosterior &S_B, const CrossPosterior &C_AB,
                    const Susceptibility &G) {
    const size_t n = S_A.entries.size();
    if (S_B.entries.size() != n || C_AB.entries.size() != n) throw DataError("invert: spectra lengths differ");
    FieldSpectra out;
    out.entries.reserve(n);
    for (size_t k = 0; k < n; ++k) {
        const auto &a = S_A.entries[k];
        check_aligned(a.f, S_B.entries[k].f, "invert");
        check_aligned(a.f, C_AB.entries[k].f, "invert");
        FieldEntry e = invert(a.f, a.mean, S_B.entries[k].mean, C_AB.entries[k].mean, G);
        e.flags |= a.flags | S_B.entries[k].flags | C_AB.entries[k].flags;
        out.entries.push_back(e);
    }
    return out;
}

PredictionSet predict_exchange(const FieldSpectra &fields, const Susceptibility &G, const Denominators &den) {
    const size_t n = fields.entries.size();
    for (const auto *v : {&den.S_A_raw, &den.S_B_raw, &den.S_J_raw, &den.S_A, &den.S_B, &den.S_J}) {
        if (v->size() != n) throw DataError("predict_exchange: denominator length differs from field grid");
    }
    PredictionSet out;
    out.entries.reserve(n);
    for (size_t k = 0; k < n; ++k) {
        const auto &fe = fields.entries[k];
        RateMatrix m = propagate(G, fe.S_EA, fe.S_EB, fe.C);
        PredictionEntry p;
        p.f = fe.f;
        p.flags = fe.flags;
        p.S_J = m[8].real();
        p.C_AJ = m[2];
        p.C_BJ = m[5];
        const double dA = den.S_A_raw[k] * den.S_J_raw[k];
        const double dB = den.S_B_raw[k] * den.S_J_raw[k];
        if (dA > 0) {
            p.c_AJ = p.C_AJ / std::sqrt(dA);
            p.r_AJ = std::sqrt(std::max(den.S_A[k] * den.S_J[k], 0.0) / dA);
        } else {
            p.flags |= spectrum_flags::kUnresolvable;
        }
        if (dB > 0) {
            p.c_BJ = p.C_BJ / std::sqrt(dB);
            p.r_BJ = std::sqrt(std::max(den.S_B[k] * den.S_J[k], 0.0) / dB);
        } else {
            p.flags |= spectrum_flags::kUnresolvable;
        }
        out.entries.push_back(p);
    }
    return out;
}

Denominators denominators(const PsdPosterior &A_raw, const PsdPosterior &B_raw, const PsdPosterior &J_raw,
                          const PsdPosterior &A, const PsdPosterior &B, const PsdPosterior &J) {
    const size_t n = A_raw.entries.size();
    Denominators d;
    auto take = [&](const PsdPosterior &p, std::vector<double> &dst) {
        if (p.entries.size() != n) throw DataError("denominators: spectra lengths differ");
        dst.reserve(n);
        for (size_t k = 0; k < n; ++k) {
            check_aligned(A_raw.entries[k].f, p.entries[k].f, "denominators");
            dst.push_back(p.entries[k].mean);
        }
    };
    take(A_raw, d.S_A_raw);
    take(B_raw, d.S_B_raw);
    take(J_raw, d.S_J_raw);
    take(A, d.S_A);
    take(B, d.S_B);
    take(J, d.S_J);
    return d;
}

TraceSet fields_to_rates(const TraceSet &fields, const Susceptibility &G) {
    if (fields.channels() != 2) throw DataError("fields_to_rates: field trace needs 2 channels (E_A, E_B)");
    TraceSet out;
    out.dt = fields.dt;
    out.n = fields.n;
    out.seed = fields.seed;
    out.data.assign(3, std::vector<double>(fields.n));
    for (size_t r = 0; r < 3; ++r) {
        const double g0 = G.G[r][0], g1 = G.G[r][1];
        for (size_t m = 0; m < fields.n; ++m) out.data[r][m] = g0 * fields.data[0][m] + g1 * fields.data[1][m];
    }
    out.metadata = fields.metadata;
    out.metadata["channels"] = {"nu_A", "nu_B", "J"};
    out.metadata["susceptibility"] = to_json(G);
    return out;
}

RateMatrix rate_spectral_matrix(const NoiseModel &field_model, const Susceptibility &G, double f) {
    if (field_model.channels != 2) throw ConfigError("field_model", "needs 2 channels (E_A, E_B)");
    return propagate(G, eval_psd(field_model, 0, 0, f).real(), eval_psd(field_model, 1, 1, f).real(),
                     eval_psd(field_model, 0, 1, f));
}

void write_fields(const std::filesystem::path &csv, const FieldSpectra &fields, const nlohmann::json &meta) {
    std::ofstream out(csv);
    if (!out) throw DataError("cannot write " + csv.string());
    out << "f_Hz,S_EA,S_EB,C_re,C_im,cs_ratio,flags\n" << std::setprecision(17);
    for (const auto &e : fields.entries) {
        out << e.f << "," << e.S_EA << "," << e.S_EB << "," << e.C.real() << "," << e.C.imag() << "," << e.cs_ratio
            << "," << e.flags << "\n";
    }
    nlohmann::json m = meta;
    m["format"] = "spincorr-field-v1";
    m["psd_convention"] = "two-sided";
    m["units"] = "field-unit^2/Hz";
    detail::write_sidecar(csv, m);
}

FieldSpectra read_fields(const std::filesystem::path &csv) {
    FieldSpectra fs;
    for (const auto &r : detail::read_rows(csv, 7)) {
        FieldEntry e;
        e.f = r[0];
        e.S_EA = r[1];
        e.S_EB = r[2];
        e.C = {r[3], r[4]};
        e.cs_ratio = r[5];
        e.flags = static_cast<uint32_t>(r[6]);
        fs.entries.push_back(e);
    }
    return fs;
}

void write_prediction(const std::filesystem::path &csv, const PredictionSet &pred, const nlohmann::json &meta) {
    std::ofstream out(csv);
    if (!out) throw DataError("cannot write " + csv.string());
    out << "f_Hz,S_J,C_AJ_re,C_AJ_im,C_BJ_re,C_BJ_im,abs_c_AJ,arg_c_AJ,abs_c_BJ,arg_c_BJ,r_AJ,r_BJ,flags\n"
        << std::setprecision(17);
    for (const auto &e : pred.entries) {
        out << e.f << "," << e.S_J << "," << e.C_AJ.real() << "," << e.C_AJ.imag() << "," << e.C_BJ.real() << ","
            << e.C_BJ.imag() << "," << std::abs(e.c_AJ) << "," << std::arg(e.c_AJ) << "," << std::abs(e.c_BJ) << ","
            << std::arg(e.c_BJ) << "," << e.r_AJ << "," << e.r_BJ << "," << e.flags << "\n";
    }
    nlohmann::json m = meta;
    m["format"] = "spincorr-prediction-v1";
    m["psd_convention"] = "two-sided";
    m["units"] = {{"S_J", "Hz^2/Hz"}, {"C", "Hz^2/Hz"}, {"abs_c", "1"}, {"arg_c", "rad"}, {"r", "1"}};
    detail::write_sidecar(csv, m);
}

PredictionSet read_prediction(const std::filesystem::path &csv) {
    PredictionSet ps;
    for (const auto &r : detail::read_rows(csv, 13)) {
        PredictionEntry e;
        e.f = r[0];
        e.S_J = r[1];
        e.C_AJ = {r[2], r[3]};
        e.C_BJ = {r[4], r[5]};
        e.c_AJ = std::polar(r[6], r[7]);
        e.c_BJ = std::polar(r[8], r[9]);
        e.r_AJ = r[10];
        e.r_BJ = r[11];
        e.flags = static_cast<uint32_t>(r[12]);
        ps.entries.push_back(e);
    }
    return ps;
}

nlohmann::json to_json(const Susceptibility &s) {
    nlohmann::json g = nlohmann::json::array();
    for (const auto &row : s.G) {
        g.push_back({format_quantity(row[0], "Hz/field-unit"), format_quantity(row[1], "Hz/field-unit")});
    }
    return {{"G", g}, {"rows", {"nu_A", "nu_B", "J"}}, {"columns", {"E_A", "E_B"}}};
}

namespace {

double chi_value(const nlohmann::json &v, const std::string &path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_quantity(v.get<std::string>(), Dimension::Susceptibility, path);
    throw ConfigError(path, "expected a number or a quantity string");
}

}  // namespace

Susceptibility susceptibility_from_json(const nlohmann::json &j, const std::string &path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    Susceptibility s;
    if (j.contains("G")) {
        const auto &g = j.at("G");
        if (!g.is_array() || g.size() != 3) throw ConfigError(path + ".G", "expected 3 rows (nu_A, nu_B, J)");
        for (size_t r = 0; r < 3; ++r) {
            const std::string p = path + ".G[" + std::to_string(r) + "]";
            if (!g[r].is_array() || g[r].size() != 2) throw ConfigError(p, "expected 2 columns (E_A, E_B)");
            for (size_t c = 0; c < 2; ++c) s.G[r][c] = chi_value(g[r][c], p + "[" + std::to_string(c) + "]");
        }
    } else {
        for (const char *k : {"chi_A", "chi_B", "kappa_A", "kappa_B"}) {
            if (!j.contains(k)) throw ConfigError(path + "." + k, "missing");
        }
        s = Susceptibility::diagonal(chi_value(j["chi_A"], path + ".chi_A"), chi_value(j["chi_B"], path + ".chi_B"),
                                     chi_value(j["kappa_A"], path + ".kappa_A"),
                                     chi_value(j["kappa_B"], path + ".kappa_B"));
    }
    s.validate();
    return s;
}

}  // namespace spincorr
