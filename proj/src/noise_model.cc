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

#include "spincorr/noise_model.h"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "spincorr/errors.h"
#include "spincorr/units.h"

namespace spincorr {

using cplx = std::complex<double>;
constexpr double kTwoPi = 2 * std::numbers::pi;

double component_psd(const SpectrumComponent &c, double f) {
    f = std::abs(f);
    if (auto *p = std::get_if<PowerLaw>(&c)) {
        return p->a * std::pow(f, -p->gamma);
    }
    if (auto *l = std::get_if<Lorentzian>(&c)) {
        double x = kTwoPi * f * l->tau0;
        return 0.5 * l->b * l->b * l->tau0 / (1 + x * x);
    }
    if (auto *w = std::get_if<White>(&c)) {
        return w->g;
    }
    return 0;
}

bool is_tone(const SpectrumComponent &c) {
    return std::holds_alternative<Tone>(c);
}

void validate_component(const SpectrumComponent &c, const std::string &path) {
    auto fail = [&](const std::string &what) { throw std::invalid_argument(path + ": " + what); };
    if (auto *p = std::get_if<PowerLaw>(&c)) {
        if (!(p->a >= 0)) fail("power-law amplitude a must be >= 0");
        if (!(p->gamma >= 0 && p->gamma <= 3)) fail("power-law exponent must lie in [0, 3]");
    } else if (auto *l = std::get_if<Lorentzian>(&c)) {
        if (!(l->tau0 > 0)) fail("Lorentzian tau0 must be > 0");
        if (!std::isfinite(l->b)) fail("Lorentzian b must be finite");
    } else if (auto *w = std::get_if<White>(&c)) {
        if (!(w->g >= 0)) fail("white level g must be >= 0");
    } else if (auto *t = std::get_if<Tone>(&c)) {
        if (!std::isfinite(t->amp) || !(t->f0 >= 0)) fail("tone needs finite amp and f0 >= 0");
    }
}

void NoiseModel::add_private(size_t channel, SpectrumComponent c) {
    if (channel >= channels) {
        throw std::out_of_range("NoiseModel::add_private: channel out of range");
    }
    private_components[channel].push_back(std::move(c));
}

void NoiseModel::add_shared(SpectrumComponent c, std::vector<double> coupling) {
    if (coupling.size() != channels) {
        throw std::invalid_argument("NoiseModel::add_shared: coupling vector size != channels");
    }
    shared.push_back({std::move(c), std::move(coupling)});
}

void NoiseModel::add_fluctuator(double tau0, std::vector<double> shift, uint64_t stream) {
    if (shift.size() != channels) {
        throw std::invalid_argument("NoiseModel::add_fluctuator: shift vector size != channels");
    }
    fluctuators.push_back({tau0, std::move(shift), stream});
}

bool NoiseModel::has_tones() const {
    for (const auto &list : private_components) {
        for (const auto &c : list) {
            if (is_tone(c)) return true;
        }
    }
    for (const auto &s : shared) {
        if (is_tone(s.component)) return true;
    }
    return false;
}

void NoiseModel::validate() const {
    if (private_components.size() != channels) {
        throw std::invalid_argument("noise: private component lists do not match channel count");
    }
    for (size_t i = 0; i < channels; i++) {
        for (size_t k = 0; k < private_components[i].size(); k++) {
            validate_component(private_components[i][k],
                               "noise.private[" + std::to_string(i) + "][" + std::to_string(k) + "]");
        }
    }
    for (size_t k = 0; k < shared.size(); k++) {
        std::string p = "noise.shared[" + std::to_string(k) + "]";
        validate_component(shared[k].component, p);
        if (shared[k].coupling.size() != channels) {
            throw std::invalid_argument(p + ": coupling size != channels");
        }
    }
    for (size_t k = 0; k < fluctuators.size(); k++) {
        std::string p = "noise.fluctuators[" + std::to_string(k) + "]";
        if (!(fluctuators[k].tau0 > 0)) throw std::invalid_argument(p + ": tau0 must be > 0");
        if (fluctuators[k].shift.size() != channels) throw std::invalid_argument(p + ": shift size != channels");
    }
}

namespace {

double gaussian_entry(const NoiseModel &m, size_t i, size_t j, double f) {
    double s = 0;
    if (i == j) {
        for (const auto &c : m.private_components[i]) {
            s += component_psd(c, f);
        }
    }
    for (const auto &sc : m.shared) {
        s += sc.coupling[i] * sc.coupling[j] * component_psd(sc.component, f);
    }
    return s;
}

void check_pair(const NoiseModel &m, size_t i, size_t j) {
    if (i >= m.channels || j >= m.channels) {
        throw std::out_of_range("eval_psd: channel index out of range");
    }
}

}  // namespace

cplx eval_psd(const NoiseModel &m, size_t i, size_t j, double f) {
    check_pair(m, i, j);
    if (!(f > 0)) {
        throw std::domain_error("eval_psd: frequency must be > 0");
    }
    double s = gaussian_entry(m, i, j, f);
    for (const auto &fl : m.fluctuators) {
        s += component_psd(Lorentzian{1.0, fl.tau0}, f) * fl.shift[i] * fl.shift[j];
    }
    return {s, 0.0};
}

std::vector<cplx> gaussian_spectral_matrix(const NoiseModel &m, double f) {
    size_t p = m.channels;
    std::vector<cplx> out(p * p);
    for (size_t i = 0; i < p; i++) {
        for (size_t j = 0; j < p; j++) {
            out[i * p + j] = gaussian_entry(m, i, j, f);
        }
    }
    return out;
}

cplx eval_psd_observed(const NoiseModel &m, size_t i, size_t j, double f, const Acquisition &acq) {
    check_pair(m, i, j);
    if (!(f > 0)) {
        throw std::domain_error("eval_psd_observed: frequency must be > 0");
    }
    double dts = acq.sample_dt;
    size_t K = std::max<size_t>(1, acq.average_count);
    double dtr = acq.output_dt();
    double fs = 1 / dts;
    double total = 0;
    for (size_t mi = 0; mi < K; mi++) {
        double fp = f + static_cast<double>(mi) / dtr;
        fp -= std::round(fp * dts) * fs;
        double afp = std::abs(fp);
        if (afp < 1e-12 * fs) {
            continue;
        }
        double h2 = 1;
        if (K > 1) {
            double num = std::sin(std::numbers::pi * fp * dtr);
            double den = static_cast<double>(K) * std::sin(std::numbers::pi * fp * dts);
            h2 = (num * num) / (den * den);
        }
        double s = gaussian_entry(m, i, j, afp);
        for (const auto &fl : m.fluctuators) {
            double rho = std::exp(-dts / fl.tau0);
            double var = fl.shift[i] * fl.shift[j] / 4;
            s += var * dts * (1 - rho * rho) / (1 - 2 * rho * std::cos(kTwoPi * fp * dts) + rho * rho);
        }
        total += s * h2;
    }
    return {total, 0.0};
}

std::string format_quantity(double value, const char *unit) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g %s", value, unit);
    return buf;
}

namespace {

Dimension amp_dim(NoiseUnits u) {
    return u == NoiseUnits::Rate ? Dimension::Frequency : Dimension::Field;
}
Dimension psd_dim(NoiseUnits u) {
    return u == NoiseUnits::Rate ? Dimension::Psd : Dimension::FieldPsd;
}
const char *amp_unit(NoiseUnits u) {
    return u == NoiseUnits::Rate ? "Hz" : "field-unit";
}
const char *psd_unit(NoiseUnits u) {
    return u == NoiseUnits::Rate ? "Hz^2/Hz" : "field-unit^2/Hz";
}

}  // namespace

nlohmann::json component_to_json(const SpectrumComponent &c, NoiseUnits u) {
    nlohmann::json j;
    if (auto *p = std::get_if<PowerLaw>(&c)) {
        j = {{"kind", "power_law"}, {"a", format_quantity(p->a, psd_unit(u))}, {"gamma", p->gamma}};
    } else if (auto *l = std::get_if<Lorentzian>(&c)) {
        j = {{"kind", "lorentzian"}, {"b", format_quantity(l->b, amp_unit(u))}, {"tau0", format_quantity(l->tau0, "s")}};
    } else if (auto *w = std::get_if<White>(&c)) {
        j = {{"kind", "white"}, {"g", format_quantity(w->g, psd_unit(u))}};
    } else if (auto *t = std::get_if<Tone>(&c)) {
        j = {{"kind", "tone"},
             {"amp", format_quantity(t->amp, amp_unit(u))},
             {"f0", format_quantity(t->f0, "Hz")},
             {"phase", format_quantity(t->phase, "rad")}};
    }
    return j;
}

SpectrumComponent component_from_json(const nlohmann::json &j, const std::string &path, NoiseUnits u) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
        throw ConfigError(path + ".kind", "component needs a string 'kind'");
    }
    std::string kind = j["kind"].get<std::string>();
    SpectrumComponent c;
    if (kind == "power_law") {
        c = PowerLaw{quantity_at(j, "a", psd_dim(u), path), quantity_at(j, "gamma", Dimension::Dimensionless, path)};
    } else if (kind == "lorentzian") {
        c = Lorentzian{quantity_at(j, "b", amp_dim(u), path), quantity_at(j, "tau0", Dimension::Time, path)};
    } else if (kind == "white") {
        c = White{quantity_at(j, "g", psd_dim(u), path)};
    } else if (kind == "tone") {
        c = Tone{quantity_at(j, "amp", amp_dim(u), path), quantity_at(j, "f0", Dimension::Frequency, path),
                 quantity_or(j, "phase", Dimension::Phase, path, 0.0)};
    } else {
        throw ConfigError(path + ".kind", "unknown component kind '" + kind + "'");
    }
    try {
        validate_component(c, path);
    } catch (const std::invalid_argument &e) {
        throw ConfigError(path, e.what());
    }
    return c;
}

nlohmann::json to_json(const NoiseModel &m, NoiseUnits u) {
    nlohmann::json j;
    j["channels"] = m.channels;
    j["psd_convention"] = "two-sided";
    nlohmann::json priv = nlohmann::json::array();
    for (const auto &list : m.private_components) {
        nlohmann::json l = nlohmann::json::array();
        for (const auto &c : list) {
            l.push_back(component_to_json(c, u));
        }
        priv.push_back(l);
    }
    j["private"] = priv;
    nlohmann::json sh = nlohmann::json::array();
    for (const auto &s : m.shared) {
        sh.push_back({{"component", component_to_json(s.component, u)}, {"coupling", s.coupling}});
    }
    j["shared"] = sh;
    nlohmann::json fl = nlohmann::json::array();
    for (const auto &f : m.fluctuators) {
        nlohmann::json shift = nlohmann::json::array();
        for (double s : f.shift) {
            shift.push_back(format_quantity(s, amp_unit(u)));
        }
        fl.push_back({{"tau0", format_quantity(f.tau0, "s")}, {"shift", shift}, {"stream", f.stream}});
    }
    j["fluctuators"] = fl;
    return j;
}

NoiseModel noise_model_from_json(const nlohmann::json &j, const std::string &path, NoiseUnits u) {
    if (!j.is_object() || !j.contains("channels") || !j["channels"].is_number_unsigned()) {
        throw ConfigError(path + ".channels", "expected a positive integer channel count");
    }
    NoiseModel m(j["channels"].get<size_t>());
    if (m.channels == 0) {
        throw ConfigError(path + ".channels", "channel count must be > 0");
    }
    if (j.contains("private")) {
        const auto &priv = j["private"];
        if (!priv.is_array() || priv.size() > m.channels) {
            throw ConfigError(path + ".private", "expected at most one component list per channel");
        }
        for (size_t i = 0; i < priv.size(); i++) {
            for (size_t k = 0; k < priv[i].size(); k++) {
                m.add_private(i, component_from_json(priv[i][k], path + ".private[" + std::to_string(i) + "][" +
                                                                     std::to_string(k) + "]", u));
            }
        }
    }
    if (j.contains("shared")) {
        for (size_t k = 0; k < j["shared"].size(); k++) {
            const auto &s = j["shared"][k];
            std::string p = path + ".shared[" + std::to_string(k) + "]";
            if (!s.contains("coupling") || !s["coupling"].is_array() || s["coupling"].size() != m.channels) {
                throw ConfigError(p + ".coupling", "coupling must list one weight per channel");
            }
            m.add_shared(component_from_json(s.at("component"), p + ".component", u), s["coupling"].get<std::vector<double>>());
        }
    }
    if (j.contains("fluctuators")) {
        for (size_t k = 0; k < j["fluctuators"].size(); k++) {
            const auto &f = j["fluctuators"][k];
            std::string p = path + ".fluctuators[" + std::to_string(k) + "]";
            double tau0 = quantity_at(f, "tau0", Dimension::Time, p);
            if (!(tau0 > 0)) throw ConfigError(p + ".tau0", "must be > 0");
            if (!f.contains("shift") || !f["shift"].is_array() || f["shift"].size() != m.channels) {
                throw ConfigError(p + ".shift", "shift must list one value per channel");
            }
            std::vector<double> shift;
            for (size_t c = 0; c < m.channels; c++) {
                const auto &v = f["shift"][c];
                if (!v.is_string()) throw ConfigError(p + ".shift", "shift entries need units");
                shift.push_back(parse_quantity(v.get<std::string>(), amp_dim(u), p + ".shift"));
            }
            m.add_fluctuator(tau0, std::move(shift), f.value("stream", static_cast<uint64_t>(k)));
        }
    }
    return m;
}

}  // namespace spincorr
