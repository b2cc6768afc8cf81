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

#include "spincorr/fitting.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "spincorr/errors.h"
#include "spincorr/rng.h"
#include "spincorr/units.h"

namespace spincorr {

const char *fit_variant_name(FitVariant v) {
    switch (v) {
        case FitVariant::PowerLaw:
            return "PL";
        case FitVariant::PowerLawLorentzian:
            return "PL+Lor";
        case FitVariant::PowerLawLorentzianFloor:
            return "PL+Lor+Floor";
    }
    return "?";
}

FitVariant fit_variant_from_name(const std::string &s) {
    if (s == "PL") return FitVariant::PowerLaw;
    if (s == "PL+Lor") return FitVariant::PowerLawLorentzian;
    if (s == "PL+Lor+Floor") return FitVariant::PowerLawLorentzianFloor;
    throw std::invalid_argument("unknown fit model '" + s + "' (PL, PL+Lor, PL+Lor+Floor)");
}

double model_psd(const FitParams &t, FitVariant v, double f) {
    double s = t[kA] * std::pow(f, -t[kGamma]);
    if (v != FitVariant::PowerLaw) {
        double x = 2 * std::numbers::pi * f * t[kTau0];
        s += 0.5 * t[kB] * t[kB] * t[kTau0] / (1 + x * x);
    }
    if (v == FitVariant::PowerLawLorentzianFloor) s += t[kG];
    return s;
}

FitModel::FitModel(FitVariant v) : variant(v) {
}

bool FitModel::uses(int i) const {
    switch (variant) {
        case FitVariant::PowerLaw:
            return i <= kGamma;
        case FitVariant::PowerLawLorentzian:
            return i <= kTau0;
        case FitVariant::PowerLawLorentzianFloor:
            return true;
    }
    return false;
}

bool FitModel::is_free(int i) const {
    return uses(i) && !fixed[i];
}

size_t FitModel::free_count() const {
    size_t n = 0;
    for (int i = 0; i < 5; i++) n += is_free(i);
    return n;
}

void FitModel::validate() const {
    for (int i = 0; i < 5; i++) {
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(upper[i] >= lower[i])) {
            throw std::invalid_argument("fit bounds must be finite and ordered");
        }
        if (i != kGamma && !(lower[i] > 0)) {
            throw std::invalid_argument("fit lower bounds of a, b, tau0 and g must be > 0");
        }
    }
}

namespace {

bool log_param(int i) {
    return i != kGamma;
}

double to_internal(int i, double v) {
    return log_param(i) ? std::log(v) : v;
}

double from_internal(int i, double u) {
    return log_param(i) ? std::exp(u) : u;
}

struct Point {
    double f, y, w;  // y = ln mean, w = 1 / sigma_log
};

/// Solves (a) x = b in place for a small dense system; false when singular.
bool solve(std::vector<double> a, std::vector<double> &b, size_t n) {
    for (size_t c = 0; c < n; c++) {
        size_t piv = c;
        for (size_t r = c + 1; r < n; r++) {
            if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
        }
        if (!(std::abs(a[piv * n + c]) > 1e-300)) return false;
        if (piv != c) {
            for (size_t k = 0; k < n; k++) std::swap(a[c * n + k], a[piv * n + k]);
            std::swap(b[c], b[piv]);
        }
        for (size_t r = 0; r < n; r++) {
            if (r == c) continue;
            double m = a[r * n + c] / a[c * n + c];
            if (m == 0) continue;
            for (size_t k = c; k < n; k++) a[r * n + k] -= m * a[c * n + k];
            b[r] -= m * b[c];
        }
    }
    for (size_t c = 0; c < n; c++) b[c] /= a[c * n + c];
    return true;
}

class Problem {
   public:
    Problem(std::vector<Point> pts, const FitModel &m, const FitParams &base) : pts_(std::move(pts)), m_(m), base_(base) {
        for (int i = 0; i < 5; i++) {
            if (m.is_free(i)) idx_.push_back(i);
        }
    }

    size_t dim() const {
        return idx_.size();
    }
    const std::vector<int> &idx() const {
        return idx_;
    }

    FitParams theta(const std::vector<double> &u) const {
        FitParams t = base_;
        for (size_t q = 0; q < idx_.size(); q++) t[idx_[q]] = from_internal(idx_[q], u[q]);
        return t;
    }

    double cost(const std::vector<double> &u) const {
        FitParams t = theta(u);
        double c = 0;
        for (const auto &p : pts_) {
            double r = (p.y - std::log(model_psd(t, m_.variant, p.f))) * p.w;
            c += r * r;
        }
        return c;
    }

    /// Gauss-Newton normal equations: jtj = J^T J, jtr = J^T r.
    void normal(const std::vector<double> &u, std::vector<double> &jtj, std::vector<double> &jtr) const {
        size_t n = dim();
        jtj.assign(n * n, 0);
        jtr.assign(n, 0);
        FitParams t = theta(u);
        std::vector<double> g(n);
        for (const auto &p : pts_) {
            double pl = t[kA] * std::pow(p.f, -t[kGamma]);
            double x = 2 * std::numbers::pi * p.f * t[kTau0];
            double lor = m_.variant == FitVariant::PowerLaw ? 0 : 0.5 * t[kB] * t[kB] * t[kTau0] / (1 + x * x);
            double fl = m_.variant == FitVariant::PowerLawLorentzianFloor ? t[kG] : 0;
            double model = pl + lor + fl;
            double r = (p.y - std::log(model)) * p.w;
            for (size_t q = 0; q < n; q++) {
                double dm = 0;
                switch (idx_[q]) {
                    case kA:
                        dm = pl;
                        break;
                    case kGamma:
                        dm = -std::log(p.f) * pl;
                        break;
                    case kB:
                        dm = 2 * lor;
                        break;
                    case kTau0:
                        dm = lor * (1 - x * x) / (1 + x * x);
                        break;
                    case kG:
                        dm = fl;
                        break;
                }
                g[q] = -p.w * dm / model;  // d r / d u_q
            }
            for (size_t a = 0; a < n; a++) {
                jtr[a] += g[a] * r;
                for (size_t b = 0; b < n; b++) jtj[a * n + b] += g[a] * g[b];
            }
        }
    }

   private:
    std::vector<Point> pts_;
    FitModel m_;
    FitParams base_;
    std::vector<int> idx_;
};

struct LmOutcome {
    std::vector<double> u;
    double cost;
    bool converged;
};

LmOutcome levenberg_marquardt(const Problem &pr, std::vector<double> u, const std::vector<double> &lo,
                              const std::vector<double> &hi, size_t max_iter) {
    size_t n = pr.dim();
    double cost = pr.cost(u);
    double lambda = 1e-3;
    bool converged = false;
    std::vector<double> jtj, jtr;
    for (size_t it = 0; it < max_iter && !converged; it++) {
        pr.normal(u, jtj, jtr);
        bool improved = false;
        for (int tries = 0; tries < 30 && !improved; tries++) {
            std::vector<double> a = jtj;
            for (size_t q = 0; q < n; q++) a[q * n + q] += lambda * std::max(jtj[q * n + q], 1e-12);
            std::vector<double> step(n);
            for (size_t q = 0; q < n; q++) step[q] = -jtr[q];
            if (!solve(a, step, n)) {
                lambda *= 10;
                continue;
            }
            std::vector<double> trial(n);
            double step_norm = 0, u_norm = 0;
            for (size_t q = 0; q < n; q++) {
                trial[q] = std::clamp(u[q] + step[q], lo[q], hi[q]);
                step_norm += (trial[q] - u[q]) * (trial[q] - u[q]);
                u_norm += u[q] * u[q];
            }
            double c = pr.cost(trial);
            if (c < cost) {
                double rel = (cost - c) / std::max(cost, 1e-300);
                u = trial;
                cost = c;
                lambda = std::max(lambda / 3, 1e-12);
                improved = true;
                if (rel < 1e-15 || step_norm <= 1e-24 * (1 + u_norm)) converged = true;
            } else {
                lambda *= 4;
                if (step_norm <= 1e-24 * (1 + u_norm)) {
                    converged = true;
                    break;
                }
            }
        }
        if (!improved) converged = true;
    }
    return {u, cost, converged};
}

}  // namespace

FitResult fit_psd(const PsdPosterior &spectrum, const FitModel &model, const FitParams &init, const FitOptions &opt) {
    model.validate();
    std::vector<Point> pts;
    const double z90 = 1.6448536269514722;
    for (const auto &e : spectrum.entries) {
        if (e.f < opt.f_min || e.f > opt.f_max) continue;
        if (!(e.mean > 0) || !(e.q95 > 0) || (e.flags & spectrum_flags::kDegenerate)) continue;
        double s = e.q05 > 0 ? (std::log(e.q95) - std::log(e.q05)) / (2 * z90) : std::log(e.q95 / e.mean) / z90;
        if (!(s > 0) || !std::isfinite(s)) continue;
        pts.push_back({e.f, std::log(e.mean), 1 / s});
    }
    size_t nfree = model.free_count();
    if (pts.size() < 2 * nfree) {
        throw DataError("fit_psd: " + std::to_string(pts.size()) + " usable points for " + std::to_string(nfree) +
                        " free parameters");
    }
    FitParams base = init;
    for (int i = 0; i < 5; i++) {
        if (!model.uses(i)) base[i] = i == kGamma ? 0 : (i == kTau0 ? 1 : 0);
    }
    Problem pr(pts, model, base);
    const auto &idx = pr.idx();
    std::vector<double> lo(nfree), hi(nfree), u0(nfree);
    for (size_t q = 0; q < nfree; q++) {
        int i = idx[q];
        lo[q] = to_internal(i, model.lower[i]);
        hi[q] = to_internal(i, model.upper[i]);
        u0[q] = std::clamp(to_internal(i, std::clamp(init[i], model.lower[i], model.upper[i])), lo[q], hi[q]);
    }
    Rng rng(derive_seed(opt.seed, {static_cast<uint64_t>(SeedStage::Fit)}));
    std::normal_distribution<double> nd(0.0, 1.0);
    LmOutcome best{u0, std::numeric_limits<double>::infinity(), false};
    size_t starts = std::max<size_t>(opt.starts, 1);
    for (size_t s = 0; s < starts; s++) {
        std::vector<double> u = u0;
        if (s > 0) {
            for (size_t q = 0; q < nfree; q++) {
                double spread = log_param(idx[q]) ? 0.7 : 0.3;
                u[q] = std::clamp(u0[q] + spread * nd(rng), lo[q], hi[q]);
            }
        }
        LmOutcome o = levenberg_marquardt(pr, u, lo, hi, opt.max_iterations);
        if (o.cost < best.cost) best = o;
    }
    FitResult res;
    res.variant = model.variant;
    res.theta = pr.theta(best.u);
    res.objective = best.cost;
    res.points = pts.size();
    res.starts = starts;
    res.converged = best.converged && std::isfinite(best.cost);
    std::vector<double> jtj, jtr;
    pr.normal(best.u, jtj, jtr);
    for (size_t q = 0; q < nfree; q++) {
        std::vector<double> e(nfree, 0.0);
        e[q] = 1;
        double var = std::numeric_limits<double>::infinity();
        if (solve(jtj, e, nfree) && e[q] >= 0) var = e[q];
        int i = idx[q];
        double su = std::sqrt(var);
        res.sigma[i] = log_param(i) ? res.theta[i] * su : su;
    }
    return res;
}

nlohmann::json FitResult::to_json() const {
    auto param = [&](int i, double scale, const char *unit) {
        return nlohmann::json{{"value", theta[i] / scale}, {"sigma", sigma[i] / scale}, {"unit", unit}};
    };
    nlohmann::json j = {{"model", fit_variant_name(variant)},
                        {"objective", objective},
                        {"points", points},
                        {"starts", starts},
                        {"converged", converged},
                        {"a", param(kA, 1e6, "kHz^2/Hz")},
                        {"gamma", param(kGamma, 1, "")}};
    if (variant != FitVariant::PowerLaw) {
        j["b"] = param(kB, 1e3, "kHz");
        j["tau0"] = param(kTau0, 1, "s");
    }
    if (variant == FitVariant::PowerLawLorentzianFloor) j["g"] = param(kG, 1e6, "kHz^2/Hz");
    return j;
}

std::string FitResult::caption() const {
    char buf[256];
    int n = std::snprintf(buf, sizeof buf, "a = %.4g kHz^2/Hz, gamma = %.3f", theta[kA] / 1e6, theta[kGamma]);
    std::string s(buf, static_cast<size_t>(n));
    if (variant != FitVariant::PowerLaw) {
        n = std::snprintf(buf, sizeof buf, ", b = %.4g kHz, tau0 = %.4g s", theta[kB] / 1e3, theta[kTau0]);
        s.append(buf, static_cast<size_t>(n));
    }
    if (variant == FitVariant::PowerLawLorentzianFloor) {
        n = std::snprintf(buf, sizeof buf, ", g = %.4g kHz^2/Hz", theta[kG] / 1e6);
        s.append(buf, static_cast<size_t>(n));
    }
    if (!converged) s += " (not converged)";
    return s;
}

double integrate_psd(const std::function<double(double)> &S, double f_min, double f_max, double tol) {
    if (!(f_min < f_max)) throw std::invalid_argument("integrate_psd: f_min must be < f_max");
    if (f_min < 0) throw std::domain_error("integrate_psd: f_min must be >= 0");
    using boost::math::quadrature::gauss_kronrod;
    double total = 0;
    double lo = f_min;
    if (f_min == 0) {
        double edge = std::min(f_max, 1.0);
        boost::math::quadrature::tanh_sinh<double> ts;
        total += ts.integrate([&](double f) { return f > 0 ? S(f) : 0.0; }, 0.0, edge, tol);
        lo = edge;
        if (lo >= f_max) return 2 * total;
    }
    // Log-frequency substitution, one decade per panel.
    auto g = [&](double u) {
        double f = std::exp(u);
        return S(f) * f;
    };
    double u0 = std::log(lo);
    const double panel = std::log(10.0);
    if (std::isinf(f_max)) {
        // Decade panels until three in a row add less than tol of the running total.
        int quiet = 0;
        for (int d = 0; d < 80; d++) {
            double a = u0 + d * panel;
            double part = gauss_kronrod<double, 31>::integrate(g, a, a + panel, 20, tol);
            total += part;
            quiet = std::abs(part) <= tol * std::abs(total) ? quiet + 1 : 0;
            if (quiet == 3) return 2 * total;
        }
        throw std::domain_error("integrate_psd: tail does not converge");
    }
    double u1 = std::log(f_max);
    for (double a = u0; a < u1; a += panel) {
        double b = std::min(u1, a + panel);
        total += gauss_kronrod<double, 31>::integrate(g, a, b, 20, tol);
    }
    return 2 * total;
}

double integrate_psd(const FitParams &t, FitVariant v, double f_min, double f_max, double tol) {
    bool has_pl = t[kA] > 0;
    if (has_pl && t[kGamma] >= 1 && f_min <= 0) {
        throw std::domain_error("integrate_psd: power law with gamma >= 1 diverges at f = 0");
    }
    if (std::isinf(f_max)) {
        if (has_pl && t[kGamma] <= 1) throw std::domain_error("integrate_psd: power law with gamma <= 1 diverges at f -> inf");
        if (v == FitVariant::PowerLawLorentzianFloor && t[kG] > 0) {
            throw std::domain_error("integrate_psd: white floor diverges at f -> inf");
        }
    }
    return integrate_psd([&](double f) { return model_psd(t, v, f); }, f_min, f_max, tol);
}

double integrate_psd(const PsdPosterior &post, double f_min, double f_max) {
    double s = 0;
    for (size_t k = 1; k < post.entries.size(); k++) {
        double a = std::max(post.entries[k - 1].f, f_min);
        double b = std::min(post.entries[k].f, f_max);
        if (!(b > a)) continue;
        const auto &e0 = post.entries[k - 1];
        const auto &e1 = post.entries[k];
        auto lerp = [&](double f) { return e0.mean + (e1.mean - e0.mean) * (f - e0.f) / (e1.f - e0.f); };
        s += 0.5 * (lerp(a) + lerp(b)) * (b - a);
    }
    return 2 * s;
}

double ramsey_chi(const std::function<double(double)> &S, double t, double t_int, double f_max) {
    double f0 = 1 / t_int;
    if (!(f_max > f0)) return 0;
    const double pi = std::numbers::pi;
    auto sinc2 = [&](double f) {
        double x = pi * f * t;
        double sc = x == 0 ? 1 : std::sin(x) / x;
        return sc * sc;
    };
    using boost::math::quadrature::gauss_kronrod;
    auto gk = [&](auto &&fn, double a, double b) { return gauss_kronrod<double, 31>::integrate(fn, a, b, 12, 1e-10); };
    // Smooth region f < 1/t in log panels, then one panel per sinc lobe up to 64/t; beyond
    // that sin^2 is replaced by its mean 1/2.
    const double f_lobe = 1 / t;
    const double f_osc = 64 / t;
    double i = 0;
    double lo = f0;
    double top = std::min(f_max, f_lobe);
    if (lo < top) {
        auto g = [&](double u) {
            double f = std::exp(u);
            return S(f) * sinc2(f) * f;
        };
        const double panel = std::log(10.0);
        for (double a = std::log(lo); a < std::log(top); a += panel) i += gk(g, a, std::min(std::log(top), a + panel));
        lo = top;
    }
    auto h = [&](double f) { return S(f) * sinc2(f); };
    while (lo < std::min(f_max, f_osc)) {
        double b = std::min({f_max, f_osc, (std::floor(lo * t + 1e-12) + 1) / t});
        if (b <= lo) b = std::min(f_max, lo + f_lobe);
        i += gk(h, lo, b);
        lo = b;
    }
    if (lo < f_max) {
        auto tail = [&](double f) { return S(f) / (2 * (pi * f * t) * (pi * f * t)); };
        i += 0.5 * integrate_psd(tail, lo, f_max, 1e-9);
    }
    return (2 * pi * t) * (2 * pi * t) * i;
}

T2Result t2_star(const std::function<double(double)> &S, double t_int, double f_max, const T2Options &opt) {
    if (!(t_int > 0)) throw std::invalid_argument("t2_star: t_int must be > 0");
    T2Result r;
    double lo = opt.t_floor, hi = opt.t_ceiling;
    if (ramsey_chi(S, hi, t_int, f_max) < 1) return r;
    if (ramsey_chi(S, lo, t_int, f_max) >= 1) {
        r.t2 = lo;
        r.found = true;
        return r;
    }
    while (hi / lo - 1 > opt.tol) {
        double mid = std::sqrt(lo * hi);
        if (ramsey_chi(S, mid, t_int, f_max) < 1) lo = mid;
        else hi = mid;
    }
    r.t2 = std::sqrt(lo * hi);
    r.found = true;
    return r;
}

T2Result t2_star(const FitParams &theta, FitVariant variant, double t_int, double f_max, const T2Options &opt) {
    return t2_star([&](double f) { return model_psd(theta, variant, f); }, t_int, f_max, opt);
}

nlohmann::json to_json(const FitModel &m) {
    nlohmann::json fixed = nlohmann::json::array();
    const char *names[5] = {"a", "gamma", "b", "tau0", "g"};
    for (int i = 0; i < 5; i++) {
        if (m.uses(i) && m.fixed[i]) fixed.push_back(names[i]);
    }
    return {{"model", fit_variant_name(m.variant)}, {"fixed", fixed}};
}

FitParams fit_params_from_json(const nlohmann::json &j, const std::string &path, const FitParams &fallback) {
    FitParams t = fallback;
    t[kA] = quantity_or(j, "a", Dimension::Psd, path, t[kA]);
    t[kGamma] = quantity_or(j, "gamma", Dimension::Dimensionless, path, t[kGamma]);
    t[kB] = quantity_or(j, "b", Dimension::Frequency, path, t[kB]);
    t[kTau0] = quantity_or(j, "tau0", Dimension::Time, path, t[kTau0]);
    t[kG] = quantity_or(j, "g", Dimension::Psd, path, t[kG]);
    return t;
}

FitModel fit_model_from_json(const nlohmann::json &j, const std::string &path) {
    FitModel m;
    try {
        m = FitModel(fit_variant_from_name(j.value("model", std::string("PL+Lor"))));
    } catch (const std::invalid_argument &e) {
        throw ConfigError(path + ".model", e.what());
    }
    if (j.contains("fixed")) {
        const char *names[5] = {"a", "gamma", "b", "tau0", "g"};
        for (const auto &f : j["fixed"]) {
            std::string s = f.get<std::string>();
            bool ok = false;
            for (int i = 0; i < 5; i++) {
                if (s == names[i]) {
                    m.fixed[i] = true;
                    ok = true;
                }
            }
            if (!ok) throw ConfigError(path + ".fixed", "unknown parameter '" + s + "'");
        }
    }
    return m;
}

FitResult fit_result_from_json(const nlohmann::json &j, const std::string &path) {
    FitResult r;
    try {
        r.variant = fit_variant_from_name(j.at("model").get<std::string>());
        r.objective = j.value("objective", 0.0);
        r.points = j.value("points", size_t{0});
        r.starts = j.value("starts", size_t{0});
        r.converged = j.value("converged", false);
        const char *names[5] = {"a", "gamma", "b", "tau0", "g"};
        const double scale[5] = {1e6, 1, 1e3, 1, 1e6};
        for (int i = 0; i < 5; i++) {
            if (!j.contains(names[i])) continue;
            r.theta[i] = j[names[i]].at("value").get<double>() * scale[i];
            r.sigma[i] = j[names[i]].at("sigma").get<double>() * scale[i];
        }
    } catch (const nlohmann::json::exception &e) {
        throw DataError(path + ": " + e.what());
    } catch (const std::invalid_argument &e) {
        throw DataError(path + ": " + e.what());
    }
    return r;
}

}  // namespace spincorr
