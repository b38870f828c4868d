#include "fricsym/stribeck.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include <fmt/core.h>

namespace fricsym {

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

constexpr double kForceMax = 1e4;
constexpr double kViscousMax = 1e3;
constexpr double kVsMin = 1e-3, kVsMax = 1e3;
constexpr double kDeltaMin = 1e-2, kDeltaMax = 1e2;
constexpr std::size_t kMinPoints = 10;

// Search coordinates: forces divided by the target scale, viscous slope by
// scale / velocity scale, and logs of v_s and delta.
struct Scaling {
    double tau = 1.0;
    double vel = 1.0;

    std::vector<double> encode(const StribeckParams& p) const {
        return {p.fc / tau, p.fs / tau, p.fv * vel / tau, std::log(p.vs), std::log(p.delta)};
    }
    StribeckParams decode(std::span<const double> u) const {
        return {u[0] * tau, u[1] * tau, u[2] * tau / vel, std::exp(u[3]), std::exp(u[4])};
    }
    numopt::Bounds bounds() const {
        const double eps = 1e-9;
        return {{0.0, 0.0, 0.0, std::log(kVsMin) + eps, std::log(kDeltaMin) + eps},
                {kForceMax / tau, kForceMax / tau, kViscousMax * vel / tau, std::log(kVsMax) - eps,
                 std::log(kDeltaMax) - eps}};
    }
};

StribeckParams clamp_params(StribeckParams p) {
    p.fc = std::clamp(p.fc, 0.0, kForceMax);
    p.fs = std::clamp(p.fs, 0.0, kForceMax);
    p.fv = std::clamp(p.fv, 0.0, kViscousMax);
    p.vs = std::clamp(p.vs, kVsMin, kVsMax);
    p.delta = std::clamp(p.delta, kDeltaMin, kDeltaMax);
    return p;
}

// Least squares of tau on [sgn(v), v].
std::pair<double, double> coulomb_viscous_guess(std::span<const double> v, std::span<const double> y) {
    double ss = 0, sv = 0, vv = 0, sy = 0, vy = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double s = sgn(v[i]);
        ss += s * s;
        sv += s * v[i];
        vv += v[i] * v[i];
        sy += s * y[i];
        vy += v[i] * y[i];
    }
    const double det = ss * vv - sv * sv;
    if (std::abs(det) < 1e-300) return {0.0, 0.0};
    return {(sy * vv - sv * vy) / det, (ss * vy - sv * sy) / det};
}

StribeckFit fit_branch(std::span<const double> qdot, std::span<const double> tau, const StribeckFitConfig& cfg,
                       const std::optional<StribeckParams>& warm) {
    if (qdot.size() != tau.size()) throw FitError("qdot and tau lengths differ");

    Scaling sc;
    double sq = 0.0, vmax = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        sq += tau[i] * tau[i];
        vmax = std::max(vmax, std::abs(qdot[i]));
    }
    if (sq > 0.0) sc.tau = std::sqrt(sq / static_cast<double>(tau.size()));
    if (vmax > 0.0) sc.vel = vmax;

    Matrix X = Matrix::from_columns({std::vector<double>(qdot.begin(), qdot.end())});
    std::vector<double> y(tau.begin(), tau.end());
    for (double& v : y) v /= sc.tau;

    const numopt::ParametricModel model = [&sc](std::span<const double> u, const Matrix& x, std::span<double> out) {
        const StribeckParams p = sc.decode(u);
        const auto v = x.col(0);
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = stribeck_eval(p, v[i]) / sc.tau;
    };

    std::vector<StribeckParams> starts;
    if (warm) starts.push_back(clamp_params(*warm));
    const auto [a, b] = coulomb_viscous_guess(qdot, tau);
    std::mt19937_64 rng(cfg.seed);
    const double lo = std::log(std::max(kVsMin, sc.vel * 1e-2)), hi = std::log(std::min(kVsMax, sc.vel * 1e2));
    std::uniform_real_distribution<double> log_vs(std::min(lo, hi), std::max(lo, hi));
    std::uniform_real_distribution<double> log_delta(std::log(0.5), std::log(8.0));
    for (std::size_t k = 0; k < cfg.starts; ++k) {
        StribeckParams p{std::max(a, 0.0), std::max(a, 0.0) * 1.5, std::max(b, 0.0), std::exp(log_vs(rng)),
                         std::exp(log_delta(rng))};
        starts.push_back(clamp_params(p));
    }

    const numopt::Bounds bounds = sc.bounds();
    StribeckFit best;
    best.mse = numopt::kInvalid;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        numopt::BasinHoppingConfig bh = cfg.search;
        bh.seed = cfg.seed * 1000003 + k;
        auto u0 = sc.encode(starts[k]);
        bounds.clip(u0);
        const auto r = numopt::fit_least_squares(model, u0, X, y, bh, bounds);
        const double mse = r.mse * sc.tau * sc.tau;
        if (mse < best.mse) {
            best.mse = mse;
            best.params = sc.decode(r.theta);
        }
        if (r.mse <= cfg.search.stop_below) break;
    }
    return best;
}

} // namespace

void StribeckParams::validate() const {
    if (!std::isfinite(fc) || !std::isfinite(fs) || !std::isfinite(fv) || !std::isfinite(vs) || !std::isfinite(delta))
        throw Error("Stribeck parameters must be finite");
    if (!(vs > 0.0)) throw Error("Stribeck velocity v_s must be positive");
    if (!(delta > 0.0)) throw Error("Stribeck exponent delta_s must be positive");
}

void AsymmetricStribeck::validate() const {
    positive.validate();
    negative.validate();
}

double stribeck_eval(const StribeckParams& p, double qdot) {
    const double decay = std::exp(-std::pow(std::abs(qdot / p.vs), p.delta));
    return sgn(qdot) * (p.fc + (p.fs - p.fc) * decay) + p.fv * qdot;
}

double asymmetric_eval(const AsymmetricStribeck& m, double qdot) {
    return stribeck_eval(qdot > 0.0 ? m.positive : m.negative, qdot);
}

Expr stribeck_expr(const StribeckParams& p, std::size_t qdot_index) {
    const Expr v = Expr::variable(qdot_index);
    const Expr fc = Expr::constant(p.fc);
    const Expr decay = Expr::unary(
        Func::Exp,
        -Expr::power(Expr::unary(Func::Abs, Expr::binary(Op::Div, v, Expr::constant(p.vs))), p.delta));
    const Expr stribeck = fc + (Expr::constant(p.fs) - fc) * decay;
    return Expr::unary(Func::Sign, v) * stribeck + Expr::constant(p.fv) * v;
}

StribeckFit fit_symmetric(std::span<const double> qdot, std::span<const double> tau, const StribeckFitConfig& cfg) {
    if (qdot.size() < kMinPoints) throw FitError(fmt::format("Stribeck fit needs at least {} points", kMinPoints));
    return fit_branch(qdot, tau, cfg, std::nullopt);
}

AsymmetricFit fit_asymmetric(std::span<const double> qdot, std::span<const double> tau, const StribeckFitConfig& cfg) {
    if (qdot.size() < kMinPoints) throw FitError(fmt::format("Stribeck fit needs at least {} points", kMinPoints));
    std::vector<double> vp, tp, vn, tn;
    bool any_negative = false;
    for (std::size_t i = 0; i < qdot.size(); ++i) {
        if (qdot[i] > 0.0) {
            vp.push_back(qdot[i]);
            tp.push_back(tau[i]);
        } else {
            any_negative = any_negative || qdot[i] < 0.0;
            vn.push_back(qdot[i]);
            tn.push_back(tau[i]);
        }
    }
    if (vp.empty()) throw FitError("asymmetric fit: missing positive branch (no samples with qdot > 0)");
    if (!any_negative) throw FitError("asymmetric fit: missing negative branch (no samples with qdot < 0)");

    AsymmetricFit out;
    out.symmetric = fit_branch(qdot, tau, cfg, std::nullopt);
    const StribeckFit pos = fit_branch(vp, tp, cfg, out.symmetric.params);
    const StribeckFit neg = fit_branch(vn, tn, cfg, out.symmetric.params);
    out.model = {pos.params, neg.params};

    double acc = 0.0;
    for (std::size_t i = 0; i < qdot.size(); ++i) {
        const double r = asymmetric_eval(out.model, qdot[i]) - tau[i];
        acc += r * r;
    }
    out.mse = acc / static_cast<double>(qdot.size());
    return out;
}

void to_json(nlohmann::json& j, const StribeckParams& p) {
    j = {{"F_c", p.fc}, {"F_s", p.fs}, {"F_v", p.fv}, {"v_s", p.vs}, {"delta_s", p.delta}};
}

void from_json(const nlohmann::json& j, StribeckParams& p) {
    p.fc = j.at("F_c").get<double>();
    p.fs = j.at("F_s").get<double>();
    p.fv = j.at("F_v").get<double>();
    p.vs = j.at("v_s").get<double>();
    p.delta = j.at("delta_s").get<double>();
    p.validate();
}

void to_json(nlohmann::json& j, const AsymmetricStribeck& m) { j = {{"positive", m.positive}, {"negative", m.negative}}; }

void from_json(const nlohmann::json& j, AsymmetricStribeck& m) {
    m.positive = j.at("positive").get<StribeckParams>();
    m.negative = j.at("negative").get<StribeckParams>();
}

void to_json(nlohmann::json& j, const StribeckFitConfig& c) {
    j = {{"starts", c.starts}, {"search", c.search}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, StribeckFitConfig& c) {
    const StribeckFitConfig d;
    c.starts = j.value("starts", d.starts);
    c.search = j.contains("search") ? j.at("search").get<numopt::BasinHoppingConfig>() : d.search;
    c.seed = j.value("seed", d.seed);
}

} // namespace fricsym
