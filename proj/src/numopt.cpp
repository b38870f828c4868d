#include "fricsym/numopt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fricsym::numopt {

void Bounds::clip(std::span<double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
}

bool Bounds::contains(std::span<const double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] < lower[i] || x[i] > upper[i]) return false;
    return true;
}

double Objective::operator()(std::span<const double> x) const {
    const double v = f(x);
    return std::isfinite(v) ? std::min(v, kInvalid) : kInvalid;
}

namespace {

struct Simplex {
    std::vector<std::vector<double>> x;
    std::vector<double> f;
};

// One Nelder–Mead descent from a fresh simplex around `start`.
LocalResult descend(const Objective& obj, std::span<const double> start, double f_start, const NelderMeadOptions& o,
                    std::size_t budget) {
    const std::size_t n = start.size();
    LocalResult out;
    auto eval = [&](std::vector<double>& p) {
        if (obj.bounds) obj.bounds->clip(p);
        ++out.evaluations;
        return obj(p);
    };

    double alpha = 1.0, beta = 2.0, gamma = 0.5, delta = 0.5;
    if (n >= 2) {
        const double dn = static_cast<double>(n);
        beta = 1.0 + 2.0 / dn;
        gamma = 0.75 - 1.0 / (2.0 * dn);
        delta = 1.0 - 1.0 / dn;
    }

    Simplex s;
    s.x.assign(n + 1, std::vector<double>(start.begin(), start.end()));
    s.f.assign(n + 1, f_start);
    for (std::size_t i = 0; i < n; ++i) {
        auto& p = s.x[i + 1];
        double h = p[i] != 0.0 ? o.relative_step * std::abs(p[i]) : o.zero_step;
        if (obj.bounds && p[i] + h > obj.bounds->upper[i]) h = -h;
        p[i] += h;
        s.f[i + 1] = eval(p);
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    while (out.evaluations < budget) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.f[a] < s.f[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

        double fspread = 0.0, xspread = 0.0;
        for (std::size_t k = 0; k <= n; ++k) {
            if (k == best) continue;
            fspread = std::max(fspread, std::abs(s.f[k] - s.f[best]));
            for (std::size_t i = 0; i < n; ++i) xspread = std::max(xspread, std::abs(s.x[k][i] - s.x[best][i]));
        }
        if (fspread <= o.ftol && xspread <= o.xtol) break;
        if (xspread == 0.0) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t k = 0; k <= n; ++k)
            if (k != worst)
                for (std::size_t i = 0; i < n; ++i) centroid[i] += s.x[k][i];
        for (double& c : centroid) c /= static_cast<double>(n);

        for (std::size_t i = 0; i < n; ++i) xr[i] = centroid[i] + alpha * (centroid[i] - s.x[worst][i]);
        const double fr = eval(xr);

        if (fr < s.f[best]) {
            for (std::size_t i = 0; i < n; ++i) xe[i] = centroid[i] + beta * (xr[i] - centroid[i]);
            const double fe = eval(xe);
            if (fe < fr) {
                s.x[worst] = xe;
                s.f[worst] = fe;
            } else {
                s.x[worst] = xr;
                s.f[worst] = fr;
            }
            continue;
        }
        if (fr < s.f[second]) {
            s.x[worst] = xr;
            s.f[worst] = fr;
            continue;
        }
        const bool outside = fr < s.f[worst];
        for (std::size_t i = 0; i < n; ++i)
            xc[i] = outside ? centroid[i] + gamma * (xr[i] - centroid[i])
                            : centroid[i] - gamma * (centroid[i] - s.x[worst][i]);
        const double fc = eval(xc);
        if ((outside && fc <= fr) || (!outside && fc < s.f[worst])) {
            s.x[worst] = xc;
            s.f[worst] = fc;
            continue;
        }
        // shrink toward the best vertex
        for (std::size_t k = 0; k <= n; ++k) {
            if (k == best) continue;
            for (std::size_t i = 0; i < n; ++i) s.x[k][i] = s.x[best][i] + delta * (s.x[k][i] - s.x[best][i]);
            s.f[k] = eval(s.x[k]);
        }
    }

    const auto it = std::min_element(s.f.begin(), s.f.end());
    const auto k = static_cast<std::size_t>(it - s.f.begin());
    out.x = s.x[k];
    out.f = s.f[k];
    return out;
}

} // namespace

LocalResult nelder_mead(const Objective& obj, std::span<const double> x0, const NelderMeadOptions& o) {
    if (x0.size() != obj.dim) throw Error("start point has wrong dimension");
    std::vector<double> start(x0.begin(), x0.end());
    if (obj.bounds) obj.bounds->clip(start);

    LocalResult best;
    best.x = start;
    best.f = obj(start);
    best.evaluations = 1;
    if (obj.dim == 0) return best;

    for (std::size_t attempt = 0; attempt <= o.max_restarts && best.evaluations < o.budget; ++attempt) {
        LocalResult r = descend(obj, best.x, best.f, o, o.budget - best.evaluations);
        best.evaluations += r.evaluations;
        const bool improved = r.f < best.f - o.ftol;
        if (r.f <= best.f) {
            best.x = std::move(r.x);
            best.f = r.f;
        }
        if (!improved) break;
    }
    return best;
}

LocalResult local_minimize(const Objective& obj, std::span<const double> x0, std::size_t budget) {
    if (budget == 0) throw Error("local_minimize budget must be at least 1");
    if (obj.bounds && !obj.bounds->contains(x0)) throw Error("start point lies outside the bounds");
    const double f0 = obj.f(x0);
    if (!std::isfinite(f0) || f0 >= kInvalid) throw FitError("invalid start point");
    NelderMeadOptions o;
    o.budget = budget;
    return nelder_mead(obj, x0, o);
}

void BasinHoppingConfig::validate() const {
    if (iterations < 1) throw Error("basin hopping needs at least one iteration");
    if (!(step_size > 0.0)) throw Error("basin hopping step size must be positive");
    if (!(temperature >= 0.0)) throw Error("basin hopping temperature must be non-negative");
    if (local_budget < 1) throw Error("basin hopping local budget must be at least 1");
}

BasinHoppingResult basin_hopping(const Objective& obj, std::span<const double> x0, const BasinHoppingConfig& cfg) {
    cfg.validate();
    NelderMeadOptions o;
    o.budget = cfg.local_budget;

    LocalResult cur = local_minimize(obj, x0, cfg.local_budget);
    BasinHoppingResult res;
    res.evaluations = cur.evaluations;
    res.x = cur.x;
    res.f = cur.f;
    res.trace.push_back(res.f);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double step = cfg.step_size;
    std::size_t window_accepts = 0;
    std::vector<double> trial(obj.dim);

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        if (res.f <= cfg.stop_below) break;
        for (std::size_t i = 0; i < obj.dim; ++i) trial[i] = cur.x[i] + step * gauss(rng);
        if (obj.bounds) obj.bounds->clip(trial);

        LocalResult cand = nelder_mead(obj, trial, o);
        res.evaluations += cand.evaluations;

        bool accept = cand.f <= cur.f;
        if (!accept && cfg.temperature > 0.0 && cand.f < kInvalid)
            accept = unit(rng) < std::exp(-(cand.f - cur.f) / cfg.temperature);
        if (cand.f < res.f) {
            res.f = cand.f;
            res.x = cand.x;
        }
        if (accept) {
            cur = std::move(cand);
            ++res.accepted;
            ++window_accepts;
        }
        res.trace.push_back(res.f);

        if (cfg.adaptive_step && (it + 1) % cfg.adapt_interval == 0) {
            const double rate = static_cast<double>(window_accepts) / static_cast<double>(cfg.adapt_interval);
            step = rate > cfg.target_accept_rate ? step / 0.9 : step * 0.9;
            window_accepts = 0;
        }
    }
    return res;
}

LeastSquaresResult fit_least_squares(const ParametricModel& model, std::span<const double> theta0, const Matrix& X,
                                     std::span<const double> y, const BasinHoppingConfig& cfg,
                                     const std::optional<Bounds>& bounds) {
    if (y.empty() || X.rows() != y.size()) throw FitError("least-squares fit needs non-empty, consistent data");
    std::vector<double> pred(y.size());
    Objective obj;
    obj.dim = theta0.size();
    obj.bounds = bounds;
    obj.f = [&](std::span<const double> theta) {
        model(theta, X, pred);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = pred[i] - y[i];
            acc += r * r;
        }
        return acc / static_cast<double>(y.size());
    };
    if (!std::isfinite(obj.f(theta0))) throw FitError("model predictions are not finite at the initial parameters");
    auto r = basin_hopping(obj, theta0, cfg);
    return {std::move(r.x), r.f};
}

void to_json(nlohmann::json& j, const BasinHoppingConfig& c) {
    j = nlohmann::json{{"iterations", c.iterations},
                       {"step_size", c.step_size},
                       {"temperature", c.temperature},
                       {"local_budget", c.local_budget},
                       {"seed", c.seed},
                       {"adaptive_step", c.adaptive_step},
                       {"target_accept_rate", c.target_accept_rate},
                       {"adapt_interval", c.adapt_interval}};
    if (std::isfinite(c.stop_below)) j["stop_below"] = c.stop_below;
}

void from_json(const nlohmann::json& j, BasinHoppingConfig& c) {
    BasinHoppingConfig d;
    c.iterations = j.value("iterations", d.iterations);
    c.step_size = j.value("step_size", d.step_size);
    c.temperature = j.value("temperature", d.temperature);
    c.local_budget = j.value("local_budget", d.local_budget);
    c.seed = j.value("seed", d.seed);
    c.adaptive_step = j.value("adaptive_step", d.adaptive_step);
    c.target_accept_rate = j.value("target_accept_rate", d.target_accept_rate);
    c.adapt_interval = j.value("adapt_interval", d.adapt_interval);
    c.stop_below = j.value("stop_below", d.stop_below);
}

} // namespace fricsym::numopt
