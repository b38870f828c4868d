#include "properties.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "fricsym/cli.hpp"
#include "fricsym/dataset.hpp"
#include "fricsym/expr.hpp"
#include "fricsym/gp.hpp"
#include "fricsym/numopt.hpp"
#include "fricsym/parfam.hpp"
#include "fricsym/report.hpp"
#include "fricsym/stribeck.hpp"
#include "fricsym/synth.hpp"

namespace fricsym::props {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Rng = std::mt19937_64;
using Check = std::function<bool(Rng&, std::string&)>;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
    return h;
}

void note(Outcome& o, bool ok, const std::string& what) {
    ++o.cases;
    if (ok) return;
    if (o.failures == 0) o.first_failure = what;
    ++o.failures;
}

Outcome property(const std::string& module, const std::string& name, std::size_t cases, const Check& check,
                 std::size_t allowed = 0) {
    Outcome o{module, name, 0, 0, allowed, {}};
    const std::uint64_t base = fnv1a(module + "/" + name);
    for (std::size_t i = 0; i < cases; ++i) {
        Rng rng(base + 0x9e3779b97f4a7c15ULL * i);
        std::string why;
        bool ok = false;
        try {
            ok = check(rng, why);
        } catch (const std::exception& e) {
            why += std::string(" threw: ") + e.what();
        }
        note(o, ok, fmt::format("case {}: {}", i, why));
    }
    return o;
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double normal(Rng& rng, double sd) { return std::normal_distribution<double>(0.0, sd)(rng); }
std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool close(double a, double b, double tol) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    if (std::isinf(a) || std::isinf(b)) return a == b;
    return std::abs(a - b) <= tol * std::max(1.0, std::abs(a));
}

bool finite(double v) { return std::isfinite(v); }

// ---- expr ---------------------------------------------------------------------

Expr random_formula(Rng& rng, std::size_t arity = 2) {
    return random_expr(rng, pick(rng, 1, 5), arity, FunctionSet::defaults());
}

std::vector<double> random_row(Rng& rng, std::size_t n) {
    std::vector<double> r(n);
    for (double& v : r) v = normal(rng, 1.5);
    return r;
}

std::vector<Outcome> expr_properties(std::size_t cases) {
    std::vector<Outcome> out;
    out.push_back(property("expr", "evaluation is pure", cases, [](Rng& rng, std::string& why) {
        const Expr e = random_formula(rng);
        why = format(e);
        const auto row = random_row(rng, 2);
        if (!same_bits(evaluate(e, row), evaluate(e, row))) return false;
        Matrix X(4, 2);
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 2; ++c) X(r, c) = normal(rng, 1.5);
        const auto a = evaluate(e, X), b = evaluate(e, X);
        for (std::size_t r = 0; r < 4; ++r)
            if (!same_bits(a[r], b[r])) return false;
        return true;
    }));
    out.push_back(property("expr", "simplification is sound", cases, [](Rng& rng, std::string& why) {
        const Expr e = random_formula(rng);
        const Expr s = simplify(e);
        why = format(e) + "  ->  " + format(s);
        for (int k = 0; k < 4; ++k) {
            const auto row = random_row(rng, 2);
            const double a = evaluate(e, row), b = evaluate(s, row);
            if (finite(a) && finite(b) && !close(a, b, 1e-9)) {
                why += fmt::format(" at ({}, {}): {} vs {}", row[0], row[1], a, b);
                return false;
            }
        }
        return true;
    }));
    out.push_back(property("expr", "subtree complexity never exceeds the tree's", cases, [](Rng& rng, std::string& why) {
        const Expr e = random_formula(rng);
        why = format(e);
        const std::size_t c = complexity(e);
        for (std::size_t i = 0; i < e.size(); ++i)
            if (complexity(subtree(e, i)) > c) return false;
        return true;
    }));
    out.push_back(property("expr", "parse inverts format", cases, [](Rng& rng, std::string& why) {
        const Expr e = random_formula(rng);
        const std::string text = format(e);
        why = text;
        const Expr back = parse(text);
        for (int k = 0; k < 3; ++k) {
            const auto row = random_row(rng, 2);
            if (!close(evaluate(e, row), evaluate(back, row), 1e-12)) return false;
        }
        return true;
    }));
    out.push_back(property("expr", "sign vanishes at zero and sqrt-abs is even", cases, [](Rng& rng, std::string& why) {
        static const Expr sg = Expr::unary(Func::Sign, Expr::variable(0));
        static const Expr sq = Expr::unary(Func::SqrtAbs, Expr::variable(0));
        const double x = normal(rng, 3.0) * std::pow(10.0, uniform(rng, -3, 3));
        why = fmt::format("x = {}", x);
        const double zero[] = {0.0}, negzero[] = {-0.0}, pos[] = {x}, neg[] = {-x};
        return evaluate(sg, zero) == 0.0 && evaluate(sg, negzero) == 0.0 && evaluate(sq, pos) == evaluate(sq, neg);
    }));
    return out;
}

// ---- numopt -------------------------------------------------------------------

struct Problem {
    numopt::Objective obj;
    std::vector<double> x0;
    std::shared_ptr<std::vector<std::vector<double>>> visited;
};

Problem random_problem(Rng& rng, bool force_bounds) {
    const std::size_t dim = pick(rng, 1, 3);
    const int kind = static_cast<int>(pick(rng, 0, 2));
    std::vector<double> centre(dim), weight(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        centre[i] = uniform(rng, -2, 2);
        weight[i] = uniform(rng, 0.5, 3);
    }
    Problem p;
    p.visited = std::make_shared<std::vector<std::vector<double>>>();
    p.obj.dim = dim;
    p.obj.f = [=, visited = p.visited](std::span<const double> x) {
        visited->emplace_back(x.begin(), x.end());
        double f = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - centre[i];
            if (kind == 0) f += weight[i] * d * d;
            else if (kind == 1) f += weight[i] * std::abs(d) + 0.1 * d * d;
            else f += d * d - std::cos(2 * M_PI * d) + 1.0;
        }
        return f;
    };
    std::vector<double> lo(dim, -3.0), hi(dim, 3.0);
    if (force_bounds || rng() % 10 < 7) {
        numopt::Bounds b;
        for (std::size_t i = 0; i < dim; ++i) {
            lo[i] = uniform(rng, -3, -0.5);
            hi[i] = uniform(rng, 0.5, 3);
        }
        b.lower = lo;
        b.upper = hi;
        p.obj.bounds = b;
    }
    for (std::size_t i = 0; i < dim; ++i) p.x0.push_back(uniform(rng, lo[i], hi[i]));
    return p;
}

numopt::BasinHoppingConfig random_hopping(Rng& rng) {
    numopt::BasinHoppingConfig c;
    c.iterations = pick(rng, 1, 8);
    c.step_size = uniform(rng, 0.1, 1.0);
    c.temperature = uniform(rng, 0.1, 2.0);
    c.local_budget = 150;
    c.adaptive_step = rng() % 2 == 0;
    c.adapt_interval = 3;
    c.seed = rng();
    return c;
}

std::vector<Outcome> numopt_properties(std::size_t cases) {
    std::vector<Outcome> out;
    out.push_back(property("numopt", "best-so-far trace never rises", cases, [](Rng& rng, std::string& why) {
        const Problem p = random_problem(rng, false);
        const auto r = numopt::basin_hopping(p.obj, p.x0, random_hopping(rng));
        for (std::size_t i = 1; i < r.trace.size(); ++i)
            if (r.trace[i] > r.trace[i - 1]) {
                why = fmt::format("trace[{}] = {} > {}", i, r.trace[i], r.trace[i - 1]);
                return false;
            }
        return !r.trace.empty() && r.trace.back() == r.f;
    }));
    out.push_back(property("numopt", "identical seeds give identical results", cases, [](Rng& rng, std::string&) {
        const Problem p = random_problem(rng, false);
        const auto cfg = random_hopping(rng);
        const auto a = numopt::basin_hopping(p.obj, p.x0, cfg);
        const auto b = numopt::basin_hopping(p.obj, p.x0, cfg);
        return a.x == b.x && same_bits(a.f, b.f) && a.trace == b.trace;
    }));
    out.push_back(property("numopt", "evaluated points respect the bounds", cases, [](Rng& rng, std::string& why) {
        const Problem p = random_problem(rng, true);
        numopt::basin_hopping(p.obj, p.x0, random_hopping(rng));
        for (const auto& x : *p.visited)
            if (!p.obj.bounds->contains(x)) {
                why = fmt::format("visited {}", fmt::join(x, ", "));
                return false;
            }
        return !p.visited->empty();
    }));
    out.push_back(property("numopt", "local search never worsens its start", cases, [](Rng& rng, std::string& why) {
        const Problem p = random_problem(rng, false);
        const double f0 = p.obj(p.x0);
        const auto r = numopt::local_minimize(p.obj, p.x0, pick(rng, 20, 300));
        why = fmt::format("{} -> {}", f0, r.f);
        return r.f <= f0;
    }));
    return out;
}

// ---- stribeck ------------------------------------------------------------------

StribeckParams random_law(Rng& rng, double min_delta = 0.5) {
    return {uniform(rng, 0.1, 5), uniform(rng, 0.1, 6), uniform(rng, 0, 3), uniform(rng, 0.01, 1),
            uniform(rng, min_delta, 4)};
}

std::vector<Outcome> stribeck_properties(std::size_t cases) {
    std::vector<Outcome> out;
    out.push_back(property("stribeck", "symmetric law is odd", cases, [](Rng& rng, std::string& why) {
        const auto p = random_law(rng);
        const double v = normal(rng, 2.0) * std::pow(10.0, uniform(rng, -2, 1));
        why = fmt::format("v = {}", v);
        return stribeck_eval(p, -v) == -stribeck_eval(p, v);
    }));
    out.push_back(property("stribeck", "both laws vanish at zero velocity", cases, [](Rng& rng, std::string&) {
        const AsymmetricStribeck m{random_law(rng), random_law(rng)};
        return stribeck_eval(m.positive, 0.0) == 0.0 && stribeck_eval(m.positive, -0.0) == 0.0 &&
               asymmetric_eval(m, 0.0) == 0.0 && asymmetric_eval(m, -0.0) == 0.0;
    }));
    out.push_back(property("stribeck", "Coulomb-viscous asymptote", cases, [](Rng& rng, std::string& why) {
        const auto p = random_law(rng, 1.0);
        const double v = (rng() % 2 ? 10.0 : -10.0) * p.vs;
        const double coulomb = (v > 0 ? p.fc : -p.fc) + p.fv * v;
        const double gap = std::abs(stribeck_eval(p, v) - coulomb);
        why = fmt::format("gap {}", gap);
        return gap <= (p.fs + p.fc) * std::exp(-10.0);
    }));
    out.push_back(property("stribeck", "asymmetric fit never loses to the symmetric one", cases,
                           [](Rng& rng, std::string& why) {
                               const AsymmetricStribeck law{random_law(rng), random_law(rng)};
                               std::vector<double> v, y;
                               const std::size_t per_side = pick(rng, 10, 20);
                               for (std::size_t i = 0; i < per_side; ++i) {
                                   v.push_back(uniform(rng, 0.01, 2.0));
                                   v.push_back(-uniform(rng, 0.01, 2.0));
                               }
                               for (double q : v) y.push_back(asymmetric_eval(law, q) + normal(rng, 0.05));
                               StribeckFitConfig cfg;
                               cfg.starts = 2;
                               cfg.search.iterations = 2;
                               cfg.search.local_budget = 200;
                               cfg.seed = rng();
                               const auto sym = fit_symmetric(v, y, cfg);
                               const auto asym = fit_asymmetric(v, y, cfg);
                               why = fmt::format("asymmetric {} vs symmetric {}", asym.mse, sym.mse);
                               return asym.mse <= sym.mse + 1e-9;
                           }));
    return out;
}

// ---- gp --------------------------------------------------------------------------

struct Data {
    Matrix X;
    std::vector<double> y;
};

Data random_data(Rng& rng, std::size_t rows) {
    Data d{Matrix(rows, 2), std::vector<double>(rows)};
    const Expr law = random_formula(rng);
    for (std::size_t r = 0; r < rows; ++r) {
        d.X(r, 0) = normal(rng, 1.0);
        d.X(r, 1) = normal(rng, 1.0);
        const double row[] = {d.X(r, 0), d.X(r, 1)};
        const double v = evaluate(law, row);
        d.y[r] = (finite(v) && std::abs(v) < 1e6 ? v : row[0]) + normal(rng, 0.01);
    }
    return d;
}

std::vector<Outcome> gp_properties(std::size_t cases) {
    Outcome pareto{"gp", "archive stays Pareto after every generation"};
    Outcome best{"gp", "best archive loss never rises"};
    Outcome members{"gp", "population members stay valid and within the cap"};
    Outcome ages{"gp", "age counts generations survived"};
    const auto fset = FunctionSet::defaults();
    for (std::size_t run = 0; pareto.cases < cases; ++run) {
        Rng rng(fnv1a("gp/generations") + run);
        const Data d = random_data(rng, 30);
        gp::GpConfig cfg;
        cfg.generations = 25;
        cfg.islands = 2;
        cfg.population = 12;
        cfg.tournament_size = 4;
        cfg.max_complexity = pick(rng, 10, 30);
        cfg.migration_interval = 5;
        cfg.constant_opt_budget = 40;
        cfg.seed = rng();
        cfg.threads = 1;
        double last = std::numeric_limits<double>::infinity();
        std::set<std::pair<std::string, std::size_t>> previous;
        gp::evolve(d.X, d.y, fset, cfg, [&](const gp::GenerationView& v) {
            const std::string where = fmt::format("run {} generation {}", run, v.generation);
            note(pareto, v.archive.is_pareto(), where);
            note(best, v.archive.best().loss <= last, where);
            last = v.archive.best().loss;

            bool valid = true, aged = true;
            std::set<std::pair<std::string, std::size_t>> now;
            for (const auto& island : v.islands)
                for (const auto& g : island) {
                    try {
                        validate(g.expr, 2, fset);
                    } catch (const std::exception&) {
                        valid = false;
                    }
                    valid = valid && g.complexity == complexity(g.expr) && g.complexity <= cfg.max_complexity;
                    const std::string key = format(g.expr);
                    now.emplace(key, g.age);
                    if (g.age > 0)
                        aged = aged && (v.generation == 0 ? g.age == 1 : previous.count({key, g.age - 1}) > 0);
                }
            note(members, valid, where);
            note(ages, aged, where);
            previous = std::move(now);
        });
    }
    std::vector<Outcome> out{pareto, best, members, ages};
    out.push_back(property("gp", "identical seeds give identical archives", cases, [&](Rng& rng, std::string&) {
        const Data d = random_data(rng, 20);
        gp::GpConfig cfg;
        cfg.generations = 2;
        cfg.islands = 2;
        cfg.population = 8;
        cfg.tournament_size = 3;
        cfg.constant_opt_budget = 30;
        cfg.seed = rng();
        cfg.threads = 1;
        return gp::archive_to_json(gp::evolve(d.X, d.y, fset, cfg)) ==
               gp::archive_to_json(gp::evolve(d.X, d.y, fset, cfg));
    }));
    return out;
}

// ---- parfam ----------------------------------------------------------------------

parfam::Structure random_structure(Rng& rng) {
    parfam::Structure s;
    switch (rng() % 4) {
    case 0: return parfam::Structure::polynomial(pick(rng, 1, 3), pick(rng, 1, 3));
    case 1: return parfam::Structure::friction_default(pick(rng, 1, 2));
    case 2:
        s.arity = pick(rng, 1, 2);
        s.outer = {pick(rng, 1, 2), pick(rng, 1, 2)};
        return s;
    default:
        s.arity = 2;
        s.base = {Func::Exp};
        s.inner = {{1, 0}};
        s.outer = {2, 1};
        return s;
    }
}

// Solves the normal equations of y ~ c0 + sum_j c_j x_j by Gaussian elimination.
std::vector<double> ols(const Matrix& X, const std::vector<double>& y) {
    const std::size_t p = X.cols() + 1;
    std::vector<std::vector<double>> A(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t r = 0; r < X.rows(); ++r) {
        std::vector<double> z{1.0};
        for (std::size_t c = 0; c < X.cols(); ++c) z.push_back(X(r, c));
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = 0; j < p; ++j) A[i][j] += z[i] * z[j];
            A[i][p] += z[i] * y[r];
        }
    }
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < p; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        std::swap(A[c], A[piv]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == c) continue;
            const double f = A[r][c] / A[c][c];
            for (std::size_t k = c; k <= p; ++k) A[r][k] -= f * A[c][k];
        }
    }
    std::vector<double> coef(p);
    for (std::size_t i = 0; i < p; ++i) coef[i] = A[i][p] / A[i][i];
    return coef;
}

std::vector<Outcome> parfam_properties(std::size_t cases) {
    std::vector<Outcome> out;
    out.push_back(property("parfam", "extracted formula matches the pruned parameters", cases,
                           [](Rng& rng, std::string& why) {
                               const auto s = random_structure(rng);
                               std::vector<double> theta(s.parameter_count());
                               for (double& t : theta) t = normal(rng, 0.5);
                               const double tols[] = {0.0, 1e-3, 0.05, 0.3};
                               const double tol = tols[rng() % 4];
                               auto pruned = theta;
                               for (double& t : pruned)
                                   if (std::abs(t) <= tol) t = 0.0;
                               const Expr e = parfam::extract(s, theta, tol);
                               why = format(e);
                               for (int k = 0; k < 4; ++k) {
                                   std::vector<double> row(s.arity);
                                   for (double& v : row) v = uniform(rng, -1.5, 1.5);
                                   const double a = evaluate(e, row), b = parfam::evaluate_row(s, pruned, row);
                                   if (finite(a) && finite(b) && !close(b, a, 1e-9)) return false;
                               }
                               return true;
                           }));
    out.push_back(property("parfam", "nonzero count never grows while pruning", cases, [](Rng& rng, std::string& why) {
        std::vector<double> x, y;
        const double c0 = rng() % 2 ? normal(rng, 1) : 0.0, c1 = rng() % 2 ? normal(rng, 1) : 0.0,
                     c2 = normal(rng, 1);
        for (int i = 0; i < 24; ++i) {
            x.push_back(uniform(rng, -2, 2));
            y.push_back(c0 + c1 * x.back() + c2 * x.back() * x.back() + normal(rng, 0.01));
        }
        parfam::FitConfig cfg;
        cfg.search.iterations = 2;
        cfg.search.local_budget = 150;
        cfg.finetune_budget = 150;
        cfg.seed = rng();
        const auto s = parfam::Structure::polynomial(1, 3);
        const auto r = parfam::fit(Matrix::from_columns({x}), y, s, cfg);
        std::size_t prev = s.parameter_count();
        for (const auto& st : r.report.stages) {
            if (!st.accepted) continue;
            if (st.nonzeros > prev) {
                why = fmt::format("{} after {}", st.nonzeros, prev);
                return false;
            }
            prev = st.nonzeros;
        }
        return r.report.nonzeros <= prev;
    }));
    out.push_back(property("parfam", "affine structure reproduces least squares", cases, [](Rng& rng, std::string& why) {
        const std::size_t arity = pick(rng, 1, 3), rows = pick(rng, 15, 35);
        Matrix X(rows, arity);
        std::vector<double> coef(arity + 1), y(rows);
        for (double& c : coef) c = (rng() % 2 ? 1 : -1) * uniform(rng, 0.5, 2);
        for (std::size_t r = 0; r < rows; ++r) {
            y[r] = coef[0] + normal(rng, 0.1);
            for (std::size_t c = 0; c < arity; ++c) {
                X(r, c) = normal(rng, 1);
                y[r] += coef[c + 1] * X(r, c);
            }
        }
        parfam::FitConfig cfg;
        cfg.lambda = 0.0;
        cfg.search.iterations = 2;
        cfg.search.local_budget = 2000;
        cfg.seed = rng();
        const auto r = parfam::fit(X, y, parfam::Structure::polynomial(arity, 1), cfg);
        const auto oracle = ols(X, y);
        why = fmt::format("fit [{}] oracle [{}]", fmt::join(r.theta, ", "), fmt::join(oracle, ", "));
        for (std::size_t i = 0; i < oracle.size(); ++i)
            if (!(std::abs(r.theta[i] - oracle[i]) <= 1e-6)) return false;
        return true;
    }));
    out.push_back(property("parfam", "odd monomials over velocity and its sign give odd functions", cases,
                           [](Rng& rng, std::string& why) {
                               parfam::Structure s;
                               s.arity = 2;
                               s.outer = {3, rng() % 2 ? 2u : 0u};
                               std::vector<double> theta(s.parameter_count(), 0.0);
                               for (const auto& m : parfam::monomials(2, 3)) {
                                   const std::size_t i = s.coefficient_index(0, m);
                                   if ((m[0] + m[1]) % 2 == 1) theta[i] = normal(rng, 1);
                               }
                               if (s.outer.denominator > 0)
                                   for (const auto& m : parfam::monomials(2, 2)) {
                                       if (m[0] + m[1] == 0 || (m[0] + m[1]) % 2 == 1) continue;
                                       theta[s.coefficient_index(0, m, true)] = uniform(rng, 0, 0.2);
                                   }
                               const double v = normal(rng, 1.5);
                               const double sv = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
                               const double a[] = {v, sv}, b[] = {-v, -sv};
                               const double fa = parfam::evaluate_row(s, theta, a), fb = parfam::evaluate_row(s, theta, b);
                               why = fmt::format("f({}) = {}, f(-v) = {}", v, fa, fb);
                               return close(fa, -fb, 1e-12);
                           }));
    return out;
}

// ---- dataset --------------------------------------------------------------------

json stribeck_json(const StribeckParams& p) { return {{"kind", "stribeck"}, {"params", p}}; }

std::vector<Outcome> dataset_properties(std::size_t cases) {
    std::vector<Outcome> out;
    // a 3-sigma bound fails with probability 0.27% per case; over 1000 cases
    // more than 10 such failures has probability below 1e-4
    const std::size_t allowed = cases * 10 / 1000;
    out.push_back(property(
        "dataset", "generated targets reproduce the planted law within noise", cases,
        [](Rng& rng, std::string& why) {
            const auto law = random_law(rng);
            const double sigma = uniform(rng, 0.01, 0.3);
            const json spec = {{"rate", 200},
                               {"seed", rng()},
                               {"noise_std", sigma},
                               {"profile",
                                {{"type", "sinusoid"},
                                 {"amplitude", uniform(rng, 0.2, 2)},
                                 {"frequency", uniform(rng, 0.2, 2)},
                                 {"duration", uniform(rng, 0.5, 1.5)}}},
                               {"friction", stribeck_json(law)}};
            const auto ds = synth_generate(spec);
            double mean = 0.0;
            for (const auto& s : ds.samples) mean += friction_target(s) - stribeck_eval(law, s.qdot);
            const double n = static_cast<double>(ds.samples.size());
            mean /= n;
            why = fmt::format("mean residual {} bound {}", mean, 3 * sigma / std::sqrt(n));
            return std::abs(mean) <= 3 * sigma / std::sqrt(n);
        },
        allowed));
    out.push_back(property("dataset", "friction and external torque compose to the motor torque", cases,
                           [](Rng& rng, std::string& why) {
                               JointSample s;
                               const auto draw = [&] { return normal(rng, 10) * std::pow(10.0, uniform(rng, -2, 2)); };
                               s.tau_g = draw();
                               s.tau_m = draw();
                               const double f = draw();
                               const double ext = external_torque(s, f);
                               const double back = s.tau_g - f - ext;
                               const double scale = std::abs(s.tau_g) + std::abs(s.tau_m) + std::abs(f);
                               why = fmt::format("tau_m {} rebuilt {}", s.tau_m, back);
                               return same_bits(ext, friction_target(s) - f) &&
                                      std::abs(back - s.tau_m) <= 4 * std::numeric_limits<double>::epsilon() * scale;
                           }));
    out.push_back(property("dataset", "segments cover every sample of a long enough constant run", cases,
                           [](Rng& rng, std::string& why) {
                               const double rate = 100.0, dt = 1.0 / rate;
                               const double tol = uniform(rng, 0.01, 0.1);
                               const double min_duration = (static_cast<double>(pick(rng, 3, 25)) + 0.5) * dt;
                               JointDataset ds;
                               ds.sampling_rate = rate;
                               const std::size_t movements = pick(rng, 1, 3);
                               double level = 0.0;
                               for (std::size_t m = 0; m < movements; ++m) {
                                   const std::size_t pieces = pick(rng, 1, 6);
                                   for (std::size_t p = 0; p < pieces; ++p) {
                                       level += (rng() % 2 ? 1 : -1) * (4 * tol + uniform(rng, 0, 1));
                                       const std::size_t len = pick(rng, 1, 40);
                                       for (std::size_t k = 0; k < len; ++k) {
                                           JointSample s;
                                           s.t = static_cast<double>(ds.samples.size()) * dt;
                                           s.qdot = level + uniform(rng, -0.3, 0.3) * tol;
                                           s.movement = static_cast<int>(m);
                                           ds.samples.push_back(s);
                                       }
                                   }
                               }
                               const auto& x = ds.samples;
                               const std::size_t n = x.size();
                               // brute force over every window inside one movement
                               std::vector<bool> wanted(n, false);
                               for (std::size_t a = 0; a < n; ++a) {
                                   double sum = 0, lo = x[a].qdot, hi = x[a].qdot;
                                   for (std::size_t b = a; b < n && x[b].movement == x[a].movement; ++b) {
                                       sum += x[b].qdot;
                                       lo = std::min(lo, x[b].qdot);
                                       hi = std::max(hi, x[b].qdot);
                                       const double mean = sum / static_cast<double>(b - a + 1);
                                       if (hi - mean > tol || mean - lo > tol) continue;
                                       if (static_cast<double>(b - a + 1) * dt < min_duration) continue;
                                       for (std::size_t k = a; k <= b; ++k) wanted[k] = true;
                                   }
                               }
                               std::vector<bool> covered(n, false);
                               for (const auto& seg : segment_constant_velocity(ds, tol, min_duration)) {
                                   double mean = 0;
                                   for (std::size_t k = seg.begin; k < seg.end; ++k) {
                                       covered[k] = true;
                                       mean += x[k].qdot;
                                   }
                                   mean /= static_cast<double>(seg.end - seg.begin);
                                   for (std::size_t k = seg.begin; k < seg.end; ++k)
                                       if (std::abs(x[k].qdot - mean) > tol + 1e-12) {
                                           why = "segment breaks the constancy predicate";
                                           return false;
                                       }
                               }
                               for (std::size_t k = 0; k < n; ++k)
                                   if (wanted[k] && !covered[k]) {
                                       why = fmt::format("sample {} of {} left out", k, n);
                                       return false;
                                   }
                               return true;
                           }));
    out.push_back(property("dataset", "movement split is deterministic and disjoint", cases,
                           [](Rng& rng, std::string& why) {
                               JointDataset ds;
                               const std::size_t count = pick(rng, 2, 12);
                               std::vector<int> ids;
                               for (std::size_t m = 0; m < count; ++m) ids.push_back(static_cast<int>(rng() % 1000));
                               std::sort(ids.begin(), ids.end());
                               ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
                               if (ids.size() < 2) ids = {1, 2};
                               std::size_t shortest = 1000;
                               for (int id : ids) {
                                   const std::size_t len = pick(rng, 2, 8);
                                   shortest = std::min(shortest, len);
                                   for (std::size_t k = 0; k < len; ++k) {
                                       JointSample s;
                                       s.t = 0.01 * static_cast<double>(ds.samples.size());
                                       s.qdot = normal(rng, 1);
                                       s.movement = id;
                                       ds.samples.push_back(s);
                                   }
                               }
                               const std::size_t n_train = pick(rng, 1, ids.size() - 1);
                               const std::uint64_t seed = rng();
                               const auto a = split_movements(ds, n_train, seed);
                               const auto b = split_movements(ds, n_train, seed);
                               std::set<int> train(a.train_movements.begin(), a.train_movements.end());
                               std::set<int> all = train;
                               for (int id : a.test_movements) {
                                   if (train.count(id)) {
                                       why = fmt::format("movement {} on both sides", id);
                                       return false;
                                   }
                                   all.insert(id);
                               }
                               std::map<int, std::size_t> counts;
                               for (const auto& s : a.train.samples) ++counts[*s.movement];
                               for (const auto& s : a.test.samples) ++counts[*s.movement];
                               for (const auto& [id, c] : counts)
                                   if (c != shortest) return false;
                               const auto times = [](const JointDataset& d) {
                                   std::vector<double> t;
                                   for (const auto& s : d.samples) t.push_back(s.t);
                                   return t;
                               };
                               return a.train_movements.size() == n_train &&
                                      std::vector<int>(all.begin(), all.end()) == ids &&
                                      a.train_movements == b.train_movements &&
                                      a.test_movements == b.test_movements && times(a.train) == times(b.train) &&
                                      times(a.test) == times(b.test);
                           }));
    return out;
}

// ---- cli --------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

int cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    return run_cli(args, out, err);
}

json tiny_spec(Rng& rng, const std::string& joint) {
    json spec = {{"joint_id", joint},
                 {"rate", 100},
                 {"seed", rng() % 100000},
                 {"noise_std", uniform(rng, 0, 0.1)},
                 {"profile",
                  {{"type", "constant_grid"},
                   {"count", pick(rng, 2, 5)},
                   {"hold", uniform(rng, 0.05, 0.2)},
                   {"ramp", rng() % 2 ? 0.0 : 0.05}}},
                 {"friction", stribeck_json(random_law(rng))},
                 {"gravity", {{"amplitude", uniform(rng, 0, 3)}}}};
    if (rng() % 2) spec["external"] = {{"start", 0.05}, {"end", 0.15}, {"magnitude", uniform(rng, -2, 2)}};
    return spec;
}

// Every file in `dir` apart from the manifest is listed there with its digest, and nothing else is.
bool manifest_complete(const fs::path& dir, std::string& why) {
    if (!fs::exists(dir / "manifest.json")) {
        why = "no manifest in " + dir.filename().string();
        return false;
    }
    const json m = json::parse(slurp(dir / "manifest.json"));
    std::set<std::string> listed;
    for (const auto& o : m.at("outputs")) {
        const std::string name = o.at("path").get<std::string>();
        if (!fs::exists(dir / name) || o.at("sha256") != sha256_file(dir / name)) {
            why = "stale entry " + name;
            return false;
        }
        listed.insert(name);
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name != "manifest.json" && !listed.count(name)) {
            why = "orphan " + name;
            return false;
        }
    }
    return true;
}

json stable_manifest(const fs::path& dir) {
    json m = json::parse(slurp(dir / "manifest.json"));
    m.erase("timestamp");
    m.erase("wall_clock_seconds");
    m.erase("arguments");
    for (auto& in : m.at("inputs")) in.erase("path");
    return m;
}

std::vector<Outcome> cli_properties(std::size_t cases, const fs::path& scratch) {
    Outcome determinism{"cli", "reruns give byte-identical artifacts"};
    Outcome manifests{"cli", "manifest lists every artifact and nothing else"};
    const fs::path root = scratch / "cli_props";
    fs::remove_all(root);
    fs::create_directories(root);

    for (std::size_t i = 0; i < cases; ++i) {
        Rng rng(fnv1a("cli/determinism") + i);
        const fs::path dir = root / "run";
        fs::remove_all(dir);
        fs::create_directories(dir);
        spit(dir / "spec.json", tiny_spec(rng, rng() % 2 ? "J" : "").dump());
        json model = stribeck_json(random_law(rng));
        if (rng() % 2) model["joint_id"] = "J";
        spit(dir / "model.json", model.dump());
        const std::string command = rng() % 2 ? "eval" : "external";
        const std::string seed = std::to_string(rng() % 1000);

        bool ok = true;
        std::string why;
        for (const char* side : {"a", "b"}) {
            const fs::path data = dir / (std::string("data_") + side), res = dir / (std::string("out_") + side);
            ok = ok && cli({"synth", "--spec", (dir / "spec.json").string(), "--seed", seed, "--out-dir",
                            data.string()}) == kExitOk;
            ok = ok && cli({command, "--model", (dir / "model.json").string(), "--data",
                            (data / "dataset.csv").string(), "--out-dir", res.string()}) == kExitOk;
        }
        if (!ok) why = "a command failed";
        bool complete = ok;
        for (const char* sub : {"data_a", "data_b", "out_a", "out_b"})
            complete = complete && manifest_complete(dir / sub, why);
        note(manifests, complete, fmt::format("case {}: {}", i, why));

        bool same = ok;
        for (const auto& [a, b] : {std::pair{"data_a", "data_b"}, std::pair{"out_a", "out_b"}}) {
            if (!same) break;
            for (const auto& entry : fs::directory_iterator(dir / a)) {
                const auto name = entry.path().filename();
                if (name == "manifest.json") continue;
                if (slurp(entry.path()) != slurp(dir / b / name)) {
                    same = false;
                    why = name.string() + " differs";
                }
            }
            if (stable_manifest(dir / a) != stable_manifest(dir / b)) {
                same = false;
                why = std::string("manifest of ") + a + " differs";
            }
        }
        note(determinism, same, fmt::format("case {} ({}): {}", i, command, why));
    }

    // fixtures for the exit-code contract
    const fs::path fx = root / "fixtures";
    fs::create_directories(fx);
    Rng setup(7);
    spit(fx / "p.json", tiny_spec(setup, "P").dump());
    spit(fx / "q.json", tiny_spec(setup, "Q").dump());
    cli({"synth", "--spec", (fx / "p.json").string(), "--out-dir", (fx / "p").string()});
    cli({"synth", "--spec", (fx / "q.json").string(), "--out-dir", (fx / "q").string()});
    json model = stribeck_json(random_law(setup));
    model["joint_id"] = "P";
    spit(fx / "model.json", model.dump());
    spit(fx / "broken.json", R"({"kind": "stribeck", "params": {"F_c": )");
    JointDataset tiny;
    tiny.joint_id = "P";
    for (int k = 0; k < 6; ++k) tiny.samples.push_back({0.01 * k, 0.0, 0.1 * (k + 1), 0.0, 1.0, {}, {}});
    save_dataset(tiny, fx / "tiny.csv");
    const std::string p_data = (fx / "p" / "dataset.csv").string(), q_data = (fx / "q" / "dataset.csv").string(),
                      good_model = (fx / "model.json").string();

    Outcome codes = property("cli", "exit codes follow the contract", cases, [&](Rng& rng, std::string& why) {
        const std::string out = (root / "codes").string();
        const std::string junk = fmt::format("zz{}", rng() % 100000);
        std::vector<std::string> args;
        int expected = kExitOk;
        switch (rng() % 10) {
        case 0: args = {"eval", "--model", good_model, "--data", p_data}; break;
        case 1:
            args = {"eval", "--model", good_model, "--data", (fx / (junk + ".csv")).string()};
            expected = kExitInput;
            break;
        case 2:
            args = {"eval", "--model", (fx / "broken.json").string(), "--data", p_data};
            expected = kExitInput;
            break;
        case 3:
            args = {"external", "--model", good_model, "--data", q_data};
            expected = kExitMismatch;
            break;
        case 4:
            args = {junk, "--data", p_data};
            expected = kExitInput;
            break;
        case 5:
            args = {"fit", "--data", (fx / "tiny.csv").string(), "--method", rng() % 2 ? "baseline-sym" : "baseline-asym"};
            expected = kExitFit;
            break;
        case 6: {
            std::vector<std::string> f{"qdot", "tau_g", "sgn_tau_g"};
            std::shuffle(f.begin(), f.end(), rng);
            args = {"adapt", "--model", good_model, "--data", p_data, "--features", fmt::format("{}", fmt::join(f, ","))};
            expected = kExitMismatch;
            break;
        }
        case 7: {
            json bad = tiny_spec(rng, "P");
            bad["profile"]["type"] = junk;
            spit(root / "bad_spec.json", bad.dump());
            args = {"synth", "--spec", (root / "bad_spec.json").string()};
            expected = kExitInput;
            break;
        }
        case 8:
            args = {"fit", "--data", p_data, "--method", junk};
            expected = kExitInput;
            break;
        default: args = {"external", "--model", good_model, "--data", p_data}; break;
        }
        args.push_back("--out-dir");
        args.push_back(out);
        if (rng() % 2) {
            args.push_back("--seed");
            args.push_back(std::to_string(rng() % 100));
        }
        const int code = cli(args);
        why = fmt::format("{} -> {} (expected {})", fmt::join(args, " "), code, expected);
        return code == expected;
    });
    return {determinism, manifests, codes};
}

} // namespace

std::vector<Outcome> run_module(const std::string& module, std::size_t cases, const std::string& scratch_dir) {
    if (module == "expr") return expr_properties(cases);
    if (module == "numopt") return numopt_properties(cases);
    if (module == "stribeck") return stribeck_properties(cases);
    if (module == "gp") return gp_properties(cases);
    if (module == "parfam") return parfam_properties(cases);
    if (module == "dataset") return dataset_properties(cases);
    if (module == "cli") return cli_properties(cases, scratch_dir);
    throw std::invalid_argument("unknown module " + module);
}

} // namespace fricsym::props
