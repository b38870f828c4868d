#include "fricsym/parfam.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>

#include <fmt/core.h>

namespace fricsym::parfam {

namespace {

void monomials_rec(std::size_t inputs, std::size_t remaining, std::size_t start, std::vector<unsigned>& cur,
                   std::vector<std::vector<unsigned>>& out) {
    if (remaining == 0) {
        out.push_back(cur);
        return;
    }
    for (std::size_t i = start; i < inputs; ++i) {
        ++cur[i];
        monomials_rec(inputs, remaining - 1, i, cur, out);
        --cur[i];
    }
}

std::size_t binom(std::size_t n, std::size_t k) {
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

std::size_t monomial_count(std::size_t inputs, std::size_t degree) { return binom(inputs + degree, degree); }

double apply_base(Func f, double v) {
    switch (f) {
    case Func::Exp: return std::exp(std::clamp(v, -kExpClamp, kExpClamp));
    case Func::SqrtAbs: return std::sqrt(std::abs(v));
    case Func::Abs: return std::abs(v);
    case Func::Sign: return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    case Func::Neg: return -v;
    case Func::Square: return v * v;
    case Func::Pow: break;
    }
    return v;
}

// Monomial tables shared by every row evaluation of one structure.
struct Layout {
    struct Rational {
        std::size_t inputs;
        std::size_t offset;
        std::vector<std::vector<unsigned>> num;
        std::vector<std::vector<unsigned>> den; // without the constant monomial
        std::size_t max_degree;
    };
    std::vector<Rational> q; // inner ones, then outer

    explicit Layout(const Structure& s) {
        std::size_t off = 0;
        for (std::size_t i = 0; i <= s.base.size(); ++i) {
            Rational r;
            r.inputs = s.inputs_of(i);
            r.offset = off;
            const Degrees& d = s.degrees_of(i);
            r.num = monomials(r.inputs, d.numerator);
            r.den = monomials(r.inputs, d.denominator);
            r.den.erase(r.den.begin());
            r.max_degree = std::max(d.numerator, d.denominator);
            off += r.num.size() + r.den.size();
            q.push_back(std::move(r));
        }
    }
};

double poly(const std::vector<std::vector<unsigned>>& mons, std::span<const double> coef,
            const std::vector<std::vector<double>>& pw) {
    double acc = 0.0;
    for (std::size_t m = 0; m < mons.size(); ++m) {
        if (coef[m] == 0.0) continue;
        double term = coef[m];
        for (std::size_t i = 0; i < mons[m].size(); ++i)
            if (mons[m][i]) term *= pw[i][mons[m][i]];
        acc += term;
    }
    return acc;
}

double rational(const Layout::Rational& r, std::span<const double> theta, std::span<const double> in,
                std::vector<std::vector<double>>& pw) {
    pw.resize(r.inputs);
    for (std::size_t i = 0; i < r.inputs; ++i) {
        pw[i].assign(r.max_degree + 1, 1.0);
        for (std::size_t e = 1; e <= r.max_degree; ++e) pw[i][e] = pw[i][e - 1] * in[i];
    }
    const double num = poly(r.num, theta.subspan(r.offset, r.num.size()), pw);
    if (r.den.empty()) return num;
    const double den = 1.0 + poly(r.den, theta.subspan(r.offset + r.num.size(), r.den.size()), pw);
    return num / den;
}

double eval_with(const Structure& s, const Layout& lay, std::span<const double> theta, std::span<const double> x,
                 std::vector<double>& outer_in, std::vector<std::vector<double>>& pw) {
    const std::size_t k = s.base.size();
    outer_in.assign(x.begin(), x.end());
    for (std::size_t i = 0; i < k; ++i) outer_in.push_back(apply_base(s.base[i], rational(lay.q[i], theta, x, pw)));
    return rational(lay.q[k], theta, outer_in, pw);
}

void check_theta(const Structure& s, std::span<const double> theta) {
    if (theta.size() != s.parameter_count())
        throw Error(fmt::format("parfam: theta has {} entries, structure needs {}", theta.size(), s.parameter_count()));
}

} // namespace

std::vector<std::vector<unsigned>> monomials(std::size_t inputs, std::size_t degree) {
    std::vector<std::vector<unsigned>> out;
    std::vector<unsigned> cur(inputs, 0);
    for (std::size_t d = 0; d <= degree; ++d) monomials_rec(inputs, d, 0, cur, out);
    return out;
}

// ---- structure ----------------------------------------------------------------

void Structure::validate() const {
    if (arity == 0) throw Error("parfam: arity must be positive");
    if (inner.size() != base.size()) throw Error("parfam: need one inner rational per base function");
    for (Func f : base)
        if (f == Func::Pow) throw Error("parfam: power is not a base function");
}

std::size_t Structure::inputs_of(std::size_t q) const { return q < base.size() ? arity : arity + base.size(); }

const Degrees& Structure::degrees_of(std::size_t q) const { return q < base.size() ? inner[q] : outer; }

std::size_t Structure::offset(std::size_t q) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < q; ++i) {
        const Degrees& d = degrees_of(i);
        off += monomial_count(inputs_of(i), d.numerator) + monomial_count(inputs_of(i), d.denominator) - 1;
    }
    return off;
}

std::size_t Structure::parameter_count() const { return offset(base.size() + 1); }

std::size_t Structure::coefficient_index(std::size_t q, std::span<const unsigned> exponents, bool denominator) const {
    if (q > base.size()) throw Error("parfam: rational index out of range");
    if (exponents.size() != inputs_of(q)) throw Error("parfam: exponent vector has the wrong length");
    const Degrees& d = degrees_of(q);
    const auto num = monomials(inputs_of(q), d.numerator);
    auto find = [&](const std::vector<std::vector<unsigned>>& mons) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < mons.size(); ++i)
            if (std::equal(mons[i].begin(), mons[i].end(), exponents.begin())) return i;
        return std::nullopt;
    };
    if (!denominator) {
        if (auto i = find(num)) return offset(q) + *i;
    } else {
        auto den = monomials(inputs_of(q), d.denominator);
        den.erase(den.begin());
        if (auto i = find(den)) return offset(q) + num.size() + *i;
    }
    throw Error("parfam: monomial not present in the structure");
}

Structure Structure::friction_default(std::size_t arity) {
    Structure s;
    s.arity = arity;
    s.base = {Func::Exp, Func::SqrtAbs};
    s.inner = {{2, 0}, {2, 0}};
    s.outer = {2, 0};
    return s;
}

Structure Structure::polynomial(std::size_t arity, std::size_t degree) {
    Structure s;
    s.arity = arity;
    s.outer = {degree, 0};
    return s;
}

// ---- evaluation ---------------------------------------------------------------

std::vector<double> evaluate(const Structure& s, std::span<const double> theta, const Matrix& X) {
    s.validate();
    check_theta(s, theta);
    if (X.cols() != s.arity)
        throw Error(fmt::format("parfam: inputs have {} columns, structure expects {}", X.cols(), s.arity));
    const Layout lay(s);
    std::vector<double> out(X.rows()), row(s.arity), outer_in;
    std::vector<std::vector<double>> pw;
    for (std::size_t r = 0; r < X.rows(); ++r) {
        for (std::size_t c = 0; c < s.arity; ++c) row[c] = X(r, c);
        out[r] = eval_with(s, lay, theta, row, outer_in, pw);
    }
    return out;
}

double evaluate_row(const Structure& s, std::span<const double> theta, std::span<const double> x) {
    s.validate();
    check_theta(s, theta);
    if (x.size() != s.arity) throw Error("parfam: input row has the wrong length");
    const Layout lay(s);
    std::vector<double> outer_in;
    std::vector<std::vector<double>> pw;
    return eval_with(s, lay, theta, x, outer_in, pw);
}

double loss(const Structure& s, std::span<const double> theta, const Matrix& X, std::span<const double> y,
            double lambda) {
    if (y.size() != X.rows() || y.empty()) throw Error("parfam: data must be non-empty with one target per row");
    const auto pred = evaluate(s, theta, X);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = pred[i] - y[i];
        acc += r * r;
    }
    double l1 = 0.0;
    for (double t : theta) l1 += std::abs(t);
    const double v = acc / static_cast<double>(y.size()) + lambda * l1;
    return std::isfinite(v) ? v : numopt::kInvalid;
}

// ---- fitting ------------------------------------------------------------------

void FitConfig::validate() const {
    if (!(lambda >= 0.0)) throw Error("parfam: lambda must be >= 0");
    search.validate();
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > 0.0)) throw Error("parfam: thresholds must be positive");
        if (i > 0 && !(thresholds[i] > thresholds[i - 1])) throw Error("parfam: thresholds must be increasing");
    }
    if (restarts < 1) throw Error("parfam: restarts must be at least 1");
    if (finetune_budget < 1) throw Error("parfam: fine-tune budget must be at least 1");
    if (!(max_degradation >= 0.0)) throw Error("parfam: max degradation must be >= 0");
}

namespace {

// Precomputed evaluation over one data set.
class Problem {
public:
    Problem(const Structure& s, const Matrix& X, std::span<const double> y) : s_(s), lay_(s), X_(X), y_(y) {
        rows_.resize(X.rows());
        for (std::size_t r = 0; r < X.rows(); ++r) rows_[r] = X.row(r);
    }

    double mse(std::span<const double> theta) const {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const double d = eval_with(s_, lay_, theta, rows_[r], outer_in_, pw_) - y_[r];
            acc += d * d;
        }
        const double v = acc / static_cast<double>(rows_.size());
        return std::isfinite(v) ? v : numopt::kInvalid;
    }

private:
    const Structure& s_;
    Layout lay_;
    const Matrix& X_;
    std::span<const double> y_;
    std::vector<std::vector<double>> rows_;
    mutable std::vector<double> outer_in_;
    mutable std::vector<std::vector<double>> pw_;
};

double l1(std::span<const double> t) {
    double a = 0.0;
    for (double v : t) a += std::abs(v);
    return a;
}

std::size_t count_nonzero(std::span<const double> t) {
    return static_cast<std::size_t>(std::count_if(t.begin(), t.end(), [](double v) { return v != 0.0; }));
}

// Re-fits the free coordinates (mask true) on plain MSE; frozen ones stay zero.
std::vector<double> refit(const Problem& p, std::vector<double> theta, const std::vector<bool>& free, std::size_t budget) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (free[i])
            idx.push_back(i);
        else
            theta[i] = 0.0;
    }
    if (idx.empty()) return theta;
    std::vector<double> full = theta;
    numopt::Objective obj;
    obj.dim = idx.size();
    obj.f = [&](std::span<const double> z) {
        for (std::size_t j = 0; j < idx.size(); ++j) full[idx[j]] = z[j];
        return p.mse(full);
    };
    std::vector<double> z0(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) z0[j] = theta[idx[j]];
    if (!std::isfinite(obj(z0)) || obj(z0) >= numopt::kInvalid) return theta;
    const auto r = numopt::local_minimize(obj, z0, budget);
    for (std::size_t j = 0; j < idx.size(); ++j) theta[idx[j]] = r.x[j];
    return theta;
}

} // namespace

FitResult fit(const Matrix& X, std::span<const double> y, const Structure& s, const FitConfig& cfg) {
    s.validate();
    cfg.validate();
    if (y.empty() || X.rows() != y.size()) throw FitError("parfam: data must be non-empty with one target per row");
    if (X.cols() != s.arity)
        throw FitError(fmt::format("parfam: inputs have {} columns, structure expects {}", X.cols(), s.arity));

    // every fifth row validates pruning decisions once there is enough data
    std::vector<std::size_t> train_rows, val_rows;
    for (std::size_t r = 0; r < X.rows(); ++r) (X.rows() >= 50 && r % 5 == 4 ? val_rows : train_rows).push_back(r);
    if (val_rows.empty()) val_rows = train_rows;
    const Matrix Xt = X.select_rows(train_rows), Xv = X.select_rows(val_rows);
    std::vector<double> yt, yv;
    for (std::size_t r : train_rows) yt.push_back(y[r]);
    for (std::size_t r : val_rows) yv.push_back(y[r]);

    const Problem all(s, X, y), train(s, Xt, yt), val(s, Xv, yv);
    const std::size_t n = s.parameter_count();

    double mean = 0.0, var = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    for (double v : y) var += (v - mean) * (v - mean);
    var = std::max(var / static_cast<double>(y.size()), 1e-300);

    numopt::Objective obj;
    obj.dim = n;
    obj.f = [&](std::span<const double> t) { return train.mse(t) + cfg.lambda * l1(t); };

    // stage 1: global search
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> init(0.0, cfg.init_scale);
    FitResult res;
    std::vector<double> theta;
    double best = numopt::kInvalid;
    for (std::size_t attempt = 0; attempt < cfg.restarts; ++attempt) {
        std::vector<double> t0(n);
        for (double& v : t0) v = init(rng);
        if (obj(t0) >= numopt::kInvalid) continue;
        numopt::BasinHoppingConfig bh = cfg.search;
        bh.seed = cfg.seed * 7919 + attempt;
        bh.temperature = cfg.search.temperature * var;
        const auto r = numopt::basin_hopping(obj, t0, bh);
        if (r.f < best) {
            best = r.f;
            theta = r.x;
        }
    }
    if (theta.empty()) throw FitError("parfam: no finite starting point found");
    res.report.search_loss = best;

    // stage 2: debias, then prune along the threshold schedule
    std::vector<bool> free(n, true);
    theta = refit(train, theta, free, cfg.finetune_budget);
    double cur_val = val.mse(theta);
    for (double t : cfg.thresholds) {
        std::vector<bool> cand_free = free;
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i)
            if (cand_free[i] && std::abs(theta[i]) < t) {
                cand_free[i] = false;
                changed = true;
            }
        StageRecord rec;
        rec.threshold = t;
        if (!changed) {
            rec.nonzeros = count_nonzero(theta);
            rec.validation_mse = cur_val;
            rec.accepted = true;
            res.report.stages.push_back(rec);
            continue;
        }
        auto cand = refit(train, theta, cand_free, cfg.finetune_budget);
        const double v = val.mse(cand);
        rec.nonzeros = count_nonzero(cand);
        rec.validation_mse = v;
        rec.accepted = v <= std::max(cur_val * (1.0 + cfg.max_degradation), cur_val + 1e-8 * var);
        if (rec.accepted) {
            theta = std::move(cand);
            free = std::move(cand_free);
            cur_val = v;
        }
        res.report.stages.push_back(rec);
    }

    // final polish of the survivors on all rows
    auto polished = refit(all, theta, free, cfg.finetune_budget);
    if (all.mse(polished) <= all.mse(theta)) theta = std::move(polished);
    for (std::size_t i = 0; i < n; ++i)
        if (!free[i]) theta[i] = 0.0;

    res.report.mse = all.mse(theta);
    res.report.nonzeros = count_nonzero(theta);
    res.theta = std::move(theta);
    return res;
}

// ---- extraction ---------------------------------------------------------------

namespace {

Expr product_of(const std::vector<unsigned>& exps, const std::vector<Expr>& inputs, std::size_t from, std::size_t to) {
    std::optional<Expr> acc;
    for (std::size_t i = from; i < to; ++i) {
        if (exps[i] == 0) continue;
        Expr f = exps[i] == 1 ? inputs[i] : Expr::power(inputs[i], exps[i]);
        acc = acc ? Expr::binary(Op::Mul, *acc, f) : f;
    }
    return acc ? *acc : Expr::constant(1.0);
}

bool is_unit(const std::vector<unsigned>& exps, std::size_t from, std::size_t to) {
    for (std::size_t i = from; i < to; ++i)
        if (exps[i]) return false;
    return true;
}

struct SignedTerm {
    double coef;
    std::optional<Expr> body; // nullopt: constant term
};

Expr sum_of(const std::vector<SignedTerm>& terms) {
    std::optional<Expr> acc;
    for (const SignedTerm& t : terms) {
        const double c = std::abs(t.coef);
        Expr piece = !t.body ? Expr::constant(c) : (c == 1.0 ? *t.body : Expr::binary(Op::Mul, Expr::constant(c), *t.body));
        if (!acc)
            acc = t.coef < 0 ? (t.body ? Expr::unary(Func::Neg, piece) : Expr::constant(t.coef)) : piece;
        else
            acc = Expr::binary(t.coef < 0 ? Op::Sub : Op::Add, *acc, piece);
    }
    return acc ? *acc : Expr::constant(0.0);
}

// Polynomial over `inputs`; for the outer rational, terms sharing the same
// base-function factor are grouped as (poly in x) * g-part.
Expr polynomial_expr(const std::vector<std::vector<unsigned>>& mons, std::span<const double> coef, double tol,
                     const std::vector<Expr>& inputs, std::size_t split) {
    std::vector<std::vector<unsigned>> group_keys;
    std::vector<std::vector<SignedTerm>> groups;
    for (std::size_t m = 0; m < mons.size(); ++m) {
        if (!(std::abs(coef[m]) > tol)) continue;
        std::vector<unsigned> key(mons[m].begin() + static_cast<std::ptrdiff_t>(split), mons[m].end());
        auto it = std::find(group_keys.begin(), group_keys.end(), key);
        std::size_t gi;
        if (it == group_keys.end()) {
            gi = group_keys.size();
            group_keys.push_back(key);
            groups.emplace_back();
        } else {
            gi = static_cast<std::size_t>(it - group_keys.begin());
        }
        SignedTerm t{coef[m], std::nullopt};
        if (!is_unit(mons[m], 0, split)) t.body = product_of(mons[m], inputs, 0, split);
        groups[gi].push_back(t);
    }

    std::vector<SignedTerm> outer_terms;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<unsigned> full(split, 0);
        full.insert(full.end(), group_keys[g].begin(), group_keys[g].end());
        const bool plain = is_unit(full, split, full.size());
        if (plain) {
            outer_terms.insert(outer_terms.end(), groups[g].begin(), groups[g].end());
            continue;
        }
        const Expr gpart = product_of(full, inputs, split, full.size());
        if (groups[g].size() == 1) {
            const SignedTerm& t = groups[g].front();
            outer_terms.push_back({t.coef, t.body ? Expr::binary(Op::Mul, *t.body, gpart) : gpart});
        } else {
            outer_terms.push_back({1.0, Expr::binary(Op::Mul, sum_of(groups[g]), gpart)});
        }
    }
    return sum_of(outer_terms);
}

Expr rational_expr(const Structure& s, std::size_t q, std::span<const double> theta, double tol,
                   const std::vector<Expr>& inputs, std::size_t split) {
    const std::size_t nin = s.inputs_of(q);
    const Degrees& d = s.degrees_of(q);
    const auto num = monomials(nin, d.numerator);
    auto den = monomials(nin, d.denominator);
    den.erase(den.begin());
    const std::size_t off = s.offset(q);
    Expr top = polynomial_expr(num, theta.subspan(off, num.size()), tol, inputs, split);
    const auto dc = theta.subspan(off + num.size(), den.size());
    if (std::none_of(dc.begin(), dc.end(), [&](double c) { return std::abs(c) > tol; })) return top;
    std::vector<double> with_one(dc.size() + 1, 1.0);
    std::copy(dc.begin(), dc.end(), with_one.begin() + 1);
    den.insert(den.begin(), std::vector<unsigned>(nin, 0));
    const Expr bottom = polynomial_expr(den, with_one, tol, inputs, split);
    return Expr::binary(Op::Div, top, bottom);
}

} // namespace

Expr extract(const Structure& s, std::span<const double> theta, double zero_tol) {
    s.validate();
    check_theta(s, theta);
    std::vector<Expr> inputs;
    for (std::size_t i = 0; i < s.arity; ++i) inputs.push_back(Expr::variable(i));
    std::vector<Expr> outer_inputs = inputs;
    for (std::size_t i = 0; i < s.base.size(); ++i) {
        const Expr qi = rational_expr(s, i, theta, zero_tol, inputs, s.arity);
        outer_inputs.push_back(Expr::unary(s.base[i], qi));
    }
    return rational_expr(s, s.base.size(), theta, zero_tol, outer_inputs, s.arity);
}

// ---- json ---------------------------------------------------------------------

void to_json(nlohmann::json& j, const Degrees& d) { j = nlohmann::json::array({d.numerator, d.denominator}); }

void from_json(const nlohmann::json& j, Degrees& d) {
    d.numerator = j.at(0).get<std::size_t>();
    d.denominator = j.at(1).get<std::size_t>();
}

namespace {

Func base_named(const std::string& n) {
    if (n == "exp") return Func::Exp;
    if (n == "sqrt") return Func::SqrtAbs;
    if (n == "abs") return Func::Abs;
    if (n == "sgn" || n == "sign") return Func::Sign;
    if (n == "neg") return Func::Neg;
    if (n == "square") return Func::Square;
    throw Error(fmt::format("parfam: unknown base function '{}'", n));
}

} // namespace

void to_json(nlohmann::json& j, const Structure& s) {
    nlohmann::json base = nlohmann::json::array();
    for (Func f : s.base) base.push_back(std::string(name(f)));
    j = {{"arity", s.arity}, {"base", base}, {"inner", s.inner}, {"outer", s.outer}};
}

void from_json(const nlohmann::json& j, Structure& s) {
    s.arity = j.at("arity").get<std::size_t>();
    s.base.clear();
    for (const auto& b : j.value("base", nlohmann::json::array())) s.base.push_back(base_named(b.get<std::string>()));
    s.inner = j.value("inner", std::vector<Degrees>{});
    s.outer = j.at("outer").get<Degrees>();
    s.validate();
}

void to_json(nlohmann::json& j, const FitConfig& c) {
    j = {{"lambda", c.lambda},
         {"search", c.search},
         {"restarts", c.restarts},
         {"thresholds", c.thresholds},
         {"finetune_budget", c.finetune_budget},
         {"max_degradation", c.max_degradation},
         {"init_scale", c.init_scale},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, FitConfig& c) {
    const FitConfig d;
    c.lambda = j.value("lambda", d.lambda);
    c.search = j.contains("search") ? j.at("search").get<numopt::BasinHoppingConfig>() : d.search;
    c.restarts = j.value("restarts", d.restarts);
    c.thresholds = j.value("thresholds", d.thresholds);
    c.finetune_budget = j.value("finetune_budget", d.finetune_budget);
    c.max_degradation = j.value("max_degradation", d.max_degradation);
    c.init_scale = j.value("init_scale", d.init_scale);
    c.seed = j.value("seed", d.seed);
    c.validate();
}

} // namespace fricsym::parfam
