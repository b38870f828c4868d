#include <cmath>
#include <optional>
#include <vector>

#include "fricsym/expr.hpp"

namespace fricsym {

namespace {

bool is_const(const Expr& e, double v) { return e.is_constant() && e.value() == v; }
bool is_func(const Expr& e, Func f) { return e.kind() == Expr::Kind::Unary && e.func() == f; }

std::optional<Expr> folded(const Expr& e) {
    // Fold through the evaluator so folding matches evaluation bit for bit.
    const double v = evaluate(e, std::span<const double>{});
    if (!std::isfinite(v)) return std::nullopt;
    return Expr::constant(v);
}

Expr rewrite(const Expr& e);

Expr rewrite_unary(Func f, const Expr& c, double exponent, const Expr& original) {
    if (c.is_constant()) {
        if (auto k = folded(original)) return *k;
        return original;
    }
    switch (f) {
    case Func::Neg:
        if (is_func(c, Func::Neg)) return c.child();
        break;
    case Func::Sign:
        if (is_func(c, Func::Sign)) return c;
        if (is_func(c, Func::Neg)) return rewrite(Expr::unary(Func::Neg, Expr::unary(Func::Sign, c.child())));
        break;
    case Func::Abs:
        if (is_func(c, Func::Abs) || is_func(c, Func::SqrtAbs) || is_func(c, Func::Exp) || is_func(c, Func::Square))
            return c;
        if (is_func(c, Func::Neg)) return rewrite(Expr::unary(Func::Abs, c.child()));
        break;
    case Func::SqrtAbs:
        if (is_func(c, Func::Neg) || is_func(c, Func::Abs)) return rewrite(Expr::unary(Func::SqrtAbs, c.child()));
        break;
    case Func::Pow:
        if (exponent == 1.0) return c;
        if (exponent == 0.0) return Expr::constant(1.0);
        break;
    default: break;
    }
    return original;
}

Expr rewrite_binary(Op op, const Expr& l, const Expr& r, const Expr& original) {
    if (l.is_constant() && r.is_constant()) {
        if (auto k = folded(original)) return *k;
        return original;
    }
    switch (op) {
    case Op::Add:
        if (is_const(l, 0.0)) return r;
        if (is_const(r, 0.0)) return l;
        if (is_func(r, Func::Neg)) return rewrite(Expr::binary(Op::Sub, l, r.child()));
        if (is_func(l, Func::Neg)) return rewrite(Expr::binary(Op::Sub, r, l.child()));
        if (l == r) return Expr::binary(Op::Mul, Expr::constant(2.0), l);
        break;
    case Op::Sub:
        if (is_const(r, 0.0)) return l;
        if (is_const(l, 0.0)) return rewrite(Expr::unary(Func::Neg, r));
        if (l == r) return Expr::constant(0.0);
        if (is_func(r, Func::Neg)) return rewrite(Expr::binary(Op::Add, l, r.child()));
        break;
    case Op::Mul:
        if (is_const(l, 0.0) || is_const(r, 0.0)) return Expr::constant(0.0);
        if (is_const(l, 1.0)) return r;
        if (is_const(r, 1.0)) return l;
        if (is_const(l, -1.0)) return rewrite(Expr::unary(Func::Neg, r));
        if (is_const(r, -1.0)) return rewrite(Expr::unary(Func::Neg, l));
        if (r.is_constant()) return Expr::binary(Op::Mul, r, l);
        if (is_func(l, Func::Neg) && is_func(r, Func::Neg)) return rewrite(Expr::binary(Op::Mul, l.child(), r.child()));
        break;
    case Op::Div:
        if (is_const(r, 1.0)) return l;
        break;
    }
    return original;
}

struct Term {
    Expr expr;
    double coef;
};

void flatten_sum(const Expr& e, double sign, std::vector<Term>& terms, double& offset) {
    if (e.kind() == Expr::Kind::Binary && (e.op() == Op::Add || e.op() == Op::Sub)) {
        flatten_sum(e.left(), sign, terms, offset);
        flatten_sum(e.right(), e.op() == Op::Add ? sign : -sign, terms, offset);
        return;
    }
    if (is_func(e, Func::Neg)) return flatten_sum(e.child(), -sign, terms, offset);
    if (e.is_constant()) {
        offset += sign * e.value();
        return;
    }
    Expr body = e;
    double coef = sign;
    if (e.kind() == Expr::Kind::Binary && e.op() == Op::Mul && e.left().is_constant()) {
        coef *= e.left().value();
        body = e.right();
    }
    for (Term& t : terms)
        if (t.expr == body) {
            t.coef += coef;
            return;
        }
    terms.push_back({body, coef});
}

Expr scaled(const Term& t) {
    const double c = std::abs(t.coef);
    return c == 1.0 ? t.expr : Expr::binary(Op::Mul, Expr::constant(c), t.expr);
}

// Rebuilds a sum with like terms merged: 2*x + y + x -> 3*x + y.
Expr collect_sum(const Expr& e) {
    std::vector<Term> terms;
    double offset = 0.0;
    flatten_sum(e, 1.0, terms, offset);
    std::optional<Expr> acc;
    for (const Term& t : terms) {
        if (t.coef == 0.0 || !std::isfinite(t.coef)) {
            if (!std::isfinite(t.coef)) return e;
            continue;
        }
        if (!acc)
            acc = t.coef < 0 ? Expr::unary(Func::Neg, scaled(t)) : scaled(t);
        else
            acc = Expr::binary(t.coef < 0 ? Op::Sub : Op::Add, *acc, scaled(t));
    }
    if (!std::isfinite(offset)) return e;
    if (!acc) return Expr::constant(offset);
    if (offset != 0.0) acc = Expr::binary(offset < 0 ? Op::Sub : Op::Add, *acc, Expr::constant(std::abs(offset)));
    return *acc;
}

Expr rewrite(const Expr& e) {
    switch (e.kind()) {
    case Expr::Kind::Constant:
    case Expr::Kind::Variable: return e;
    case Expr::Kind::Unary: {
        const bool pow = e.func() == Func::Pow;
        Expr c = rewrite(e.child());
        Expr rebuilt = c == e.child() ? e : (pow ? Expr::power(c, e.exponent()) : Expr::unary(e.func(), c));
        return rewrite_unary(e.func(), c, pow ? e.exponent() : 0.0, rebuilt);
    }
    case Expr::Kind::Binary: {
        Expr l = rewrite(e.left());
        Expr r = rewrite(e.right());
        Expr rebuilt = (l == e.left() && r == e.right()) ? e : Expr::binary(e.op(), l, r);
        Expr out = rewrite_binary(e.op(), l, r, rebuilt);
        if (out.kind() == Expr::Kind::Binary && (out.op() == Op::Add || out.op() == Op::Sub)) {
            Expr collected = collect_sum(out);
            if (complexity(collected) < complexity(out)) return collected;
        }
        return out;
    }
    }
    return e;
}

} // namespace

Expr simplify(const Expr& expr) {
    Expr cur = expr;
    // A single bottom-up pass can expose new redexes higher up (e.g. after
    // folding); iterate until nothing changes.
    for (int i = 0; i < 16; ++i) {
        Expr next = rewrite(cur);
        if (next == cur) break;
        cur = std::move(next);
    }
    return cur;
}

} // namespace fricsym
