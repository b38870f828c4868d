#include "fricsym/expr.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <fmt/core.h>

namespace fricsym {

ParseError::ParseError(std::size_t offset, const std::string& what)
    : Error(fmt::format("parse error at offset {}: {}", offset, what)), offset_(offset) {}

ArityError::ArityError(std::size_t index, std::size_t arity)
    : Error(fmt::format("variable x{} out of range for {} input column(s)", index, arity)), index_(index) {}

std::string_view name(Func f) {
    switch (f) {
    case Func::Exp: return "exp";
    case Func::SqrtAbs: return "sqrt";
    case Func::Abs: return "abs";
    case Func::Sign: return "sgn";
    case Func::Neg: return "neg";
    case Func::Square: return "square";
    case Func::Pow: return "pow";
    }
    return "?";
}

std::string_view name(Op op) {
    switch (op) {
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    }
    return "?";
}

FunctionSet FunctionSet::arithmetic() {
    FunctionSet s;
    s.exp = s.sqrt_abs = s.abs = s.sign = s.neg = s.square = false;
    s.max_int_power = 0;
    return s;
}

FunctionSet FunctionSet::permissive() {
    FunctionSet s;
    s.square = true;
    s.max_int_power = 1 << 20;
    s.real_power = true;
    s.div = true;
    return s;
}

bool FunctionSet::allows(Func f, double exponent) const {
    switch (f) {
    case Func::Exp: return exp;
    case Func::SqrtAbs: return sqrt_abs;
    case Func::Abs: return abs;
    case Func::Sign: return sign;
    case Func::Neg: return neg;
    case Func::Square: return square;
    case Func::Pow:
        if (real_power) return std::isfinite(exponent);
        return exponent == std::floor(exponent) && exponent >= 2 && exponent <= max_int_power;
    }
    return false;
}

bool FunctionSet::allows(Op op) const {
    switch (op) {
    case Op::Add: return add;
    case Op::Sub: return sub;
    case Op::Mul: return mul;
    case Op::Div: return div;
    }
    return false;
}

std::vector<Func> FunctionSet::unary_functions() const {
    std::vector<Func> out;
    for (Func f : {Func::Exp, Func::SqrtAbs, Func::Abs, Func::Sign, Func::Neg, Func::Square})
        if (allows(f)) out.push_back(f);
    if (max_int_power >= 2) out.push_back(Func::Pow);
    return out;
}

std::vector<Op> FunctionSet::binary_operators() const {
    std::vector<Op> out;
    for (Op op : {Op::Add, Op::Sub, Op::Mul, Op::Div})
        if (allows(op)) out.push_back(op);
    return out;
}

// ---------------------------------------------------------------------------

struct Expr::Node {
    Kind kind = Kind::Constant;
    double value = 0.0; // constant value or power exponent
    std::size_t index = 0;
    Func func = Func::Exp;
    Op op = Op::Add;
    std::optional<Expr> a;
    std::optional<Expr> b;
    std::size_t size = 1;
    std::size_t depth = 1;
};

namespace {
const std::shared_ptr<const Expr::Node>& zero_node() {
    static const auto node = std::make_shared<const Expr::Node>();
    return node;
}
} // namespace

Expr::Expr() : node_(zero_node()) {}

Expr Expr::constant(double value) {
    if (!std::isfinite(value)) throw Error("expression constants must be finite");
    auto n = std::make_shared<Node>();
    n->kind = Kind::Constant;
    n->value = value;
    return Expr(std::move(n));
}

Expr Expr::variable(std::size_t index) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Variable;
    n->index = index;
    return Expr(std::move(n));
}

Expr Expr::unary(Func f, Expr child) {
    if (f == Func::Pow) throw Error("use Expr::power for powers");
    auto n = std::make_shared<Node>();
    n->kind = Kind::Unary;
    n->func = f;
    n->size = child.size() + 1;
    n->depth = child.depth() + 1;
    n->a = std::move(child);
    return Expr(std::move(n));
}

Expr Expr::power(Expr base, double exponent) {
    if (!std::isfinite(exponent)) throw Error("power exponent must be finite");
    auto n = std::make_shared<Node>();
    n->kind = Kind::Unary;
    n->func = Func::Pow;
    n->value = exponent;
    n->size = base.size() + 1;
    n->depth = base.depth() + 1;
    n->a = std::move(base);
    return Expr(std::move(n));
}

Expr Expr::binary(Op op, Expr left, Expr right) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Binary;
    n->op = op;
    n->size = left.size() + right.size() + 1;
    n->depth = std::max(left.depth(), right.depth()) + 1;
    n->a = std::move(left);
    n->b = std::move(right);
    return Expr(std::move(n));
}

Expr::Kind Expr::kind() const noexcept { return node_->kind; }

double Expr::value() const {
    if (node_->kind != Kind::Constant) throw Error("not a constant");
    return node_->value;
}

std::size_t Expr::index() const {
    if (node_->kind != Kind::Variable) throw Error("not a variable");
    return node_->index;
}

Func Expr::func() const {
    if (node_->kind != Kind::Unary) throw Error("not a unary node");
    return node_->func;
}

Op Expr::op() const {
    if (node_->kind != Kind::Binary) throw Error("not a binary node");
    return node_->op;
}

double Expr::exponent() const {
    if (node_->kind != Kind::Unary || node_->func != Func::Pow) throw Error("not a power node");
    return node_->value;
}

const Expr& Expr::child() const {
    if (node_->kind != Kind::Unary) throw Error("not a unary node");
    return *node_->a;
}

const Expr& Expr::left() const {
    if (node_->kind != Kind::Binary) throw Error("not a binary node");
    return *node_->a;
}

const Expr& Expr::right() const {
    if (node_->kind != Kind::Binary) throw Error("not a binary node");
    return *node_->b;
}

std::size_t Expr::size() const noexcept { return node_->size; }
std::size_t Expr::depth() const noexcept { return node_->depth; }

bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    const auto& x = *a.node_;
    const auto& y = *b.node_;
    if (x.kind != y.kind || x.size != y.size) return false;
    switch (x.kind) {
    case Expr::Kind::Constant: return x.value == y.value;
    case Expr::Kind::Variable: return x.index == y.index;
    case Expr::Kind::Unary: return x.func == y.func && x.value == y.value && *x.a == *y.a;
    case Expr::Kind::Binary: return x.op == y.op && *x.a == *y.a && *x.b == *y.b;
    }
    return false;
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(Op::Add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(Op::Sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(Op::Mul, a, b); }
Expr operator-(const Expr& a) { return Expr::unary(Func::Neg, a); }

// ---------------------------------------------------------------------------

std::size_t required_arity(const Expr& e) {
    switch (e.kind()) {
    case Expr::Kind::Constant: return 0;
    case Expr::Kind::Variable: return e.index() + 1;
    case Expr::Kind::Unary: return required_arity(e.child());
    case Expr::Kind::Binary: return std::max(required_arity(e.left()), required_arity(e.right()));
    }
    return 0;
}

void validate(const Expr& e, std::size_t arity, const FunctionSet& fset) {
    switch (e.kind()) {
    case Expr::Kind::Constant:
        if (!std::isfinite(e.value())) throw Error("non-finite constant");
        return;
    case Expr::Kind::Variable:
        if (e.index() >= arity) throw ArityError(e.index(), arity);
        return;
    case Expr::Kind::Unary: {
        const double p = e.func() == Func::Pow ? e.exponent() : 0.0;
        if (!fset.allows(e.func(), p))
            throw Error(fmt::format("function '{}' is not in the active function set", name(e.func())));
        validate(e.child(), arity, fset);
        return;
    }
    case Expr::Kind::Binary:
        if (!fset.allows(e.op()))
            throw Error(fmt::format("operator '{}' is not in the active function set", name(e.op())));
        validate(e.left(), arity, fset);
        validate(e.right(), arity, fset);
        return;
    }
}

std::size_t complexity(const Expr& e) {
    switch (e.kind()) {
    case Expr::Kind::Constant:
    case Expr::Kind::Variable: return 1;
    case Expr::Kind::Unary: return complexity(e.child()) + (e.func() == Func::Pow ? 2 : 1);
    case Expr::Kind::Binary: {
        const bool scaled = e.op() == Op::Mul && (e.left().is_constant() || e.right().is_constant());
        return complexity(e.left()) + complexity(e.right()) + (scaled ? 0 : 1);
    }
    }
    return 0;
}

// ---------------------------------------------------------------------------

namespace {

const Expr& subtree_impl(const Expr& e, std::size_t& index) {
    if (index == 0) return e;
    --index;
    switch (e.kind()) {
    case Expr::Kind::Unary: return subtree_impl(e.child(), index);
    case Expr::Kind::Binary:
        if (index < e.left().size()) return subtree_impl(e.left(), index);
        index -= e.left().size();
        return subtree_impl(e.right(), index);
    default: break;
    }
    throw Error("subtree index out of range");
}

} // namespace

const Expr& subtree(const Expr& e, std::size_t index) {
    if (index >= e.size()) throw Error("subtree index out of range");
    return subtree_impl(e, index);
}

Expr replace_subtree(const Expr& e, std::size_t index, const Expr& replacement) {
    if (index >= e.size()) throw Error("subtree index out of range");
    if (index == 0) return replacement;
    --index;
    if (e.kind() == Expr::Kind::Unary) {
        Expr child = replace_subtree(e.child(), index, replacement);
        return e.func() == Func::Pow ? Expr::power(child, e.exponent()) : Expr::unary(e.func(), child);
    }
    if (index < e.left().size()) return Expr::binary(e.op(), replace_subtree(e.left(), index, replacement), e.right());
    return Expr::binary(e.op(), e.left(), replace_subtree(e.right(), index - e.left().size(), replacement));
}

std::size_t depth_of(const Expr& e, std::size_t index) {
    if (index >= e.size()) throw Error("subtree index out of range");
    std::size_t depth = 1;
    const Expr* cur = &e;
    while (index != 0) {
        --index;
        ++depth;
        if (cur->kind() == Expr::Kind::Unary) {
            cur = &cur->child();
        } else if (index < cur->left().size()) {
            cur = &cur->left();
        } else {
            index -= cur->left().size();
            cur = &cur->right();
        }
    }
    return depth;
}

// ---------------------------------------------------------------------------

Expr random_leaf(Rng& rng, std::size_t arity, const RandomExprOptions& options) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (arity > 0 && u(rng) < options.variable_probability) {
        std::uniform_int_distribution<std::size_t> pick(0, arity - 1);
        return Expr::variable(pick(rng));
    }
    std::normal_distribution<double> n(0.0, options.constant_scale);
    return Expr::constant(n(rng));
}

Expr random_expr(Rng& rng, std::size_t max_depth, std::size_t arity, const FunctionSet& fset,
                 const RandomExprOptions& options) {
    if (max_depth == 0) throw Error("max_depth must be at least 1");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto unary = fset.unary_functions();
    const auto binary = fset.binary_operators();
    if (max_depth == 1 || (unary.empty() && binary.empty()) || u(rng) < options.leaf_probability)
        return random_leaf(rng, arity, options);

    const bool use_unary = binary.empty() || (!unary.empty() && u(rng) < options.unary_probability);
    if (use_unary) {
        const Func f = unary[std::uniform_int_distribution<std::size_t>(0, unary.size() - 1)(rng)];
        Expr child = random_expr(rng, max_depth - 1, arity, fset, options);
        if (f == Func::Pow) {
            const int p = std::uniform_int_distribution<int>(2, fset.max_int_power)(rng);
            return Expr::power(std::move(child), p);
        }
        return Expr::unary(f, std::move(child));
    }
    const Op op = binary[std::uniform_int_distribution<std::size_t>(0, binary.size() - 1)(rng)];
    Expr l = random_expr(rng, max_depth - 1, arity, fset, options);
    Expr r = random_expr(rng, max_depth - 1, arity, fset, options);
    return Expr::binary(op, std::move(l), std::move(r));
}

} // namespace fricsym
