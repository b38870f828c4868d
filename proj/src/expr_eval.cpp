#include <algorithm>
#include <cmath>

#include "fricsym/expr.hpp"

namespace fricsym {

namespace {

inline double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : (std::isnan(x) ? x : 0.0)); }

inline double power(double x, double e) {
    if (e == 2.0) return x * x;
    if (e == 3.0) return x * x * x;
    return std::pow(x, e);
}

inline double apply(Func f, double exponent, double x) {
    switch (f) {
    case Func::Exp: return std::exp(x);
    case Func::SqrtAbs: return std::sqrt(std::abs(x));
    case Func::Abs: return std::abs(x);
    case Func::Sign: return sign_of(x);
    case Func::Neg: return -x;
    case Func::Square: return x * x;
    case Func::Pow: return power(x, exponent);
    }
    return x;
}

inline double apply(Op op, double a, double b) {
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    }
    return a;
}

double eval_row(const Expr& e, std::span<const double> row) {
    switch (e.kind()) {
    case Expr::Kind::Constant: return e.value();
    case Expr::Kind::Variable:
        if (e.index() >= row.size()) throw ArityError(e.index(), row.size());
        return row[e.index()];
    case Expr::Kind::Unary:
        return apply(e.func(), e.func() == Func::Pow ? e.exponent() : 0.0, eval_row(e.child(), row));
    case Expr::Kind::Binary: return apply(e.op(), eval_row(e.left(), row), eval_row(e.right(), row));
    }
    return 0.0;
}

void collect(const Expr& e, std::vector<double>& out) {
    switch (e.kind()) {
    case Expr::Kind::Constant: out.push_back(e.value()); return;
    case Expr::Kind::Variable: return;
    case Expr::Kind::Unary: collect(e.child(), out); return;
    case Expr::Kind::Binary:
        collect(e.left(), out);
        collect(e.right(), out);
        return;
    }
}

Expr replace(const Expr& e, std::span<const double> c, std::size_t& next) {
    switch (e.kind()) {
    case Expr::Kind::Constant: return Expr::constant(c[next++]);
    case Expr::Kind::Variable: return e;
    case Expr::Kind::Unary: {
        Expr child = replace(e.child(), c, next);
        return e.func() == Func::Pow ? Expr::power(child, e.exponent()) : Expr::unary(e.func(), child);
    }
    case Expr::Kind::Binary: {
        Expr l = replace(e.left(), c, next);
        Expr r = replace(e.right(), c, next);
        return Expr::binary(e.op(), l, r);
    }
    }
    return e;
}

} // namespace

double evaluate(const Expr& expr, std::span<const double> row) { return eval_row(expr, row); }

std::vector<double> evaluate(const Expr& expr, const Matrix& inputs) {
    const std::size_t need = required_arity(expr);
    if (need > inputs.cols()) throw ArityError(need - 1, inputs.cols());
    CompiledExpr program(expr);
    std::vector<double> out(inputs.rows());
    program.evaluate(inputs, out);
    return out;
}

std::vector<double> collect_constants(const Expr& expr) {
    std::vector<double> out;
    collect(expr, out);
    return out;
}

Expr replace_constants(const Expr& expr, std::span<const double> constants) {
    std::size_t next = 0;
    Expr out = replace(expr, constants, next);
    if (next != constants.size()) throw Error("constant count mismatch");
    return out;
}

// ---------------------------------------------------------------------------

CompiledExpr::CompiledExpr(const Expr& expr) : source_(expr) {
    std::size_t depth = 0;
    // Post-order emission; constants get slots in left-to-right leaf order.
    auto emit = [&](auto&& self, const Expr& e) -> void {
        switch (e.kind()) {
        case Expr::Kind::Constant:
            program_.push_back({Expr::Kind::Constant, 0, static_cast<std::uint32_t>(constants_.size()), 0.0});
            constants_.push_back(e.value());
            max_stack_ = std::max(max_stack_, ++depth);
            return;
        case Expr::Kind::Variable:
            program_.push_back({Expr::Kind::Variable, 0, static_cast<std::uint32_t>(e.index()), 0.0});
            arity_ = std::max(arity_, e.index() + 1);
            max_stack_ = std::max(max_stack_, ++depth);
            return;
        case Expr::Kind::Unary:
            self(self, e.child());
            program_.push_back({Expr::Kind::Unary, static_cast<std::uint8_t>(e.func()), 0,
                                e.func() == Func::Pow ? e.exponent() : 0.0});
            return;
        case Expr::Kind::Binary:
            self(self, e.left());
            self(self, e.right());
            program_.push_back({Expr::Kind::Binary, static_cast<std::uint8_t>(e.op()), 0, 0.0});
            --depth;
            return;
        }
    };
    emit(emit, expr);
}

void CompiledExpr::evaluate(const Matrix& inputs, std::span<double> out, std::span<const double> constants) const {
    if (arity_ > inputs.cols()) throw ArityError(arity_ - 1, inputs.cols());
    if (constants.size() != constants_.size()) throw Error("constant count mismatch");
    const std::size_t n = inputs.rows();
    if (out.size() != n) throw Error("output size mismatch");

    thread_local std::vector<std::vector<double>> stack;
    if (stack.size() < max_stack_) stack.resize(max_stack_);
    for (std::size_t i = 0; i < max_stack_; ++i) stack[i].resize(n);
    std::size_t top = 0;
    for (const Instr& ins : program_) {
        switch (ins.kind) {
        case Expr::Kind::Constant: std::fill(stack[top].begin(), stack[top].end(), constants[ins.slot]); ++top; break;
        case Expr::Kind::Variable: {
            auto src = inputs.col(ins.slot);
            std::copy(src.begin(), src.end(), stack[top].begin());
            ++top;
            break;
        }
        case Expr::Kind::Unary: {
            auto& a = stack[top - 1];
            const Func f = static_cast<Func>(ins.code);
            switch (f) {
            case Func::Exp:
                for (double& v : a) v = std::exp(v);
                break;
            case Func::Neg:
                for (double& v : a) v = -v;
                break;
            case Func::Pow:
                for (double& v : a) v = power(v, ins.exponent);
                break;
            default:
                for (double& v : a) v = apply(f, ins.exponent, v);
                break;
            }
            break;
        }
        case Expr::Kind::Binary: {
            auto& a = stack[top - 2];
            const auto& b = stack[top - 1];
            switch (static_cast<Op>(ins.code)) {
            case Op::Add:
                for (std::size_t i = 0; i < n; ++i) a[i] += b[i];
                break;
            case Op::Sub:
                for (std::size_t i = 0; i < n; ++i) a[i] -= b[i];
                break;
            case Op::Mul:
                for (std::size_t i = 0; i < n; ++i) a[i] *= b[i];
                break;
            case Op::Div:
                for (std::size_t i = 0; i < n; ++i) a[i] /= b[i];
                break;
            }
            --top;
            break;
        }
        }
    }
    std::copy(stack[0].begin(), stack[0].begin() + static_cast<std::ptrdiff_t>(n), out.begin());
}

Expr CompiledExpr::rebuild(std::span<const double> constants) const { return replace_constants(source_, constants); }

} // namespace fricsym
