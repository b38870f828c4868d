#include <array>
#include <charconv>
#include <string>

#include "fricsym/expr.hpp"

namespace fricsym {

namespace {

// Binding strength used to decide parenthesization.
enum Prec { kSum = 1, kProduct = 2, kUnary = 3, kPower = 4, kAtom = 5 };

std::string number(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return std::string(buf.data(), ptr);
}

int precedence(const Expr& e) {
    switch (e.kind()) {
    case Expr::Kind::Constant: return e.value() < 0 ? kUnary : kAtom;
    case Expr::Kind::Variable: return kAtom;
    case Expr::Kind::Unary:
        if (e.func() == Func::Neg) return kUnary;
        if (e.func() == Func::Pow) return kPower;
        return kAtom;
    case Expr::Kind::Binary: return (e.op() == Op::Add || e.op() == Op::Sub) ? kSum : kProduct;
    }
    return kAtom;
}

class Printer {
public:
    explicit Printer(std::span<const std::string> names) : names_(names) {}

    std::string print(const Expr& e) {
        switch (e.kind()) {
        case Expr::Kind::Constant: return number(e.value());
        case Expr::Kind::Variable:
            if (e.index() < names_.size()) return names_[e.index()];
            return "x" + std::to_string(e.index());
        case Expr::Kind::Unary: return print_unary(e);
        case Expr::Kind::Binary: return print_binary(e);
        }
        return {};
    }

private:
    std::string wrap(const Expr& e, int min_prec) {
        std::string s = print(e);
        return precedence(e) < min_prec ? "(" + s + ")" : s;
    }

    std::string print_unary(const Expr& e) {
        const Expr& c = e.child();
        switch (e.func()) {
        case Func::Neg: return "-" + wrap(c, kPower);
        case Func::Pow: return wrap(c, kAtom) + "^" + number(e.exponent());
        default: return std::string(name(e.func())) + "(" + print(c) + ")";
        }
    }

    std::string print_binary(const Expr& e) {
        switch (e.op()) {
        case Op::Add: return print(e.left()) + " + " + wrap(e.right(), kProduct);
        case Op::Sub: return print(e.left()) + " - " + wrap(e.right(), kProduct);
        case Op::Mul: return wrap(e.left(), kProduct) + " * " + wrap(e.right(), kUnary);
        case Op::Div: return wrap(e.left(), kProduct) + " / " + wrap(e.right(), kPower);
        }
        return {};
    }

    std::span<const std::string> names_;
};

} // namespace

std::string format(const Expr& expr) { return Printer({}).print(expr); }

std::string format(const Expr& expr, std::span<const std::string> variable_names) {
    return Printer(variable_names).print(expr);
}

} // namespace fricsym
