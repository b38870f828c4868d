#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>

#include <fmt/core.h>

#include "fricsym/expr.hpp"

namespace fricsym {

namespace {

enum class Tok { End, Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Bar };

struct Token {
    Tok kind = Tok::End;
    std::size_t offset = 0;
    std::string_view text;
    double number = 0.0;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
            ++pos_;
        Token t;
        t.offset = pos_;
        if (pos_ >= src_.size()) return t;

        const auto rest = src_.substr(pos_);
        auto single = [&](Tok k, std::size_t len) {
            t.kind = k;
            t.text = src_.substr(pos_, len);
            pos_ += len;
            return t;
        };
        // multi-byte UTF-8 operators
        if (rest.starts_with("\xC2\xB7")) return single(Tok::Star, 2);     // ·
        if (rest.starts_with("\xC3\x97")) return single(Tok::Star, 2);     // ×
        if (rest.starts_with("\xE2\x8B\x85")) return single(Tok::Star, 3); // ⋅
        if (rest.starts_with("\xE2\x88\x92")) return single(Tok::Minus, 3); // −

        const char c = src_[pos_];
        switch (c) {
        case '+': return single(Tok::Plus, 1);
        case '-': return single(Tok::Minus, 1);
        case '*': return single(Tok::Star, 1);
        case '/': return single(Tok::Slash, 1);
        case '^': return single(Tok::Caret, 1);
        case '(': return single(Tok::LParen, 1);
        case ')': return single(Tok::RParen, 1);
        case '|': return single(Tok::Bar, 1);
        default: break;
        }
        if ((c >= '0' && c <= '9') || c == '.') {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), v);
            if (ec != std::errc() || ptr == src_.data() + pos_) throw ParseError(pos_, "malformed number");
            const std::size_t len = static_cast<std::size_t>(ptr - (src_.data() + pos_));
            t = single(Tok::Number, len);
            t.number = v;
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t end = pos_;
            while (end < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_'))
                ++end;
            return single(Tok::Ident, end - pos_);
        }
        throw ParseError(pos_, fmt::format("unexpected character '{}'", c));
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
};

class Parser {
public:
    Parser(std::string_view src, std::span<const std::string> names) : lexer_(src), names_(names) { advance(); }

    Expr parse_all() {
        Expr e = parse_sum();
        if (cur_.kind != Tok::End) throw ParseError(cur_.offset, fmt::format("unexpected '{}'", cur_.text));
        return e;
    }

private:
    void advance() { cur_ = lexer_.next(); }

    void expect(Tok k, std::string_view what) {
        if (cur_.kind != k) {
            if (cur_.kind == Tok::End) throw ParseError(cur_.offset, fmt::format("expected {} before end of input", what));
            throw ParseError(cur_.offset, fmt::format("expected {}, found '{}'", what, cur_.text));
        }
        advance();
    }

    Expr parse_sum() {
        Expr lhs = parse_product();
        while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
            const Op op = cur_.kind == Tok::Plus ? Op::Add : Op::Sub;
            advance();
            lhs = Expr::binary(op, lhs, parse_product());
        }
        return lhs;
    }

    static bool starts_primary(Tok k) { return k == Tok::Number || k == Tok::Ident || k == Tok::LParen; }

    Expr parse_product() {
        Expr lhs = parse_unary();
        for (;;) {
            if (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
                const Op op = cur_.kind == Tok::Star ? Op::Mul : Op::Div;
                advance();
                lhs = Expr::binary(op, lhs, parse_unary());
            } else if (starts_primary(cur_.kind)) {
                lhs = Expr::binary(Op::Mul, lhs, parse_unary());
            } else {
                return lhs;
            }
        }
    }

    Expr parse_unary() {
        if (cur_.kind == Tok::Minus) {
            advance();
            Expr operand = parse_unary();
            if (operand.is_constant()) return Expr::constant(-operand.value());
            return Expr::unary(Func::Neg, operand);
        }
        if (cur_.kind == Tok::Plus) {
            advance();
            return parse_unary();
        }
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_primary();
        if (cur_.kind != Tok::Caret) return base;
        advance();
        double sign = 1.0;
        if (cur_.kind == Tok::Minus) {
            sign = -1.0;
            advance();
        }
        if (cur_.kind == Tok::LParen) {
            // allow a parenthesized literal exponent such as x^(2)
            advance();
            if (cur_.kind != Tok::Number) throw ParseError(cur_.offset, "exponent must be a numeric literal");
            const double p = cur_.number;
            advance();
            expect(Tok::RParen, "')'");
            return Expr::power(base, sign * p);
        }
        if (cur_.kind != Tok::Number) throw ParseError(cur_.offset, "exponent must be a numeric literal");
        const double p = cur_.number;
        advance();
        return Expr::power(base, sign * p);
    }

    Expr parse_primary() {
        const Token t = cur_;
        switch (t.kind) {
        case Tok::Number:
            advance();
            return Expr::constant(t.number);
        case Tok::LParen: {
            advance();
            Expr e = parse_sum();
            expect(Tok::RParen, "')'");
            return e;
        }
        case Tok::Bar: {
            advance();
            Expr e = parse_sum();
            expect(Tok::Bar, "closing '|'");
            return Expr::unary(Func::Abs, e);
        }
        case Tok::Ident: return parse_identifier();
        case Tok::End: throw ParseError(t.offset, "unexpected end of input");
        default: throw ParseError(t.offset, fmt::format("unexpected '{}'", t.text));
        }
    }

    static std::optional<Func> function_named(std::string_view id) {
        if (id == "exp") return Func::Exp;
        if (id == "sqrt") return Func::SqrtAbs;
        if (id == "abs") return Func::Abs;
        if (id == "sgn" || id == "sign") return Func::Sign;
        if (id == "square") return Func::Square;
        if (id == "neg") return Func::Neg;
        return std::nullopt;
    }

    std::optional<std::size_t> variable_named(std::string_view id) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == id) return i;
        if (id.size() >= 2 && id[0] == 'x') {
            std::size_t index = 0;
            auto [ptr, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), index);
            if (ec == std::errc() && ptr == id.data() + id.size()) return index;
        }
        return std::nullopt;
    }

    Expr parse_identifier() {
        const Token t = cur_;
        advance();
        if (auto f = function_named(t.text)) {
            expect(Tok::LParen, fmt::format("'(' after '{}'", t.text));
            Expr arg = parse_sum();
            expect(Tok::RParen, "')'");
            return Expr::unary(*f, arg);
        }
        if (auto v = variable_named(t.text)) return Expr::variable(*v);
        if (cur_.kind == Tok::LParen) throw ParseError(t.offset, fmt::format("unknown function '{}'", t.text));
        throw ParseError(t.offset, fmt::format("unknown identifier '{}'", t.text));
    }

    Lexer lexer_;
    std::span<const std::string> names_;
    Token cur_;
};

} // namespace

Expr parse(std::string_view text) { return parse(text, {}); }

Expr parse(std::string_view text, std::span<const std::string> variable_names) {
    Parser p(text, variable_names);
    return p.parse_all();
}

} // namespace fricsym
