#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fricsym/error.hpp"
#include "fricsym/matrix.hpp"

namespace fricsym {

// Unary functions. SqrtAbs is the protected root sqrt(|x|); Pow carries its
// exponent on the node (integer exponents are the searchable "integer power",
// non-integer exponents only arise from parsed formulas).
enum class Func : std::uint8_t { Exp, SqrtAbs, Abs, Sign, Neg, Square, Pow };
enum class Op : std::uint8_t { Add, Sub, Mul, Div };

std::string_view name(Func f);
std::string_view name(Op op);

struct FunctionSet {
    bool exp = true;
    bool sqrt_abs = true;
    bool abs = true;
    bool sign = true;
    bool neg = true;
    bool square = false;
    int max_int_power = 4; // integer powers 2..max_int_power; < 2 disables
    bool real_power = false;

    bool add = true;
    bool sub = true;
    bool mul = true;
    bool div = false; // opt-in only

    /// exp, sqrt-abs, sign, abs, neg, integer powers with add, sub, mul.
    static FunctionSet defaults() { return {}; }
    /// add, sub, mul and nothing else.
    static FunctionSet arithmetic();
    /// Everything the parser can produce, including division and real powers.
    static FunctionSet permissive();

    bool allows(Func f, double exponent = 0.0) const;
    bool allows(Op op) const;

    /// Unary functions usable by random generation (Pow listed once).
    std::vector<Func> unary_functions() const;
    std::vector<Op> binary_operators() const;
};

/// Immutable expression tree. Copies share structure.
class Expr {
public:
    enum class Kind : std::uint8_t { Constant, Variable, Unary, Binary };

    Expr(); // Constant(0)

    static Expr constant(double value);
    static Expr variable(std::size_t index);
    static Expr unary(Func f, Expr child);
    static Expr power(Expr base, double exponent);
    static Expr binary(Op op, Expr left, Expr right);

    Kind kind() const noexcept;
    bool is_constant() const noexcept { return kind() == Kind::Constant; }
    bool is_variable() const noexcept { return kind() == Kind::Variable; }
    bool is_leaf() const noexcept { return is_constant() || is_variable(); }

    double value() const;
    std::size_t index() const;
    Func func() const;
    Op op() const;
    double exponent() const;
    const Expr& child() const;
    const Expr& left() const;
    const Expr& right() const;

    std::size_t size() const noexcept;  // node count
    std::size_t depth() const noexcept; // a leaf has depth 1

    friend bool operator==(const Expr& a, const Expr& b);

    struct Node; // opaque

private:
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

// ---- evaluation -----------------------------------------------------------

/// Row-wise evaluation. Throws ArityError when a variable index >= inputs.cols().
std::vector<double> evaluate(const Expr& expr, const Matrix& inputs);
double evaluate(const Expr& expr, std::span<const double> row);

/// Largest variable index referenced plus one (0 when there are no variables).
std::size_t required_arity(const Expr& expr);

/// Throws Error when the expression uses anything outside `fset`, references a
/// variable >= arity, or holds a non-finite constant.
void validate(const Expr& expr, std::size_t arity, const FunctionSet& fset);

/// Flattened postfix program; evaluates with substitutable constants, which is
/// what constant optimization needs.
class CompiledExpr {
public:
    explicit CompiledExpr(const Expr& expr);

    std::size_t constant_count() const noexcept { return constants_.size(); }
    const std::vector<double>& constants() const noexcept { return constants_; }
    std::size_t arity() const noexcept { return arity_; }

    void evaluate(const Matrix& inputs, std::span<double> out) const { evaluate(inputs, out, constants_); }
    void evaluate(const Matrix& inputs, std::span<double> out, std::span<const double> constants) const;

    /// Same tree shape with constants replaced (in left-to-right leaf order).
    Expr rebuild(std::span<const double> constants) const;

private:
    struct Instr {
        Expr::Kind kind;
        std::uint8_t code;
        std::uint32_t slot;
        double exponent;
    };
    Expr source_;
    std::vector<Instr> program_;
    std::vector<double> constants_;
    std::size_t arity_ = 0;
    std::size_t max_stack_ = 0;
};

std::vector<double> collect_constants(const Expr& expr);
Expr replace_constants(const Expr& expr, std::span<const double> constants);

// ---- complexity / simplification -------------------------------------------

/// Node count. Every operator, function, variable access and constant counts
/// one, with two adjustments: the exponent of a power counts as a constant
/// leaf, and a multiplication by a constant leaf (a scaled term such as
/// `14.44 * x0`) is not counted on its own.
std::size_t complexity(const Expr& expr);

Expr simplify(const Expr& expr);

// ---- text ------------------------------------------------------------------

std::string format(const Expr& expr);
std::string format(const Expr& expr, std::span<const std::string> variable_names);

/// Parses infix text: + - * / ^, `·` and `×` for products, `−` for minus,
/// |e| for abs, function calls exp sqrt abs sgn sign square, variables x0..xN
/// or names from `variable_names`. Juxtaposition multiplies.
Expr parse(std::string_view text);
Expr parse(std::string_view text, std::span<const std::string> variable_names);

// ---- tree surgery (pre-order node indices) ---------------------------------

const Expr& subtree(const Expr& expr, std::size_t index);
Expr replace_subtree(const Expr& expr, std::size_t index, const Expr& replacement);
std::size_t depth_of(const Expr& expr, std::size_t index); // depth of node `index`, root = 1

// ---- random generation -----------------------------------------------------

using Rng = std::mt19937_64;

struct RandomExprOptions {
    double leaf_probability = 0.3;     // chance of stopping early at an interior level
    double unary_probability = 0.3;    // share of unary among interior nodes
    double variable_probability = 0.6; // share of variables among leaves
    double constant_scale = 2.0;       // constants ~ N(0, scale)
};

Expr random_leaf(Rng& rng, std::size_t arity, const RandomExprOptions& options = {});
Expr random_expr(Rng& rng, std::size_t max_depth, std::size_t arity, const FunctionSet& fset,
                 const RandomExprOptions& options = {});

} // namespace fricsym
