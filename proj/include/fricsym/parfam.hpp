#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fricsym/expr.hpp"
#include "fricsym/numopt.hpp"

namespace fricsym::parfam {

struct Degrees {
    std::size_t numerator = 1;
    std::size_t denominator = 0; // 0: plain polynomial

    friend bool operator==(const Degrees&, const Degrees&) = default;
};

/// f(x) = Q_{k+1}(x, g_1(Q_1(x)), ..., g_k(Q_k(x))) with rational Q_i whose
/// denominators have constant term fixed at 1.
///
/// Coefficient layout: for Q_1..Q_k and then the outer Q_{k+1}, all
/// numerator coefficients followed by the non-constant denominator
/// coefficients, each over monomials of total degree <= d in graded order
/// (1, x0, x1, ..., x0^2, x0 x1, ...). The outer rational sees the arity
/// inputs followed by the k base-function outputs.
struct Structure {
    std::size_t arity = 1;
    std::vector<Func> base;     // g_1..g_k
    std::vector<Degrees> inner; // one per base function
    Degrees outer;

    void validate() const;
    std::size_t parameter_count() const;

    /// Offset of the first numerator coefficient of rational `q` (k = outer).
    std::size_t offset(std::size_t q) const;
    std::size_t inputs_of(std::size_t q) const;
    const Degrees& degrees_of(std::size_t q) const;

    /// Index into theta of the monomial with the given exponents (one per
    /// input of rational q). Throws when the monomial is not part of it.
    std::size_t coefficient_index(std::size_t q, std::span<const unsigned> exponents, bool denominator = false) const;

    /// k = 2 with {exp, sqrt-abs}, inner degrees (2,0), outer (2,0).
    static Structure friction_default(std::size_t arity);
    /// Plain polynomial of the given degree (k = 0).
    static Structure polynomial(std::size_t arity, std::size_t degree);

    friend bool operator==(const Structure&, const Structure&) = default;
};

/// All exponent vectors over `inputs` variables with total degree <= degree, graded order.
std::vector<std::vector<unsigned>> monomials(std::size_t inputs, std::size_t degree);

/// Search-time guard on exp arguments.
inline constexpr double kExpClamp = 50.0;

std::vector<double> evaluate(const Structure& s, std::span<const double> theta, const Matrix& X);
double evaluate_row(const Structure& s, std::span<const double> theta, std::span<const double> x);

/// MSE + lambda * ||theta||_1, infinite when any prediction is not finite.
double loss(const Structure& s, std::span<const double> theta, const Matrix& X, std::span<const double> y,
            double lambda);

struct FitConfig {
    double lambda = 1e-4;
    numopt::BasinHoppingConfig search{.iterations = 40, .step_size = 0.5, .temperature = 1e-3, .local_budget = 3000};
    std::size_t restarts = 1;
    std::vector<double> thresholds{1e-4, 1e-3, 1e-2, 3e-2, 1e-1};
    std::size_t finetune_budget = 4000;
    double max_degradation = 0.05;  // relative validation-MSE tolerance when pruning
    double init_scale = 0.1;        // theta0 ~ N(0, init_scale)
    std::uint64_t seed = 0;

    void validate() const;
};

struct StageRecord {
    double threshold = 0.0;
    std::size_t nonzeros = 0;
    double validation_mse = 0.0;
    bool accepted = false;
};

struct FitReport {
    double search_loss = 0.0; // regularized loss after basin hopping
    double mse = 0.0;         // training MSE of the returned theta
    std::size_t nonzeros = 0;
    std::vector<StageRecord> stages;
};

struct FitResult {
    std::vector<double> theta;
    FitReport report;
};

/// Basin hopping on the regularized loss, then threshold pruning: small
/// coefficients are frozen at zero and survivors re-fitted on plain MSE; a
/// pruning step stands when validation MSE does not degrade beyond
/// `max_degradation`.
FitResult fit(const Matrix& X, std::span<const double> y, const Structure& s, const FitConfig& cfg);

/// Symbolic form of the fitted function, coefficients with |c| <= zero_tol dropped.
Expr extract(const Structure& s, std::span<const double> theta, double zero_tol = 0.0);

void to_json(nlohmann::json& j, const Degrees& d);
void from_json(const nlohmann::json& j, Degrees& d);
void to_json(nlohmann::json& j, const Structure& s);
void from_json(const nlohmann::json& j, Structure& s);
void to_json(nlohmann::json& j, const FitConfig& c);
void from_json(const nlohmann::json& j, FitConfig& c);

} // namespace fricsym::parfam
