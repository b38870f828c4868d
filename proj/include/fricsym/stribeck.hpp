#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "fricsym/expr.hpp"
#include "fricsym/numopt.hpp"

namespace fricsym {

/// Static sliding-regime friction:
///   tau = sgn(v) * (F_c + (F_s - F_c) * exp(-|v / v_s|^delta_s)) + F_v * v
struct StribeckParams {
    double fc = 0.0;      // Coulomb level
    double fs = 0.0;      // stiction level
    double fv = 0.0;      // viscous coefficient
    double vs = 1.0;      // Stribeck velocity, > 0
    double delta = 1.0;   // Stribeck exponent, > 0

    void validate() const;
    friend bool operator==(const StribeckParams&, const StribeckParams&) = default;
};

/// Sign-split variant: `positive` applies for v > 0, `negative` for v <= 0.
struct AsymmetricStribeck {
    StribeckParams positive;
    StribeckParams negative;

    void validate() const;
    friend bool operator==(const AsymmetricStribeck&, const AsymmetricStribeck&) = default;
};

double stribeck_eval(const StribeckParams& p, double qdot);
double asymmetric_eval(const AsymmetricStribeck& m, double qdot);

/// The law as an expression in variable `qdot_index`, written the way the
/// closed form reads (so its complexity is 20).
Expr stribeck_expr(const StribeckParams& p, std::size_t qdot_index = 0);

struct StribeckFitConfig {
    std::size_t starts = 8;
    // search runs on MSE normalized by the mean squared target; stop_below
    // there ends the whole multi-start early
    numopt::BasinHoppingConfig search{.iterations = 10, .step_size = 0.5, .temperature = 1e-3, .local_budget = 1500, .stop_below = 1e-20};
    std::uint64_t seed = 0;
};

struct StribeckFit {
    StribeckParams params;
    double mse = 0.0;
};

struct AsymmetricFit {
    AsymmetricStribeck model;
    double mse = 0.0;
    StribeckFit symmetric; // warm start for both branches
};

/// Least-squares fit of the symmetric law. Throws FitError with fewer than 10 points.
StribeckFit fit_symmetric(std::span<const double> qdot, std::span<const double> tau, const StribeckFitConfig& cfg = {});

/// Fits each velocity sign on its own subset. Throws FitError naming the
/// branch when one sign has no data.
AsymmetricFit fit_asymmetric(std::span<const double> qdot, std::span<const double> tau,
                             const StribeckFitConfig& cfg = {});

void to_json(nlohmann::json& j, const StribeckParams& p);
void from_json(const nlohmann::json& j, StribeckParams& p);
void to_json(nlohmann::json& j, const AsymmetricStribeck& m);
void from_json(const nlohmann::json& j, AsymmetricStribeck& m);
void to_json(nlohmann::json& j, const StribeckFitConfig& c);
void from_json(const nlohmann::json& j, StribeckFitConfig& c);

} // namespace fricsym
