#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "fricsym/error.hpp"
#include "fricsym/matrix.hpp"

namespace fricsym::numopt {

/// Objective value substituted for NaN/inf so the simplex can retreat.
inline constexpr double kInvalid = 1e300;

struct Bounds {
    std::vector<double> lower;
    std::vector<double> upper;

    void clip(std::span<double> x) const;
    bool contains(std::span<const double> x) const;
};

struct Objective {
    std::function<double(std::span<const double>)> f;
    std::size_t dim = 0;
    std::optional<Bounds> bounds;

    /// Evaluates f, mapping non-finite values to kInvalid.
    double operator()(std::span<const double> x) const;
};

struct LocalResult {
    std::vector<double> x;
    double f = kInvalid;
    std::size_t evaluations = 0;
};

struct NelderMeadOptions {
    std::size_t budget = 2000; // function evaluations
    double xtol = 1e-10;
    double ftol = 1e-14;
    double relative_step = 0.05; // initial simplex edge relative to |x_i|
    double zero_step = 0.00025;  // edge used when x_i == 0
    std::size_t max_restarts = 3;
};

/// Adaptive-parameter Nelder–Mead, restarted around the incumbent until a
/// restart stops improving. Trial points are clipped to the bounds.
LocalResult nelder_mead(const Objective& obj, std::span<const double> x0, const NelderMeadOptions& options);

/// Throws FitError("invalid start point") when f(x0) is not finite.
LocalResult local_minimize(const Objective& obj, std::span<const double> x0, std::size_t budget);

struct BasinHoppingConfig {
    std::size_t iterations = 100;
    double step_size = 0.5;
    double temperature = 1.0;
    std::size_t local_budget = 1000;
    std::uint64_t seed = 0;
    bool adaptive_step = false; // retune step every adapt_interval hops toward target_accept_rate
    double target_accept_rate = 0.5;
    std::size_t adapt_interval = 20;
    double stop_below = -std::numeric_limits<double>::infinity(); // early exit once best <= this

    void validate() const;
};

struct BasinHoppingResult {
    std::vector<double> x;
    double f = kInvalid;
    std::vector<double> trace; // best-so-far after the initial descent and after every hop
    std::size_t accepted = 0;
    std::size_t evaluations = 0;
};

BasinHoppingResult basin_hopping(const Objective& obj, std::span<const double> x0, const BasinHoppingConfig& cfg);

/// Writes predictions for parameters theta on inputs X into out.
using ParametricModel = std::function<void(std::span<const double> theta, const Matrix& X, std::span<double> out)>;

struct LeastSquaresResult {
    std::vector<double> theta;
    double mse = kInvalid;
};

/// Minimizes mean squared error of `model` over theta with basin hopping.
LeastSquaresResult fit_least_squares(const ParametricModel& model, std::span<const double> theta0, const Matrix& X,
                                     std::span<const double> y, const BasinHoppingConfig& cfg,
                                     const std::optional<Bounds>& bounds = std::nullopt);

void to_json(nlohmann::json& j, const BasinHoppingConfig& c);
void from_json(const nlohmann::json& j, BasinHoppingConfig& c);

} // namespace fricsym::numopt
