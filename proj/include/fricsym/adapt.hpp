#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fricsym/dataset.hpp"
#include "fricsym/gp.hpp"
#include "fricsym/model.hpp"
#include "fricsym/parfam.hpp"

namespace fricsym {

enum class Engine { Gp, ParFam };

Engine parse_engine(std::string_view text); // "gp" | "parfam"
std::string_view name(Engine e);

struct SymbolicConfig {
    gp::GpConfig gp;
    FunctionSet functions = FunctionSet::defaults();
    std::optional<parfam::Structure> structure; // unset: engine default for the arity
    parfam::FitConfig parfam;
    double zero_tolerance = 0.0; // ParFam extraction
};

/// Runs one engine and returns the simplified formula it settles on: the
/// lowest-loss archive entry for GP, the extracted sparse fit for ParFam.
/// `default_structure` is used when `cfg.structure` is unset.
Expr fit_symbolic(const Matrix& X, std::span<const double> y, Engine engine, const SymbolicConfig& cfg,
                  const parfam::Structure& default_structure);

/// tau_g, sgn_tau_g, sgn_qdot.
std::vector<Feature> default_residual_features();

struct Adaptation {
    FrictionModel residual;
    FrictionModel combined; // base + residual
};

/// Learns tau_f_add on the residuals tau_f - base(qdot, tau_g). The residual
/// may not read qdot itself (ModelMismatch), and the adaptation data must not
/// carry external torque (DataError). ParFam defaults to a degree-2 polynomial.
Adaptation adapt_residual(const FrictionModel& base, const JointDataset& ds, Engine engine,
                          std::span<const Feature> features, const SymbolicConfig& cfg);

void to_json(nlohmann::json& j, const SymbolicConfig& c);
void from_json(const nlohmann::json& j, SymbolicConfig& c);

} // namespace fricsym
