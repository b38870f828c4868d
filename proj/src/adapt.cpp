#include "fricsym/adapt.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fricsym/error.hpp"

namespace fricsym {

Engine parse_engine(std::string_view text) {
    if (text == "gp") return Engine::Gp;
    if (text == "parfam") return Engine::ParFam;
    throw DataError(fmt::format("unknown engine '{}' (expected gp or parfam)", text));
}

std::string_view name(Engine e) { return e == Engine::Gp ? "gp" : "parfam"; }

Expr fit_symbolic(const Matrix& X, std::span<const double> y, Engine engine, const SymbolicConfig& cfg,
                  const parfam::Structure& default_structure) {
    if (X.rows() != y.size() || y.empty()) throw DataError("regression data is empty or misaligned");
    if (engine == Engine::Gp) {
        const auto archive = gp::evolve(X, y, cfg.functions, cfg.gp);
        return simplify(archive.best().expr);
    }
    const parfam::Structure s = cfg.structure.value_or(default_structure);
    if (s.arity != X.cols())
        throw ModelMismatch(fmt::format("structure arity {} does not match {} features", s.arity, X.cols()));
    const auto fit = parfam::fit(X, y, s, cfg.parfam);
    return simplify(parfam::extract(s, fit.theta, cfg.zero_tolerance));
}

std::vector<Feature> default_residual_features() { return {Feature::TauG, Feature::SignTauG, Feature::SignQdot}; }

Adaptation adapt_residual(const FrictionModel& base, const JointDataset& ds, Engine engine,
                          std::span<const Feature> features, const SymbolicConfig& cfg) {
    if (features.empty()) throw DataError("residual feature set is empty");
    if (std::find(features.begin(), features.end(), Feature::Qdot) != features.end())
        throw ModelMismatch("the residual may depend on tau_g, sgn_tau_g and sgn_qdot only, not on qdot");
    for (const auto& s : ds.samples)
        if (s.tau_ext && *s.tau_ext != 0.0) throw DataError("adaptation data must be free of external torque");

    Points pts = build_points(ds, features);
    const auto prior = base.predict(ds);
    for (std::size_t i = 0; i < pts.y.size(); ++i) pts.y[i] -= prior[i];

    Expr e = fit_symbolic(pts.X, pts.y, engine, cfg, parfam::Structure::polynomial(features.size(), 2));
    Adaptation out;
    out.residual = FrictionModel::symbolic({features.begin(), features.end()}, std::move(e));
    out.residual.joint_id = base.joint_id;
    out.combined = FrictionModel::combined(base, out.residual);
    return out;
}

void to_json(nlohmann::json& j, const SymbolicConfig& c) {
    j = {{"gp", c.gp}, {"parfam", c.parfam}, {"zero_tolerance", c.zero_tolerance}, {"division", c.functions.div}};
    if (c.structure) j["structure"] = *c.structure;
}

void from_json(const nlohmann::json& j, SymbolicConfig& c) {
    if (j.contains("gp")) c.gp = j.at("gp").get<gp::GpConfig>();
    if (j.contains("parfam")) c.parfam = j.at("parfam").get<parfam::FitConfig>();
    if (j.contains("structure")) c.structure = j.at("structure").get<parfam::Structure>();
    c.zero_tolerance = j.value("zero_tolerance", c.zero_tolerance);
    c.functions.div = j.value("division", c.functions.div);
}

} // namespace fricsym
