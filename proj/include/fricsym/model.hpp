#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fricsym/dataset.hpp"
#include "fricsym/expr.hpp"
#include "fricsym/stribeck.hpp"

namespace fricsym {

/// A friction estimate tau_f_hat(qdot, tau_g): a symbolic formula over named
/// features, a Stribeck law, or a base model plus an additive residual.
class FrictionModel {
public:
    enum class Kind { Symbolic, Stribeck, AsymmetricStribeck, Combined };

    FrictionModel(); // symbolic zero over qdot

    static FrictionModel symbolic(std::vector<Feature> features, Expr expr);
    static FrictionModel stribeck(const StribeckParams& p);
    static FrictionModel asymmetric(const AsymmetricStribeck& m);
    static FrictionModel combined(FrictionModel base, FrictionModel residual);

    Kind kind() const noexcept { return kind_; }
    const std::vector<Feature>& features() const noexcept { return features_; } // symbolic only
    const Expr& expr() const noexcept { return expr_; }                          // symbolic only
    const StribeckParams& params() const noexcept { return asym_.positive; }      // stribeck only
    const AsymmetricStribeck& asymmetric_params() const noexcept { return asym_; }
    const FrictionModel& base() const;
    const FrictionModel& residual() const;

    /// Features the model reads, in first-use order.
    std::vector<Feature> inputs() const;

    double predict(double qdot, double tau_g) const;
    std::vector<double> predict(const JointDataset& ds) const;
    std::vector<double> predict(const std::vector<double>& qdot, const std::vector<double>& tau_g) const;

    /// Stribeck laws and symbolic formulas print as parseable infix over the
    /// feature names; the asymmetric law reads "<f+> if qdot > 0 else <f->".
    std::string formula() const;
    std::size_t complexity() const;

    /// Optional: the joint the model was fitted on.
    std::string joint_id;

private:
    Kind kind_ = Kind::Symbolic;
    std::vector<Feature> features_;
    Expr expr_;
    AsymmetricStribeck asym_;
    std::shared_ptr<const FrictionModel> base_;
    std::shared_ptr<const FrictionModel> residual_;
};

/// Throws ModelMismatch when the model was fitted on another joint.
void check_compatible(const FrictionModel& model, const JointDataset& ds);

void to_json(nlohmann::json& j, const FrictionModel& m);
void from_json(const nlohmann::json& j, FrictionModel& m);

} // namespace fricsym
