#include "fricsym/model.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "fricsym/error.hpp"
#include "fricsym/expr_json.hpp"

namespace fricsym {

namespace {

std::string kind_name(FrictionModel::Kind k) {
    switch (k) {
    case FrictionModel::Kind::Symbolic: return "symbolic";
    case FrictionModel::Kind::Stribeck: return "stribeck";
    case FrictionModel::Kind::AsymmetricStribeck: return "asymmetric_stribeck";
    case FrictionModel::Kind::Combined: return "combined";
    }
    return "?";
}

const std::vector<std::string>& qdot_name() {
    static const std::vector<std::string> n{"qdot"};
    return n;
}

} // namespace

FrictionModel::FrictionModel() : features_{Feature::Qdot}, expr_(Expr::constant(0.0)) {}

FrictionModel FrictionModel::symbolic(std::vector<Feature> features, Expr expr) {
    if (required_arity(expr) > features.size())
        throw ModelMismatch(fmt::format("formula uses x{} but only {} features are declared", required_arity(expr) - 1,
                                        features.size()));
    FrictionModel m;
    m.kind_ = Kind::Symbolic;
    m.features_ = std::move(features);
    m.expr_ = std::move(expr);
    return m;
}

FrictionModel FrictionModel::stribeck(const StribeckParams& p) {
    p.validate();
    FrictionModel m;
    m.kind_ = Kind::Stribeck;
    m.features_ = {Feature::Qdot};
    m.asym_ = {p, p};
    return m;
}

FrictionModel FrictionModel::asymmetric(const AsymmetricStribeck& a) {
    a.validate();
    FrictionModel m;
    m.kind_ = Kind::AsymmetricStribeck;
    m.features_ = {Feature::Qdot};
    m.asym_ = a;
    return m;
}

FrictionModel FrictionModel::combined(FrictionModel base, FrictionModel residual) {
    FrictionModel m;
    m.kind_ = Kind::Combined;
    m.features_.clear();
    m.joint_id = base.joint_id;
    m.base_ = std::make_shared<const FrictionModel>(std::move(base));
    m.residual_ = std::make_shared<const FrictionModel>(std::move(residual));
    return m;
}

const FrictionModel& FrictionModel::base() const {
    if (kind_ != Kind::Combined) throw Error("not a combined model");
    return *base_;
}

const FrictionModel& FrictionModel::residual() const {
    if (kind_ != Kind::Combined) throw Error("not a combined model");
    return *residual_;
}

std::vector<Feature> FrictionModel::inputs() const {
    if (kind_ != Kind::Combined) return features_;
    std::vector<Feature> out = base_->inputs();
    for (Feature f : residual_->inputs())
        if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    return out;
}

double FrictionModel::predict(double qdot, double tau_g) const {
    switch (kind_) {
    case Kind::Symbolic: {
        std::vector<double> row;
        row.reserve(features_.size());
        for (Feature f : features_) row.push_back(feature_value(f, qdot, tau_g));
        return evaluate(expr_, row);
    }
    case Kind::Stribeck: return stribeck_eval(asym_.positive, qdot);
    case Kind::AsymmetricStribeck: return asymmetric_eval(asym_, qdot);
    case Kind::Combined: return base_->predict(qdot, tau_g) + residual_->predict(qdot, tau_g);
    }
    return 0.0;
}

std::vector<double> FrictionModel::predict(const std::vector<double>& qdot, const std::vector<double>& tau_g) const {
    if (qdot.size() != tau_g.size()) throw Error("qdot and tau_g lengths differ");
    const std::size_t n = qdot.size();
    std::vector<double> out(n);
    switch (kind_) {
    case Kind::Symbolic: {
        Matrix X(n, features_.size());
        for (std::size_t c = 0; c < features_.size(); ++c)
            for (std::size_t r = 0; r < n; ++r) X(r, c) = feature_value(features_[c], qdot[r], tau_g[r]);
        return evaluate(expr_, X);
    }
    case Kind::Combined: {
        out = base_->predict(qdot, tau_g);
        const auto res = residual_->predict(qdot, tau_g);
        for (std::size_t i = 0; i < n; ++i) out[i] += res[i];
        return out;
    }
    default:
        for (std::size_t i = 0; i < n; ++i) out[i] = predict(qdot[i], tau_g[i]);
        return out;
    }
}

std::vector<double> FrictionModel::predict(const JointDataset& ds) const {
    std::vector<double> v, g;
    v.reserve(ds.samples.size());
    g.reserve(ds.samples.size());
    for (const auto& s : ds.samples) {
        v.push_back(s.qdot);
        g.push_back(s.tau_g);
    }
    return predict(v, g);
}

std::string FrictionModel::formula() const {
    switch (kind_) {
    case Kind::Symbolic: return format(expr_, feature_names(features_));
    case Kind::Stribeck: return format(stribeck_expr(asym_.positive), qdot_name());
    case Kind::AsymmetricStribeck:
        return fmt::format("{} if qdot > 0 else {}", format(stribeck_expr(asym_.positive), qdot_name()),
                           format(stribeck_expr(asym_.negative), qdot_name()));
    case Kind::Combined: return fmt::format("({}) + ({})", base_->formula(), residual_->formula());
    }
    return {};
}

std::size_t FrictionModel::complexity() const {
    switch (kind_) {
    case Kind::Symbolic: return fricsym::complexity(expr_);
    case Kind::Stribeck: return fricsym::complexity(stribeck_expr(asym_.positive));
    case Kind::AsymmetricStribeck:
        return fricsym::complexity(stribeck_expr(asym_.positive)) + fricsym::complexity(stribeck_expr(asym_.negative));
    case Kind::Combined: return base_->complexity() + residual_->complexity() + 1;
    }
    return 0;
}

void check_compatible(const FrictionModel& model, const JointDataset& ds) {
    if (!model.joint_id.empty() && !ds.joint_id.empty() && model.joint_id != ds.joint_id)
        throw ModelMismatch(
            fmt::format("model was fitted on joint '{}' but the dataset is joint '{}'", model.joint_id, ds.joint_id));
}

void to_json(nlohmann::json& j, const FrictionModel& m) {
    j = nlohmann::json::object();
    j["kind"] = kind_name(m.kind());
    if (!m.joint_id.empty()) j["joint_id"] = m.joint_id;
    switch (m.kind()) {
    case FrictionModel::Kind::Symbolic:
        j["features"] = feature_names(m.features());
        j["formula"] = m.formula();
        j["tree"] = to_json(m.expr());
        break;
    case FrictionModel::Kind::Stribeck: j["params"] = m.params(); break;
    case FrictionModel::Kind::AsymmetricStribeck: j["params"] = m.asymmetric_params(); break;
    case FrictionModel::Kind::Combined:
        j["base"] = m.base();
        j["residual"] = m.residual();
        break;
    }
    j["complexity"] = m.complexity();
}

void from_json(const nlohmann::json& j, FrictionModel& m) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "symbolic") {
            std::vector<Feature> features;
            for (const auto& f : j.at("features")) features.push_back(parse_feature(f.get<std::string>()));
            Expr e = j.contains("tree") ? expr_from_json(j.at("tree"))
                                        : parse(j.at("formula").get<std::string>(), feature_names(features));
            m = FrictionModel::symbolic(std::move(features), std::move(e));
        } else if (kind == "stribeck") {
            m = FrictionModel::stribeck(j.at("params").get<StribeckParams>());
        } else if (kind == "asymmetric_stribeck") {
            m = FrictionModel::asymmetric(j.at("params").get<AsymmetricStribeck>());
        } else if (kind == "combined") {
            m = FrictionModel::combined(j.at("base").get<FrictionModel>(), j.at("residual").get<FrictionModel>());
        } else {
            throw DataError(fmt::format("unknown model kind '{}'", kind));
        }
        m.joint_id = j.value("joint_id", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed model: {}", e.what()));
    } catch (const ParseError& e) {
        throw DataError(fmt::format("malformed model formula: {}", e.what()));
    }
}

} // namespace fricsym
