#include "fricsym/expr_json.hpp"

#include <fmt/core.h>

namespace fricsym {

nlohmann::json to_json(const Expr& e) {
    using nlohmann::json;
    switch (e.kind()) {
    case Expr::Kind::Constant: return json{{"const", e.value()}};
    case Expr::Kind::Variable: return json{{"var", e.index()}};
    case Expr::Kind::Unary: {
        json j{{"op", std::string(name(e.func()))}, {"args", json::array({to_json(e.child())})}};
        if (e.func() == Func::Pow) j["exponent"] = e.exponent();
        return j;
    }
    case Expr::Kind::Binary:
        return json{{"op", std::string(name(e.op()))}, {"args", json::array({to_json(e.left()), to_json(e.right())})}};
    }
    return {};
}

Expr expr_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error("expression JSON must be an object");
    if (j.contains("const")) return Expr::constant(j.at("const").get<double>());
    if (j.contains("var")) return Expr::variable(j.at("var").get<std::size_t>());
    if (!j.contains("op") || !j.contains("args")) throw Error("expression JSON needs 'op' and 'args'");
    const auto op = j.at("op").get<std::string>();
    const auto& args = j.at("args");
    auto arg = [&](std::size_t i) {
        if (!args.is_array() || args.size() <= i) throw Error(fmt::format("operator '{}' is missing operands", op));
        return expr_from_json(args.at(i));
    };
    for (Op o : {Op::Add, Op::Sub, Op::Mul, Op::Div})
        if (op == name(o)) return Expr::binary(o, arg(0), arg(1));
    if (op == "pow") return Expr::power(arg(0), j.at("exponent").get<double>());
    for (Func f : {Func::Exp, Func::SqrtAbs, Func::Abs, Func::Sign, Func::Neg, Func::Square})
        if (op == name(f)) return Expr::unary(f, arg(0));
    throw Error(fmt::format("unknown operator '{}'", op));
}

} // namespace fricsym
