#pragma once

#include <json.hpp>

#include "fricsym/expr.hpp"

namespace fricsym {

/// Tree form: {"op":"add","args":[...]}, leaves {"const":v} and {"var":i};
/// powers carry {"op":"pow","exponent":p,"args":[base]}.
nlohmann::json to_json(const Expr& expr);
Expr expr_from_json(const nlohmann::json& j);

} // namespace fricsym
