#include <doctest.h>

#include <cmath>
#include <string>

#include "fricsym/stribeck.hpp"

using namespace fricsym;

namespace {

// Closed form written out independently of the library.
double law(double fc, double fs, double fv, double vs, double ds, double v) {
    const double s = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
    return s * (fc + (fs - fc) * std::exp(-std::pow(std::abs(v / vs), ds))) + fv * v;
}

const StribeckParams kSym{1193, 8.629, 14.44, 47.65, 8.827};
const AsymmetricStribeck kAsym{{264.3, 8.002, 14.10, 95.33, 92.98}, {773.6, 8.629, 14.44, 69.23, 52.20}};

double mae(const auto& pred, const std::vector<double>& v, const std::vector<double>& y) {
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) s += std::abs(pred(v[i]) - y[i]);
    return s / static_cast<double>(v.size());
}

} // namespace

TEST_SUITE("stribeck") {

TEST_CASE("evaluation") {
    CHECK(stribeck_eval(kSym, 0.0) == 0.0);
    CHECK(stribeck_eval({1, 2, 0, 1, 1}, 100.0) == doctest::Approx(1.0));
    CHECK(stribeck_eval(kSym, 0.5) == doctest::Approx(law(1193, 8.629, 14.44, 47.65, 8.827, 0.5)).epsilon(1e-14));
    CHECK(stribeck_eval(kSym, -1.3) == doctest::Approx(law(1193, 8.629, 14.44, 47.65, 8.827, -1.3)).epsilon(1e-14));
}

TEST_CASE("asymmetric dispatch") {
    CHECK(asymmetric_eval(kAsym, 0.0) == 0.0);
    CHECK(asymmetric_eval(kAsym, -0.3) == doctest::Approx(law(773.6, 8.629, 14.44, 69.23, 52.20, -0.3)));
    CHECK(asymmetric_eval(kAsym, 0.3) == doctest::Approx(law(264.3, 8.002, 14.10, 95.33, 92.98, 0.3)));
    const AsymmetricStribeck same{kSym, kSym};
    for (double v = -2; v <= 2; v += 0.125) CHECK(asymmetric_eval(same, v) == stribeck_eval(kSym, v));
}

TEST_CASE("expression form matches the law") {
    const Expr e = stribeck_expr(kSym);
    CHECK(complexity(e) == 20);
    for (double v = -2; v <= 2; v += 0.1) {
        const double row[] = {v};
        CHECK(evaluate(e, std::span<const double>(row, 1)) == doctest::Approx(stribeck_eval(kSym, v)).epsilon(1e-12));
    }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS(StribeckParams{1, 1, 1, 0, 1}.validate());
    CHECK_THROWS(StribeckParams{1, 1, 1, 1, -1}.validate());
    CHECK_THROWS(StribeckParams{NAN, 1, 1, 1, 1}.validate());
    CHECK_NOTHROW(kSym.validate());
}

TEST_CASE("planted symmetric fit") {
    const StribeckParams planted{2.0, 3.5, 1.2, 0.3, 1.5};
    std::vector<double> v, y;
    for (int i = 0; i < 400; ++i) {
        v.push_back(-2 + 4.0 * i / 399);
        y.push_back(law(2.0, 3.5, 1.2, 0.3, 1.5, v.back()));
    }
    const auto fit = fit_symmetric(v, y);
    CHECK(mae([&](double q) { return stribeck_eval(fit.params, q); }, v, y) <= 1e-3);
}

TEST_CASE("asymmetric fit dominates the symmetric one") {
    std::vector<double> v, y;
    for (int i = 0; i < 300; ++i) {
        v.push_back(-1.5 + 3.0 * i / 299);
        const double q = v.back();
        y.push_back(q > 0 ? law(1.0, 2.0, 0.5, 0.2, 2.0, q) : law(1.6, 1.9, 0.8, 0.4, 1.0, q));
    }
    const auto asym = fit_asymmetric(v, y);
    CHECK(asym.mse <= asym.symmetric.mse + 1e-9);
    CHECK(mae([&](double q) { return asymmetric_eval(asym.model, q); }, v, y) <= 1e-3);
}

TEST_CASE("fit errors") {
    const std::vector<double> few{0.1, 0.2, 0.3}, fy{1, 2, 3};
    CHECK_THROWS_AS(fit_symmetric(few, fy), FitError);
    std::vector<double> pos, ty;
    for (int i = 1; i <= 20; ++i) pos.push_back(i * 0.1), ty.push_back(1.0);
    try {
        fit_asymmetric(pos, ty);
        FAIL("expected a missing-branch error");
    } catch (const FitError& e) {
        CHECK(std::string(e.what()).find("negative") != std::string::npos);
    }
}

TEST_CASE("json uses the law's symbols") {
    const nlohmann::json j = kSym;
    CHECK(j.at("F_c") == 1193);
    CHECK(j.at("v_s") == 47.65);
    CHECK(j.at("delta_s") == 8.827);
    CHECK(j.get<StribeckParams>() == kSym);
    const nlohmann::json a = kAsym;
    CHECK(a.at("negative").at("F_c") == 773.6);
    CHECK(a.get<AsymmetricStribeck>() == kAsym);
}

} // TEST_SUITE
