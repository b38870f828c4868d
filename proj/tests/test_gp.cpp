#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "fricsym/gp.hpp"

using namespace fricsym;
using namespace fricsym::gp;

namespace {

struct Planted {
    Matrix X;
    std::vector<double> y;
};

Planted linear_sign(std::size_t n) {
    std::vector<double> v, s, y;
    for (std::size_t i = 0; i < n; ++i) {
        const double q = -2 + 4.0 * static_cast<double>(i) / static_cast<double>(n - 1);
        const double sg = q > 0 ? 1 : (q < 0 ? -1 : 0);
        v.push_back(q);
        s.push_back(sg);
        y.push_back(2 * q + 3 * sg);
    }
    return {Matrix::from_columns({v, s}), y};
}

Island ranked_island(std::size_t n) {
    Island isl;
    for (std::size_t i = 0; i < n; ++i) {
        Genome g;
        g.expr = Expr::constant(static_cast<double>(i));
        g.fitness = g.loss = 1.0 + static_cast<double>(i);
        g.complexity = 1;
        isl.push_back(g);
    }
    return isl;
}

} // namespace

TEST_SUITE("gp") {

TEST_CASE("score") {
    const auto d = linear_sign(100);
    CHECK(score(parse("2*x0 + 3*x1"), d.X, d.y, 0.0) == doctest::Approx(0.0));

    const double mean = std::accumulate(d.y.begin(), d.y.end(), 0.0) / static_cast<double>(d.y.size());
    double var = 0;
    for (double v : d.y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d.y.size());
    CHECK(score(Expr::constant(mean), d.X, d.y, 0.0) == doctest::Approx(var));

    const Expr a = parse("x0"), b = parse("x0 + 0*x0");
    const double diff = score(b, d.X, d.y, 0.01) - score(a, d.X, d.y, 0.01);
    CHECK(diff == doctest::Approx(0.01 * (double(complexity(b)) - double(complexity(a)))));

    CHECK(score(parse("exp(exp(exp(x0 * 100)))"), d.X, d.y, 0.0) == kInfiniteLoss);
}

TEST_CASE("tournament limits") {
    const Island isl = ranked_island(8);
    Rng rng(5);
    for (int i = 0; i < 200; ++i) CHECK(tournament_select(isl, 8, 1.0, 1e-12, rng) == 0);

    std::vector<int> hits(8, 0);
    for (int i = 0; i < 80000; ++i) ++hits[tournament_select(isl, 1, 0.9, 1.0, rng)];
    for (int h : hits) CHECK(std::abs(h / 80000.0 - 0.125) < 0.01);
}

TEST_CASE("plain tournament follows the geometric law") {
    const std::size_t k = 6;
    const double p = 0.9;
    const Island isl = ranked_island(k);
    Rng rng(8);
    std::vector<int> hits(k, 0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i)
        ++hits[tournament_select(isl, k, p, std::numeric_limits<double>::infinity(), rng)];
    for (std::size_t r = 0; r < k; ++r) {
        const double expected = r + 1 < k ? p * std::pow(1 - p, double(r)) : std::pow(1 - p, double(k - 1));
        CHECK(std::abs(hits[r] / double(draws) - expected) < 0.01);
    }
}

TEST_CASE("mutation and crossover guards") {
    Rng rng(2);
    const auto fset = FunctionSet::defaults();
    const Expr leaf = Expr::variable(0);
    CHECK(mutate(leaf, Mutation::Remove, fset, 2, 40, rng) == leaf);
    const auto [a, b] = crossover(Expr::variable(0), Expr::constant(2.0), 40, rng);
    CHECK(a == Expr::variable(0));
    CHECK(b == Expr::constant(2.0));

    Expr e = parse("x0 * exp(x1) + 2");
    for (int i = 0; i < 10000; ++i) {
        e = mutate(e, MutationWeights{}, fset, 2, 20, rng);
        CHECK(complexity(e) <= 20);
        CHECK_NOTHROW(validate(e, 2, fset));
    }
}

TEST_CASE("constant perturbation stays close") {
    Rng rng(4);
    const Expr c = Expr::constant(5.0);
    for (int i = 0; i < 100; ++i) {
        const Expr m = mutate(c, Mutation::Constant, FunctionSet::defaults(), 1, 40, rng);
        REQUIRE(m.is_constant());
        CHECK(m.value() > 0.0);
        CHECK(std::abs(std::log(m.value() / 5.0)) < 0.6);
    }
}

TEST_CASE("constant optimization") {
    const auto d = linear_sign(200);
    const Genome g = make_genome(parse("1*x0 + 1*x1"), d.X, d.y, 0.0);
    const Genome t = optimize_constants(g, d.X, d.y, 0.0, 500);
    CHECK(t.loss < 1e-10);
    CHECK(t.tuned);
}

TEST_CASE("pareto archive") {
    ParetoArchive a;
    Genome g;
    g.expr = Expr::constant(1);
    g.complexity = 1;
    g.loss = 1.0;
    CHECK(a.insert(g));
    g.complexity = 5;
    g.loss = 2.0; // dominated
    CHECK_FALSE(a.insert(g));
    g.loss = 0.5;
    CHECK(a.insert(g));
    g.complexity = 3;
    g.loss = 0.4; // dominates the complexity-5 entry
    CHECK(a.insert(g));
    CHECK(a.is_pareto());
    CHECK(a.size() == 2);
    CHECK(a.best().loss == 0.4);
}

TEST_CASE("evolve recovers a planted law") {
    const auto d = linear_sign(500);
    GpConfig cfg;
    cfg.seed = 1;
    const auto archive = evolve(d.X, d.y, FunctionSet::defaults(), cfg);
    bool hit = false;
    for (const auto& [cx, g] : archive.entries()) hit = hit || (g.loss <= 1e-6 && cx <= 7);
    CHECK(hit);
    CHECK(archive.is_pareto());
}

TEST_CASE("constant targets give the constant formula") {
    Matrix X(50, 1);
    for (std::size_t i = 0; i < 50; ++i) X(i, 0) = double(i);
    const std::vector<double> y(50, 5.0);
    GpConfig cfg;
    cfg.generations = 5;
    cfg.islands = 2;
    const auto archive = evolve(X, y, FunctionSet::defaults(), cfg);
    const auto& first = archive.entries().begin()->second;
    CHECK(first.loss == 0.0);
    CHECK(first.expr == Expr::constant(5.0));
}

TEST_CASE("generation invariants and determinism") {
    const auto d = linear_sign(120);
    GpConfig cfg;
    cfg.generations = 12;
    cfg.islands = 3;
    cfg.population = 30;
    cfg.max_complexity = 25;
    cfg.seed = 9;
    double last_best = std::numeric_limits<double>::infinity();
    std::size_t calls = 0;
    const auto a = evolve(d.X, d.y, FunctionSet::defaults(), cfg, [&](const GenerationView& v) {
        ++calls;
        CHECK(v.archive.is_pareto());
        CHECK(v.archive.best().loss <= last_best);
        last_best = v.archive.best().loss;
        for (const auto& isl : v.islands) {
            CHECK(isl.size() == cfg.population);
            for (const auto& g : isl) {
                CHECK(g.complexity == complexity(g.expr));
                CHECK(g.complexity <= cfg.max_complexity);
                CHECK(g.age <= v.generation + 1);
            }
        }
    });
    CHECK(calls == cfg.generations);
    const auto b = evolve(d.X, d.y, FunctionSet::defaults(), cfg);
    CHECK(archive_to_json(a) == archive_to_json(b));

    for (std::size_t threads : {1u, 2u, 3u}) {
        cfg.threads = threads;
        CHECK(archive_to_json(evolve(d.X, d.y, FunctionSet::defaults(), cfg)) == archive_to_json(a));
    }
}

TEST_CASE("config validation and json") {
    GpConfig c;
    c.tournament_size = c.population + 1;
    CHECK_THROWS(c.validate());
    c = GpConfig{};
    c.max_complexity = 2;
    CHECK_THROWS(c.validate());
    c = GpConfig{};
    c.islands = 3;
    const nlohmann::json j = c;
    CHECK(j.get<GpConfig>().islands == 3);
    const auto arch = archive_to_json(ParetoArchive{});
    CHECK(arch.is_array());
}

} // TEST_SUITE
