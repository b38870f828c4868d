#include "fricsym/gp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <thread>

#include "fricsym/numopt.hpp"

namespace fricsym::gp {

// ---- archive ----------------------------------------------------------------

bool ParetoArchive::insert(const Genome& g) {
    if (!std::isfinite(g.loss)) return false;
    // dominated by an entry at equal or lower complexity?
    for (const auto& [c, e] : entries_) {
        if (c > g.complexity) break;
        if (e.loss <= g.loss) return false;
    }
    entries_[g.complexity] = g;
    for (auto it = entries_.upper_bound(g.complexity); it != entries_.end();) {
        if (it->second.loss >= g.loss)
            it = entries_.erase(it);
        else
            ++it;
    }
    return true;
}

const Genome& ParetoArchive::best() const {
    if (entries_.empty()) throw Error("archive is empty");
    return std::prev(entries_.end())->second;
}

bool ParetoArchive::is_pareto() const {
    double prev = kInfiniteLoss;
    bool first = true;
    for (const auto& [c, e] : entries_) {
        if (e.complexity != c) return false;
        if (!first && !(e.loss < prev)) return false;
        prev = e.loss;
        first = false;
    }
    return true;
}

void ParetoArchive::mark_tuned(const Expr& expr) {
    for (auto& [c, e] : entries_)
        if (e.expr == expr) e.tuned = true;
}

// ---- scoring ------------------------------------------------------------------

double mse(const Expr& expr, const Matrix& X, std::span<const double> y) {
    if (y.empty()) throw Error("scoring needs data");
    std::vector<double> pred(y.size());
    CompiledExpr(expr).evaluate(X, pred);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = pred[i] - y[i];
        acc += r * r;
    }
    const double m = acc / static_cast<double>(y.size());
    return std::isfinite(m) ? m : kInfiniteLoss;
}

double score(const Expr& expr, const Matrix& X, std::span<const double> y, double parsimony) {
    return mse(expr, X, y) + parsimony * static_cast<double>(complexity(expr));
}

Genome make_genome(const Expr& expr, const Matrix& X, std::span<const double> y, double parsimony) {
    Genome g;
    g.expr = expr;
    g.complexity = complexity(expr);
    g.loss = mse(expr, X, y);
    g.fitness = g.loss + parsimony * static_cast<double>(g.complexity);
    return g;
}

// ---- selection ----------------------------------------------------------------

namespace {

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    return idx;
}

double relative_gap(double f, double best) {
    if (f == best) return 0.0;
    if (!std::isfinite(f)) return kInfiniteLoss;
    return (f - best) / std::max(std::abs(best), 1e-12);
}

} // namespace

std::size_t tournament_select(std::span<const Genome> island, std::size_t k, double p, double temperature, Rng& rng) {
    if (island.empty()) throw Error("tournament on an empty island");
    k = std::clamp<std::size_t>(k, 1, island.size());
    auto cand = sample_indices(island.size(), k, rng);
    std::stable_sort(cand.begin(), cand.end(),
                     [&](std::size_t a, std::size_t b) { return island[a].fitness < island[b].fitness; });
    const double best = island[cand.front()].fitness;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < cand.size(); ++i) {
        const double gap = relative_gap(island[cand[i]].fitness, best);
        double accept = p;
        if (gap > 0.0) accept *= temperature > 0.0 ? std::exp(-gap / temperature) : 0.0;
        if (u(rng) < accept) return cand[i];
    }
    return cand.back();
}

namespace {

std::size_t tournament_loser(std::span<const Genome> island, std::size_t k, Rng& rng) {
    k = std::clamp<std::size_t>(k, 1, island.size());
    const auto cand = sample_indices(island.size(), k, rng);
    std::size_t worst = cand.front();
    for (std::size_t i : cand) {
        const auto& a = island[i];
        const auto& w = island[worst];
        if (a.fitness > w.fitness || (a.fitness == w.fitness && a.age > w.age)) worst = i;
    }
    return worst;
}

std::size_t oldest(std::span<const Genome> island) {
    std::size_t o = 0;
    for (std::size_t i = 1; i < island.size(); ++i) {
        if (island[i].age > island[o].age || (island[i].age == island[o].age && island[i].fitness > island[o].fitness))
            o = i;
    }
    return o;
}

std::size_t worst_member(std::span<const Genome> island) {
    std::size_t w = 0;
    for (std::size_t i = 1; i < island.size(); ++i)
        if (island[i].fitness > island[w].fitness) w = i;
    return w;
}

// ---- variation helpers -----------------------------------------------------

void collect_kinds(const Expr& e, std::vector<Expr::Kind>& out) {
    out.push_back(e.kind());
    switch (e.kind()) {
    case Expr::Kind::Unary: collect_kinds(e.child(), out); break;
    case Expr::Kind::Binary:
        collect_kinds(e.left(), out);
        collect_kinds(e.right(), out);
        break;
    default: break;
    }
}

std::vector<std::size_t> indices_where(const Expr& e, auto pred) {
    std::vector<Expr::Kind> kinds;
    collect_kinds(e, kinds);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < kinds.size(); ++i)
        if (pred(kinds[i])) out.push_back(i);
    return out;
}

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

Expr random_unary(const FunctionSet& fset, const Expr& child, Rng& rng) {
    const auto funcs = fset.unary_functions();
    if (funcs.empty()) return child;
    const Func f = pick(funcs, rng);
    if (f == Func::Pow) return Expr::power(child, std::uniform_int_distribution<int>(2, fset.max_int_power)(rng));
    return Expr::unary(f, child);
}

Expr mutate_once(const Expr& parent, Mutation kind, const FunctionSet& fset, std::size_t arity, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = parent.size();
    std::uniform_int_distribution<std::size_t> any_node(0, n - 1);

    switch (kind) {
    case Mutation::Point: {
        const std::size_t idx = any_node(rng);
        const Expr& node = subtree(parent, idx);
        switch (node.kind()) {
        case Expr::Kind::Constant:
        case Expr::Kind::Variable: return replace_subtree(parent, idx, random_leaf(rng, arity));
        case Expr::Kind::Unary: return replace_subtree(parent, idx, random_unary(fset, node.child(), rng));
        case Expr::Kind::Binary: {
            const auto ops = fset.binary_operators();
            return replace_subtree(parent, idx, Expr::binary(pick(ops, rng), node.left(), node.right()));
        }
        }
        return parent;
    }
    case Mutation::Subtree: {
        const std::size_t idx = any_node(rng);
        return replace_subtree(parent, idx, random_expr(rng, 3, arity, fset));
    }
    case Mutation::Insert: {
        const std::size_t idx = any_node(rng);
        const Expr& node = subtree(parent, idx);
        const auto ops = fset.binary_operators();
        if (ops.empty() || u(rng) < 0.4) return replace_subtree(parent, idx, random_unary(fset, node, rng));
        const Expr leaf = random_leaf(rng, arity);
        const Op op = pick(ops, rng);
        return replace_subtree(parent, idx, u(rng) < 0.5 ? Expr::binary(op, node, leaf) : Expr::binary(op, leaf, node));
    }
    case Mutation::Remove: {
        const auto interior = indices_where(parent, [](Expr::Kind k) { return k == Expr::Kind::Unary || k == Expr::Kind::Binary; });
        if (interior.empty()) return parent;
        const std::size_t idx = pick(interior, rng);
        const Expr& node = subtree(parent, idx);
        if (node.kind() == Expr::Kind::Unary) return replace_subtree(parent, idx, node.child());
        return replace_subtree(parent, idx, u(rng) < 0.5 ? node.left() : node.right());
    }
    case Mutation::Constant: {
        const auto consts = indices_where(parent, [](Expr::Kind k) { return k == Expr::Kind::Constant; });
        if (consts.empty()) return parent;
        const std::size_t idx = pick(consts, rng);
        const double c = subtree(parent, idx).value();
        double next;
        if (std::abs(c) < 0.1)
            next = c + std::normal_distribution<double>(0.0, 1.0)(rng);
        else
            next = c * std::exp(std::normal_distribution<double>(0.0, 0.1)(rng));
        return replace_subtree(parent, idx, Expr::constant(next));
    }
    }
    return parent;
}

} // namespace

Expr mutate(const Expr& parent, Mutation kind, const FunctionSet& fset, std::size_t arity, std::size_t max_complexity,
            Rng& rng) {
    for (int attempt = 0; attempt < 10; ++attempt) {
        Expr child = mutate_once(parent, kind, fset, arity, rng);
        if (complexity(child) <= max_complexity) return child;
    }
    return parent;
}

Expr mutate(const Expr& parent, const MutationWeights& w, const FunctionSet& fset, std::size_t arity,
            std::size_t max_complexity, Rng& rng) {
    std::discrete_distribution<int> which({w.point, w.subtree, w.insert, w.remove, w.constant});
    return mutate(parent, static_cast<Mutation>(which(rng)), fset, arity, max_complexity, rng);
}

std::pair<Expr, Expr> crossover(const Expr& a, const Expr& b, std::size_t max_complexity, Rng& rng) {
    if (a.size() < 2 || b.size() < 2) return {a, b};
    std::uniform_int_distribution<std::size_t> pa(1, a.size() - 1), pb(1, b.size() - 1);
    for (int attempt = 0; attempt < 10; ++attempt) {
        const std::size_t ia = pa(rng), ib = pb(rng);
        Expr ca = replace_subtree(a, ia, subtree(b, ib));
        Expr cb = replace_subtree(b, ib, subtree(a, ia));
        if (complexity(ca) <= max_complexity && complexity(cb) <= max_complexity) return {std::move(ca), std::move(cb)};
    }
    return {a, b};
}

Genome optimize_constants(const Genome& g, const Matrix& X, std::span<const double> y, double parsimony,
                          std::size_t budget) {
    const CompiledExpr prog(g.expr);
    if (prog.constant_count() == 0 || budget == 0) {
        Genome same = g;
        same.tuned = true;
        return same;
    }
    Genome fallback = g;
    fallback.tuned = true;
    std::vector<double> pred(y.size());
    numopt::Objective obj;
    obj.dim = prog.constant_count();
    obj.f = [&](std::span<const double> c) {
        prog.evaluate(X, pred, c);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = pred[i] - y[i];
            acc += r * r;
        }
        return acc / static_cast<double>(y.size());
    };
    numopt::LocalResult r;
    try {
        r = numopt::local_minimize(obj, prog.constants(), budget);
    } catch (const FitError&) {
        return fallback;
    }
    if (!(r.f < g.loss)) return fallback;
    Genome out = make_genome(prog.rebuild(r.x), X, y, parsimony);
    out.age = g.age;
    out.tuned = true;
    return out.loss < g.loss ? out : fallback;
}

void GpConfig::validate() const {
    if (islands < 1) throw Error("gp: islands must be at least 1");
    if (population < 2) throw Error("gp: population must be at least 2");
    if (tournament_size < 1 || tournament_size > population) throw Error("gp: tournament size must be in [1, population]");
    auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!prob(selection_p) || !prob(crossover_probability) || !prob(migration_fraction) || !prob(age_phase))
        throw Error("gp: probabilities must lie in [0, 1]");
    if (max_complexity < 3) throw Error("gp: max complexity must be at least 3");
    if (!(initial_temperature >= 0.0) || !(final_temperature >= 0.0)) throw Error("gp: temperatures must be >= 0");
    if (!(parsimony >= 0.0)) throw Error("gp: parsimony must be >= 0");
    if (init_depth < 1) throw Error("gp: init depth must be at least 1");
    const MutationWeights& w = mutation;
    if (w.point < 0 || w.subtree < 0 || w.insert < 0 || w.remove < 0 || w.constant < 0 ||
        w.point + w.subtree + w.insert + w.remove + w.constant <= 0)
        throw Error("gp: mutation weights must be non-negative with a positive sum");
}

std::size_t thread_budget(std::size_t requested) {
    if (const char* env = std::getenv("FRICSYM_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct Context {
    const Matrix& X;
    std::span<const double> y;
    const FunctionSet& fset;
    const GpConfig& cfg;
    std::size_t arity;
};

void place(Island& island, Genome child, bool age_phase, const GpConfig& cfg, Rng& rng) {
    const std::size_t slot = age_phase ? oldest(island) : tournament_loser(island, cfg.tournament_size, rng);
    island[slot] = std::move(child);
}

void step_island(Island& island, const Context& ctx, std::size_t generation, Rng& rng) {
    const GpConfig& cfg = ctx.cfg;
    const double frac = cfg.generations > 1 ? static_cast<double>(generation) / static_cast<double>(cfg.generations - 1) : 1.0;
    const double temperature = cfg.initial_temperature + (cfg.final_temperature - cfg.initial_temperature) * frac;
    const bool age_phase = static_cast<double>(generation) < cfg.age_phase * static_cast<double>(cfg.generations);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    for (Genome& g : island) ++g.age;
    std::size_t events = 0;
    while (events < cfg.population) {
        if (u(rng) < cfg.crossover_probability) {
            const auto& a = island[tournament_select(island, cfg.tournament_size, cfg.selection_p, temperature, rng)];
            const auto& b = island[tournament_select(island, cfg.tournament_size, cfg.selection_p, temperature, rng)];
            auto [ca, cb] = crossover(a.expr, b.expr, cfg.max_complexity, rng);
            Genome ga = make_genome(ca, ctx.X, ctx.y, cfg.parsimony);
            Genome gb = make_genome(cb, ctx.X, ctx.y, cfg.parsimony);
            place(island, std::move(ga), age_phase, cfg, rng);
            place(island, std::move(gb), age_phase, cfg, rng);
            events += 2;
        } else {
            const auto& parent = island[tournament_select(island, cfg.tournament_size, cfg.selection_p, temperature, rng)];
            Expr child = mutate(parent.expr, cfg.mutation, ctx.fset, ctx.arity, cfg.max_complexity, rng);
            place(island, make_genome(child, ctx.X, ctx.y, cfg.parsimony), age_phase, cfg, rng);
            events += 1;
        }
    }
}

void migrate(std::vector<Island>& islands, const GpConfig& cfg) {
    const std::size_t n = islands.size();
    if (n < 2) return;
    const std::size_t count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(cfg.migration_fraction * static_cast<double>(cfg.population))));
    std::vector<std::vector<Genome>> emigrants(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> order(islands[i].size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return islands[i][a].fitness < islands[i][b].fitness; });
        for (std::size_t k = 0; k < std::min(count, order.size()); ++k) emigrants[i].push_back(islands[i][order[k]]);
    }
    // ring: island i sends to island i + 1
    for (std::size_t i = 0; i < n; ++i) {
        Island& dest = islands[(i + 1) % n];
        for (const Genome& g : emigrants[i]) dest[worst_member(dest)] = g;
    }
}

void absorb(ParetoArchive& archive, const Genome& g, const Context& ctx) {
    const Expr s = simplify(g.expr);
    if (s == g.expr) {
        archive.insert(g);
        return;
    }
    Genome sg = make_genome(s, ctx.X, ctx.y, ctx.cfg.parsimony);
    sg.age = g.age;
    sg.tuned = g.tuned;
    // simplification only rewrites to an equal function; keep whichever scored better
    archive.insert(sg.loss <= g.loss ? sg : g);
}

} // namespace

ParetoArchive evolve(const Matrix& X, std::span<const double> y, const FunctionSet& fset, const GpConfig& cfg,
                     const GenerationObserver& observer) {
    cfg.validate();
    if (y.empty() || X.rows() != y.size()) throw FitError("gp: data must be non-empty with one target per row");
    const Context ctx{X, y, fset, cfg, X.cols()};

    std::vector<Rng> rngs;
    std::vector<Island> islands(cfg.islands);
    for (std::size_t i = 0; i < cfg.islands; ++i) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(i)};
        rngs.emplace_back(seq);
        for (std::size_t k = 0; k < cfg.population; ++k) {
            Expr e;
            do {
                e = random_expr(rngs[i], cfg.init_depth, ctx.arity, fset);
            } while (complexity(e) > cfg.max_complexity);
            islands[i].push_back(make_genome(e, X, y, cfg.parsimony));
        }
    }

    ParetoArchive archive;
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    archive.insert(make_genome(Expr::constant(mean), X, y, cfg.parsimony));

    const std::size_t workers = std::min(thread_budget(cfg.threads), cfg.islands);
    for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
        if (workers <= 1) {
            for (std::size_t i = 0; i < cfg.islands; ++i) step_island(islands[i], ctx, gen, rngs[i]);
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w)
                pool.emplace_back([&, w] {
                    for (std::size_t i = w; i < cfg.islands; i += workers) step_island(islands[i], ctx, gen, rngs[i]);
                });
        }

        if (cfg.migration_interval > 0 && (gen + 1) % cfg.migration_interval == 0) migrate(islands, cfg);

        for (const Island& isl : islands)
            for (const Genome& g : isl) absorb(archive, g, ctx);

        if (cfg.constant_opt_interval > 0 && (gen + 1) % cfg.constant_opt_interval == 0) {
            std::vector<Genome> tuned;
            for (const auto& [c, g] : archive.entries())
                if (!g.tuned) tuned.push_back(optimize_constants(g, X, y, cfg.parsimony, cfg.constant_opt_budget));
            std::size_t target = 0;
            for (const Genome& g : tuned) {
                absorb(archive, g, ctx);
                archive.mark_tuned(g.expr);
                archive.mark_tuned(simplify(g.expr));
                if (g.complexity > cfg.max_complexity) continue;
                Island& isl = islands[target++ % islands.size()];
                Genome copy = g;
                copy.age = 0;
                isl[worst_member(isl)] = std::move(copy);
            }
        }

        if (observer) observer({gen, islands, archive});
    }
    return archive;
}

nlohmann::json archive_to_json(const ParetoArchive& archive, std::span<const std::string> names) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [c, g] : archive.entries())
        out.push_back({{"complexity", c}, {"loss", g.loss}, {"formula", format(g.expr, names)}});
    return out;
}

void to_json(nlohmann::json& j, const GpConfig& c) {
    j = {{"islands", c.islands},
         {"population", c.population},
         {"generations", c.generations},
         {"tournament_size", c.tournament_size},
         {"selection_p", c.selection_p},
         {"initial_temperature", c.initial_temperature},
         {"final_temperature", c.final_temperature},
         {"parsimony", c.parsimony},
         {"mutation",
          {{"point", c.mutation.point},
           {"subtree", c.mutation.subtree},
           {"insert", c.mutation.insert},
           {"remove", c.mutation.remove},
           {"constant", c.mutation.constant}}},
         {"crossover_probability", c.crossover_probability},
         {"migration_interval", c.migration_interval},
         {"migration_fraction", c.migration_fraction},
         {"max_complexity", c.max_complexity},
         {"init_depth", c.init_depth},
         {"age_phase", c.age_phase},
         {"constant_opt_interval", c.constant_opt_interval},
         {"constant_opt_budget", c.constant_opt_budget},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, GpConfig& c) {
    const GpConfig d;
    c.islands = j.value("islands", d.islands);
    c.population = j.value("population", d.population);
    c.generations = j.value("generations", d.generations);
    c.tournament_size = j.value("tournament_size", d.tournament_size);
    c.selection_p = j.value("selection_p", d.selection_p);
    c.initial_temperature = j.value("initial_temperature", d.initial_temperature);
    c.final_temperature = j.value("final_temperature", d.final_temperature);
    c.parsimony = j.value("parsimony", d.parsimony);
    if (j.contains("mutation")) {
        const auto& m = j.at("mutation");
        c.mutation.point = m.value("point", d.mutation.point);
        c.mutation.subtree = m.value("subtree", d.mutation.subtree);
        c.mutation.insert = m.value("insert", d.mutation.insert);
        c.mutation.remove = m.value("remove", d.mutation.remove);
        c.mutation.constant = m.value("constant", d.mutation.constant);
    }
    c.crossover_probability = j.value("crossover_probability", d.crossover_probability);
    c.migration_interval = j.value("migration_interval", d.migration_interval);
    c.migration_fraction = j.value("migration_fraction", d.migration_fraction);
    c.max_complexity = j.value("max_complexity", d.max_complexity);
    c.init_depth = j.value("init_depth", d.init_depth);
    c.age_phase = j.value("age_phase", d.age_phase);
    c.constant_opt_interval = j.value("constant_opt_interval", d.constant_opt_interval);
    c.constant_opt_budget = j.value("constant_opt_budget", d.constant_opt_budget);
    c.seed = j.value("seed", d.seed);
    c.validate();
}

} // namespace fricsym::gp
