#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fricsym/expr.hpp"

namespace fricsym::gp {

inline constexpr double kInfiniteLoss = std::numeric_limits<double>::infinity();

struct Genome {
    Expr expr;
    std::size_t age = 0;
    double loss = kInfiniteLoss; // MSE on the training data
    std::size_t complexity = 0;
    double fitness = kInfiniteLoss; // loss + parsimony * complexity
    bool tuned = false;             // constants already refined against the data
};

struct MutationWeights {
    double point = 1.0;
    double subtree = 0.6;
    double insert = 0.8;
    double remove = 0.6;
    double constant = 1.2;
};

struct GpConfig {
    std::size_t islands = 8;
    std::size_t population = 60; // per island
    std::size_t generations = 40;
    std::size_t tournament_size = 6;
    double selection_p = 0.9;
    double initial_temperature = 1.0; // tournament annealing, relative fitness units
    double final_temperature = 0.05;
    double parsimony = 1e-4;
    MutationWeights mutation;
    double crossover_probability = 0.1;
    std::size_t migration_interval = 10;
    double migration_fraction = 0.05;
    std::size_t max_complexity = 40;
    std::size_t init_depth = 4;
    double age_phase = 0.2; // share of generations using oldest-member replacement
    std::size_t constant_opt_interval = 2;
    std::size_t constant_opt_budget = 300;
    std::uint64_t seed = 0;
    std::size_t threads = 0; // 0: FRICSYM_THREADS or hardware concurrency

    void validate() const;
};

/// Complexity -> lowest-loss genome. For c1 < c2 the entry at c2 always has
/// strictly lower loss than the one at c1.
class ParetoArchive {
public:
    /// Returns true when the genome entered the archive.
    bool insert(const Genome& g);

    const std::map<std::size_t, Genome>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t size() const noexcept { return entries_.size(); }
    const Genome& best() const; // lowest loss
    bool is_pareto() const;
    /// Flags the entry holding the same expression as already tuned.
    void mark_tuned(const Expr& expr);

private:
    std::map<std::size_t, Genome> entries_;
};

using Island = std::vector<Genome>;

/// MSE + parsimony * complexity; infinite when predictions are not finite.
double score(const Expr& expr, const Matrix& X, std::span<const double> y, double parsimony);
double mse(const Expr& expr, const Matrix& X, std::span<const double> y);
Genome make_genome(const Expr& expr, const Matrix& X, std::span<const double> y, double parsimony);

/// Index into `island` of the selected genome. Candidates are sampled without
/// replacement, sorted by fitness and accepted from best to worst with
/// probability p * exp(-delta / temperature), delta being the fitness gap to
/// the best candidate relative to the best's magnitude. An infinite
/// temperature gives the plain geometric tournament; if every candidate is
/// rejected the last one is returned.
std::size_t tournament_select(std::span<const Genome> island, std::size_t k, double p, double temperature, Rng& rng);

enum class Mutation { Point, Subtree, Insert, Remove, Constant };

/// Child expression only (age 0, unscored). Retries until the complexity cap
/// holds, falling back to the parent's expression.
Expr mutate(const Expr& parent, Mutation kind, const FunctionSet& fset, std::size_t arity, std::size_t max_complexity,
            Rng& rng);
Expr mutate(const Expr& parent, const MutationWeights& weights, const FunctionSet& fset, std::size_t arity,
            std::size_t max_complexity, Rng& rng);

/// Swaps random non-root subtrees. Leaves have no crossover points, so two
/// leaves come back unchanged.
std::pair<Expr, Expr> crossover(const Expr& a, const Expr& b, std::size_t max_complexity, Rng& rng);

/// Refits the constants of `g` against the data with a bounded local search.
Genome optimize_constants(const Genome& g, const Matrix& X, std::span<const double> y, double parsimony,
                          std::size_t budget);

struct GenerationView {
    std::size_t generation;
    const std::vector<Island>& islands;
    const ParetoArchive& archive;
};

using GenerationObserver = std::function<void(const GenerationView&)>;

ParetoArchive evolve(const Matrix& X, std::span<const double> y, const FunctionSet& fset, const GpConfig& cfg,
                     const GenerationObserver& observer = {});

nlohmann::json archive_to_json(const ParetoArchive& archive, std::span<const std::string> variable_names = {});

void to_json(nlohmann::json& j, const GpConfig& c);
void from_json(const nlohmann::json& j, GpConfig& c);

/// Worker count from FRICSYM_THREADS (if set), else `requested`, else hardware.
std::size_t thread_budget(std::size_t requested);

} // namespace fricsym::gp
