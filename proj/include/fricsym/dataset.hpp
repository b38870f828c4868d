#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fricsym/matrix.hpp"

namespace fricsym {

struct JointSample {
    double t = 0.0;
    double q = 0.0;
    double qdot = 0.0;
    double tau_m = 0.0;
    double tau_g = 0.0;
    std::optional<double> tau_ext; // measured external torque, if logged
    std::optional<int> movement;   // constant-velocity run id, if known
};

struct Provenance {
    std::string kind = "measured"; // or "synthetic"
    nlohmann::json generator;      // generator spec for synthetic data
    std::uint64_t seed = 0;
};

struct JointDataset {
    std::string joint_id;
    std::vector<JointSample> samples;
    double sampling_rate = 0.0; // Hz, 0 when undeclared
    Provenance provenance;

    /// Non-empty, strictly increasing t, finite fields, and uniform spacing
    /// within 1% when a sampling rate is declared.
    void validate() const;

    bool has_tau_ext() const;
    bool has_movements() const;
    /// Distinct movement ids in order of first appearance.
    std::vector<int> movements() const;
};

/// tau_f = tau_g - tau_m (quasi-static joint balance).
inline double friction_target(const JointSample& s) { return s.tau_g - s.tau_m; }

std::vector<double> friction_targets(const JointDataset& ds);

/// Header t,q,qdot,tau_m,tau_g then optional tau_ext and movement columns, in
/// any order. Empty tau_ext cells mean "not measured".
JointDataset read_csv(std::istream& in);
void write_csv(const JointDataset& ds, std::ostream& out);

/// CSV plus an optional `<name>.meta.json` sidecar (joint id, rate, provenance).
JointDataset load_dataset(const std::filesystem::path& csv);
void save_dataset(const JointDataset& ds, const std::filesystem::path& csv);
std::filesystem::path metadata_path(const std::filesystem::path& csv);

nlohmann::json metadata_json(const JointDataset& ds);
void apply_metadata(const nlohmann::json& j, JointDataset& ds);

// ---- constant-velocity segments --------------------------------------------

struct Segment {
    std::size_t begin = 0; // sample range [begin, end)
    std::size_t end = 0;
    double duration = 0.0;
    double qdot = 0.0;  // means over the run
    double tau_f = 0.0;
    double tau_g = 0.0;
    std::optional<int> movement;
};

/// Maximal runs whose velocities all stay within `tolerance` of the run mean
/// and that last at least `min_duration`. Runs never cross a movement id change.
std::vector<Segment> segment_constant_velocity(const JointDataset& ds, double tolerance, double min_duration);

// ---- features ----------------------------------------------------------------

enum class Feature { Qdot, SignQdot, TauG, SignTauG };

/// Accepts qdot, sgn_qdot, tau_g, sgn_tau_g and the spellings sign(qdot),
/// sgn(qdot), sign_qdot (likewise for tau_g). Throws DataError otherwise.
Feature parse_feature(std::string_view text);
std::string_view name(Feature f);
/// Comma-separated list.
std::vector<Feature> parse_features(std::string_view text);
std::vector<std::string> feature_names(std::span<const Feature> features);

double feature_value(Feature f, double qdot, double tau_g);

struct Points {
    std::vector<Feature> features;
    Matrix X;              // one column per feature
    std::vector<double> y; // friction targets
};

Points build_points(const JointDataset& ds, std::span<const Feature> features);
Points build_points(std::span<const Segment> segments, std::span<const Feature> features);
Matrix feature_matrix(const JointDataset& ds, std::span<const Feature> features);

// ---- splitting -----------------------------------------------------------------

struct MovementSplit {
    JointDataset train;
    JointDataset test;
    std::vector<int> train_movements;
    std::vector<int> test_movements;
};

/// Draws `n_train` movements for training, the rest form the test set. Every
/// movement is thinned to the smallest per-movement sample count.
MovementSplit split_movements(const JointDataset& ds, std::size_t n_train, std::uint64_t seed);

/// Samples where the finite-difference |qddot| exceeds `threshold` (rad/s^2).
std::size_t quasi_static_violations(const JointDataset& ds, double threshold = 0.5);

/// tau_ext estimate given a friction estimate: tau_g - tau_m - tau_f_hat.
inline double external_torque(const JointSample& s, double friction_estimate) {
    return s.tau_g - s.tau_m - friction_estimate;
}

} // namespace fricsym
