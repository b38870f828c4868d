#include "fricsym/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "fricsym/error.hpp"
#include "fricsym/model.hpp"

namespace fricsym {

namespace {

struct Piece {
    std::vector<double> qdot;
};

double positive(const nlohmann::json& j, const char* key, double fallback) {
    const double v = j.value(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) throw DataError(fmt::format("'{}' must be positive", key));
    return v;
}

double non_negative(const nlohmann::json& j, const char* key, double fallback) {
    const double v = j.value(key, fallback);
    if (!(v >= 0.0) || !std::isfinite(v)) throw DataError(fmt::format("'{}' must be non-negative", key));
    return v;
}

std::size_t samples_for(double seconds, double rate) { return static_cast<std::size_t>(std::llround(seconds * rate)); }

Piece trapezoid(double velocity, double hold, double ramp, double rate) {
    Piece p;
    const std::size_t nr = samples_for(ramp, rate), nh = std::max<std::size_t>(1, samples_for(hold, rate));
    for (std::size_t k = 0; k < nr; ++k) p.qdot.push_back(velocity * static_cast<double>(k + 1) / static_cast<double>(nr + 1));
    p.qdot.insert(p.qdot.end(), nh, velocity);
    for (std::size_t k = nr; k-- > 0;) p.qdot.push_back(velocity * static_cast<double>(k + 1) / static_cast<double>(nr + 1));
    return p;
}

std::vector<Piece> build_profile(const nlohmann::json& prof, double rate) {
    const std::string type = prof.at("type").get<std::string>();
    std::vector<Piece> pieces;
    if (type == "constant_grid") {
        const long count = prof.value("count", 90L);
        if (count < 1) throw DataError("'count' must be at least 1");
        const double lo = prof.value("min", -2.0), hi = prof.value("max", 2.0);
        if (!(hi >= lo)) throw DataError("'max' must not be below 'min'");
        const double hold = positive(prof, "hold", 0.5), ramp = non_negative(prof, "ramp", 0.0);
        for (long i = 0; i < count; ++i) {
            const double v = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
            pieces.push_back(trapezoid(v, hold, ramp, rate));
        }
    } else if (type == "trapezoid") {
        const auto& segs = prof.at("segments");
        if (!segs.is_array() || segs.empty()) throw DataError("'segments' must be a non-empty array");
        for (const auto& s : segs)
            pieces.push_back(trapezoid(s.at("velocity").get<double>(), positive(s, "hold", 1.0),
                                       non_negative(s, "ramp", 0.0), rate));
    } else if (type == "sinusoid") {
        const double a = prof.at("amplitude").get<double>();
        const double f = positive(prof, "frequency", 0.5), dur = positive(prof, "duration", 10.0);
        Piece p;
        const std::size_t n = samples_for(dur, rate);
        for (std::size_t k = 0; k < n; ++k)
            p.qdot.push_back(a * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(k) / rate));
        pieces.push_back(std::move(p));
    } else {
        throw DataError(fmt::format("unknown profile type '{}'", type));
    }
    return pieces;
}

std::vector<FrictionModel> build_friction(const nlohmann::json& j) {
    std::vector<FrictionModel> laws;
    if (j.is_array()) {
        for (const auto& item : j) laws.push_back(item.get<FrictionModel>());
    } else {
        laws.push_back(j.get<FrictionModel>());
    }
    if (laws.empty()) throw DataError("'friction' lists no law");
    return laws;
}

} // namespace

JointDataset synth_generate(const nlohmann::json& spec) {
    JointDataset ds;
    try {
        if (!spec.is_object()) throw DataError("generator spec must be a JSON object");
        const double rate = positive(spec, "rate", 1000.0);
        const double noise = non_negative(spec, "noise_std", 0.0);
        const std::uint64_t seed = spec.value("seed", std::uint64_t{0});
        double q = spec.value("q0", 0.0);

        const auto pieces = build_profile(spec.at("profile"), rate);
        const auto laws = build_friction(spec.at("friction"));

        const nlohmann::json grav = spec.value("gravity", nlohmann::json::object());
        const double g_amp = grav.value("amplitude", 0.0), g_phase = grav.value("phase", 0.0),
                     g_off = grav.value("offset", 0.0);
        std::vector<double> loads = grav.value("loads", std::vector<double>{0.0});
        if (loads.empty()) throw DataError("'loads' must not be empty");

        const bool has_ext = spec.contains("external");
        double e_start = 0.0, e_end = 0.0, e_mag = 0.0;
        if (has_ext) {
            const auto& e = spec.at("external");
            e_start = e.at("start").get<double>();
            e_end = e.at("end").get<double>();
            e_mag = e.at("magnitude").get<double>();
            if (!(e_end > e_start)) throw DataError("external window needs end > start");
        }

        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double dt = 1.0 / rate;
        std::size_t k = 0;
        int movement = 0;
        double prev_v = 0.0;
        for (double load : loads) {
            for (const auto& piece : pieces) {
                for (double v : piece.qdot) {
                    if (k > 0) q += 0.5 * (prev_v + v) * dt;
                    prev_v = v;
                    JointSample s;
                    s.t = static_cast<double>(k) * dt;
                    s.q = q;
                    s.qdot = v;
                    s.tau_g = g_off + (g_amp + load) * std::sin(q + g_phase);
                    double tau_f = 0.0;
                    for (const auto& law : laws) tau_f += law.predict(v, s.tau_g);
                    const double ext = has_ext && s.t >= e_start && s.t < e_end ? e_mag : 0.0;
                    if (has_ext) s.tau_ext = ext;
                    s.tau_m = s.tau_g - tau_f - ext + (noise > 0.0 ? noise * gauss(rng) : 0.0);
                    s.movement = movement;
                    ds.samples.push_back(s);
                    ++k;
                }
                ++movement;
            }
        }
        ds.joint_id = spec.contains("joint_id") ? (spec.at("joint_id").is_string()
                                                       ? spec.at("joint_id").get<std::string>()
                                                       : spec.at("joint_id").dump())
                                                 : std::string("synthetic");
        ds.sampling_rate = rate;
        ds.provenance.kind = "synthetic";
        ds.provenance.generator = spec;
        ds.provenance.seed = seed;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("invalid generator spec: {}", e.what()));
    } catch (const DataError&) {
        throw;
    } catch (const Error& e) {
        throw DataError(fmt::format("invalid generator spec: {}", e.what()));
    }
    for (const auto& s : ds.samples)
        if (!std::isfinite(s.tau_m)) throw DataError("generator produced a non-finite torque");
    ds.validate();
    return ds;
}

} // namespace fricsym
