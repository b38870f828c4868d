#include "fricsym/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "fricsym/error.hpp"

namespace fricsym {

namespace {

bool finite_sample(const JointSample& s) {
    return std::isfinite(s.t) && std::isfinite(s.q) && std::isfinite(s.qdot) && std::isfinite(s.tau_m) &&
           std::isfinite(s.tau_g) && (!s.tau_ext || std::isfinite(*s.tau_ext));
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        const auto a = cell.find_first_not_of(" \t\r");
        const auto b = cell.find_last_not_of(" \t\r");
        cells.push_back(a == std::string::npos ? std::string() : cell.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_number(const std::string& cell, std::size_t line, std::string_view column) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != cell.size())
        throw DataError(fmt::format("line {}: column {}: not a number: '{}'", line, column, cell));
    return v;
}

} // namespace

// ---- dataset -----------------------------------------------------------------

void JointDataset::validate() const {
    if (samples.empty()) throw DataError("dataset has no samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!finite_sample(samples[i])) throw DataError(fmt::format("sample {} has a non-finite field", i));
        if (i > 0 && !(samples[i].t > samples[i - 1].t))
            throw DataError(fmt::format("time is not strictly increasing at sample {}", i));
    }
    if (sampling_rate < 0.0 || !std::isfinite(sampling_rate)) throw DataError("invalid sampling rate");
    if (sampling_rate > 0.0 && samples.size() > 1) {
        const double dt = 1.0 / sampling_rate;
        for (std::size_t i = 1; i < samples.size(); ++i) {
            const double gap = samples[i].t - samples[i - 1].t;
            if (std::abs(gap - dt) > 0.01 * dt)
                throw DataError(fmt::format("sample spacing {} at sample {} deviates from the declared rate", gap, i));
        }
    }
}

bool JointDataset::has_tau_ext() const {
    return !samples.empty() && std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.tau_ext.has_value(); });
}

bool JointDataset::has_movements() const {
    return !samples.empty() && std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.movement.has_value(); });
}

std::vector<int> JointDataset::movements() const {
    std::vector<int> ids;
    for (const auto& s : samples)
        if (s.movement && std::find(ids.begin(), ids.end(), *s.movement) == ids.end()) ids.push_back(*s.movement);
    return ids;
}

std::vector<double> friction_targets(const JointDataset& ds) {
    std::vector<double> out;
    out.reserve(ds.samples.size());
    for (const auto& s : ds.samples) out.push_back(friction_target(s));
    return out;
}

// ---- csv ---------------------------------------------------------------------

JointDataset read_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") != std::string::npos) break;
    }
    if (lineno == 0 || line.find_first_not_of(" \t\r") == std::string::npos) throw DataError("empty CSV input");

    const auto header = split_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (col.count(header[i])) throw DataError(fmt::format("duplicate column '{}'", header[i]));
        col[header[i]] = i;
    }
    for (const char* required : {"t", "q", "qdot", "tau_m", "tau_g"})
        if (!col.count(required)) throw DataError(fmt::format("missing column '{}'", required));
    const auto at = [&](const char* key) { return col.at(key); };
    const bool has_ext = col.count("tau_ext") > 0;
    const bool has_mov = col.count("movement") > 0;

    JointDataset ds;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            throw DataError(fmt::format("line {}: expected {} cells, got {}", lineno, header.size(), cells.size()));
        JointSample s;
        s.t = parse_number(cells[at("t")], lineno, "t");
        s.q = parse_number(cells[at("q")], lineno, "q");
        s.qdot = parse_number(cells[at("qdot")], lineno, "qdot");
        s.tau_m = parse_number(cells[at("tau_m")], lineno, "tau_m");
        s.tau_g = parse_number(cells[at("tau_g")], lineno, "tau_g");
        if (has_ext && !cells[at("tau_ext")].empty()) s.tau_ext = parse_number(cells[at("tau_ext")], lineno, "tau_ext");
        if (has_mov && !cells[at("movement")].empty()) {
            const double m = parse_number(cells[at("movement")], lineno, "movement");
            if (m != std::floor(m)) throw DataError(fmt::format("line {}: movement id must be an integer", lineno));
            s.movement = static_cast<int>(m);
        }
        ds.samples.push_back(s);
    }
    if (ds.samples.empty()) throw DataError("CSV has a header but no rows");
    return ds;
}

void write_csv(const JointDataset& ds, std::ostream& out) {
    const bool ext = std::any_of(ds.samples.begin(), ds.samples.end(), [](const auto& s) { return s.tau_ext.has_value(); });
    const bool mov = std::any_of(ds.samples.begin(), ds.samples.end(), [](const auto& s) { return s.movement.has_value(); });
    out << "t,q,qdot,tau_m,tau_g";
    if (ext) out << ",tau_ext";
    if (mov) out << ",movement";
    out << '\n';
    fmt::memory_buffer buf;
    for (const auto& s : ds.samples) {
        buf.clear();
        fmt::format_to(std::back_inserter(buf), "{},{},{},{},{}", s.t, s.q, s.qdot, s.tau_m, s.tau_g);
        if (ext) {
            buf.push_back(',');
            if (s.tau_ext) fmt::format_to(std::back_inserter(buf), "{}", *s.tau_ext);
        }
        if (mov) {
            buf.push_back(',');
            if (s.movement) fmt::format_to(std::back_inserter(buf), "{}", *s.movement);
        }
        buf.push_back('\n');
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
}

std::filesystem::path metadata_path(const std::filesystem::path& csv) {
    auto p = csv;
    p.replace_extension(".meta.json");
    return p;
}

nlohmann::json metadata_json(const JointDataset& ds) {
    nlohmann::json j;
    j["joint_id"] = ds.joint_id;
    j["sampling_rate"] = ds.sampling_rate;
    j["samples"] = ds.samples.size();
    j["provenance"] = {{"kind", ds.provenance.kind}, {"seed", ds.provenance.seed}};
    if (!ds.provenance.generator.is_null()) j["provenance"]["generator"] = ds.provenance.generator;
    return j;
}

void apply_metadata(const nlohmann::json& j, JointDataset& ds) {
    try {
        if (j.contains("joint_id")) ds.joint_id = j.at("joint_id").get<std::string>();
        if (j.contains("sampling_rate")) ds.sampling_rate = j.at("sampling_rate").get<double>();
        if (j.contains("provenance")) {
            const auto& p = j.at("provenance");
            ds.provenance.kind = p.value("kind", std::string("measured"));
            ds.provenance.seed = p.value("seed", std::uint64_t{0});
            if (p.contains("generator")) ds.provenance.generator = p.at("generator");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("bad dataset metadata: {}", e.what()));
    }
}

JointDataset load_dataset(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) throw DataError(fmt::format("cannot open dataset '{}'", csv.string()));
    JointDataset ds = read_csv(in);
    const auto meta = metadata_path(csv);
    if (std::filesystem::exists(meta)) {
        std::ifstream m(meta);
        nlohmann::json j;
        try {
            m >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(fmt::format("cannot parse '{}': {}", meta.string(), e.what()));
        }
        apply_metadata(j, ds);
    } else {
        ds.joint_id = csv.stem().string();
    }
    ds.validate();
    return ds;
}

void save_dataset(const JointDataset& ds, const std::filesystem::path& csv) {
    {
        std::ofstream out(csv, std::ios::binary);
        if (!out) throw DataError(fmt::format("cannot write '{}'", csv.string()));
        write_csv(ds, out);
    }
    std::ofstream meta(metadata_path(csv), std::ios::binary);
    if (!meta) throw DataError(fmt::format("cannot write '{}'", metadata_path(csv).string()));
    meta << metadata_json(ds).dump(2) << '\n';
}

// ---- segmentation ------------------------------------------------------------

std::vector<Segment> segment_constant_velocity(const JointDataset& ds, double tolerance, double min_duration) {
    if (!(tolerance > 0.0)) throw Error("velocity tolerance must be positive");
    const auto& s = ds.samples;
    const std::size_t n = s.size();
    // one sample stands for a full sampling interval
    double dt = ds.sampling_rate > 0.0 ? 1.0 / ds.sampling_rate : 0.0;
    if (dt == 0.0 && n > 1) {
        std::vector<double> gaps;
        for (std::size_t i = 1; i < n; ++i) gaps.push_back(s[i].t - s[i - 1].t);
        std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
        dt = gaps[gaps.size() / 2];
    }

    std::vector<Segment> out;
    std::size_t i = 0;
    while (i < n) {
        double sum = s[i].qdot, lo = s[i].qdot, hi = s[i].qdot;
        std::size_t j = i + 1;
        for (; j < n; ++j) {
            if (s[j].movement != s[i].movement) break;
            const double nsum = sum + s[j].qdot;
            const double nlo = std::min(lo, s[j].qdot), nhi = std::max(hi, s[j].qdot);
            const double mean = nsum / static_cast<double>(j - i + 1);
            if (nhi - mean > tolerance || mean - nlo > tolerance) break;
            sum = nsum;
            lo = nlo;
            hi = nhi;
        }
        const double duration = s[j - 1].t - s[i].t + dt;
        if (duration + 1e-12 < min_duration) {
            ++i;
            continue;
        }
        Segment seg;
        seg.begin = i;
        seg.end = j;
        seg.duration = duration;
        seg.movement = s[i].movement;
        double f = 0.0, g = 0.0;
        for (std::size_t k = i; k < j; ++k) {
            f += friction_target(s[k]);
            g += s[k].tau_g;
        }
        const double cnt = static_cast<double>(j - i);
        seg.qdot = sum / cnt;
        seg.tau_f = f / cnt;
        seg.tau_g = g / cnt;
        out.push_back(seg);
        i = j;
    }
    return out;
}

// ---- features ------------------------------------------------------------------

Feature parse_feature(std::string_view text) {
    std::string t;
    for (char c : text)
        if (c != ' ') t.push_back(c);
    if (t == "qdot") return Feature::Qdot;
    if (t == "sgn_qdot" || t == "sign_qdot" || t == "sgn(qdot)" || t == "sign(qdot)") return Feature::SignQdot;
    if (t == "tau_g") return Feature::TauG;
    if (t == "sgn_tau_g" || t == "sign_tau_g" || t == "sgn(tau_g)" || t == "sign(tau_g)") return Feature::SignTauG;
    throw DataError(fmt::format("unknown feature '{}'", text));
}

std::string_view name(Feature f) {
    switch (f) {
    case Feature::Qdot: return "qdot";
    case Feature::SignQdot: return "sgn_qdot";
    case Feature::TauG: return "tau_g";
    case Feature::SignTauG: return "sgn_tau_g";
    }
    return "?";
}

std::vector<Feature> parse_features(std::string_view text) {
    std::vector<Feature> out;
    std::size_t start = 0;
    int depth = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i < text.size()) {
            if (text[i] == '(') ++depth;
            if (text[i] == ')') --depth;
            if (text[i] != ',' || depth > 0) continue;
        }
        out.push_back(parse_feature(text.substr(start, i - start)));
        start = i + 1;
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (out[i] == out[j]) throw DataError(fmt::format("feature '{}' listed twice", name(out[i])));
    return out;
}

std::vector<std::string> feature_names(std::span<const Feature> features) {
    std::vector<std::string> out;
    for (Feature f : features) out.emplace_back(name(f));
    return out;
}

double feature_value(Feature f, double qdot, double tau_g) {
    const auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    switch (f) {
    case Feature::Qdot: return qdot;
    case Feature::SignQdot: return sgn(qdot);
    case Feature::TauG: return tau_g;
    case Feature::SignTauG: return sgn(tau_g);
    }
    return 0.0;
}

Matrix feature_matrix(const JointDataset& ds, std::span<const Feature> features) {
    Matrix X(ds.samples.size(), features.size());
    for (std::size_t c = 0; c < features.size(); ++c)
        for (std::size_t r = 0; r < ds.samples.size(); ++r)
            X(r, c) = feature_value(features[c], ds.samples[r].qdot, ds.samples[r].tau_g);
    return X;
}

Points build_points(const JointDataset& ds, std::span<const Feature> features) {
    if (features.empty()) throw DataError("feature set is empty");
    return {{features.begin(), features.end()}, feature_matrix(ds, features), friction_targets(ds)};
}

Points build_points(std::span<const Segment> segments, std::span<const Feature> features) {
    if (features.empty()) throw DataError("feature set is empty");
    Points p{{features.begin(), features.end()}, Matrix(segments.size(), features.size()), {}};
    for (std::size_t r = 0; r < segments.size(); ++r) {
        for (std::size_t c = 0; c < features.size(); ++c)
            p.X(r, c) = feature_value(features[c], segments[r].qdot, segments[r].tau_g);
        p.y.push_back(segments[r].tau_f);
    }
    return p;
}

// ---- splitting -------------------------------------------------------------------

MovementSplit split_movements(const JointDataset& ds, std::size_t n_train, std::uint64_t seed) {
    if (!ds.has_movements()) throw DataError("dataset carries no movement ids");
    std::vector<int> ids = ds.movements();
    if (n_train >= ids.size())
        throw DataError(fmt::format("cannot train on {} of {} movements", n_train, ids.size()));

    std::map<int, std::vector<std::size_t>> rows;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) rows[*ds.samples[i].movement].push_back(i);
    std::size_t per = rows.begin()->second.size();
    for (const auto& [id, r] : rows) per = std::min(per, r.size());

    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);

    MovementSplit out;
    out.train_movements.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test_movements.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    std::sort(out.train_movements.begin(), out.train_movements.end());
    std::sort(out.test_movements.begin(), out.test_movements.end());

    const auto take = [&](const std::vector<int>& chosen, JointDataset& target) {
        target.joint_id = ds.joint_id;
        target.sampling_rate = 0.0; // thinning breaks uniform spacing
        target.provenance = ds.provenance;
        std::vector<std::size_t> keep;
        for (int id : chosen) {
            const auto& r = rows.at(id);
            // evenly spaced subsample keeps both ends of the run
            for (std::size_t k = 0; k < per; ++k) {
                const std::size_t pos = per == 1 ? 0 : k * (r.size() - 1) / (per - 1);
                keep.push_back(r[pos]);
            }
        }
        std::sort(keep.begin(), keep.end());
        for (std::size_t i : keep) target.samples.push_back(ds.samples[i]);
    };
    take(out.train_movements, out.train);
    take(out.test_movements, out.test);
    return out;
}

std::size_t quasi_static_violations(const JointDataset& ds, double threshold) {
    std::size_t count = 0;
    const auto& s = ds.samples;
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double dt = s[i].t - s[i - 1].t;
        if (dt <= 0.0) continue;
        if (std::abs((s[i].qdot - s[i - 1].qdot) / dt) > threshold) ++count;
    }
    return count;
}

} // namespace fricsym
