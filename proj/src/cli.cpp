#include "fricsym/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include "fricsym/adapt.hpp"
#include "fricsym/dataset.hpp"
#include "fricsym/error.hpp"
#include "fricsym/model.hpp"
#include "fricsym/report.hpp"
#include "fricsym/stribeck.hpp"
#include "fricsym/synth.hpp"

namespace fricsym {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string data, spec, method, features, config, out_dir = ".", model;
    std::optional<std::uint64_t> seed;
};

json read_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open {} '{}'", what, path));
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(fmt::format("cannot parse {} '{}': {}", what, path, e.what()));
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out << text;
}

/// Collects everything the manifest has to say about one run.
class Run {
public:
    Run(std::string command, const std::vector<std::string>& args, const Options& o)
        : command_(std::move(command)), args_(args), dir_(o.out_dir), seed_(o.seed),
          started_(std::chrono::system_clock::now()) {
        fs::create_directories(dir_);
    }

    void input(const std::string& path) { inputs_.push_back(path); }
    void config(json c) { config_ = std::move(c); }
    fs::path path(const std::string& name) const { return dir_ / name; }

    void emit(const std::string& name, const std::string& text) {
        write_text(path(name), text);
        outputs_.push_back(name);
    }
    void emitted(const std::string& name) { outputs_.push_back(name); }

    void finish() {
        const auto done = std::chrono::system_clock::now();
        json m;
        m["command"] = command_;
        m["arguments"] = args_;
        m["config"] = config_;
        m["seed"] = seed_ ? json(*seed_) : json(nullptr);
        m["version"] = kVersion;
        m["timestamp"] = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(started_)));
        m["wall_clock_seconds"] = std::chrono::duration<double>(done - started_).count();
        json in = json::array();
        for (const auto& p : inputs_) in.push_back({{"path", p}, {"sha256", sha256_file(p)}});
        m["inputs"] = in;
        json out = json::array();
        for (const auto& name : outputs_) out.push_back({{"path", name}, {"sha256", sha256_file(path(name))}});
        m["outputs"] = out;
        write_text(path("manifest.json"), m.dump(2) + '\n');
    }

private:
    std::string command_;
    std::vector<std::string> args_;
    fs::path dir_;
    std::optional<std::uint64_t> seed_;
    std::chrono::system_clock::time_point started_;
    json config_ = json::object();
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
};

// ---- fit settings -------------------------------------------------------------

struct FitSettings {
    double train_fraction = 0.8;
    std::optional<std::size_t> train_movements;
    std::string points = "samples"; // or "segments"
    double segment_tolerance = 0.02;
    double segment_min_duration = 0.1;
    StribeckFitConfig stribeck;
    SymbolicConfig symbolic;
    std::uint64_t seed = 0;
};

FitSettings parse_settings(const json& j, std::optional<std::uint64_t> seed) {
    FitSettings s;
    try {
        if (j.contains("split")) {
            const auto& sp = j.at("split");
            s.train_fraction = sp.value("train_fraction", s.train_fraction);
            if (sp.contains("train_movements")) s.train_movements = sp.at("train_movements").get<std::size_t>();
        }
        s.points = j.value("points", s.points);
        if (j.contains("segment")) {
            s.segment_tolerance = j.at("segment").value("tolerance", s.segment_tolerance);
            s.segment_min_duration = j.at("segment").value("min_duration", s.segment_min_duration);
        }
        if (j.contains("stribeck")) s.stribeck = j.at("stribeck").get<StribeckFitConfig>();
        s.symbolic = j.get<SymbolicConfig>();
        s.seed = j.value("seed", s.seed);
    } catch (const json::exception& e) {
        throw DataError(fmt::format("bad config: {}", e.what()));
    } catch (const DataError&) {
        throw;
    } catch (const Error& e) {
        throw DataError(fmt::format("bad config: {}", e.what()));
    }
    if (seed) s.seed = *seed;
    s.stribeck.seed = s.seed;
    s.symbolic.gp.seed = s.seed;
    s.symbolic.parfam.seed = s.seed;
    if (s.points != "samples" && s.points != "segments") throw DataError("'points' must be samples or segments");
    if (!(s.train_fraction > 0.0 && s.train_fraction < 1.0)) throw DataError("'train_fraction' must lie in (0, 1)");
    return s;
}

json settings_json(const FitSettings& s) {
    json j;
    j["split"] = {{"train_fraction", s.train_fraction}};
    if (s.train_movements) j["split"]["train_movements"] = *s.train_movements;
    j["points"] = s.points;
    j["segment"] = {{"tolerance", s.segment_tolerance}, {"min_duration", s.segment_min_duration}};
    j["stribeck"] = s.stribeck;
    j.update(json(s.symbolic));
    j["seed"] = s.seed;
    return j;
}

struct Prepared {
    Points train;
    Points test;
    std::string split; // human-readable split description
    json split_info;
};

Prepared prepare(const JointDataset& ds, const FitSettings& s, const std::vector<Feature>& features) {
    JointDataset train, test;
    Prepared p;
    const auto ids = ds.movements();
    if (ds.has_movements() && ids.size() >= 2) {
        std::size_t n = s.train_movements.value_or(
            static_cast<std::size_t>(std::floor(s.train_fraction * static_cast<double>(ids.size()))));
        n = std::clamp<std::size_t>(n, 1, ids.size() - 1);
        auto split = split_movements(ds, n, s.seed);
        train = std::move(split.train);
        test = std::move(split.test);
        p.split = fmt::format("{} of {} movements for training (seed {})", n, ids.size(), s.seed);
        p.split_info = {{"kind", "movements"}, {"train", split.train_movements}, {"test", split.test_movements}};
    } else {
        train.joint_id = test.joint_id = ds.joint_id;
        for (std::size_t i = 0; i < ds.samples.size(); ++i) (i % 5 == 4 ? test : train).samples.push_back(ds.samples[i]);
        p.split = "every fifth sample held out";
        p.split_info = {{"kind", "interleaved"}, {"stride", 5}};
    }
    if (s.points == "segments") {
        const auto a = segment_constant_velocity(train, s.segment_tolerance, s.segment_min_duration);
        const auto b = segment_constant_velocity(test, s.segment_tolerance, s.segment_min_duration);
        p.train = build_points(a, features);
        p.test = build_points(b, features);
        p.split += ", segment means";
    } else {
        p.train = build_points(train, features);
        p.test = build_points(test, features);
    }
    if (p.train.y.size() < 2) throw DataError("training split holds fewer than two points");
    return p;
}

std::vector<double> qdot_and_tau(const Points& p, std::vector<double>& tau_g) {
    // Points carry features only; recover qdot/tau_g columns for model prediction.
    std::vector<double> qdot(p.y.size(), 0.0);
    tau_g.assign(p.y.size(), 0.0);
    for (std::size_t c = 0; c < p.features.size(); ++c) {
        const auto col = p.X.col(c);
        if (p.features[c] == Feature::Qdot) std::copy(col.begin(), col.end(), qdot.begin());
        if (p.features[c] == Feature::TauG) std::copy(col.begin(), col.end(), tau_g.begin());
    }
    return qdot;
}

std::vector<double> predict_points(const FrictionModel& m, const Points& p) {
    if (m.kind() == FrictionModel::Kind::Symbolic && m.features() == p.features) return evaluate(m.expr(), p.X);
    std::vector<double> tau_g;
    const auto qdot = qdot_and_tau(p, tau_g);
    return m.predict(qdot, tau_g);
}

std::vector<Feature> features_or(const std::string& text, std::vector<Feature> fallback) {
    return text.empty() ? fallback : parse_features(text);
}

void write_report(Run& run, const MetricsReport& r) {
    run.emit("report.json", json(r).dump(2) + '\n');
    run.emit("report.txt", render_text(r));
}

// ---- commands ---------------------------------------------------------------------

int cmd_synth(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
    if (o.spec.empty()) throw DataError("synth needs --spec");
    json spec = read_json_file(o.spec, "spec");
    if (o.seed) {
        if (!spec.is_object()) throw DataError("generator spec must be a JSON object");
        spec["seed"] = *o.seed;
    }
    const JointDataset ds = synth_generate(spec);
    Run run("synth", args, o);
    run.input(o.spec);
    run.config(spec);
    save_dataset(ds, run.path("dataset.csv"));
    run.emitted("dataset.csv");
    run.emitted(metadata_path("dataset.csv").string());
    run.finish();
    out << fmt::format("wrote {} samples to {}\n", ds.samples.size(), run.path("dataset.csv").string());
    return kExitOk;
}

int cmd_fit(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
    if (o.data.empty()) throw DataError("fit needs --data");
    if (o.method.empty()) throw DataError("fit needs --method");
    const JointDataset ds = load_dataset(o.data);
    const json cfg = o.config.empty() ? json::object() : read_json_file(o.config, "config");
    const FitSettings s = parse_settings(cfg, o.seed);

    const bool baseline = o.method == "baseline-sym" || o.method == "baseline-asym";
    if (!baseline && o.method != "gp" && o.method != "parfam")
        throw DataError(fmt::format("unknown method '{}' (baseline-sym, baseline-asym, gp, parfam)", o.method));
    std::vector<Feature> features =
        features_or(o.features, baseline ? std::vector{Feature::Qdot} : std::vector{Feature::Qdot, Feature::SignQdot});
    if (baseline && features != std::vector{Feature::Qdot})
        throw DataError("the Stribeck baselines read qdot only");

    Run run("fit", args, o);
    run.input(o.data);
    if (!o.config.empty()) run.input(o.config);
    run.config(settings_json(s));

    // fit on qdot/tau_g-augmented points so every model kind can be scored on them
    std::vector<Feature> all = features;
    for (Feature need : {Feature::Qdot, Feature::TauG})
        if (std::find(all.begin(), all.end(), need) == all.end()) all.push_back(need);
    const Prepared p = prepare(ds, s, all);

    FrictionModel model;
    if (baseline) {
        const auto qdot = p.train.X.col(0);
        if (o.method == "baseline-sym")
            model = FrictionModel::stribeck(fit_symmetric(qdot, p.train.y, s.stribeck).params);
        else
            model = FrictionModel::asymmetric(fit_asymmetric(qdot, p.train.y, s.stribeck).model);
    } else {
        Matrix X(p.train.y.size(), features.size());
        for (std::size_t c = 0; c < features.size(); ++c) {
            const auto col = p.train.X.col(c);
            std::copy(col.begin(), col.end(), X.col(c).begin());
        }
        const Engine engine = parse_engine(o.method);
        Expr e = fit_symbolic(X, p.train.y, engine, s.symbolic, parfam::Structure::friction_default(features.size()));
        model = FrictionModel::symbolic(features, std::move(e));
    }
    model.joint_id = ds.joint_id;

    MetricsReport r;
    r.dataset = ds.joint_id;
    r.split = p.split;
    const auto pred_train = predict_points(model, p.train);
    r.rows.push_back(make_row(o.method, "train", pred_train, p.train.y, model.complexity(), model.formula()));
    if (!p.test.y.empty()) {
        const auto pred_test = predict_points(model, p.test);
        r.rows.push_back(make_row(o.method, "test", pred_test, p.test.y, model.complexity(), model.formula()));
    }

    json artifact = model;
    artifact["training"] = {{"method", o.method},           {"data_sha256", sha256_file(o.data)},
                            {"features", feature_names(features)}, {"settings", settings_json(s)},
                            {"split", p.split_info}};
    run.emit("model.json", artifact.dump(2) + '\n');
    write_report(run, r);
    run.finish();
    out << render_text(r);
    return kExitOk;
}

FrictionModel load_model(const std::string& path, json* raw = nullptr) {
    if (path.empty()) throw DataError("--model is required");
    json j = read_json_file(path, "model");
    if (raw) *raw = j;
    return j.get<FrictionModel>();
}

int cmd_eval(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
    if (o.data.empty()) throw DataError("eval needs --data");
    json raw;
    const FrictionModel model = load_model(o.model, &raw);
    const JointDataset ds = load_dataset(o.data);
    check_compatible(model, ds);

    Run run("eval", args, o);
    run.input(o.model);
    run.input(o.data);

    const auto target = friction_targets(ds);
    const auto pred = model.predict(ds);
    const std::string method = raw.contains("training") ? raw["training"].value("method", "model") : "model";

    MetricsReport r;
    r.dataset = ds.joint_id;
    r.split = "all samples";
    r.rows.push_back(make_row(method, "all", pred, target, model.complexity(), model.formula()));

    // on the training file itself, replay the fit's split so its rows match
    if (raw.contains("training") && raw["training"].value("data_sha256", "") == sha256_file(o.data)) {
        const auto& t = raw["training"];
        const FitSettings s = parse_settings(t.at("settings"), std::nullopt);
        std::vector<Feature> feats;
        for (const auto& f : t.at("features")) feats.push_back(parse_feature(f.get<std::string>()));
        for (Feature need : {Feature::Qdot, Feature::TauG})
            if (std::find(feats.begin(), feats.end(), need) == feats.end()) feats.push_back(need);
        const Prepared p = prepare(ds, s, feats);
        r.split = p.split;
        r.rows.push_back(make_row(method, "train", predict_points(model, p.train), p.train.y, model.complexity(),
                                  model.formula()));
        if (!p.test.y.empty())
            r.rows.push_back(make_row(method, "test", predict_points(model, p.test), p.test.y, model.complexity(),
                                      model.formula()));
    }

    std::string csv = "t,tau_f,tau_f_hat,error\n";
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        csv += fmt::format("{},{},{},{}\n", ds.samples[i].t, target[i], pred[i], pred[i] - target[i]);
    run.emit("predictions.csv", csv);
    write_report(run, r);
    run.finish();
    out << render_text(r);
    return kExitOk;
}

int cmd_adapt(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
    if (o.data.empty()) throw DataError("adapt needs --data");
    const FrictionModel base = load_model(o.model);
    const JointDataset ds = load_dataset(o.data);
    check_compatible(base, ds);
    const Engine engine = parse_engine(o.method.empty() ? "gp" : o.method);
    const auto features = features_or(o.features, default_residual_features());
    const json cfg = o.config.empty() ? json::object() : read_json_file(o.config, "config");
    const FitSettings s = parse_settings(cfg, o.seed);

    Run run("adapt", args, o);
    run.input(o.model);
    run.input(o.data);
    if (!o.config.empty()) run.input(o.config);
    run.config(settings_json(s));

    const Adaptation a = adapt_residual(base, ds, engine, features, s.symbolic);

    const auto target = friction_targets(ds);
    MetricsReport r;
    r.dataset = ds.joint_id;
    r.split = "adaptation set";
    r.rows.push_back(make_row("base", "all", base.predict(ds), target, base.complexity(), base.formula()));
    r.rows.push_back(make_row(fmt::format("base+{}", name(engine)), "all", a.combined.predict(ds), target,
                              a.combined.complexity(), a.combined.formula()));
    r.extra["residual_formula"] = a.residual.formula();
    r.extra["residual_features"] = feature_names(features);

    json artifact = a.combined;
    artifact["training"] = {{"method", fmt::format("adapt-{}", name(engine))},
                            {"data_sha256", sha256_file(o.data)},
                            {"features", feature_names(features)}};
    run.emit("model.json", artifact.dump(2) + '\n');
    write_report(run, r);
    run.finish();
    out << render_text(r);
    return kExitOk;
}

int cmd_external(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
    if (o.data.empty()) throw DataError("external needs --data");
    const FrictionModel model = load_model(o.model);
    const JointDataset ds = load_dataset(o.data);
    check_compatible(model, ds);

    Run run("external", args, o);
    run.input(o.model);
    run.input(o.data);

    const auto friction = model.predict(ds);
    const bool truth = ds.has_tau_ext();
    std::string csv = truth ? "t,tau_ext_hat,tau_ext,error\n" : "t,tau_ext_hat\n";
    std::vector<double> est, meas;
    double peak = 0.0;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        const double e = external_torque(s, friction[i]);
        est.push_back(e);
        peak = std::max(peak, std::abs(e));
        if (truth) {
            meas.push_back(*s.tau_ext);
            csv += fmt::format("{},{},{},{}\n", s.t, e, *s.tau_ext, e - *s.tau_ext);
        } else {
            csv += fmt::format("{},{}\n", s.t, e);
        }
    }

    MetricsReport r;
    r.dataset = ds.joint_id;
    r.split = "all samples";
    r.rows.push_back(make_row("friction", "all", friction, friction_targets(ds), model.complexity(), model.formula()));
    r.extra["samples"] = ds.samples.size();
    r.extra["max_abs_tau_ext_hat"] = peak;
    if (truth) r.extra["external_mae"] = mean_absolute_error(est, meas);

    run.emit("external.csv", csv);
    write_report(run, r);
    run.finish();
    out << render_text(r);
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Symbolic friction identification for robot joints", "fricsym"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Options o;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--out-dir", o.out_dir, "Directory for outputs and the manifest");
        sub->add_option("--seed", o.seed, "Seed overriding the config");
    };
    auto* synth = app.add_subcommand("synth", "Generate a synthetic joint log");
    synth->add_option("--spec", o.spec, "Generator spec (JSON)")->required();
    common(synth);

    auto* fit = app.add_subcommand("fit", "Fit a friction model");
    fit->add_option("--data", o.data, "Dataset CSV")->required();
    fit->add_option("--method", o.method, "baseline-sym | baseline-asym | gp | parfam")->required();
    fit->add_option("--features", o.features, "Comma-separated features");
    fit->add_option("--config", o.config, "Fit config (JSON)");
    common(fit);

    auto* eval = app.add_subcommand("eval", "Score a model on a dataset");
    eval->add_option("--model", o.model, "Model JSON")->required();
    eval->add_option("--data", o.data, "Dataset CSV")->required();
    common(eval);

    auto* adapt = app.add_subcommand("adapt", "Learn an additive residual for a base model");
    adapt->add_option("--model", o.model, "Base model JSON")->required();
    adapt->add_option("--data", o.data, "Adaptation dataset CSV")->required();
    adapt->add_option("--method", o.method, "gp | parfam");
    adapt->add_option("--features", o.features, "Residual features");
    adapt->add_option("--config", o.config, "Engine config (JSON)");
    common(adapt);

    auto* ext = app.add_subcommand("external", "Estimate external torque");
    ext->add_option("--model", o.model, "Model JSON")->required();
    ext->add_option("--data", o.data, "Dataset CSV")->required();
    common(ext);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (synth->parsed()) return cmd_synth(o, args, out);
        if (fit->parsed()) return cmd_fit(o, args, out);
        if (eval->parsed()) return cmd_eval(o, args, out);
        if (adapt->parsed()) return cmd_adapt(o, args, out);
        if (ext->parsed()) return cmd_external(o, args, out);
    } catch (const ModelMismatch& e) {
        err << "error: " << e.what() << '\n';
        return kExitMismatch;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFit;
    }
    return kExitInput;
}

} // namespace fricsym
