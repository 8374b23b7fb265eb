#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tslab/analysis.hpp"
#include "tslab/common.hpp"
#include "tslab/density.hpp"
#include "tslab/dynamics.hpp"
#include "tslab/fields.hpp"
#include "tslab/manifold.hpp"
#include "tslab/smoothed.hpp"

namespace tslab {

using json = nlohmann::json;

inline constexpr const char* version_string = "tslab 1.0.0";

namespace detail {

inline void require_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

inline double num(const json& obj, const std::string& where, const std::string& key,
                  std::optional<double> def = std::nullopt) {
    if (!obj.contains(key)) {
        if (def) return *def;
        throw ConfigError(where + ": missing key '" + key + "'");
    }
    if (!obj[key].is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return obj[key].get<double>();
}

inline std::string str(const json& obj, const std::string& where, const std::string& key,
                       std::optional<std::string> def = std::nullopt) {
    if (!obj.contains(key)) {
        if (def) return *def;
        throw ConfigError(where + ": missing key '" + key + "'");
    }
    if (!obj[key].is_string()) throw ConfigError(where + "." + key + ": expected a string");
    return obj[key].get<std::string>();
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

struct ScoreSpec {
    std::string kind = "exact";  // exact | leading | designed
    json target;                 // designed: density spec
    std::optional<json> perturb; // {kind, c, beta}
    double alpha = 0.0;
    std::optional<json> guidance;  // {kind, clip}
};

/// Fully resolved experiment description. Parsing is total: every key is
/// validated, unknown keys are errors, and defaults are materialized so the
/// manifest alone reproduces the run.
struct ExperimentConfig {
    json manifold;
    json data;
    std::string mode = "VE";
    int quad_nodes = 4096;
    ScoreSpec score;
    SamplerConfig sampler;
    int bins = 64;
    double delta = 0.1;
    std::string task = "sample";  // sample | expand
    std::vector<double> expand_sigmas;
    std::vector<Vec> expand_points;
    std::string output = "out";
    bool plot = false;

    static ExperimentConfig parse(const json& root);
    static ExperimentConfig parse_file(const std::string& path);
    json to_json() const;

    ManifoldChart make_chart() const;
    DataDensity make_data(const json& spec) const;
    std::shared_ptr<const SmoothedDensitySetup> make_setup() const;
    ScoreField make_field(std::shared_ptr<const SmoothedDensitySetup> setup) const;
    std::optional<GuidancePotential> make_guidance() const;
};

inline ManifoldChart ExperimentConfig::make_chart() const {
    std::string kind = detail::str(manifold, "manifold", "kind");
    if (kind == "circle") {
        detail::require_keys(manifold, "manifold", {"kind", "a"});
        return ManifoldChart::circle(detail::num(manifold, "manifold", "a", 1.0));
    }
    if (kind == "ellipse") {
        detail::require_keys(manifold, "manifold", {"kind", "a", "b"});
        return ManifoldChart::ellipse(detail::num(manifold, "manifold", "a", 1.0),
                                      detail::num(manifold, "manifold", "b", 2.0));
    }
    if (kind == "embedded_circle") {
        detail::require_keys(manifold, "manifold", {"kind", "d"});
        return ManifoldChart::embedded_circle(int(detail::num(manifold, "manifold", "d", 3.0)));
    }
    throw ConfigError("manifold.kind: unknown kind '" + kind + "'");
}

inline DataDensity ExperimentConfig::make_data(const json& spec) const {
    std::string kind = detail::str(spec, "data", "kind");
    if (kind == "uniform_in_u") {
        detail::require_keys(spec, "data", {"kind"});
        return DataDensity::uniform();
    }
    if (kind == "von_mises") {
        detail::require_keys(spec, "data", {"kind", "kappa", "mu"});
        return DataDensity::von_mises(detail::num(spec, "data", "kappa", 1.0),
                                      detail::num(spec, "data", "mu", 0.0));
    }
    if (kind == "table") {
        detail::require_keys(spec, "data", {"kind", "values"});
        if (!spec.contains("values") || !spec["values"].is_array())
            throw ConfigError("data.values: expected an array");
        return DataDensity::table(spec["values"].get<std::vector<double>>());
    }
    throw ConfigError("data.kind: unknown kind '" + kind + "'");
}

inline std::shared_ptr<const SmoothedDensitySetup> ExperimentConfig::make_setup() const {
    SmoothMode m = mode == "VP" ? SmoothMode::VP : SmoothMode::VE;
    return std::make_shared<SmoothedDensitySetup>(make_chart(), make_data(data), m, quad_nodes);
}

inline std::optional<GuidancePotential> ExperimentConfig::make_guidance() const {
    if (!score.guidance) return std::nullopt;
    const json& g = *score.guidance;
    std::string kind = detail::str(g, "score.guidance", "kind");
    double clip = detail::num(g, "score.guidance", "clip", 3.0);
    if (kind == "linear_x1") {
        GuidancePotential v;
        v.base = [](const Vec& x) { return x[0]; };
        v.clip_level = clip;
        v.descriptor = "linear_x1(clip=" + std::to_string(clip) + ")";
        return v;
    }
    throw ConfigError("score.guidance.kind: unknown kind '" + kind + "'");
}

inline ScoreField ExperimentConfig::make_field(
    std::shared_ptr<const SmoothedDensitySetup> setup) const {
    ScoreField f;
    if (score.kind == "exact") {
        f = exact_field(setup);
    } else if (score.kind == "leading") {
        f = leading_field(setup->chart());
    } else if (score.kind == "designed") {
        f = designed_field(setup->chart(), make_data(score.target));
    } else {
        throw ConfigError("score.kind: unknown kind '" + score.kind + "'");
    }
    if (score.perturb) {
        const json& p = *score.perturb;
        std::string kind = detail::str(p, "score.perturb", "kind");
        ErrorClass::Kind k;
        if (kind == "gradient")
            k = ErrorClass::Kind::gradient;
        else if (kind == "rotational")
            k = ErrorClass::Kind::rotational;
        else
            throw ConfigError("score.perturb.kind: unknown kind '" + kind + "'");
        f = perturb_field(f, k, detail::num(p, "score.perturb", "c"),
                          detail::num(p, "score.perturb", "beta"), sampler.clip_hi);
    }
    if (score.alpha != 0.0) f = tamper(f, score.alpha);
    if (auto v = make_guidance()) f = guide(f, *v);
    return f;
}

inline ExperimentConfig ExperimentConfig::parse(const json& root_in) {
    const json& root = root_in.contains("config") && root_in["config"].is_object()
                           ? root_in["config"]
                           : root_in;
    if (root_in.contains("config"))
        detail::require_keys(root_in, "manifest", {"config", "version", "seed"});
    detail::require_keys(root, "config",
                         {"manifold", "data", "mode", "quad_nodes", "score", "sampler",
                          "analysis", "task", "expand", "output", "plot"});
    ExperimentConfig c;
    if (!root.contains("manifold")) throw ConfigError("config: missing key 'manifold'");
    c.manifold = root["manifold"];
    c.data = root.contains("data") ? root["data"] : json{{"kind", "uniform_in_u"}};
    c.mode = detail::str(root, "config", "mode", "VE");
    if (c.mode != "VE" && c.mode != "VP") throw ConfigError("mode: must be VE or VP");
    c.quad_nodes = int(detail::num(root, "config", "quad_nodes", 4096.0));

    if (root.contains("score")) {
        const json& s = root["score"];
        detail::require_keys(s, "score", {"kind", "target", "perturb", "alpha", "guidance"});
        c.score.kind = detail::str(s, "score", "kind", "exact");
        c.score.alpha = detail::num(s, "score", "alpha", 0.0);
        if (s.contains("target")) c.score.target = s["target"];
        if (s.contains("perturb") && !s["perturb"].is_null()) c.score.perturb = s["perturb"];
        if (s.contains("guidance") && !s["guidance"].is_null()) c.score.guidance = s["guidance"];
    }
    if (c.score.kind == "designed" && c.score.target.is_null())
        c.score.target = json{{"kind", "uniform_in_u"}};

    if (root.contains("sampler")) {
        const json& s = root["sampler"];
        detail::require_keys(s, "sampler",
                             {"dt", "steps", "chains", "burn_in", "thin", "sigma", "seed",
                              "clip", "init", "init_scale", "workers"});
        c.sampler.dt = detail::num(s, "sampler", "dt", 1e-3);
        c.sampler.n_steps = (long long)detail::num(s, "sampler", "steps", 100000.0);
        c.sampler.n_chains = int(detail::num(s, "sampler", "chains", 8.0));
        c.sampler.burn_in =
            (long long)detail::num(s, "sampler", "burn_in", double(c.sampler.n_steps / 2));
        c.sampler.thin = int(detail::num(s, "sampler", "thin", 10.0));
        c.sampler.sigma = detail::num(s, "sampler", "sigma", 0.01);
        c.sampler.master_seed = (std::uint64_t)detail::num(s, "sampler", "seed", 1.0);
        double clip = detail::num(s, "sampler", "clip", 4.0);
        c.sampler.clip_lo = -clip;
        c.sampler.clip_hi = clip;
        std::string init = detail::str(s, "sampler", "init", "on_manifold_uniform");
        if (init == "on_manifold_uniform")
            c.sampler.init = SamplerConfig::Init::on_manifold_uniform;
        else if (init == "gaussian")
            c.sampler.init = SamplerConfig::Init::gaussian;
        else
            throw ConfigError("sampler.init: unknown kind '" + init + "'");
        c.sampler.init_scale = detail::num(s, "sampler", "init_scale", 2.0);
        c.sampler.workers = int(detail::num(s, "sampler", "workers", 0.0));
    } else {
        c.sampler.burn_in = c.sampler.n_steps / 2;
    }

    if (root.contains("analysis")) {
        const json& a = root["analysis"];
        detail::require_keys(a, "analysis", {"bins", "delta"});
        c.bins = int(detail::num(a, "analysis", "bins", 64.0));
        c.delta = detail::num(a, "analysis", "delta", 0.1);
    }

    c.task = detail::str(root, "config", "task", "sample");
    if (c.task != "sample" && c.task != "expand")
        throw ConfigError("task: must be 'sample' or 'expand'");
    if (root.contains("expand")) {
        const json& e = root["expand"];
        detail::require_keys(e, "expand", {"sigmas", "points"});
        if (e.contains("sigmas")) c.expand_sigmas = e["sigmas"].get<std::vector<double>>();
        if (e.contains("points"))
            for (const auto& p : e["points"]) c.expand_points.push_back(p.get<Vec>());
    }
    c.output = detail::str(root, "config", "output", "out");
    c.plot = root.contains("plot") ? root["plot"].get<bool>() : false;

    // parsing is total: reject bad sub-specs now, not at first use
    c.make_chart();
    c.make_data(c.data);
    if (c.score.kind == "designed") c.make_data(c.score.target);
    c.make_guidance();
    return c;
}

inline ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse(root);
}

inline json ExperimentConfig::to_json() const {
    json s = {{"kind", score.kind}, {"alpha", score.alpha}};
    if (!score.target.is_null()) s["target"] = score.target;
    if (score.perturb) s["perturb"] = *score.perturb;
    if (score.guidance) s["guidance"] = *score.guidance;
    json sampler_j = {
        {"dt", sampler.dt},
        {"steps", sampler.n_steps},
        {"chains", sampler.n_chains},
        {"burn_in", sampler.burn_in},
        {"thin", sampler.thin},
        {"sigma", sampler.sigma},
        {"seed", sampler.master_seed},
        {"clip", sampler.clip_hi},
        {"init",
         sampler.init == SamplerConfig::Init::on_manifold_uniform ? "on_manifold_uniform"
                                                                  : "gaussian"},
        {"init_scale", sampler.init_scale},
        {"workers", sampler.workers}};
    json j = {{"manifold", manifold},
              {"data", data},
              {"mode", mode},
              {"quad_nodes", quad_nodes},
              {"score", s},
              {"sampler", sampler_j},
              {"analysis", {{"bins", bins}, {"delta", delta}}},
              {"task", task},
              {"output", output},
              {"plot", plot}};
    if (!expand_sigmas.empty() || !expand_points.empty())
        j["expand"] = {{"sigmas", expand_sigmas}, {"points", expand_points}};
    return j;
}

// ---------------------------------------------------------------------------
// Artifact writers

inline void write_samples_csv(const std::string& path, const SampleSet& s, int dim) {
    std::ofstream out(path);
    out << "chain,step";
    for (int k = 0; k < dim; ++k) out << ",x" << k;
    out << "\n";
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        out << s.chain[i] << "," << s.step[i];
        for (int k = 0; k < dim; ++k) out << "," << detail::fmt(s.points[i][k]);
        out << "\n";
    }
}

struct ExperimentMetrics {
    double tv_to_uniform = std::numeric_limits<double>::quiet_NaN();
    double tv_to_pdata = std::numeric_limits<double>::quiet_NaN();
    double tv_to_guided = std::numeric_limits<double>::quiet_NaN();
    double off_mass = std::numeric_limits<double>::quiet_NaN();
    double clipped_fraction = 0.0;
    std::size_t degenerate = 0;
};

inline void write_metrics_csv(const std::string& path, const ExperimentMetrics& m) {
    std::ofstream out(path);
    out << "tv_to_uniform,tv_to_pdata,tv_to_guided,off_manifold_mass\n";
    out << detail::fmt(m.tv_to_uniform) << "," << detail::fmt(m.tv_to_pdata) << ","
        << detail::fmt(m.tv_to_guided) << "," << detail::fmt(m.off_mass) << "\n";
}

inline void write_bins_csv(const std::string& path, const ChartHistogram& h,
                           const std::vector<double>& uniform_ref,
                           const std::vector<double>& pdata_ref) {
    std::ofstream out(path);
    out << "bin,u_lo,u_hi,prob,uniform_ref,pdata_ref\n";
    double w = two_pi / h.bins;
    for (int b = 0; b < h.bins; ++b)
        out << b << "," << detail::fmt(b * w) << "," << detail::fmt((b + 1) * w) << ","
            << detail::fmt(h.probs[b]) << "," << detail::fmt(uniform_ref[b]) << ","
            << detail::fmt(pdata_ref[b]) << "\n";
}

/// Minimal static scatter plot: samples (first two coordinates) over the
/// manifold outline. Decorative only; all checks read CSV.
inline void write_scatter_svg(const std::string& path, const SampleSet& s,
                              const ManifoldChart& chart) {
    const double half = 3.0, px = 600.0;
    auto X = [&](double v) { return (v + half) / (2 * half) * px; };
    std::ofstream out(path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << int(px) << "' height='" << int(px)
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n<polyline fill='none' "
           "stroke='black' stroke-width='1' points='";
    for (int i = 0; i <= 512; ++i) {
        Vec p = chart.point(two_pi * i / 512);
        out << X(p[0]) << "," << X(-p[1]) << " ";
    }
    out << "'/>\n";
    std::size_t stride = std::max<std::size_t>(1, s.points.size() / 5000);
    for (std::size_t i = 0; i < s.points.size(); i += stride)
        out << "<circle cx='" << X(s.points[i][0]) << "' cy='" << X(-s.points[i][1])
            << "' r='1' fill='steelblue' fill-opacity='0.4'/>\n";
    out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Experiment runner

inline void write_expand_csv(const std::string& path, const ExperimentConfig& cfg) {
    auto setup = cfg.make_setup();
    std::ofstream out(path);
    int d = setup->chart().ambient_dim();
    out << "sigma";
    for (int k = 0; k < d; ++k) out << ",x" << k;
    out << ",d_M,log_p,leading_residual,order1_residual\n";
    for (const Vec& x : cfg.expand_points) {
        Projection pr = setup->chart().project(x);
        auto reports = setup->expansion_residuals(x, cfg.expand_sigmas);
        for (const auto& r : reports) {
            out << detail::fmt(r.sigma);
            for (int k = 0; k < d; ++k) out << "," << detail::fmt(x[k]);
            out << "," << detail::fmt(pr.half_sq_dist) << ","
                << detail::fmt(setup->log_p(x, r.sigma)) << ","
                << detail::fmt(r.leading_residual) << "," << detail::fmt(r.order1_residual)
                << "\n";
        }
    }
}

inline ExperimentMetrics analyze_samples(const ExperimentConfig& cfg,
                                         const SmoothedDensitySetup& setup, const SampleSet& set,
                                         const std::string& dir = "") {
    ExperimentMetrics m;
    ProjectedSamples ps = project_samples(setup.chart(), set);
    ChartHistogram h = chart_histogram(ps.u, cfg.bins);
    m.tv_to_uniform = tv_distance(h, uniform_reference(setup.chart(), cfg.bins));
    m.tv_to_pdata = tv_distance(h, setup.data().reference_table(cfg.bins));
    if (auto v = cfg.make_guidance())
        m.tv_to_guided = tv_distance(h, guided_reference(setup.chart(), *v, cfg.bins));
    m.off_mass = off_manifold_mass(ps.dist, cfg.delta);
    m.clipped_fraction = set.clipped_fraction;
    m.degenerate = ps.degenerate;
    if (!dir.empty())
        write_bins_csv(dir + "/bins.csv", h, uniform_reference(setup.chart(), cfg.bins),
                       setup.data().reference_table(cfg.bins));
    return m;
}

/// Runs one experiment and writes samples.csv, metrics.csv, manifest.json
/// (and optionally bins.csv / samples.svg) into the output directory.
inline ExperimentMetrics run_experiment(const ExperimentConfig& cfg,
                                        const std::string& out_dir_override = "") {
    std::string dir = out_dir_override.empty() ? cfg.output : out_dir_override;
    std::filesystem::create_directories(dir);

    json manifest = {{"version", version_string},
                     {"seed", cfg.sampler.master_seed},
                     {"config", cfg.to_json()}};
    {
        std::ofstream out(dir + "/manifest.json");
        out << manifest.dump(2) << "\n";
    }

    if (cfg.task == "expand") {
        write_expand_csv(dir + "/expand.csv", cfg);
        return {};
    }

    auto setup = cfg.make_setup();
    ScoreField field = cfg.make_field(setup);
    SampleSet set = run_langevin(field, cfg.sampler, setup->chart());
    write_samples_csv(dir + "/samples.csv", set, setup->chart().ambient_dim());
    ExperimentMetrics m = analyze_samples(cfg, *setup, set, dir);
    write_metrics_csv(dir + "/metrics.csv", m);
    if (cfg.plot) write_scatter_svg(dir + "/samples.svg", set, setup->chart());
    return m;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepAxis { alpha, beta, sigma };

inline SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "alpha") return SweepAxis::alpha;
    if (s == "beta") return SweepAxis::beta;
    if (s == "sigma") return SweepAxis::sigma;
    throw ConfigError("sweep axis must be alpha, beta, or sigma");
}

struct SweepRow {
    double value;
    std::string status;  // "ok" or the error message
    ExperimentMetrics metrics;
};

/// One experiment per value; per-cell failures are recorded and the sweep
/// continues. Emits <output>/sweep.csv and a subdirectory per cell.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base, SweepAxis axis,
                                       const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("sweep requires a nonempty value list");
    std::filesystem::create_directories(base.output);
    std::vector<SweepRow> rows;
    const char* axis_name = axis == SweepAxis::alpha ? "alpha"
                            : axis == SweepAxis::beta ? "beta"
                                                      : "sigma";
    for (std::size_t i = 0; i < values.size(); ++i) {
        ExperimentConfig cfg = base;
        double v = values[i];
        switch (axis) {
            case SweepAxis::alpha:
                cfg.score.alpha = v;
                break;
            case SweepAxis::beta:
                if (!cfg.score.perturb) throw ConfigError("beta sweep requires score.perturb");
                (*cfg.score.perturb)["beta"] = v;
                break;
            case SweepAxis::sigma:
                cfg.sampler.sigma = v;
                cfg.expand_sigmas = {v};
                break;
        }
        std::string cell_dir = base.output + "/sweep_" + std::string(axis_name) + "_" +
                               std::to_string(i);
        cfg.output = cell_dir;
        SweepRow row;
        row.value = v;
        try {
            row.metrics = run_experiment(cfg);
            row.status = "ok";
        } catch (const std::exception& e) {
            row.status = e.what();
        }
        rows.push_back(row);
    }
    std::ofstream out(base.output + "/sweep.csv");
    out << axis_name << ",status,tv_to_uniform,tv_to_pdata,tv_to_guided,off_manifold_mass\n";
    for (const auto& r : rows)
        out << detail::fmt(r.value) << "," << (r.status == "ok" ? "ok" : "error") << ","
            << detail::fmt(r.metrics.tv_to_uniform) << "," << detail::fmt(r.metrics.tv_to_pdata)
            << "," << detail::fmt(r.metrics.tv_to_guided) << ","
            << detail::fmt(r.metrics.off_mass) << "\n";
    return rows;
}

// ---------------------------------------------------------------------------
// Bundled presets

inline std::map<std::string, json> presets() {
    std::map<std::string, json> p;
    // Fig-2-style TS-1 run: tampered exact score recovers the arc-length
    // uniform law on the ellipse despite the von Mises data density.
    p["ellipse_ts1"] = json{
        {"manifold", {{"kind", "ellipse"}, {"a", 1.0}, {"b", 2.0}}},
        {"data", {{"kind", "von_mises"}, {"kappa", 1.0}, {"mu", 0.0}}},
        {"mode", "VE"},
        {"score", {{"kind", "exact"}, {"alpha", 1.0}}},
        {"sampler",
         {{"dt", 1e-3},
          {"steps", 3000000},
          {"chains", 16},
          {"burn_in", 300000},
          {"thin", 50},
          {"sigma", 0.01},
          {"seed", 1}}},
        {"output", "out/ellipse_ts1"}};
    // Standard Langevin on the circle: recovers p_data, not uniform.
    p["circle_langevin"] = json{
        {"manifold", {{"kind", "circle"}, {"a", 1.0}}},
        {"data", {{"kind", "von_mises"}, {"kappa", 1.0}, {"mu", 0.0}}},
        {"mode", "VE"},
        {"score", {{"kind", "exact"}, {"alpha", 0.0}}},
        {"sampler",
         {{"dt", 5e-4},
          {"steps", 1000000},
          {"chains", 16},
          {"burn_in", 200000},
          {"thin", 20},
          {"sigma", 0.05},
          {"seed", 1}}},
        {"output", "out/circle_langevin"}};
    // Small smoke run for quick checks and determinism tests.
    p["smoke"] = json{
        {"manifold", {{"kind", "ellipse"}, {"a", 1.0}, {"b", 2.0}}},
        {"data", {{"kind", "von_mises"}, {"kappa", 1.0}, {"mu", 0.0}}},
        {"mode", "VE"},
        {"score", {{"kind", "exact"}, {"alpha", 1.0}}},
        {"sampler",
         {{"dt", 2e-3},
          {"steps", 20000},
          {"chains", 4},
          {"burn_in", 10000},
          {"thin", 10},
          {"sigma", 0.05},
          {"seed", 1}}},
        {"output", "out/smoke"}};
    return p;
}

}  // namespace tslab
