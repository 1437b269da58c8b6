#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "resokam/config.hpp"
#include "resokam/covering.hpp"
#include "resokam/lattice.hpp"
#include "resokam/model.hpp"
#include "resokam/parallel.hpp"
#include "resokam/resgraph.hpp"
#include "resokam/secular.hpp"
#include "resokam/svg.hpp"

namespace resokam::cli {

inline constexpr int schema_version = 1;

enum Exit { ok = 0, internal = 1, usage = 2, violation = 3 };

struct Context {
    std::filesystem::path out;
    int threads = 1;
};

/// Results of one command plus side files (name, content) for the output directory.
struct Outcome {
    json results = json::object();
    std::vector<std::pair<std::string, std::string>> files;
    std::string summary;
    int exit_code = ok;
};

// ------ serialisation helpers ------ //

inline json to_json(const Vec& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(v[i]);
    return a;
}

inline json to_json(const IntMatrix& m) { return m.to_rows(); }

inline json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline json frame_json(const UnimodularFrame& f)
{
    return {{"k", f.k.entries()},
            {"A", to_json(f.A)},
            {"Ainv", to_json(f.Ainv)},
            {"det", f.certificate.det},
            {"bounds_ok", f.certificate.ok()},
            {"r_tilde_k", f.r_tilde_k},
            {"r_tilde", f.r_tilde},
            {"t_k", f.t_k},
            {"t_tilde_k", f.t_tilde_k},
            {"frak_r_k", f.frak_r_k},
            {"frak_r_tilde_k", f.frak_r_tilde},
            {"varpi0_k", f.varpi0_k},
            {"r_hat_k", f.r_hat_k}};
}

inline json params_json(const CoveringParams& p)
{
    return {{"n", p.n}, {"eps", p.eps}, {"K", p.K},   {"K0", p.K0}, {"sHat", p.s_hat},
            {"nu", p.nu}, {"alpha", p.alpha}, {"c1", p.c1}, {"C", p.C},   {"b", p.b}};
}

inline json constants_json(const ModelConstants& c)
{
    return {{"gamma", c.gamma}, {"L", c.L}, {"Lbar", c.Lbar}, {"M", c.M}};
}

// ------ config accessors ------ //

inline const json& need(const json& cfg, const char* key)
{
    if (!cfg.contains(key) || cfg[key].is_null())
        throw ConfigError(std::string(key) + ": required");
    return cfg[key];
}

inline ConvexModel model_of(const json& cfg) { return build_model(model_from_json(need(cfg, "model"))); }

inline CoveringParams params_of(const json& cfg, const ConvexModel& m) { return resolve_params(m, params_from_json(need(cfg, "params"))); }

inline ResonanceVector k_of(const json& cfg)
{
    try {
        return ResonanceVector(need(cfg, "k").get<IVec>());
    } catch (const json::exception&) {
        throw ConfigError("k: expected integers");
    } catch (const DomainError& e) {
        throw ParameterError(std::string("k: ") + e.what());
    }
}

inline std::optional<double> opt_number(const json& cfg, const char* key)
{
    if (!cfg.contains(key) || cfg[key].is_null())
        return std::nullopt;
    return detail::get_number(cfg[key], key);
}

inline std::optional<Vec> opt_vector(const json& cfg, const char* key)
{
    if (!cfg.contains(key) || cfg[key].is_null())
        return std::nullopt;
    return detail::get_vector(cfg[key], key);
}

template <class T>
T value_or(const json& cfg, const char* key, T fallback)
{
    if (!cfg.contains(key) || cfg[key].is_null())
        return fallback;
    try {
        return cfg[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(key) + ": wrong type");
    }
}

inline RotatedModel rotated_of(const json& cfg, const ConvexModel& m)
{
    const ResonanceVector k = k_of(cfg);
    if (k.dim() != m.dim)
        throw ParameterError("k: must have dim entries");
    return build_rotated(m, k, opt_number(cfg, "r_tilde"));
}

inline TrigPotential potential_of(const json& cfg)
{
    const json& rows = need(cfg, "potential");
    TrigPotential f;
    bool first = true;
    for (const auto& row : rows) {
        if (!row.is_array() || row.size() < 3)
            throw ConfigError("potential: each mode needs m1,...,mn, re, im");
        const std::size_t n = row.size() - 2;
        if (first) {
            f = TrigPotential(static_cast<int>(n));
            first = false;
        }
        IVec m(n);
        for (std::size_t i = 0; i < n; ++i)
            m[i] = row[i].get<std::int64_t>();
        f.add(m, Complex(row[n].get<double>(), row[n + 1].get<double>()));
    }
    if (first)
        throw ConfigError("potential: no modes");
    return f;
}

inline json potential_json(const TrigPotential& f)
{
    json rows = json::array();
    for (const auto& [m, c] : f.modes()) {
        json row = m;
        row.push_back(c.real());
        row.push_back(c.imag());
        rows.push_back(row);
    }
    return rows;
}

// ------ commands ------ //

inline Outcome lattice_enumerate(const json& cfg, const Context&)
{
    const int n = value_or<int>(cfg, "n", 0);
    const double K = detail::get_number(need(cfg, "K"), "K");
    std::vector<ResonanceVector> ks;
    if (auto s = opt_vector(cfg, "s")) {
        if (s->size() != n)
            throw ParameterError("s: must have n entries");
        ks = enumerate_generators(n, K, NormKind::weighted, to_std(*s));
    } else {
        ks = enumerate_generators(n, K);
    }
    std::ostringstream csv;
    for (int i = 0; i < n; ++i)
        csv << "k" << i + 1 << ",";
    csv << "norm1,normInf\n";
    for (const auto& k : ks) {
        for (auto v : k.entries())
            csv << v << ",";
        csv << k.norm1() << "," << k.norm_inf() << "\n";
    }
    Outcome o;
    o.files.emplace_back("generators.csv", csv.str());
    o.results = {{"count", ks.size()}, {"csv", "generators.csv"}};
    o.summary = std::to_string(ks.size()) + " generators";
    return o;
}

inline Outcome lattice_complete(const json& cfg, const Context&)
{
    const ResonanceVector k = k_of(cfg);
    const IntMatrix A = detail::complete_primitive(k.entries());
    IntMatrix inv;
    const FrameCertificate c = certify_completion(k, A, &inv);
    Outcome o;
    o.results = {{"k", k.entries()}, {"A", to_json(A)}, {"Ainv", to_json(inv)}, {"det", c.det}, {"bounds_ok", c.ok()}};
    if (!c.ok()) {
        o.results["failure"] = c.first_failure();
        o.exit_code = violation;
    }
    o.summary = "frame for k = " + k.str() + (c.ok() ? " certified" : " FAILED: " + c.first_failure());
    return o;
}

inline Outcome model_validate(const json& cfg, const Context&)
{
    const ConvexModel m = build_model(model_from_json(need(cfg, "model")), false);
    const int samples = value_or<int>(cfg, "samples", default_validation_samples);
    const auto seed = value_or<std::uint64_t>(cfg, "seed", 0);
    const ValidationReport rep = validate_constants(m, samples, seed);
    json viol = json::array();
    for (const auto& v : rep.violations) {
        json w = json::array();
        for (const auto& p : v.witness)
            w.push_back(to_json(p));
        viol.push_back({{"constant", v.constant}, {"declared", v.declared}, {"empirical", v.empirical}, {"witness", w}});
    }
    Outcome o;
    o.results = {{"family", m.family},
                 {"dim", m.dim},
                 {"declared", constants_json(m.constants)},
                 {"samples", rep.samples},
                 {"seed", rep.seed},
                 {"min_eigenvalue", rep.min_eigenvalue},
                 {"max_eigenvalue", rep.max_eigenvalue},
                 {"min_ratio", rep.min_ratio},
                 {"max_ratio", rep.max_ratio},
                 {"sup_omega", rep.sup_omega},
                 {"max_asymmetry", rep.max_asymmetry},
                 {"ok", rep.ok()},
                 {"violations", viol}};
    o.exit_code = rep.ok() ? ok : usage;
    o.summary = rep.ok() ? "declared constants consistent with " + std::to_string(samples) + " samples"
                         : detail::describe_violation(rep.violations.front());
    return o;
}

inline Outcome cover_classify(const json& cfg, const Context&)
{
    const ConvexModel m = model_of(cfg);
    const CoveringParams p = params_of(cfg, m);
    const Vec y = detail::get_vector(need(cfg, "y"), "y");
    if (y.size() != m.dim)
        throw ParameterError("y: must have dim entries");
    const Classifier cls(m, p);
    const ZoneLabel z = cls.classify(y);
    json ks = json::array();
    for (const auto& k : z.simple_resonances)
        ks.push_back(k.entries());
    Outcome o;
    o.results = {{"y", to_json(y)},
                 {"params", params_json(p)},
                 {"in_R0", z.in_r0},
                 {"in_R1", z.in_r1()},
                 {"in_R2", z.in_r2},
                 {"simple_resonances", ks},
                 {"warnings", cls.warnings()}};
    o.summary = std::string(z.in_r2 ? "R2" : (z.in_r0 ? (z.in_r1() ? "R0&R1" : "R0") : "R1"));
    return o;
}

inline json measure_json(const MeasureReport& r)
{
    json terms = json::array();
    for (const auto& t : r.analytic.terms)
        terms.push_back({{"k", t.k.entries()}, {"l", t.l.entries()}, {"bound", t.bound}});
    return {{"samples", r.samples},
            {"seed", r.seed},
            {"domain_volume", r.domain_volume},
            {"counts", r.counts},
            {"fractions", r.fractions},
            {"stderrs", r.stderrs},
            {"analytic_r2_bound", {{"total", r.analytic.total}, {"pair_count", r.analytic.terms.size()}, {"terms", terms}}},
            {"r2_measure", r.fraction("R2") * r.domain_volume},
            {"r2_measure_stderr", r.standard_error("R2") * r.domain_volume},
            {"warnings", r.warnings}};
}

inline Outcome cover_measure(const json& cfg, const Context& ctx)
{
    const ConvexModel m = model_of(cfg);
    const CoveringParams p = params_of(cfg, m);
    const auto samples = value_or<std::uint64_t>(cfg, "samples", 100000);
    const auto seed = value_or<std::uint64_t>(cfg, "seed", 0);
    const MeasureReport r = estimate_measures(m, p, samples, seed, ctx.threads);
    Outcome o;
    o.results = measure_json(r);
    o.results["params"] = params_json(p);
    o.summary = "fraction(R2) = " + fmt(r.fraction("R2")) + " +- " + fmt(r.standard_error("R2"));
    return o;
}

inline Outcome cover_scan2d(const json& cfg, const Context& ctx)
{
    const ConvexModel m = model_of(cfg);
    const CoveringParams p = params_of(cfg, m);
    const auto axis = value_or<std::vector<int>>(cfg, "axis", {0, 1});
    if (axis.size() != 2)
        throw ConfigError("axis: expected two indices i,j");
    const int grid = value_or<int>(cfg, "grid", 200);
    const Vec base = opt_vector(cfg, "base").value_or(m.domain.centroid());
    if (base.size() != m.dim)
        throw ParameterError("base: must have dim entries");
    const Classifier cls(m, p);
    const ZoneScan scan = scan2d(cls, axis[0], axis[1], grid, base, ctx.threads);
    std::ostringstream csv;
    csv << "x,y,zone\n";
    std::map<std::string, std::uint64_t> counts;
    for (int iy = 0; iy < grid; ++iy)
        for (int ix = 0; ix < grid; ++ix) {
            const ZoneCode c = scan.codes[static_cast<std::size_t>(iy * grid + ix)];
            csv << fmt(scan.xs[static_cast<std::size_t>(ix)]) << "," << fmt(scan.ys[static_cast<std::size_t>(iy)]) << "," << zone_name(c)
                << "\n";
            ++counts[zone_name(c)];
        }
    Outcome o;
    o.files.emplace_back("zones2d.csv", csv.str());
    o.results = {{"grid", grid}, {"axis", axis}, {"counts", counts}, {"csv", "zones2d.csv"}, {"params", params_json(p)}};
    if (value_or<bool>(cfg, "svg", false)) {
        o.files.emplace_back("zones2d.svg", svg::zones2d(scan, m.dim));
        o.results["svg"] = "zones2d.svg";
    }
    o.summary = std::to_string(grid * grid) + " cells labelled";
    return o;
}

inline json margins_json(const GraphMargins& g)
{
    return {{"max_residual", g.max_residual},
            {"residual_tolerance", num_or_null(g.residual_tolerance)},
            {"max_increment_ratio", g.max_increment_ratio},
            {"min_increment", num_or_null(g.min_increment)},
            {"max_inclusion_ratio", g.max_inclusion_ratio}};
}

inline Outcome graph_build(const json& cfg, const Context& ctx)
{
    const ConvexModel m = model_of(cfg);
    const RotatedModel rot = rotated_of(cfg, m);
    const int nv = value_or<int>(cfg, "nvarpi", 11);
    const int pc = value_or<int>(cfg, "percube", 2);
    const ResonanceGraph g = build_graph(rot, nv, pc, ctx.threads);
    std::ostringstream csv;
    csv << "varpi";
    for (int i = 0; i < rot.dim() - 1; ++i)
        csv << ",yhat" << i + 2;
    csv << ",eta,residual\n";
    for (std::size_t iv = 0; iv < g.varpi.size(); ++iv)
        for (std::size_t iy = 0; iy < g.yhat.size(); ++iy) {
            csv << fmt(g.varpi[iv]);
            for (Eigen::Index a = 0; a < g.yhat[iy].size(); ++a)
                csv << "," << fmt(g.yhat[iy][a]);
            csv << "," << fmt(g.eta_at(iv, iy)) << "," << fmt(g.residual_at(iv, iy)) << "\n";
        }
    Outcome o;
    o.files.emplace_back("graph.csv", csv.str());
    o.results = {{"frame", frame_json(rot.frame())},
                 {"constants", constants_json(m.constants)},
                 {"cube_edge", g.cubes.edge},
                 {"J", g.cubes.J},
                 {"cube_candidates", g.cubes.candidates},
                 {"sampling_note", g.cubes.sampling_note},
                 {"nvarpi", nv},
                 {"percube", pc},
                 {"columns", g.yhat.size()},
                 {"margins", margins_json(g.margins)},
                 {"csv", "graph.csv"}};
    if (value_or<bool>(cfg, "svg", false) && !g.yhat.empty()) {
        o.files.emplace_back("graph.svg", svg::graph(g));
        o.results["svg"] = "graph.svg";
    }
    o.summary = std::to_string(g.cubes.J.size()) + " cubes, " + std::to_string(g.eta.size()) + " graph points, max residual " +
                fmt(g.margins.max_residual);
    return o;
}

inline json nonres_json(const NonresReport& r, std::size_t witnesses = 20)
{
    json w = json::array();
    for (const auto& p : r.points) {
        if (w.size() >= witnesses)
            break;
        if (p.margin < 0)
            w.push_back({{"y", to_json(p.y)}, {"min_value", p.min_value}, {"l", p.argmin}, {"margin", p.margin}});
    }
    json worst = nullptr;
    if (!r.points.empty()) {
        const auto& p = r.points[r.worst_index];
        worst = {{"index", r.worst_index}, {"y", to_json(p.y)}, {"min_value", p.min_value}, {"l", p.argmin}, {"margin", p.margin}};
    }
    return {{"threshold", r.threshold}, {"alpha_over_C", r.slab_varpi},   {"samples", r.samples},
            {"seed", r.seed},           {"cubes", r.cubes},                {"passed", r.passed},
            {"pass_fraction", r.pass_fraction}, {"worst_margin", num_or_null(r.worst_margin)}, {"worst", worst},
            {"witnesses", w}};
}

inline Outcome graph_nonres(const json& cfg, const Context& ctx)
{
    const ConvexModel m = model_of(cfg);
    const CoveringParams p = params_of(cfg, m);
    const RotatedModel rot = rotated_of(cfg, m);
    const auto samples = value_or<std::uint64_t>(cfg, "samples", 10000);
    const auto seed = value_or<std::uint64_t>(cfg, "seed", 0);
    const NonresReport r = check_nonresonance(rot, p, samples, seed, ctx.threads);
    std::ostringstream csv;
    csv << "index";
    for (int i = 0; i < rot.dim(); ++i)
        csv << ",yt" << i + 1;
    csv << ",min_value,margin\n";
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        csv << i;
        for (Eigen::Index a = 0; a < r.points[i].y.size(); ++a)
            csv << "," << fmt(r.points[i].y[a]);
        csv << "," << fmt(r.points[i].min_value) << "," << fmt(r.points[i].margin) << "\n";
    }
    Outcome o;
    o.files.emplace_back("nonres_samples.csv", csv.str());
    o.results = nonres_json(r);
    o.results["frame"] = frame_json(rot.frame());
    o.results["params"] = params_json(p);
    o.results["csv"] = "nonres_samples.csv";
    o.summary = "pass fraction " + fmt(r.pass_fraction) + ", worst margin " + fmt(r.worst_margin);
    return o;
}

inline json certificate_json(const ContractionReport& c)
{
    return {{"y0", to_json(c.y0)},
            {"d", c.d},
            {"r_hat", c.r_hat},
            {"r1", c.r1},
            {"first", {{"sup", c.first_sup}, {"bound", c.first_bound}, {"margin", c.first_margin()}, {"pass", c.first_pass()},
                       {"witness", to_json(c.first_witness)}}},
            {"second", {{"sup", c.second_sup}, {"bound", c.second_bound}, {"margin", c.second_margin()}, {"pass", c.second_pass()},
                        {"witness", to_json(c.second_witness)}}},
            {"contraction_factor", c.contraction_factor},
            {"max_iterations", c.max_iterations},
            {"iterates_in_ball", c.iterates_in_ball},
            {"converged", c.converged},
            {"sample_points", c.sample_points}};
}

inline Vec yhat_of(const json& cfg, const RotatedModel& rot, int threads)
{
    if (auto y = opt_vector(cfg, "yhat")) {
        if (y->size() != rot.dim() - 1)
            throw ParameterError("yhat: must have n-1 entries");
        return *y;
    }
    const CubeCover cover = cube_decomposition(rot, threads);
    if (cover.J.empty())
        throw ParameterError("yhat: the resonance does not cross the domain, no default point");
    return cover.centroid();
}

inline Outcome graph_certify(const json& cfg, const Context& ctx)
{
    const ConvexModel m = model_of(cfg);
    const RotatedModel rot = rotated_of(cfg, m);
    const Vec yhat = yhat_of(cfg, rot, ctx.threads);
    const double eta = solve_eta(rot, 0, yhat).eta;
    const ContractionReport c = contraction_certificate(rot, RotatedModel::join(eta, yhat), value_or<int>(cfg, "grid", 21));
    Outcome o;
    o.results = certificate_json(c);
    o.results["frame"] = frame_json(rot.frame());
    o.summary = std::string("estimates ") + (c.first_pass() ? "pass" : "FAIL") + "/" + (c.second_pass() ? "pass" : "FAIL") +
                ", contraction factor " + fmt(c.contraction_factor);
    return o;
}

inline json series_json(const Series1d& s)
{
    json a = json::array();
    for (const auto& [j, c] : s)
        a.push_back({{"j", j}, {"re", c.real()}, {"im", c.imag()}});
    return a;
}

inline json standard_form_json(const StandardFormData& d)
{
    json cps = json::array();
    for (const auto& c : d.critical_points)
        cps.push_back({{"theta", c.theta}, {"value", c.value}, {"type", c.type}});
    json pend = nullptr;
    if (d.pendulum)
        pend = {{"min", d.pendulum->min}, {"max", d.pendulum->max}, {"separatrix", d.pendulum->separatrix}};
    json nc = json::object();
    for (const auto& name : d.not_computed)
        nc[name] = "not computed";
    return {{"k", d.k.entries()},     {"yhat0", to_json(d.yhat0)}, {"eta0", d.eta0}, {"eps", d.eps},
            {"f1", series_json(d.f1)}, {"f1_real", d.f1_real},      {"m_k", d.m_k},   {"G0", series_json(d.G0)},
            {"degenerate", d.degenerate}, {"critical_points", cps}, {"pendulum_energies", pend}, {"remainders", nc}};
}

inline Outcome secular_cmd(const json& cfg, const Context& ctx)
{
    const ConvexModel m = model_of(cfg);
    const RotatedModel rot = rotated_of(cfg, m);
    const TrigPotential f = potential_of(cfg);
    if (f.dim() != m.dim)
        throw ParameterError("potential: mode dimension differs from the model");
    const double eps = detail::get_number(need(cfg, "eps"), "eps");
    const StandardFormData d = standard_form(rot, f, opt_vector(cfg, "yhat"), eps, ctx.threads);
    Outcome o;
    o.results = standard_form_json(d);
    if (value_or<bool>(cfg, "svg", false) && !d.degenerate && d.f1_real) {
        o.files.emplace_back("G0.svg", svg::g0(d));
        o.results["svg"] = "G0.svg";
    }
    o.summary = d.degenerate ? "degenerate resonance: no k-parallel modes" : "m_k = " + fmt(d.m_k) + ", separatrix " +
                                                                                (d.pendulum ? fmt(d.pendulum->separatrix) : "n/a");
    return o;
}

// ------ verify-all ------ //

struct Check {
    std::string name;
    bool invariant = true; ///< false: hypothesis of the theory, reported only
    bool pass = true;
    double margin = 0;
    json details;
};

inline Outcome verify_all(const json& cfg, const Context& ctx)
{
    const ModelDescription desc = model_from_json(need(cfg, "model"));
    const ConvexModel m = build_model(desc, false);
    const auto seed = value_or<std::uint64_t>(cfg, "seed", 0);
    std::vector<Check> checks;

    const ValidationReport vr = validate_constants(m, value_or<int>(cfg, "validate_samples", default_validation_samples), seed);
    checks.push_back({"model.constants", true, vr.ok(), vr.ok() ? 0.0 : -1.0,
                      {{"min_eigenvalue", vr.min_eigenvalue}, {"max_ratio", vr.max_ratio}, {"sup_omega", vr.sup_omega},
                       {"violations", vr.violations.size()}}});
    if (!vr.ok())
        throw ParameterError(detail::describe_violation(vr.violations.front()));

    const CoveringParams p = cfg.contains("params") ? params_of(cfg, m) : covering_params(m, 1e-30, 12 * m.s_hat(), 2);

    // frames for every generator up to K
    {
        const auto ks = enumerate_generators(m.dim, p.K);
        std::size_t failures = 0;
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& k : ks) {
            const UnimodularFrame f = unimodular_completion(k, frame_constants(m));
            failures += !f.certificate.ok();
            const double bound = std::pow(m.dim - 1.0, (m.dim - 1) / 2.0) * std::pow(static_cast<double>(k.norm_inf()), m.dim - 1);
            worst = std::min(worst, bound - static_cast<double>(f.Ainv.max_abs()));
        }
        checks.push_back({"lattice.frames", true, failures == 0, worst, {{"generators", ks.size()}, {"failures", failures}}});
    }

    // zone measures against the analytic bound
    {
        const auto samples = value_or<std::uint64_t>(cfg, "measure_samples", 20000);
        const MeasureReport r = estimate_measures(m, p, samples, seed, ctx.threads);
        const double mc = r.fraction("R2") * r.domain_volume;
        const double se = r.standard_error("R2") * r.domain_volume;
        const double margin = r.analytic.total + 3 * se - mc;
        const std::uint64_t union_count = r.counts.at("R0") + r.counts.at("R1") - r.counts.at("R0&R1") + r.counts.at("R2");
        checks.push_back({"covering.partition", true, union_count == r.samples, 0.0, {{"samples", r.samples}}});
        checks.push_back({"covering.r2_bound", true, margin >= 0, margin,
                          {{"r2_measure", mc}, {"stderr", se}, {"analytic", r.analytic.total}, {"fractions", r.fractions}}});
    }

    // graphs, contraction and non-resonance along each low mode
    const int nv = value_or<int>(cfg, "nvarpi", 5);
    const int pc = value_or<int>(cfg, "percube", 2);
    const auto nonres_samples = value_or<std::uint64_t>(cfg, "nonres_samples", 2000);
    std::optional<TrigPotential> f;
    if (cfg.contains("potential"))
        f = potential_of(cfg);
    for (const auto& k : enumerate_generators(m.dim, p.K0)) {
        const std::string tag = k.str();
        const RotatedModel rot = build_rotated(m, k);
        const CubeCover cover = cube_decomposition(rot, ctx.threads);
        if (cover.J.empty()) {
            checks.push_back({"graph" + tag + ".cubes", false, true, 0.0, {{"note", "resonance does not cross the domain"}}});
            continue;
        }
        try {
            const ResonanceGraph g = build_graph(rot, cover, nv, pc, ctx.threads);
            const auto& mg = g.margins;
            checks.push_back({"graph" + tag + ".residual", true, true, mg.residual_tolerance - mg.max_residual, margins_json(mg)});
            checks.push_back({"graph" + tag + ".monotone", true, true, 1 + 1e-6 - mg.max_increment_ratio,
                              {{"max_increment_ratio", mg.max_increment_ratio}, {"min_increment", mg.min_increment}}});
            checks.push_back({"graph" + tag + ".inclusion", true, true, 1 + 1e-9 - mg.max_inclusion_ratio,
                              {{"max_inclusion_ratio", mg.max_inclusion_ratio}, {"cubes", cover.J.size()}}});
        } catch (const InvariantViolation& e) {
            checks.push_back({"graph" + tag, true, false, -1.0, {{"witness", e.what()}}});
            continue;
        }
        const Vec yhat0 = cover.centroid();
        const double eta0 = solve_eta(rot, 0, yhat0).eta;
        const ContractionReport c = contraction_certificate(rot, RotatedModel::join(eta0, yhat0));
        checks.push_back({"contraction" + tag + ".first", false, c.first_pass(), c.first_margin(), certificate_json(c)["first"]});
        checks.push_back({"contraction" + tag + ".second", false, c.second_pass(), c.second_margin(), certificate_json(c)["second"]});
        checks.push_back({"contraction" + tag + ".factor", false, c.contraction_factor <= 0.5, 0.5 - c.contraction_factor,
                          {{"contraction_factor", c.contraction_factor}, {"converged", c.converged}}});
        if (p.alpha / p.C <= rot.frame().varpi0_k) {
            const NonresReport r = check_nonresonance(rot, p, cover, nonres_samples, seed, ctx.threads);
            checks.push_back({"nonres" + tag, false, r.worst_margin >= 0, r.worst_margin,
                              {{"pass_fraction", r.pass_fraction}, {"threshold", r.threshold}, {"samples", r.samples}}});
        } else {
            checks.push_back({"nonres" + tag, false, false, rot.frame().varpi0_k - p.alpha / p.C,
                              {{"note", "alpha/C exceeds varpi0_k, check not applicable"}}});
        }
        if (f && f->dim() == m.dim) {
            const StandardFormData d = standard_form(rot, *f, yhat0, p.eps, ctx.threads);
            const double floor = 0.5 * m.constants.gamma * k.norm2() * k.norm2();
            checks.push_back({"secular" + tag + ".curvature", true, d.m_k >= floor * (1 - 1e-12), d.m_k - floor,
                              standard_form_json(d)});
        }
    }

    Outcome o;
    json arr = json::array();
    std::size_t failed_invariants = 0, failed_hypotheses = 0;
    for (const auto& c : checks) {
        arr.push_back({{"name", c.name}, {"kind", c.invariant ? "invariant" : "hypothesis"}, {"pass", c.pass},
                       {"margin", num_or_null(c.margin)}, {"details", c.details}});
        (c.invariant ? failed_invariants : failed_hypotheses) += !c.pass;
    }
    o.results = {{"params", params_json(p)},
                 {"constants", constants_json(m.constants)},
                 {"checks", arr},
                 {"failed_invariants", failed_invariants},
                 {"failed_hypotheses", failed_hypotheses}};
    o.exit_code = failed_invariants ? violation : ok;
    o.summary = std::to_string(checks.size()) + " checks, " + std::to_string(failed_invariants) + " invariant failures, " +
                std::to_string(failed_hypotheses) + " hypothesis checks not met";
    return o;
}

// ------ dispatch ------ //

inline Outcome execute(const std::string& command, const json& cfg, const Context& ctx)
{
    if (command == "lattice enumerate")
        return lattice_enumerate(cfg, ctx);
    if (command == "lattice complete")
        return lattice_complete(cfg, ctx);
    if (command == "model validate")
        return model_validate(cfg, ctx);
    if (command == "cover classify")
        return cover_classify(cfg, ctx);
    if (command == "cover measure")
        return cover_measure(cfg, ctx);
    if (command == "cover scan2d")
        return cover_scan2d(cfg, ctx);
    if (command == "graph build")
        return graph_build(cfg, ctx);
    if (command == "graph nonres" || command == "nonres")
        return graph_nonres(cfg, ctx);
    if (command == "graph certify")
        return graph_certify(cfg, ctx);
    if (command == "secular")
        return secular_cmd(cfg, ctx);
    if (command == "verify-all")
        return verify_all(cfg, ctx);
    throw ConfigError("command: unknown command '" + command + "'");
}

inline std::string report_name(std::string command)
{
    for (auto& ch : command)
        if (ch == ' ')
            ch = '_';
    return command + ".json";
}

inline std::string timestamp()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

inline void write_file(const std::filesystem::path& p, const std::string& content)
{
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw ConfigError("out: cannot write " + p.string());
    out << content;
}

inline json make_report(const std::string& command, const json& cfg, const Context& ctx, const json& results, const std::string& status)
{
    return {{"schema_version", schema_version},
            {"command", command},
            {"status", status},
            {"config", cfg},
            {"results", results},
            {"run", {{"threads", ctx.threads}, {"timestamp", timestamp()}}}};
}

/// Runs a command from its config, writes the report and side files, and
/// returns the exit code.
inline int run_config(const std::string& command, const json& cfg, const Context& ctx, std::ostream& out, std::ostream& err)
{
    try {
        std::filesystem::create_directories(ctx.out);
        Outcome o;
        try {
            o = execute(command, cfg, ctx);
        } catch (const InvariantViolation& e) {
            write_file(ctx.out / report_name(command),
                       make_report(command, cfg, ctx, {{"witness", e.what()}}, "invariant_violation").dump(2) + "\n");
            err << command << ": invariant violation: " << e.what() << "\n";
            return violation;
        } catch (const CertificationError& e) {
            write_file(ctx.out / report_name(command),
                       make_report(command, cfg, ctx, {{"witness", e.what()}}, "invariant_violation").dump(2) + "\n");
            err << command << ": certification failed: " << e.what() << "\n";
            return violation;
        }
        json results = o.results;
        for (const auto& [name, content] : o.files)
            write_file(ctx.out / name, content);
        const std::string status = o.exit_code == ok ? "ok" : (o.exit_code == violation ? "invariant_violation" : "error");
        write_file(ctx.out / report_name(command), make_report(command, cfg, ctx, results, status).dump(2) + "\n");
        out << command << ": " << o.summary << " [" << (ctx.out / report_name(command)).string() << "]\n";
        return o.exit_code;
    } catch (const ConfigError& e) {
        err << command << ": config error: " << e.what() << "\n";
        return usage;
    } catch (const ParameterError& e) {
        err << command << ": parameter error: " << e.what() << "\n";
        return usage;
    } catch (const DomainError& e) {
        err << command << ": domain error: " << e.what() << "\n";
        return usage;
    } catch (const BracketingError& e) {
        err << command << ": bracketing error: " << e.what() << "\n";
        return usage;
    } catch (const ModelAssumptionError& e) {
        err << command << ": model assumption violated: " << e.what() << "\n";
        return usage;
    } catch (const OverflowError& e) {
        err << command << ": overflow: " << e.what() << "\n";
        return usage;
    } catch (const std::exception& e) {
        err << command << ": internal error: " << e.what() << "\n";
        return internal;
    }
}

/// Command-line front end. Options are collected into a JSON config that is
/// embedded in the report, so `rerun --report` can replay the run.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"resokam: resonance geometry for convex nearly-integrable Hamiltonians"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    std::string out_dir = "resokam_out";
    int threads = default_threads();
    std::string spec_path, params_path, potential_path, report_path;
    std::optional<double> eps_flag, K_flag, K0_flag, r_tilde;
    std::vector<std::int64_t> k;
    std::vector<double> y, yhat, s;
    std::vector<int> axis;
    int n = 0, grid = 0, nvarpi = 11, percube = 2, samples_int = 0;
    double K_enum = 0;
    std::uint64_t samples = 0, seed = 0;
    bool svg_flag = false, k_from_eps = false;

    auto common = [&](CLI::App* c) {
        c->add_option("--out", out_dir, "output directory");
        c->add_option("--threads", threads, "worker threads (default: RESOKAM_THREADS or 1)")->check(CLI::PositiveNumber);
    };
    auto with_model = [&](CLI::App* c) { c->add_option("--spec", spec_path, "model spec file")->required(); };
    auto with_params = [&](CLI::App* c) {
        c->add_option("--params", params_path, "parameter file (eps, K, K0 or K_from_eps)");
        c->add_option("--eps", eps_flag, "override eps");
        c->add_option("--K", K_flag, "override K");
        c->add_option("--K0", K0_flag, "override K0");
        c->add_flag("--K-from-eps", k_from_eps, "K = max(12 sHat, ceil(ln(eps)^2)), K0 = K/(6 sHat)");
    };

    auto* lattice = app.add_subcommand("lattice", "generators and unimodular frames");
    lattice->require_subcommand(1);
    auto* l_enum = lattice->add_subcommand("enumerate", "list G^n_K as CSV");
    l_enum->add_option("--n", n, "dimension")->required();
    l_enum->add_option("--K", K_enum, "norm bound")->required();
    l_enum->add_option("--s", s, "weights for the s-norm")->delimiter(',');
    common(l_enum);
    auto* l_comp = lattice->add_subcommand("complete", "unimodular completion of k");
    l_comp->add_option("--k", k, "k1,...,kn")->delimiter(',')->required();
    common(l_comp);

    auto* model = app.add_subcommand("model", "integrable models");
    model->require_subcommand(1);
    auto* m_val = model->add_subcommand("validate", "check declared constants by sampling");
    with_model(m_val);
    m_val->add_option("--samples", samples_int, "sample count");
    m_val->add_option("--seed", seed, "seed");
    common(m_val);

    auto* cover = app.add_subcommand("cover", "zone covering");
    cover->require_subcommand(1);
    auto* c_cls = cover->add_subcommand("classify", "zone label of one action");
    with_model(c_cls);
    with_params(c_cls);
    c_cls->add_option("--y", y, "y1,...,yn")->delimiter(',')->required();
    common(c_cls);
    auto* c_meas = cover->add_subcommand("measure", "Monte Carlo zone measures");
    with_model(c_meas);
    with_params(c_meas);
    c_meas->add_option("--samples", samples, "sample count");
    c_meas->add_option("--seed", seed, "seed");
    common(c_meas);
    auto* c_scan = cover->add_subcommand("scan2d", "zone labels on a 2-D grid");
    with_model(c_scan);
    with_params(c_scan);
    c_scan->add_option("--axis", axis, "i,j")->delimiter(',');
    c_scan->add_option("--grid", grid, "cells per axis");
    c_scan->add_flag("--svg", svg_flag, "also write zones2d.svg");
    common(c_scan);

    auto* graph = app.add_subcommand("graph", "resonance graphs");
    graph->require_subcommand(1);
    auto* g_build = graph->add_subcommand("build", "sample eta(varpi, yhat)");
    with_model(g_build);
    g_build->add_option("--k", k, "k1,...,kn")->delimiter(',')->required();
    g_build->add_option("--nvarpi", nvarpi, "varpi grid size");
    g_build->add_option("--percube", percube, "yhat points per cube axis");
    g_build->add_option("--rtilde", r_tilde, "radius r~ (default r/(n|k|_inf))");
    g_build->add_flag("--svg", svg_flag, "also write graph.svg");
    common(g_build);
    auto* g_nonres = graph->add_subcommand("nonres", "non-resonance of the normal set");
    auto* nonres = app.add_subcommand("nonres", "alias of graph nonres");
    for (auto* c : {g_nonres, nonres}) {
        with_model(c);
        with_params(c);
        c->add_option("--k", k, "k1,...,kn")->delimiter(',')->required();
        c->add_option("--samples", samples, "sample count");
        c->add_option("--seed", seed, "seed");
        c->add_option("--rtilde", r_tilde, "radius r~");
        common(c);
    }
    auto* g_cert = graph->add_subcommand("certify", "contraction certificate at a graph point");
    with_model(g_cert);
    g_cert->add_option("--k", k, "k1,...,kn")->delimiter(',')->required();
    g_cert->add_option("--yhat", yhat, "yhat (default: centroid of the cubes)")->delimiter(',');
    g_cert->add_option("--grid", grid, "sample points per axis");
    g_cert->add_option("--rtilde", r_tilde, "radius r~");
    common(g_cert);

    auto* secular = app.add_subcommand("secular", "first-order standard form");
    with_model(secular);
    secular->add_option("--potential", potential_path, "potential file (m1,...,mn, re, im per line)")->required();
    secular->add_option("--k", k, "k1,...,kn")->delimiter(',')->required();
    secular->add_option("--eps", eps_flag, "eps")->required();
    secular->add_option("--yhat", yhat, "yhat0 (default: centroid of the cubes)")->delimiter(',');
    secular->add_option("--rtilde", r_tilde, "radius r~");
    secular->add_flag("--svg", svg_flag, "also write G0.svg");
    common(secular);

    auto* verify = app.add_subcommand("verify-all", "run every module check");
    with_model(verify);
    with_params(verify);
    verify->add_option("--seed", seed, "seed");
    verify->add_option("--samples", samples, "Monte Carlo samples for the measure check");
    verify->add_option("--potential", potential_path, "optional potential for the secular checks");
    common(verify);

    auto* rerun = app.add_subcommand("rerun", "re-execute a report from its embedded config");
    rerun->add_option("--report", report_path, "report JSON")->required();
    common(rerun);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return usage;
    }

    Context ctx{out_dir, threads};
    std::string command;
    json cfg = json::object();
    try {
        auto load_model = [&] { cfg["model"] = load_config(spec_path); };
        auto load_params = [&] {
            json p = params_path.empty() ? json::object() : load_config(params_path);
            if (eps_flag)
                p["eps"] = *eps_flag;
            if (K_flag)
                p["K"] = *K_flag;
            if (K0_flag)
                p["K0"] = *K0_flag;
            if (k_from_eps)
                p["K_from_eps"] = true;
            if (!p.empty())
                cfg["params"] = p;
        };
        auto set_k = [&] { cfg["k"] = k; };
        auto set_rtilde = [&] {
            if (r_tilde)
                cfg["r_tilde"] = *r_tilde;
        };
        if (l_enum->parsed()) {
            command = "lattice enumerate";
            cfg["n"] = n;
            cfg["K"] = K_enum;
            if (!s.empty())
                cfg["s"] = s;
        } else if (l_comp->parsed()) {
            command = "lattice complete";
            set_k();
        } else if (m_val->parsed()) {
            command = "model validate";
            load_model();
            cfg["samples"] = samples_int > 0 ? samples_int : default_validation_samples;
            cfg["seed"] = seed;
        } else if (c_cls->parsed()) {
            command = "cover classify";
            load_model();
            load_params();
            cfg["y"] = y;
        } else if (c_meas->parsed()) {
            command = "cover measure";
            load_model();
            load_params();
            cfg["samples"] = samples > 0 ? samples : 100000;
            cfg["seed"] = seed;
        } else if (c_scan->parsed()) {
            command = "cover scan2d";
            load_model();
            load_params();
            cfg["axis"] = axis.empty() ? std::vector<int>{0, 1} : axis;
            cfg["grid"] = grid > 0 ? grid : 200;
            cfg["svg"] = svg_flag;
        } else if (g_build->parsed()) {
            command = "graph build";
            load_model();
            set_k();
            set_rtilde();
            cfg["nvarpi"] = nvarpi;
            cfg["percube"] = percube;
            cfg["svg"] = svg_flag;
        } else if (g_nonres->parsed() || nonres->parsed()) {
            command = "graph nonres";
            load_model();
            load_params();
            set_k();
            set_rtilde();
            cfg["samples"] = samples > 0 ? samples : 10000;
            cfg["seed"] = seed;
        } else if (g_cert->parsed()) {
            command = "graph certify";
            load_model();
            set_k();
            set_rtilde();
            if (!yhat.empty())
                cfg["yhat"] = yhat;
            cfg["grid"] = grid > 0 ? grid : 21;
        } else if (secular->parsed()) {
            command = "secular";
            load_model();
            set_k();
            set_rtilde();
            cfg["potential"] = potential_json(TrigPotential::load(potential_path));
            cfg["eps"] = *eps_flag;
            if (!yhat.empty())
                cfg["yhat"] = yhat;
            cfg["svg"] = svg_flag;
        } else if (verify->parsed()) {
            command = "verify-all";
            load_model();
            load_params();
            cfg["seed"] = seed;
            if (samples > 0)
                cfg["measure_samples"] = samples;
            if (!potential_path.empty())
                cfg["potential"] = potential_json(TrigPotential::load(potential_path));
        } else if (rerun->parsed()) {
            std::ifstream in(report_path);
            if (!in)
                throw ConfigError("report: cannot open " + report_path);
            json rep;
            try {
                rep = json::parse(in);
            } catch (const json::exception&) {
                throw ConfigError("report: not valid JSON");
            }
            if (!rep.contains("command") || !rep.contains("config") || !rep["command"].is_string())
                throw ConfigError("report: missing command or config");
            command = rep["command"].get<std::string>();
            cfg = rep["config"];
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return usage;
    }
    return run_config(command, cfg, ctx, out, err);
}

} // namespace resokam::cli
