// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include "dsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dsim {

namespace {

using nlohmann::json;

constexpr std::uint64_t kSdeSeedSalt = 0x9e3779b97f4a7c15ULL;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw std::invalid_argument(where + ": " + what);
}

// Tracks which keys of one JSON object have been consumed so that leftovers
// can be reported by name instead of silently ignored.
class ObjectReader {
  public:
    ObjectReader(const json& node, std::string path)
        : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail(path_, "expected a JSON object");
    }

    const std::string& path() const { return path_; }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json& require(const std::string& key) {
        if (!node_.contains(key)) fail(path_, "missing required key '" + key + "'");
        seen_.insert(key);
        return node_.at(key);
    }

    const json* optional(const std::string& key) {
        if (!node_.contains(key)) return nullptr;
        seen_.insert(key);
        return &node_.at(key);
    }

    double number(const std::string& key) {
        const json& v = require(key);
        if (!v.is_number()) fail(path_, "'" + key + "' must be a number");
        return v.get<double>();
    }

    double number_or(const std::string& key, double fallback) {
        const json* v = optional(key);
        if (!v) return fallback;
        if (!v->is_number()) fail(path_, "'" + key + "' must be a number");
        return v->get<double>();
    }

    std::int64_t integer(const std::string& key) {
        const json& v = require(key);
        if (!v.is_number_integer()) fail(path_, "'" + key + "' must be an integer");
        return v.get<std::int64_t>();
    }

    std::int64_t integer_or(const std::string& key, std::int64_t fallback) {
        const json* v = optional(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) fail(path_, "'" + key + "' must be an integer");
        return v->get<std::int64_t>();
    }

    bool boolean_or(const std::string& key, bool fallback) {
        const json* v = optional(key);
        if (!v) return fallback;
        if (!v->is_boolean()) fail(path_, "'" + key + "' must be a boolean");
        return v->get<bool>();
    }

    std::string text(const std::string& key) {
        const json& v = require(key);
        if (!v.is_string()) fail(path_, "'" + key + "' must be a string");
        return v.get<std::string>();
    }

    std::string text_or(const std::string& key, const std::string& fallback) {
        const json* v = optional(key);
        if (!v) return fallback;
        if (!v->is_string()) fail(path_, "'" + key + "' must be a string");
        return v->get<std::string>();
    }

    std::vector<double> number_array(const std::string& key) {
        const json& v = require(key);
        if (!v.is_array()) fail(path_, "'" + key + "' must be an array of numbers");
        std::vector<double> out;
        out.reserve(v.size());
        for (const json& e : v) {
            if (!e.is_number()) fail(path_, "'" + key + "' must contain only numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    // Call after all expected keys were consumed.
    void finish() const {
        for (const auto& item : node_.items()) {
            if (!seen_.count(item.key())) {
                fail(path_, "unknown key '" + item.key() + "'");
            }
        }
    }

  private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

// Degrees of freedom: a number, or the strings "inf" / "infinity".
double parse_nu(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "infinity") return nu_infinity;
        fail(where, "'nu' string must be \"inf\" (got \"" + s + "\")");
    }
    fail(where, "'nu' must be a number or \"inf\"");
}

Landscape parse_landscape(const json& node, const std::string& where) {
    ObjectReader r(node, where);
    const std::string kind = r.text("kind");
    if (kind == "quadratic_diag") {
        std::vector<double> h = r.number_array("h_diag");
        r.finish();
        return Landscape::quadratic_diag(std::move(h));
    }
    if (kind == "quadratic_iso") {
        const std::int64_t dim = r.integer("dim");
        const double h = r.number("h");
        r.finish();
        if (dim < 1) fail(where, "'dim' must be >= 1");
        return Landscape::quadratic_diag(
            std::vector<double>(static_cast<std::size_t>(dim), h));
    }
    if (kind == "quadratic_dense") {
        std::vector<double> h = r.number_array("h");
        const std::int64_t dim = r.integer("dim");
        r.finish();
        return Landscape::quadratic_dense(std::move(h), static_cast<int>(dim));
    }
    if (kind == "rosenbrock") {
        const double a = r.number_or("a", 1.0);
        const double b = r.number_or("b", 100.0);
        r.finish();
        return Landscape::rosenbrock(a, b);
    }
    if (kind == "embedded_saddle") {
        std::vector<double> h = r.number_array("h_diag");
        const double lambda = r.number_or("lambda", 1.0);
        const double xi = r.number_or("xi", 1.0);
        r.finish();
        return Landscape::embedded_saddle(std::move(h), lambda, xi);
    }
    fail(where, "unknown landscape kind '" + kind + "'");
}

NoiseModel parse_noise(const json& node, const std::string& where, int dim) {
    ObjectReader r(node, where);
    NoiseModel m;
    const std::string kind = r.text("kind");
    if (kind == "none") {
        m.kind = NoiseKind::None;
        r.finish();
        return m;
    }
    if (kind == "gaussian") {
        m.kind = NoiseKind::Gaussian;
    } else if (kind == "student_t") {
        m.kind = NoiseKind::StudentT;
        m.nu = parse_nu(r.require("nu"), where);
        m.product_t = r.boolean_or("product_t", false);
    } else {
        fail(where, "unknown noise kind '" + kind + "'");
    }
    const bool has_scalar = r.has("scale");
    const bool has_vector = r.has("scale_diag");
    if (has_scalar == has_vector)
        fail(where, "give exactly one of 'scale' or 'scale_diag'");
    if (has_scalar) {
        const double s = r.number("scale");
        m.scale_diag.assign(static_cast<std::size_t>(dim), s);
    } else {
        m.scale_diag = r.number_array("scale_diag");
    }
    r.finish();
    return m;
}

Compressor parse_compressor(const json& node, const std::string& where) {
    ObjectReader r(node, where);
    Compressor c;
    const std::string kind = r.text("kind");
    if (kind == "identity") {
        c.kind = CompressorKind::Identity;
    } else if (kind == "rand_k") {
        c.kind = CompressorKind::RandK;
    } else if (kind == "top_k") {
        c.kind = CompressorKind::TopK;
    } else if (kind == "sign") {
        c.kind = CompressorKind::Sign;
    } else if (kind == "normalized_top_k") {
        c.kind = CompressorKind::NormalizedTopK;
    } else {
        fail(where, "unknown compressor kind '" + kind + "'");
    }
    if (c.uses_k()) {
        c.k = static_cast<int>(r.integer("k"));
    }
    r.finish();
    return c;
}

Algorithm parse_algorithm(const std::string& name, const std::string& where) {
    if (name == "dsgd") return Algorithm::DSGD;
    if (name == "dcsgd") return Algorithm::DCSGD;
    if (name == "dsignsgd") return Algorithm::DSignSGD;
    if (name == "topk_sgd") return Algorithm::TopKSGD;
    if (name == "norm_topk_sgd") return Algorithm::NormTopKSGD;
    fail(where, "unknown algorithm '" + name + "'");
}

std::vector<double> parse_x0(const json& node, const std::string& where,
                             int dim) {
    if (node.is_array()) {
        std::vector<double> out;
        out.reserve(node.size());
        for (const json& e : node) {
            if (!e.is_number()) fail(where, "'x0' must contain only numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }
    if (node.is_object()) {
        ObjectReader r(node, where + ".x0");
        const double v = r.number("fill");
        r.finish();
        return std::vector<double>(static_cast<std::size_t>(dim), v);
    }
    fail(where, "'x0' must be an array or {\"fill\": value}");
}

ComparisonSpec parse_comparison(const json& node, const std::string& where) {
    ObjectReader r(node, where);
    ComparisonSpec c;
    c.bound = r.text_or("bound", "");
    c.slack = r.number_or("slack", 1.05);
    c.rule = r.text_or("rule", "");
    if (const json* f = r.optional("factors")) {
        ObjectReader fr(*f, where + ".factors");
        c.factors.kappa = fr.number_or("kappa", 1.0);
        c.factors.delta = fr.number_or("delta", 1.0);
        c.factors.alpha = fr.number_or("alpha", 1.0);
        c.factors.beta = fr.number_or("beta", 1.0);
        fr.finish();
    }
    c.stationary = r.text_or("stationary", "");
    c.rel_tol = r.number_or("rel_tol", 0.05);
    if (const json* v = r.optional("nu")) c.nu = parse_nu(*v, where);
    c.epsilon = r.number_or("epsilon", 0.01);
    r.finish();
    if (!c.bound.empty() && c.bound != "dsgd_pl" && c.bound != "dcsgd_pl" &&
        c.bound != "dsignsgd_phases")
        fail(where, "unknown bound '" + c.bound + "'");
    if (!c.stationary.empty() && c.stationary != "dcsgd" &&
        c.stationary != "dsignsgd")
        fail(where, "unknown stationary reference '" + c.stationary + "'");
    return c;
}

}  // namespace

ExperimentSpec parse_spec(const std::string& json_text,
                          const std::string& origin) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(origin + ": JSON parse error: " + e.what());
    }
    ObjectReader r(root, origin);

    ExperimentSpec spec;
    spec.schema = static_cast<int>(r.integer("schema"));
    if (spec.schema != 1)
        fail(origin, "unsupported schema version " + std::to_string(spec.schema));
    spec.name = r.text("name");
    spec.description = r.text_or("description", "");
    spec.landscape = parse_landscape(r.require("landscape"), origin + ".landscape");
    const int dim = spec.landscape.dim();
    spec.algorithm = parse_algorithm(r.text("algorithm"), origin);

    {
        ObjectReader cr(r.require("cluster"), origin + ".cluster");
        spec.cluster.agents = static_cast<int>(cr.integer("agents"));
        spec.cluster.eta = cr.number("eta");
        spec.cluster.batch_size =
            static_cast<int>(cr.integer_or("batch_size", 1));
        spec.cluster.steps = cr.integer("steps");
        spec.cluster.stride = cr.integer_or("stride", 1);
        spec.cluster.divergence_ceiling =
            cr.number_or("divergence_ceiling", 1e12);
        spec.cluster.halt_on_divergence =
            cr.boolean_or("halt_on_divergence", true);
        spec.cluster.x0 = parse_x0(cr.require("x0"), origin + ".cluster", dim);

        const json* one_noise = cr.optional("noise");
        const json* per_agent_noise = cr.optional("noise_per_agent");
        if ((one_noise != nullptr) == (per_agent_noise != nullptr))
            fail(origin + ".cluster",
                 "give exactly one of 'noise' or 'noise_per_agent'");
        if (one_noise) {
            const NoiseModel m =
                parse_noise(*one_noise, origin + ".cluster.noise", dim);
            spec.cluster.noise.assign(
                static_cast<std::size_t>(spec.cluster.agents), m);
        } else {
            std::size_t idx = 0;
            if (!per_agent_noise->is_array())
                fail(origin + ".cluster", "'noise_per_agent' must be an array");
            for (const json& e : *per_agent_noise) {
                spec.cluster.noise.push_back(parse_noise(
                    e,
                    origin + ".cluster.noise_per_agent[" + std::to_string(idx) +
                        "]",
                    dim));
                ++idx;
            }
        }

        const json* one_comp = cr.optional("compressor");
        const json* per_agent_comp = cr.optional("compressors_per_agent");
        if (one_comp && per_agent_comp)
            fail(origin + ".cluster",
                 "give at most one of 'compressor' or 'compressors_per_agent'");
        if (one_comp) {
            const Compressor c =
                parse_compressor(*one_comp, origin + ".cluster.compressor");
            spec.cluster.compressors.assign(
                static_cast<std::size_t>(spec.cluster.agents), c);
        } else if (per_agent_comp) {
            std::size_t idx = 0;
            if (!per_agent_comp->is_array())
                fail(origin + ".cluster",
                     "'compressors_per_agent' must be an array");
            for (const json& e : *per_agent_comp) {
                spec.cluster.compressors.push_back(parse_compressor(
                    e, origin + ".cluster.compressors_per_agent[" +
                           std::to_string(idx) + "]"));
                ++idx;
            }
        }
        cr.finish();
    }

    spec.sde = r.boolean_or("sde", false);
    spec.dt = r.number_or("dt", 0.0);
    spec.phase = static_cast<int>(r.integer_or("phase", 0));
    spec.paths = r.integer("paths");
    {
        const json& obs = r.require("observables");
        if (!obs.is_array())
            fail(origin, "'observables' must be an array of names");
        for (const json& e : obs) {
            if (!e.is_string())
                fail(origin, "'observables' must contain strings");
            spec.observables.push_back(
                observable_from_name(e.get<std::string>()));
        }
    }
    {
        const json* s = r.optional("seed");
        if (s) {
            if (!s->is_number_integer() || s->get<std::int64_t>() < 0)
                fail(origin, "'seed' must be a non-negative integer");
            spec.seed = s->get<std::uint64_t>();
        }
    }
    spec.output = r.text_or("output", "");
    if (const json* c = r.optional("comparison"))
        spec.comparison = parse_comparison(*c, origin + ".comparison");
    r.finish();

    // Cross-field validation, then a dry model build when an SDE is asked
    // for, so unavailable models surface at load time.
    if (spec.paths < 1) fail(origin, "'paths' must be >= 1");
    if (spec.dt < 0.0) fail(origin, "'dt' must be >= 0");
    if (spec.phase != 0 && spec.phase != 1 && spec.phase != 3)
        fail(origin, "'phase' must be 0, 1 or 3");
    if (spec.phase != 0 && spec.algorithm != Algorithm::DSignSGD)
        fail(origin, "'phase' is only meaningful for the dsignsgd algorithm");
    spec.cluster.validate(spec.landscape, spec.algorithm);
    if (spec.sde) (void)sde_model_for(spec);
    return spec;
}

ExperimentSpec load_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("load_spec: cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_spec(buffer.str(), path);
}

SdeModel sde_model_for(const ExperimentSpec& spec) {
    const ClusterConfig& c = spec.cluster;
    switch (spec.algorithm) {
        case Algorithm::DSGD:
            return dsgd_sde(spec.landscape, c.noise, c.eta, c.agents,
                            c.batch_size);
        case Algorithm::DCSGD:
            return dcsgd_sde(spec.landscape, c.noise, c.compressors, c.eta,
                             c.agents, c.batch_size);
        case Algorithm::DSignSGD: {
            if (spec.phase == 0)
                return dsignsgd_sde(spec.landscape, c.noise, c.eta, c.agents,
                                    c.batch_size);
            double nu = nu_infinity;
            for (const NoiseModel& m : c.noise)
                if (m.kind == NoiseKind::StudentT) nu = m.nu;
            return phase_sde(spec.landscape, c.noise, c.eta, c.agents,
                             c.batch_size, spec.phase, nu);
        }
        case Algorithm::TopKSGD:
        case Algorithm::NormTopKSGD:
            throw std::invalid_argument(
                "sde_model_for: no SDE model exists for the biased Top-k "
                "optimizers");
    }
    throw std::invalid_argument("sde_model_for: unknown algorithm");
}

namespace {

bool wants_points(const std::vector<Observable>& observables) {
    for (Observable obs : observables)
        if (obs == Observable::CoordMean || obs == Observable::CoordVar)
            return true;
    return false;
}

std::int64_t scaled_paths(std::int64_t paths, double scale) {
    if (!(scale > 0.0))
        throw std::invalid_argument("paths_scale must be positive");
    const double scaled = static_cast<double>(paths) * scale;
    return std::max<std::int64_t>(1, std::llround(scaled));
}

}  // namespace

EnsembleStats run_ensemble(const ExperimentSpec& spec, int threads,
                           double paths_scale) {
    spec.cluster.validate(spec.landscape, spec.algorithm);

    EnsembleRequest request;
    request.paths = scaled_paths(spec.paths, paths_scale);
    request.steps = spec.cluster.steps;
    request.stride = spec.cluster.stride;
    request.dim = spec.landscape.dim();
    request.threads = threads;
    request.time_scale = spec.time_scale();
    request.observables = spec.observables;
    request.landscape_has_gap = spec.landscape.has_f_star();

    const bool points = wants_points(spec.observables);

    if (!spec.sde) {
        ClusterConfig cfg = spec.cluster;
        cfg.record_points = points;
        const Landscape& landscape = spec.landscape;
        const Algorithm algorithm = spec.algorithm;
        const std::uint64_t seed = spec.seed;
        return run_paths(request, [&landscape, cfg, algorithm, seed](
                                      Trajectory& traj, std::int64_t path) {
            run_trajectory_into(traj, algorithm, landscape, cfg, seed,
                                static_cast<std::uint64_t>(path));
        });
    }

    const SdeModel model = sde_model_for(spec);
    EmOptions options;
    options.divergence_ceiling = spec.cluster.divergence_ceiling;
    options.halt_on_divergence = spec.cluster.halt_on_divergence;
    options.record_points = points;
    const double dt = spec.sde_dt();
    const std::int64_t steps = spec.cluster.steps;
    const std::int64_t stride = spec.cluster.stride;
    const std::vector<double> x0 = spec.cluster.x0;
    const std::uint64_t seed = spec.seed;
    return run_paths(request, [&model, x0, dt, steps, stride, options, seed](
                                  Trajectory& traj, std::int64_t path) {
        RngStream rng(seed, static_cast<std::uint64_t>(path), 0);
        traj = euler_maruyama(model, x0, dt, steps, rng, stride, options);
    });
}

WeakErrorTable weak_error(const ExperimentSpec& spec, Observable g,
                          const std::vector<double>& eta_list, int threads,
                          double paths_scale, int substeps) {
    if (eta_list.size() < 2)
        throw std::invalid_argument(
            "weak_error: need at least two eta values to fit a slope");
    if (substeps < 1)
        throw std::invalid_argument("weak_error: substeps must be >= 1");
    if (g == Observable::CoordMean || g == Observable::CoordVar)
        throw std::invalid_argument(
            "weak_error: coordinate observables are not scalar; use "
            "loss_gap, grad_l1 or grad_l2sq");
    spec.cluster.validate(spec.landscape, spec.algorithm);
    if (spec.cluster.steps < 1)
        throw std::invalid_argument("weak_error: cluster.steps must be >= 1");

    const double horizon =
        static_cast<double>(spec.cluster.steps) * spec.cluster.eta;
    const std::string series_name = observable_name(g);
    const Landscape& landscape = spec.landscape;

    WeakErrorTable table;
    table.observable = series_name;

    for (double eta : eta_list) {
        if (!(eta > 0.0) || !std::isfinite(eta))
            throw std::invalid_argument("weak_error: eta values must be positive");
        const std::int64_t steps =
            std::max<std::int64_t>(1, std::llround(horizon / eta));

        // Discrete leg.
        ClusterConfig cfg = spec.cluster;
        cfg.eta = eta;
        cfg.steps = steps;
        cfg.stride = 1;
        cfg.record_points = false;

        // The diffusion coefficients scale with the step size, so the
        // reference model has to be rebuilt for every eta in the sweep.
        ExperimentSpec leg = spec;
        leg.cluster = cfg;
        const SdeModel model = sde_model_for(leg);

        EnsembleRequest request;
        request.paths = scaled_paths(spec.paths, paths_scale);
        request.steps = steps;
        request.stride = 1;
        request.dim = landscape.dim();
        request.threads = threads;
        request.time_scale = eta;
        request.observables = {g};
        request.landscape_has_gap = landscape.has_f_star();

        const Algorithm algorithm = spec.algorithm;
        const std::uint64_t seed = spec.seed;
        const EnsembleStats discrete =
            run_paths(request, [&landscape, cfg, algorithm, seed](
                                   Trajectory& traj, std::int64_t path) {
                run_trajectory_into(traj, algorithm, landscape, cfg, seed,
                                    static_cast<std::uint64_t>(path));
            });

        // SDE reference on a substeps-times finer grid, recorded at the
        // discrete checkpoints.
        const double dt = eta / substeps;
        const std::int64_t sde_steps = steps * substeps;
        EnsembleRequest sde_request = request;
        sde_request.steps = sde_steps;
        sde_request.stride = substeps;
        sde_request.time_scale = dt;
        EmOptions options;
        options.divergence_ceiling = spec.cluster.divergence_ceiling;
        options.halt_on_divergence = spec.cluster.halt_on_divergence;
        const std::vector<double> x0 = spec.cluster.x0;
        const std::uint64_t sde_seed = seed ^ kSdeSeedSalt;
        const EnsembleStats sde = run_paths(
            sde_request, [&model, x0, dt, sde_steps, substeps, options,
                          sde_seed](Trajectory& traj, std::int64_t path) {
                RngStream rng(sde_seed, static_cast<std::uint64_t>(path), 0);
                traj = euler_maruyama(model, x0, dt, sde_steps, rng, substeps,
                                      options);
            });

        const SeriesStats& a = discrete.find(series_name);
        const SeriesStats& b = sde.find(series_name);
        if (a.value.size() != b.value.size())
            throw std::runtime_error("weak_error: checkpoint grids diverged");
        double max_err = 0.0;
        for (std::size_t i = 0; i < a.value.size(); ++i)
            max_err = std::max(max_err, std::abs(a.value[i] - b.value[i]));
        table.rows.push_back({eta, max_err});
    }

    // Log-log least squares for the order estimate.
    const std::size_t n = table.rows.size();
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = std::log(table.rows[i].eta);
        ys[i] = std::log(std::max(table.rows[i].max_error, 1e-300));
    }
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mean_x) * (xs[i] - mean_x);
        sxy += (xs[i] - mean_x) * (ys[i] - mean_y);
    }
    if (sxx == 0.0)
        throw std::invalid_argument("weak_error: eta values must be distinct");
    table.slope = sxy / sxx;
    if (n > 2) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double fit = mean_y + table.slope * (xs[i] - mean_x);
            ssr += (ys[i] - fit) * (ys[i] - fit);
        }
        table.slope_std_error =
            std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
    }
    return table;
}

BoundCheckReport bound_check(const EnsembleStats& stats,
                             const std::string& series,
                             const std::function<double(double)>& bound_at,
                             double slack) {
    if (!(slack > 0.0))
        throw std::invalid_argument("bound_check: slack must be positive");
    if (!bound_at)
        throw std::invalid_argument("bound_check: bound callable is empty");
    const SeriesStats& s = stats.find(series);

    BoundCheckReport report;
    report.series = series;
    report.slack = slack;
    for (std::size_t i = 0; i < s.value.size(); ++i) {
        const double t =
            static_cast<double>(stats.recorded_steps[i]) * stats.time_scale;
        const double ceiling = slack * bound_at(t);
        report.steps_checked += 1;
        if (std::isinf(ceiling)) continue;
        const double v = s.value[i] + 2.0 * s.std_error[i];
        if (ceiling > 0.0)
            report.max_ratio = std::max(report.max_ratio, v / ceiling);
        if (v > ceiling) {
            report.violations += 1;
            if (report.first_violation_step < 0)
                report.first_violation_step = stats.recorded_steps[i];
        }
    }
    report.passed = report.violations == 0;
    return report;
}

StationaryCheckReport stationary_check(const EnsembleStats& stats,
                                       const StationaryMoments& predicted,
                                       double rel_tol) {
    if (!(rel_tol > 0.0))
        throw std::invalid_argument("stationary_check: rel_tol must be positive");
    const std::size_t dim = predicted.cov_diag.size();
    if (dim == 0)
        throw std::invalid_argument("stationary_check: empty prediction");
    const std::size_t rows = stats.recorded_steps.size();
    if (rows == 0)
        throw std::invalid_argument("stationary_check: no recorded steps");
    const std::size_t window = std::max<std::size_t>(1, rows / 10);
    const std::size_t start = rows - window;

    StationaryCheckReport report;
    report.window_rows = static_cast<std::int64_t>(window);
    report.rel_tol = rel_tol;
    for (std::size_t j = 0; j < dim; ++j) {
        const SeriesStats& s =
            stats.find("coord" + std::to_string(j) + "_var");
        double mean = 0.0;
        for (std::size_t i = start; i < rows; ++i) mean += s.value[i];
        mean /= static_cast<double>(window);
        const double pred = predicted.cov_diag[j];
        const double denom = std::max(std::abs(pred), 1e-300);
        report.empirical.push_back(mean);
        report.predicted.push_back(pred);
        report.rel_error.push_back(std::abs(mean - pred) / denom);
        report.max_rel_error =
            std::max(report.max_rel_error, report.rel_error.back());
    }
    report.passed = report.max_rel_error <= rel_tol;
    return report;
}

std::function<double(double)> dsignsgd_composite_bound(
    const BoundParams& params, const PhaseConstants& constants,
    double handoff_time, double s_handoff) {
    if (!(handoff_time >= 0.0) || !(s_handoff >= 0.0))
        throw std::invalid_argument(
            "dsignsgd_composite_bound: handoff time and level must be >= 0");
    BoundParams tail = params;
    tail.s0 = s_handoff;
    return [params, tail, constants, handoff_time](double t) {
        if (t < handoff_time)
            return dsignsgd_phase_bound(t, 1, params, constants);
        const double tau = t - handoff_time;
        return std::max(dsignsgd_phase_bound(tau, 2, tail, constants),
                        dsignsgd_phase_bound(tau, 3, tail, constants));
    };
}

}  // namespace dsim
