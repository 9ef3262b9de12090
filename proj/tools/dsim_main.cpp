// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// Command-line front end. Subcommands map one-to-one onto the library's
// experiment operations:
//
//   run          ensemble simulation, stats written as CSV
//   validate-sde weak-error table and convergence-order fit
//   bounds       per-step domination check against the closed-form envelope
//   scaling      transfer-rule residual, predicted plateaus, optional
//                empirical verification ensembles
//   stationary   tail coordinate variances against the closed-form levels
//   phases       sign-descent regime constants for given tail index
//   list-presets shipped figure-reproduction specs
//
// Exit codes: 0 success, 1 validation/usage error, 2 check failure.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dsim/analysis.hpp"
#include "dsim/csv.hpp"
#include "dsim/ensemble.hpp"
#include "dsim/experiment.hpp"
#include "dsim/presets.hpp"
#include "dsim/special.hpp"

namespace {

using dsim::format_double;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitCheckFailed = 2;

struct GlobalOpts {
    std::optional<std::uint64_t> seed;  // --seed beats DSIM_SEED beats spec
    int threads = 1;
    std::string out_dir;
    double paths_scale = 1.0;
};

// Spec argument resolution: an existing file wins; otherwise the basename
// (sans extension) is looked up among the built-in presets.
dsim::ExperimentSpec resolve_spec(const std::string& arg) {
    if (std::filesystem::exists(arg)) return dsim::load_spec(arg);
    const std::string stem = std::filesystem::path(arg).stem().string();
    if (const dsim::Preset* p = dsim::find_preset(stem)) {
        return dsim::parse_spec(p->json_text, "preset:" + stem);
    }
    throw std::invalid_argument("'" + arg +
                                "' is neither a spec file nor a preset name "
                                "(see list-presets)");
}

void apply_seed_override(dsim::ExperimentSpec& spec, const GlobalOpts& opts) {
    if (opts.seed) {
        spec.seed = *opts.seed;
        return;
    }
    if (const char* env = std::getenv("DSIM_SEED")) {
        try {
            size_t used = 0;
            const unsigned long long v = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument(env);
            spec.seed = v;
        } catch (const std::exception&) {
            throw std::invalid_argument("DSIM_SEED is not an unsigned integer: '" +
                                        std::string(env) + "'");
        }
    }
}

std::string output_path(const dsim::ExperimentSpec& spec, const GlobalOpts& opts,
                        const std::string& suffix = ".csv") {
    const std::string fallback = (spec.name.empty() ? "ensemble" : spec.name) + suffix;
    std::filesystem::path p(spec.output.empty() ? fallback : spec.output);
    if (!opts.out_dir.empty() && p.is_relative()) {
        p = std::filesystem::path(opts.out_dir) / p;
    }
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    return p.string();
}

// Tail index: Student-t noise carries its own degrees of freedom; Gaussian
// (and none) mean the normal limit.
double analysis_nu(const dsim::ExperimentSpec& spec) {
    for (const dsim::NoiseModel& m : spec.cluster.noise) {
        if (m.kind == dsim::NoiseKind::StudentT) return m.nu;
    }
    return dsim::nu_infinity;
}

// Mean over the last max(1, rows/10) recorded rows; the same window the
// stationary check uses.
double tail_mean(const dsim::EnsembleStats& stats, const std::string& series) {
    const dsim::SeriesStats& s = stats.find(series);
    const std::int64_t rows = static_cast<std::int64_t>(s.value.size());
    const std::int64_t window = std::max<std::int64_t>(1, rows / 10);
    double acc = 0.0;
    for (std::int64_t i = rows - window; i < rows; ++i) acc += s.value[static_cast<size_t>(i)];
    return acc / static_cast<double>(window);
}

void print_ensemble_summary(const dsim::EnsembleStats& stats) {
    std::cout << "paths=" << stats.paths << " diverged=" << stats.diverged
              << " contributing=" << stats.contributing
              << " rows=" << stats.recorded_steps.size() << "\n";
    for (const dsim::SeriesStats& s : stats.series) {
        if (s.value.empty()) continue;
        std::cout << s.name << ": final mean=" << format_double(s.value.back())
                  << " stderr=" << format_double(s.std_error.back()) << "\n";
    }
}

int cmd_run(const std::string& spec_arg, const GlobalOpts& opts) {
    dsim::ExperimentSpec spec = resolve_spec(spec_arg);
    apply_seed_override(spec, opts);
    const dsim::EnsembleStats stats =
        dsim::run_ensemble(spec, opts.threads, opts.paths_scale);
    const std::string path = output_path(spec, opts);
    dsim::emit_csv(stats, path);
    std::cout << "wrote " << path << "\n";
    print_ensemble_summary(stats);
    return kExitOk;
}

int cmd_validate_sde(const std::string& spec_arg, const GlobalOpts& opts,
                     const std::vector<double>& etas, const std::string& observable,
                     int substeps, std::optional<double> min_slope) {
    dsim::ExperimentSpec spec = resolve_spec(spec_arg);
    apply_seed_override(spec, opts);
    dsim::Observable g = spec.observables.empty() ? dsim::Observable::LossGap
                                                  : spec.observables.front();
    if (!observable.empty()) g = dsim::observable_from_name(observable);
    const dsim::WeakErrorTable table =
        dsim::weak_error(spec, g, etas, opts.threads, opts.paths_scale, substeps);

    for (const dsim::WeakErrorRow& row : table.rows) {
        std::cout << "eta=" << format_double(row.eta)
                  << " max_error=" << format_double(row.max_error) << "\n";
    }
    std::cout << "slope=" << format_double(table.slope)
              << " stderr=" << format_double(table.slope_std_error) << "\n";

    dsim::ExperimentSpec named = spec;
    named.output = (spec.name.empty() ? "weak-error" : spec.name + "-weak-error") + ".csv";
    const std::string path = output_path(named, opts);
    dsim::emit_csv(table, path);
    std::cout << "wrote " << path << "\n";

    if (min_slope && table.slope < *min_slope) {
        std::cerr << "check failed: slope " << format_double(table.slope) << " < "
                  << format_double(*min_slope) << "\n";
        return kExitCheckFailed;
    }
    return kExitOk;
}

int report_bound_check(const dsim::BoundCheckReport& report) {
    std::cout << "series=" << report.series << " slack=" << format_double(report.slack)
              << " steps_checked=" << report.steps_checked
              << " violations=" << report.violations
              << " max_ratio=" << format_double(report.max_ratio) << "\n";
    if (!report.passed) {
        std::cerr << "check failed: bound violated first at step "
                  << report.first_violation_step << "\n";
        return kExitCheckFailed;
    }
    std::cout << "bound holds\n";
    return kExitOk;
}

int cmd_bounds(const std::string& spec_arg, const GlobalOpts& opts) {
    dsim::ExperimentSpec spec = resolve_spec(spec_arg);
    apply_seed_override(spec, opts);
    if (spec.comparison.bound.empty()) {
        throw std::invalid_argument("spec has no comparison.bound entry");
    }
    const dsim::BoundParams params =
        dsim::bound_params_from(spec.landscape, spec.cluster);
    const dsim::EnsembleStats stats =
        dsim::run_ensemble(spec, opts.threads, opts.paths_scale);
    const std::string series = "loss_gap";
    const double slack = spec.comparison.slack;

    if (spec.comparison.bound == "dsgd_pl") {
        std::cout << "asymptote=" << format_double(dsim::dsgd_pl_asymptote(params)) << "\n";
        return report_bound_check(dsim::bound_check(
            stats, series, [&](double t) { return dsim::dsgd_pl_bound(t, params); },
            slack));
    }
    if (spec.comparison.bound == "dcsgd_pl") {
        const double delta = dsim::dcsgd_delta(params);
        std::cout << "delta=" << format_double(delta)
                  << " lr_threshold=" << format_double(dsim::dcsgd_lr_threshold(params))
                  << " asymptote=" << format_double(dsim::dcsgd_pl_asymptote(params))
                  << "\n";
        if (delta <= 0.0) {
            std::cout << "note: step size beyond the compression-corrected "
                         "threshold; envelope is infinite\n";
        }
        return report_bound_check(dsim::bound_check(
            stats, series, [&](double t) { return dsim::dcsgd_pl_bound(t, params); },
            slack));
    }
    if (spec.comparison.bound == "dsignsgd_phases") {
        const dsim::PhaseConstants constants =
            dsim::phase_constants(analysis_nu(spec), spec.comparison.epsilon);
        const dsim::SeriesStats& s = stats.find(series);
        const double stationary = tail_mean(stats, series);

        // Descent completion: first recorded step whose ensemble mean falls
        // within twice the tail-window stationary level.
        size_t handoff = s.value.empty() ? 0 : s.value.size() - 1;
        for (size_t i = 0; i < s.value.size(); ++i) {
            if (s.value[i] <= 2.0 * stationary) {
                handoff = i;
                break;
            }
        }
        const double handoff_time =
            static_cast<double>(stats.recorded_steps[handoff]) * stats.time_scale;
        const double s_handoff = s.value[handoff] + 2.0 * s.std_error[handoff];
        const double t_star = dsim::dsignsgd_descent_time(params);
        std::cout << "descent_time_predicted=" << format_double(t_star)
                  << " descent_time_measured=" << format_double(handoff_time)
                  << " stationary_tail_mean=" << format_double(stationary) << "\n";

        const auto composite =
            dsim::dsignsgd_composite_bound(params, constants, handoff_time, s_handoff);
        const auto envelope = [&](double t) {
            if (t < handoff_time) return dsim::dsignsgd_phase_bound(t, 1, params, constants);
            return composite(t);
        };
        return report_bound_check(dsim::bound_check(stats, series, envelope, slack));
    }
    throw std::invalid_argument("unknown comparison.bound '" + spec.comparison.bound + "'");
}

dsim::AsymptoteKind asymptote_kind_for_rule(const std::string& rule) {
    if (rule.rfind("dcsgd", 0) == 0) return dsim::AsymptoteKind::DCSGD;
    if (rule.rfind("dsignsgd", 0) == 0) return dsim::AsymptoteKind::DSignSGD;
    return dsim::AsymptoteKind::DSGD;
}

// The reference configuration a rescaled run is measured against: the same
// cluster at unit factors, uncompressed for the compressed-descent rules.
dsim::ExperimentSpec reference_spec(const dsim::ExperimentSpec& base,
                                    const std::string& rule) {
    dsim::ExperimentSpec ref = base;
    if (asymptote_kind_for_rule(rule) == dsim::AsymptoteKind::DCSGD) {
        ref.algorithm = dsim::Algorithm::DSGD;
        ref.cluster.compressors.clear();
    }
    return ref;
}

dsim::ExperimentSpec scaled_spec(const dsim::ExperimentSpec& base,
                                 const dsim::ScalingFactors& f) {
    dsim::ExperimentSpec scaled = base;
    scaled.cluster.eta = base.cluster.eta * f.kappa;

    const double b = base.cluster.batch_size * f.delta;
    const double n = base.cluster.agents * f.alpha;
    if (b < 1.0 || b != std::floor(b)) {
        throw std::invalid_argument("batch factor " + format_double(f.delta) +
                                    " does not give an integer batch size");
    }
    if (n < 1.0 || n != std::floor(n)) {
        throw std::invalid_argument("agent factor " + format_double(f.alpha) +
                                    " does not give an integer agent count");
    }
    scaled.cluster.batch_size = static_cast<int>(b);
    scaled.cluster.agents = static_cast<int>(n);

    // Replicate/trim per-agent models to the scaled count.
    auto resize_cyclic = [](auto& models, int agents) {
        if (models.empty()) return;
        const auto original = models;
        models.clear();
        for (int i = 0; i < agents; ++i) {
            models.push_back(original[static_cast<size_t>(i) % original.size()]);
        }
    };
    resize_cyclic(scaled.cluster.noise, scaled.cluster.agents);
    resize_cyclic(scaled.cluster.compressors, scaled.cluster.agents);

    if (f.beta != 1.0) {
        const int dim = base.landscape.dim();
        for (dsim::Compressor& c : scaled.cluster.compressors) {
            const std::optional<double> w = dsim::omega(c, dim);
            if (!w || *w == 0.0) {
                throw std::invalid_argument(
                    "compressor factor requires a lossy unbiased compressor");
            }
            const double k_scaled = static_cast<double>(dim) / (1.0 + f.beta * *w);
            if (k_scaled != std::floor(k_scaled)) {
                throw std::invalid_argument(
                    "no integer sparsification level realizes compressor factor " +
                    format_double(f.beta));
            }
            c.k = static_cast<int>(k_scaled);
        }
    }
    return scaled;
}

int cmd_scaling(const std::string& spec_arg, const GlobalOpts& opts, std::string rule,
                dsim::ScalingFactors factors, double tol, bool verify,
                double verify_tol) {
    dsim::ExperimentSpec spec = resolve_spec(spec_arg);
    apply_seed_override(spec, opts);
    if (rule.empty()) rule = spec.comparison.rule;
    if (rule.empty()) {
        throw std::invalid_argument("no rule given (--rule or spec comparison.rule)");
    }
    const double nu = analysis_nu(spec);
    const dsim::BoundParams params =
        dsim::bound_params_from(spec.landscape, spec.cluster);

    const double residual = dsim::scaling_check(rule, factors, params, nu);
    const dsim::AsymptoteKind kind = asymptote_kind_for_rule(rule);
    const dsim::AsymptoteKind ref_kind =
        kind == dsim::AsymptoteKind::DCSGD ? dsim::AsymptoteKind::DSGD : kind;
    const double predicted_scaled =
        dsim::predicted_asymptote(kind, factors, params, nu);
    const double predicted_ref =
        dsim::predicted_asymptote(ref_kind, dsim::ScalingFactors{}, params, nu);
    std::cout << "rule=" << rule << " residual=" << format_double(residual)
              << " predicted_scaled=" << format_double(predicted_scaled)
              << " predicted_reference=" << format_double(predicted_ref) << "\n";

    bool ok = residual <= tol;
    if (!ok) {
        std::cerr << "check failed: residual " << format_double(residual)
                  << " exceeds tolerance " << format_double(tol) << "\n";
    }

    if (verify) {
        const dsim::ExperimentSpec ref = reference_spec(spec, rule);
        const dsim::ExperimentSpec scaled = scaled_spec(spec, factors);
        const dsim::EnsembleStats ref_stats =
            dsim::run_ensemble(ref, opts.threads, opts.paths_scale);
        const dsim::EnsembleStats scaled_stats =
            dsim::run_ensemble(scaled, opts.threads, opts.paths_scale);
        const double ref_tail = tail_mean(ref_stats, "loss_gap");
        const double scaled_tail = tail_mean(scaled_stats, "loss_gap");
        const double ratio = scaled_tail / ref_tail;
        std::cout << "reference_tail=" << format_double(ref_tail)
                  << " scaled_tail=" << format_double(scaled_tail)
                  << " ratio=" << format_double(ratio) << "\n";
        if (std::abs(ratio - 1.0) > verify_tol) {
            std::cerr << "check failed: empirical ratio " << format_double(ratio)
                      << " deviates from 1 by more than " << format_double(verify_tol)
                      << "\n";
            ok = false;
        }
    }
    return ok ? kExitOk : kExitCheckFailed;
}

int cmd_stationary(const std::string& spec_arg, const GlobalOpts& opts) {
    dsim::ExperimentSpec spec = resolve_spec(spec_arg);
    apply_seed_override(spec, opts);

    std::string kind = spec.comparison.stationary;
    if (kind.empty()) {
        switch (spec.algorithm) {
            case dsim::Algorithm::DSGD:
            case dsim::Algorithm::DCSGD:
                kind = "dcsgd";
                break;
            case dsim::Algorithm::DSignSGD:
                kind = "dsignsgd";
                break;
            default:
                throw std::invalid_argument(
                    "no stationary prediction exists for this algorithm");
        }
    }
    if (!spec.landscape.is_diagonal_quadratic()) {
        throw std::invalid_argument(
            "stationary comparison needs a diagonal quadratic landscape");
    }
    bool tracks_variance = false;
    for (dsim::Observable obs : spec.observables) {
        tracks_variance = tracks_variance || obs == dsim::Observable::CoordVar;
    }
    if (!tracks_variance) {
        throw std::invalid_argument("spec must record the coord_var observable");
    }

    const std::vector<double> h = spec.landscape.h_diag();
    const dsim::ClusterConfig& c = spec.cluster;
    const double t_inf = std::numeric_limits<double>::infinity();
    dsim::StationaryMoments predicted;
    if (kind == "dcsgd") {
        int k = spec.landscape.dim();
        for (const dsim::Compressor& comp : c.compressors) {
            if (comp.kind == dsim::CompressorKind::Identity) continue;
            if (comp.kind != dsim::CompressorKind::RandK) {
                throw std::invalid_argument(
                    "stationary prediction covers rand-k compression only");
            }
            k = comp.k;
        }
        double sigma_sq = -1.0;
        for (const dsim::NoiseModel& m : c.noise) {
            const double factor = m.variance_factor();
            for (double s : m.scale_diag) {
                const double eff = factor * s * s / c.batch_size;
                if (sigma_sq < 0.0) sigma_sq = eff;
                if (eff != sigma_sq) {
                    throw std::invalid_argument(
                        "stationary prediction needs homogeneous noise scales");
                }
            }
        }
        if (sigma_sq < 0.0) sigma_sq = 0.0;
        predicted = dsim::dcsgd_stationary_moments(t_inf, h, k, sigma_sq, c.eta,
                                                   c.agents, c.x0);
    } else if (kind == "dsignsgd") {
        std::vector<std::vector<double>> scales;
        for (const dsim::NoiseModel& m : c.noise) scales.push_back(m.scale_diag);
        predicted = dsim::dsignsgd_stationary_moments(t_inf, h, scales,
                                                      analysis_nu(spec), c.eta,
                                                      c.agents, c.batch_size, c.x0);
    } else {
        throw std::invalid_argument("unknown comparison.stationary '" + kind + "'");
    }

    const dsim::EnsembleStats stats =
        dsim::run_ensemble(spec, opts.threads, opts.paths_scale);
    const dsim::StationaryCheckReport report =
        dsim::stationary_check(stats, predicted, spec.comparison.rel_tol);

    std::cout << "window_rows=" << report.window_rows << "\n";
    for (size_t j = 0; j < report.empirical.size(); ++j) {
        std::cout << "coord" << j << ": empirical=" << format_double(report.empirical[j])
                  << " predicted=" << format_double(report.predicted[j])
                  << " rel_error=" << format_double(report.rel_error[j]) << "\n";
    }
    std::cout << "max_rel_error=" << format_double(report.max_rel_error)
              << " rel_tol=" << format_double(report.rel_tol) << "\n";
    if (!report.passed) {
        std::cerr << "check failed: stationary variance off by more than "
                  << format_double(report.rel_tol) << "\n";
        return kExitCheckFailed;
    }
    std::cout << "stationary levels match\n";
    return kExitOk;
}

double parse_nu_arg(const std::string& text) {
    if (text == "inf" || text == "infinity") return dsim::nu_infinity;
    try {
        size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("--nu expects a positive number or 'inf', got '" +
                                    text + "'");
    }
}

int cmd_phases(const std::string& nu_text, double eps) {
    const double nu = parse_nu_arg(nu_text);
    const dsim::PhaseConstants c = dsim::phase_constants(nu, eps);
    std::cout << "nu=" << (std::isinf(c.nu) ? "inf" : format_double(c.nu))
              << " epsilon=" << format_double(c.epsilon) << "\n"
              << "psi=" << format_double(c.psi) << "\n"
              << "m=" << format_double(c.m) << "\n"
              << "q1=" << format_double(c.q1) << "\n"
              << "q2=" << format_double(c.q2) << "\n"
              << "q_hat=" << format_double(c.q_hat) << "\n"
              << "x_star=" << format_double(c.x_star) << "\n"
              << "ell=" << format_double(c.ell) << "\n";
    return kExitOk;
}

int cmd_list_presets() {
    for (const dsim::Preset& p : dsim::preset_registry()) {
        std::string description;
        try {
            const nlohmann::json doc = nlohmann::json::parse(p.json_text);
            description = doc.value("description", "");
        } catch (const nlohmann::json::exception&) {
            description = "(unparseable)";
        }
        std::cout << p.name << "\n    " << description << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed optimizer ensembles, diffusion limits, and "
                 "closed-form envelope checks"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts opts;
    std::uint64_t seed_flag = 0;
    CLI::Option* seed_opt =
        app.add_option("--seed", seed_flag, "override the spec's RNG seed");
    app.add_option("--threads", opts.threads,
                   "worker threads (<= 0 selects hardware concurrency)");
    app.add_option("--out-dir", opts.out_dir, "directory for CSV outputs");
    app.add_option("--paths-scale", opts.paths_scale,
                   "multiplier on every ensemble's path count")
        ->check(CLI::PositiveNumber);

    std::string spec_arg;

    CLI::App* run = app.add_subcommand("run", "simulate an ensemble and write CSV");
    run->add_option("spec", spec_arg, "spec file or preset name")->required();

    CLI::App* validate =
        app.add_subcommand("validate-sde", "weak-error table against the SDE model");
    std::vector<double> etas;
    std::string observable;
    int substeps = 10;
    double min_slope = 0.0;
    validate->add_option("spec", spec_arg, "spec file or preset name")->required();
    validate->add_option("--etas", etas, "step sizes to test")
        ->required()
        ->delimiter(',');
    validate->add_option("--observable", observable,
                         "observable to compare (default: spec's first)");
    validate->add_option("--substeps", substeps,
                         "integrator substeps per discrete step for the reference")
        ->check(CLI::PositiveNumber);
    CLI::Option* min_slope_opt = validate->add_option(
        "--min-slope", min_slope, "fail (exit 2) when the fitted order is smaller");

    CLI::App* bounds =
        app.add_subcommand("bounds", "check the spec's closed-form envelope");
    bounds->add_option("spec", spec_arg, "spec file or preset name")->required();

    CLI::App* scaling =
        app.add_subcommand("scaling", "evaluate a hyper-parameter transfer rule");
    std::string rule;
    dsim::ScalingFactors factors;
    double tol = 0.01;
    bool verify = false;
    double verify_tol = 0.2;
    scaling->add_option("spec", spec_arg, "spec file or preset name")->required();
    scaling->add_option("--rule", rule, "rule name (default: spec comparison.rule)");
    scaling->add_option("--kappa", factors.kappa, "learning-rate factor");
    scaling->add_option("--delta", factors.delta, "batch-size factor");
    scaling->add_option("--alpha", factors.alpha, "agent-count factor");
    scaling->add_option("--beta", factors.beta, "compressor-variance factor");
    scaling->add_option("--tol", tol, "residual tolerance");
    scaling->add_flag("--verify", verify, "also run reference and rescaled ensembles");
    scaling->add_option("--verify-tol", verify_tol,
                        "allowed |tail ratio - 1| for --verify");

    CLI::App* stationary =
        app.add_subcommand("stationary", "tail variances against closed-form levels");
    stationary->add_option("spec", spec_arg, "spec file or preset name")->required();

    CLI::App* phases =
        app.add_subcommand("phases", "print sign-descent regime constants");
    std::string nu_text = "inf";
    double eps = 0.01;
    phases->add_option("--nu", nu_text, "tail index (number or 'inf')");
    phases->add_option("--eps", eps, "saturation tolerance in (0, 0.1]");

    CLI::App* list_presets =
        app.add_subcommand("list-presets", "list the shipped figure specs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    if (*seed_opt) opts.seed = seed_flag;

    try {
        if (*run) return cmd_run(spec_arg, opts);
        if (*validate) {
            return cmd_validate_sde(spec_arg, opts, etas, observable, substeps,
                                    *min_slope_opt ? std::optional<double>(min_slope)
                                                   : std::nullopt);
        }
        if (*bounds) return cmd_bounds(spec_arg, opts);
        if (*scaling) {
            return cmd_scaling(spec_arg, opts, rule, factors, tol, verify, verify_tol);
        }
        if (*stationary) return cmd_stationary(spec_arg, opts);
        if (*phases) return cmd_phases(nu_text, eps);
        if (*list_presets) return cmd_list_presets();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
