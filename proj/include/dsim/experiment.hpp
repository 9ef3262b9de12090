// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// Experiment descriptions and the checks that run over their ensembles.
// Specs are JSON with a versioned schema; unknown keys are hard errors so
// that a typo never silently falls back to a default.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dsim/analysis.hpp"
#include "dsim/ensemble.hpp"
#include "dsim/landscape.hpp"
#include "dsim/optimizer.hpp"
#include "dsim/sde.hpp"

namespace dsim {

// Optional analysis references evaluated by the bounds / scaling /
// stationary subcommands.
struct ComparisonSpec {
    std::string bound;       // "", "dsgd_pl", "dcsgd_pl" or "dsignsgd_phases"
    double slack = 1.05;     // multiplicative bound tolerance
    std::string rule;        // scaling-rule identifier ("" = none)
    ScalingFactors factors;  // factors evaluated against the rule
    std::string stationary;  // "", "dcsgd" or "dsignsgd"
    double rel_tol = 0.05;   // stationary relative tolerance
    double nu = nu_infinity;     // phase-constant degrees of freedom
    double epsilon = 0.01;       // phase-constant saturation tolerance
};

struct ExperimentSpec {
    int schema = 1;
    std::string name;
    std::string description;
    Landscape landscape;
    Algorithm algorithm = Algorithm::DSGD;
    ClusterConfig cluster;
    bool sde = false;
    double dt = 0.0;    // SDE integrator step; 0 defaults to cluster.eta
    int phase = 0;      // 0 = full sign model; 1/3 select the reduced ones
    std::int64_t paths = 0;
    std::vector<Observable> observables;
    std::uint64_t seed = 0;
    std::string output;  // CSV destination ("" = none)
    ComparisonSpec comparison;

    double sde_dt() const { return dt > 0.0 ? dt : cluster.eta; }
    // eta for discrete runs, dt for SDE runs.
    double time_scale() const { return sde ? sde_dt() : cluster.eta; }
};

// Parses and fully validates a spec. Unknown keys and schema violations
// throw std::invalid_argument naming the offending field; when sde is set
// the SDE model is built once so unavailable models (e.g. infinite-variance
// noise) are rejected here rather than mid-run.
ExperimentSpec load_spec(const std::string& path);
ExperimentSpec parse_spec(const std::string& json_text,
                          const std::string& origin);

// The continuous-time model matching the spec's algorithm (and phase, for
// sign descent). Throws for optimizers without one.
SdeModel sde_model_for(const ExperimentSpec& spec);

// Runs the ensemble described by the spec (discrete optimizer or SDE).
// paths_scale multiplicatively shrinks/grows spec.paths (minimum 1 path).
EnsembleStats run_ensemble(const ExperimentSpec& spec, int threads = 1,
                           double paths_scale = 1.0);

// --- Weak-error estimation ----------------------------------------------------

struct WeakErrorRow {
    double eta = 0.0;
    double max_error = 0.0;  // max over checkpoints of |discrete - sde| mean
};

struct WeakErrorTable {
    std::string observable;
    std::vector<WeakErrorRow> rows;
    double slope = 0.0;        // log-log least-squares fit
    double slope_std_error = 0.0;
};

// Shared-horizon comparison of the discrete optimizer against its SDE.
// The horizon is cluster.steps * cluster.eta from the spec; each eta in
// eta_list runs round(horizon/eta) discrete steps against an Euler-Maruyama
// reference on a substeps-times finer grid. Throws when eta_list has fewer
// than two entries.
WeakErrorTable weak_error(const ExperimentSpec& spec, Observable g,
                          const std::vector<double>& eta_list,
                          int threads = 1, double paths_scale = 1.0,
                          int substeps = 10);

// --- Checks -------------------------------------------------------------------

struct BoundCheckReport {
    std::string series;
    double slack = 0.0;
    std::int64_t steps_checked = 0;
    std::int64_t violations = 0;
    std::int64_t first_violation_step = -1;
    double max_ratio = 0.0;  // max of (value + 2 stderr) / (slack * bound)
    bool passed = false;
};

// Per-step domination test: value + 2*stderr <= slack * bound(time).
// An infinite bound never counts as violated.
BoundCheckReport bound_check(const EnsembleStats& stats,
                             const std::string& series,
                             const std::function<double(double)>& bound_at,
                             double slack);

struct StationaryCheckReport {
    std::int64_t window_rows = 0;  // tail rows averaged
    std::vector<double> empirical;  // per-coordinate tail-mean variance
    std::vector<double> predicted;
    std::vector<double> rel_error;
    double max_rel_error = 0.0;
    double rel_tol = 0.0;
    bool passed = false;
};

// Compares tail-window (last 10% of recorded rows) averaged per-coordinate
// variance against predicted.cov_diag. The stats must carry coord*_var
// series for every coordinate.
StationaryCheckReport stationary_check(const EnsembleStats& stats,
                                       const StationaryMoments& predicted,
                                       double rel_tol);

// Composite sign-descent phase bound used by the bounds subcommand: the
// descent parabola until its zero time, then the larger of the saturated-
// and small-signal-regime curves restarted from the handoff level. s_handoff
// is the measured level at the handoff time (e.g. mean + 2 stderr there).
std::function<double(double)> dsignsgd_composite_bound(
    const BoundParams& params, const PhaseConstants& constants,
    double handoff_time, double s_handoff);

}  // namespace dsim
