// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// Deterministic parallel ensembles. Path indices are partitioned into 256
// fixed blocks; workers claim whole blocks, accumulate moments serially
// inside each block, and the blocks are merged in index order afterward.
// Together with counter-based path RNG this makes every statistic
// byte-identical for any worker count.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dsim/optimizer.hpp"

namespace dsim {

// One-pass central-moment accumulator through order four, mergeable without
// revisiting data (pairwise update rules of Chan/Pebay).
struct MomentAccumulator {
    std::int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;

    void add(double x);
    void merge(const MomentAccumulator& other);

    double variance() const;        // unbiased; 0 when n < 2
    double standard_error() const;  // of the mean
    // Estimated sampling variance of the unbiased variance itself,
    // (m4/n - s^4 (n-3)/(n-1)) / n; 0 when n < 2.
    double variance_of_variance() const;
};

enum class Observable { LossGap, GradL1, GradL2Sq, CoordMean, CoordVar };

Observable observable_from_name(std::string_view name);  // throws on unknown
const char* observable_name(Observable obs);

// One emitted column group. `value` is the tracked statistic per recorded
// step; `std_error` its Monte-Carlo uncertainty; `variance` the across-path
// sample variance for mean-type series and std_error^2 for the coord*_var
// series (whose value already is a variance).
struct SeriesStats {
    std::string name;
    std::vector<double> value;
    std::vector<double> variance;
    std::vector<double> std_error;
};

struct EnsembleStats {
    std::vector<std::int64_t> recorded_steps;
    double time_scale = 0.0;  // SDE time per step: eta (discrete) or dt
    std::int64_t paths = 0;      // requested
    std::int64_t diverged = 0;   // excluded from every statistic
    std::int64_t contributing = 0;  // paths - diverged

    std::vector<SeriesStats> series;

    bool has_series(std::string_view name) const;
    const SeriesStats& find(std::string_view name) const;  // throws
};

// What to run and summarize. `runner` maps a path index to its trajectory
// and must be safe to call concurrently from several threads. Recording
// geometry (steps / stride) must match `steps` and `stride` here; coord
// observables additionally need trajectories carrying points.
struct EnsembleRequest {
    std::int64_t paths = 0;
    std::int64_t steps = 0;
    std::int64_t stride = 1;
    int dim = 0;
    int threads = 1;  // <= 0 selects the hardware concurrency
    double time_scale = 0.0;
    std::vector<Observable> observables;
    bool landscape_has_gap = true;  // LossGap requires an attained optimum
};

// The recording schedule shared by trajectories and SDE paths: step 0,
// every stride-th step, and the final step.
std::vector<std::int64_t> recording_schedule(std::int64_t steps,
                                             std::int64_t stride);

EnsembleStats run_paths(
    const EnsembleRequest& request,
    const std::function<void(Trajectory&, std::int64_t path)>& runner);

}  // namespace dsim
