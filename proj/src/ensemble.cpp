// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include "dsim/ensemble.hpp"

#include <atomic>
#include <cmath>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace dsim {

namespace {

constexpr int kBlocks = 256;

}  // namespace

void MomentAccumulator::add(double x) {
    // Pebay's single-observation update for central moments through m4.
    const double n1 = static_cast<double>(n);
    n += 1;
    const double nn = static_cast<double>(n);
    const double delta = x - mean;
    const double delta_n = delta / nn;
    const double delta_n2 = delta_n * delta_n;
    const double term1 = delta * delta_n * n1;
    mean += delta_n;
    m4 += term1 * delta_n2 * (nn * nn - 3.0 * nn + 3.0) +
          6.0 * delta_n2 * m2 - 4.0 * delta_n * m3;
    m3 += term1 * delta_n * (nn - 2.0) - 3.0 * delta_n * m2;
    m2 += term1;
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
    if (other.n == 0) return;
    if (n == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n);
    const double nb = static_cast<double>(other.n);
    const double nn = na + nb;
    const double delta = other.mean - mean;
    const double delta2 = delta * delta;

    const double new_m2 = m2 + other.m2 + delta2 * na * nb / nn;
    const double new_m3 = m3 + other.m3 +
                          delta * delta2 * na * nb * (na - nb) / (nn * nn) +
                          3.0 * delta * (na * other.m2 - nb * m2) / nn;
    const double new_m4 =
        m4 + other.m4 +
        delta2 * delta2 * na * nb * (na * na - na * nb + nb * nb) /
            (nn * nn * nn) +
        6.0 * delta2 * (na * na * other.m2 + nb * nb * m2) / (nn * nn) +
        4.0 * delta * (na * other.m3 - nb * m3) / nn;

    mean += delta * nb / nn;
    m2 = new_m2;
    m3 = new_m3;
    m4 = new_m4;
    n += other.n;
}

double MomentAccumulator::variance() const {
    if (n < 2) return 0.0;
    return m2 / static_cast<double>(n - 1);
}

double MomentAccumulator::standard_error() const {
    if (n < 1) return 0.0;
    return std::sqrt(variance() / static_cast<double>(n));
}

double MomentAccumulator::variance_of_variance() const {
    if (n < 2) return 0.0;
    const double nn = static_cast<double>(n);
    const double s2 = variance();
    const double central4 = m4 / nn;
    const double vv =
        (central4 - s2 * s2 * (nn - 3.0) / (nn - 1.0)) / nn;
    return vv > 0.0 ? vv : 0.0;
}

Observable observable_from_name(std::string_view name) {
    if (name == "loss_gap") return Observable::LossGap;
    if (name == "grad_l1") return Observable::GradL1;
    if (name == "grad_l2sq") return Observable::GradL2Sq;
    if (name == "coord_mean") return Observable::CoordMean;
    if (name == "coord_var") return Observable::CoordVar;
    throw std::invalid_argument("unknown observable '" + std::string(name) +
                                "' (expected loss_gap, grad_l1, grad_l2sq, "
                                "coord_mean or coord_var)");
}

const char* observable_name(Observable obs) {
    switch (obs) {
        case Observable::LossGap: return "loss_gap";
        case Observable::GradL1: return "grad_l1";
        case Observable::GradL2Sq: return "grad_l2sq";
        case Observable::CoordMean: return "coord_mean";
        case Observable::CoordVar: return "coord_var";
    }
    return "?";
}

bool EnsembleStats::has_series(std::string_view name) const {
    for (const SeriesStats& s : series)
        if (s.name == name) return true;
    return false;
}

const SeriesStats& EnsembleStats::find(std::string_view name) const {
    for (const SeriesStats& s : series)
        if (s.name == name) return s;
    throw std::invalid_argument("EnsembleStats: no series named '" +
                                std::string(name) + "'");
}

std::vector<std::int64_t> recording_schedule(std::int64_t steps,
                                             std::int64_t stride) {
    if (steps < 0 || stride < 1)
        throw std::invalid_argument(
            "recording_schedule: steps must be >= 0 and stride >= 1");
    std::vector<std::int64_t> out;
    out.push_back(0);
    for (std::int64_t k = stride; k < steps; k += stride) out.push_back(k);
    if (steps > 0) out.push_back(steps);
    return out;
}

namespace {

// Scalar trajectory channels tracked directly; coordinates are handled
// separately because one coordinate feeds up to two emitted series.
struct ScalarChannel {
    Observable obs;
    const char* name;
};

struct BlockAccumulator {
    // [channel][recorded step]
    std::vector<std::vector<MomentAccumulator>> scalars;
    // [coordinate][recorded step]
    std::vector<std::vector<MomentAccumulator>> coords;
    std::int64_t diverged = 0;

    BlockAccumulator(std::size_t channels, std::size_t coords_tracked,
                     std::size_t rows) {
        scalars.assign(channels, std::vector<MomentAccumulator>(rows));
        coords.assign(coords_tracked, std::vector<MomentAccumulator>(rows));
    }
};

}  // namespace

EnsembleStats run_paths(
    const EnsembleRequest& request,
    const std::function<void(Trajectory&, std::int64_t path)>& runner) {
    if (request.paths < 1)
        throw std::invalid_argument("run_paths: paths must be >= 1");
    if (request.dim < 1)
        throw std::invalid_argument("run_paths: dim must be >= 1");
    if (!runner) throw std::invalid_argument("run_paths: runner is empty");

    std::vector<ScalarChannel> channels;
    bool track_coords = false;
    bool want_coord_mean = false;
    bool want_coord_var = false;
    for (Observable obs : request.observables) {
        switch (obs) {
            case Observable::LossGap:
                if (!request.landscape_has_gap)
                    throw std::invalid_argument(
                        "run_paths: loss_gap requested but the landscape has "
                        "no attained optimum");
                channels.push_back({obs, "loss_gap"});
                break;
            case Observable::GradL1:
                channels.push_back({obs, "grad_l1"});
                break;
            case Observable::GradL2Sq:
                channels.push_back({obs, "grad_l2sq"});
                break;
            case Observable::CoordMean:
                track_coords = true;
                want_coord_mean = true;
                break;
            case Observable::CoordVar:
                track_coords = true;
                want_coord_var = true;
                break;
        }
    }

    const std::vector<std::int64_t> schedule =
        recording_schedule(request.steps, request.stride);
    const std::size_t rows = schedule.size();
    const std::size_t coords_tracked =
        track_coords ? static_cast<std::size_t>(request.dim) : 0;

    std::vector<std::unique_ptr<BlockAccumulator>> blocks(kBlocks);
    std::atomic<int> next_block{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto work = [&]() {
        Trajectory traj;
        for (;;) {
            const int b = next_block.fetch_add(1);
            if (b >= kBlocks || failed.load()) return;
            // Contiguous slice of path indices owned by block b.
            const std::int64_t lo = request.paths * b / kBlocks;
            const std::int64_t hi = request.paths * (b + 1) / kBlocks;
            if (lo == hi) continue;
            auto acc = std::make_unique<BlockAccumulator>(channels.size(),
                                                          coords_tracked, rows);
            try {
                for (std::int64_t path = lo; path < hi; ++path) {
                    runner(traj, path);
                    if (traj.diverged_at) {
                        acc->diverged += 1;
                        continue;  // the whole path is excluded
                    }
                    if (traj.recorded_steps.size() != rows)
                        throw std::runtime_error(
                            "run_paths: trajectory recording does not match "
                            "the requested steps/stride");
                    for (std::size_t c = 0; c < channels.size(); ++c) {
                        const std::vector<double>& src =
                            channels[c].obs == Observable::LossGap
                                ? traj.loss_gap
                                : channels[c].obs == Observable::GradL1
                                      ? traj.grad_l1
                                      : traj.grad_l2sq;
                        for (std::size_t i = 0; i < rows; ++i)
                            acc->scalars[c][i].add(src[i]);
                    }
                    if (coords_tracked > 0) {
                        if (traj.points.size() != rows)
                            throw std::runtime_error(
                                "run_paths: coord observables need recorded "
                                "points");
                        for (std::size_t i = 0; i < rows; ++i)
                            for (std::size_t j = 0; j < coords_tracked; ++j)
                                acc->coords[j][i].add(traj.points[i][j]);
                    }
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failed.exchange(true)) failure = e.what();
                return;
            }
            blocks[static_cast<std::size_t>(b)] = std::move(acc);
        }
    };

    int threads = request.threads;
    if (threads <= 0)
        threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int i = 0; i < threads; ++i) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    if (failed.load()) throw std::runtime_error(failure);

    // Serial merge in block order: the result is a pure function of the
    // block partition, never of worker scheduling.
    BlockAccumulator total(channels.size(), coords_tracked, rows);
    for (const auto& block : blocks) {
        if (!block) continue;
        total.diverged += block->diverged;
        for (std::size_t c = 0; c < channels.size(); ++c)
            for (std::size_t i = 0; i < rows; ++i)
                total.scalars[c][i].merge(block->scalars[c][i]);
        for (std::size_t j = 0; j < coords_tracked; ++j)
            for (std::size_t i = 0; i < rows; ++i)
                total.coords[j][i].merge(block->coords[j][i]);
    }

    EnsembleStats stats;
    stats.recorded_steps = schedule;
    stats.time_scale = request.time_scale;
    stats.paths = request.paths;
    stats.diverged = total.diverged;
    stats.contributing = request.paths - total.diverged;

    auto mean_series = [&](const std::string& name,
                           const std::vector<MomentAccumulator>& acc) {
        SeriesStats s;
        s.name = name;
        s.value.reserve(rows);
        s.variance.reserve(rows);
        s.std_error.reserve(rows);
        for (const MomentAccumulator& a : acc) {
            s.value.push_back(a.mean);
            s.variance.push_back(a.variance());
            s.std_error.push_back(a.standard_error());
        }
        return s;
    };

    for (std::size_t c = 0; c < channels.size(); ++c)
        stats.series.push_back(
            mean_series(channels[c].name, total.scalars[c]));
    if (want_coord_mean)
        for (std::size_t j = 0; j < coords_tracked; ++j)
            stats.series.push_back(mean_series(
                "coord" + std::to_string(j), total.coords[j]));
    if (want_coord_var)
        for (std::size_t j = 0; j < coords_tracked; ++j) {
            SeriesStats s;
            s.name = "coord" + std::to_string(j) + "_var";
            s.value.reserve(rows);
            s.variance.reserve(rows);
            s.std_error.reserve(rows);
            for (const MomentAccumulator& a : total.coords[j]) {
                const double vv = a.variance_of_variance();
                s.value.push_back(a.variance());
                s.variance.push_back(vv);
                s.std_error.push_back(std::sqrt(vv));
            }
            stats.series.push_back(std::move(s));
        }
    return stats;
}

}  // namespace dsim
