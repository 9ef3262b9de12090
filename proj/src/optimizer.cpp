// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include "dsim/optimizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dsim {

const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::DSGD:
            return "dsgd";
        case Algorithm::DCSGD:
            return "dcsgd";
        case Algorithm::DSignSGD:
            return "dsignsgd";
        case Algorithm::TopKSGD:
            return "topk_sgd";
        case Algorithm::NormTopKSGD:
            return "norm_topk_sgd";
    }
    return "algorithm";
}

bool algorithm_uses_compressor(Algorithm a) {
    return a == Algorithm::DCSGD || a == Algorithm::TopKSGD || a == Algorithm::NormTopKSGD;
}

void ClusterConfig::validate(const Landscape& landscape, Algorithm algorithm) const {
    const int d = landscape.dim();
    if (agents < 1) throw std::invalid_argument("cluster: agents must be >= 1");
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        throw std::invalid_argument("cluster: eta must be positive and finite");
    }
    if (batch_size < 1) throw std::invalid_argument("cluster: batch_size must be >= 1");
    if (steps < 0) throw std::invalid_argument("cluster: steps must be >= 0");
    if (stride < 1) throw std::invalid_argument("cluster: stride must be >= 1");
    if (x0.size() != static_cast<std::size_t>(d)) {
        throw std::invalid_argument("cluster: x0 has dimension " + std::to_string(x0.size()) +
                                    ", landscape expects " + std::to_string(d));
    }
    if (noise.size() != static_cast<std::size_t>(agents)) {
        throw std::invalid_argument("cluster: noise list length " + std::to_string(noise.size()) +
                                    " != agents " + std::to_string(agents));
    }
    for (const auto& n : noise) n.validate(d);
    if (algorithm_uses_compressor(algorithm)) {
        if (compressors.size() != static_cast<std::size_t>(agents)) {
            throw std::invalid_argument("cluster: compressor list length " +
                                        std::to_string(compressors.size()) + " != agents " +
                                        std::to_string(agents));
        }
        for (const auto& c : compressors) {
            c.validate(d);
            if (algorithm == Algorithm::TopKSGD && c.kind != CompressorKind::TopK) {
                throw std::invalid_argument("cluster: topk_sgd requires top_k compressors");
            }
            if (algorithm == Algorithm::NormTopKSGD && c.kind != CompressorKind::NormalizedTopK) {
                throw std::invalid_argument(
                    "cluster: norm_topk_sgd requires normalized_top_k compressors");
            }
        }
    }
    if (!(divergence_ceiling > 0.0)) {
        throw std::invalid_argument("cluster: divergence_ceiling must be positive");
    }
}

void Trajectory::clear() {
    recorded_steps.clear();
    loss.clear();
    loss_gap.clear();
    grad_l1.clear();
    grad_l2sq.clear();
    points.clear();
    diverged_at.reset();
}

namespace {

thread_local std::vector<double> tl_grad;
thread_local std::vector<double> tl_sum;

enum class StepMode { Plain, Compressed, Sign };

void agent_average_step(std::span<double> x, const Landscape& landscape, const ClusterConfig& cfg,
                        std::span<RngStream> streams, StepMode mode) {
    const int d = landscape.dim();
    auto& grad = tl_grad;
    auto& sum = tl_sum;
    grad.resize(d);
    sum.assign(d, 0.0);
    for (int i = 0; i < cfg.agents; ++i) {
        stochastic_gradient(landscape, cfg.noise[i], x, cfg.batch_size, streams[i], grad);
        switch (mode) {
            case StepMode::Plain:
                break;
            case StepMode::Compressed:
                compress(cfg.compressors[i], grad, streams[i]);
                break;
            case StepMode::Sign:
                for (double& g : grad) g = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
                break;
        }
        for (int j = 0; j < d; ++j) sum[j] += grad[j];
    }
    const double scale = cfg.eta / cfg.agents;
    for (int j = 0; j < d; ++j) x[j] -= scale * sum[j];
}

}  // namespace

void dsgd_step(std::span<double> x, const Landscape& landscape, const ClusterConfig& cfg,
               std::span<RngStream> streams) {
    agent_average_step(x, landscape, cfg, streams, StepMode::Plain);
}

void dcsgd_step(std::span<double> x, const Landscape& landscape, const ClusterConfig& cfg,
                std::span<RngStream> streams) {
    agent_average_step(x, landscape, cfg, streams, StepMode::Compressed);
}

void dsignsgd_step(std::span<double> x, const Landscape& landscape, const ClusterConfig& cfg,
                   std::span<RngStream> streams) {
    agent_average_step(x, landscape, cfg, streams, StepMode::Sign);
}

namespace {

// Loss-gap where defined, |loss| otherwise: the scale fed to the ceiling.
inline double divergence_metric(const Landscape& landscape, double raw_loss) {
    if (landscape.has_f_star()) {
        const double gap = raw_loss - landscape.f_star();
        return gap > 0.0 ? gap : 0.0;
    }
    return std::fabs(raw_loss);
}

}  // namespace

void run_trajectory_into(Trajectory& out, Algorithm algorithm, const Landscape& landscape,
                         const ClusterConfig& cfg, std::uint64_t seed, std::uint64_t path_index) {
    cfg.validate(landscape, algorithm);
    out.clear();

    const int d = landscape.dim();
    const bool has_gap = landscape.has_f_star();
    const StepMode mode = algorithm == Algorithm::DSGD
                              ? StepMode::Plain
                              : (algorithm == Algorithm::DSignSGD ? StepMode::Sign
                                                                  : StepMode::Compressed);

    std::vector<RngStream> streams;
    streams.reserve(cfg.agents);
    for (int i = 0; i < cfg.agents; ++i) {
        streams.emplace_back(seed, path_index, static_cast<std::uint32_t>(i));
    }

    std::vector<double> x(cfg.x0.begin(), cfg.x0.end());
    std::vector<double> grad(d);

    auto record = [&](std::int64_t step) {
        const double raw = landscape.loss(x);
        landscape.gradient(x, grad);
        double l1 = 0.0;
        double l2sq = 0.0;
        for (double g : grad) {
            l1 += std::fabs(g);
            l2sq += g * g;
        }
        out.recorded_steps.push_back(step);
        out.loss.push_back(raw);
        if (has_gap) out.loss_gap.push_back(landscape.loss_gap(x));
        out.grad_l1.push_back(l1);
        out.grad_l2sq.push_back(l2sq);
        if (cfg.record_points) out.points.emplace_back(x);
    };

    record(0);
    for (std::int64_t k = 0; k < cfg.steps; ++k) {
        for (auto& s : streams) s.seek(static_cast<std::uint64_t>(k));
        agent_average_step(x, landscape, cfg, streams, mode);

        // Divergence probe runs every step so ceiling crossings between
        // recording strides are not missed.
        bool finite = true;
        for (double v : x) {
            if (!std::isfinite(v)) {
                finite = false;
                break;
            }
        }
        const double metric = finite ? divergence_metric(landscape, landscape.loss(x))
                                     : std::numeric_limits<double>::infinity();
        if (!finite || !(metric <= cfg.divergence_ceiling)) {
            if (!out.diverged_at) out.diverged_at = k + 1;
            if (cfg.halt_on_divergence) return;
        }
        const std::int64_t done = k + 1;
        if (done % cfg.stride == 0 || done == cfg.steps) record(done);
    }
}

Trajectory run_trajectory(Algorithm algorithm, const Landscape& landscape,
                          const ClusterConfig& cfg, std::uint64_t seed,
                          std::uint64_t path_index) {
    Trajectory t;
    run_trajectory_into(t, algorithm, landscape, cfg, seed, path_index);
    return t;
}

}  // namespace dsim
