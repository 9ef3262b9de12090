// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// Discrete multi-agent update rules (plain, compressed, and sign descent)
// and the per-path trajectory runner with divergence accounting.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dsim/compressor.hpp"
#include "dsim/landscape.hpp"
#include "dsim/noise.hpp"
#include "dsim/rng.hpp"

namespace dsim {

enum class Algorithm { DSGD, DCSGD, DSignSGD, TopKSGD, NormTopKSGD };

const char* algorithm_name(Algorithm a);
bool algorithm_uses_compressor(Algorithm a);

struct ClusterConfig {
    int agents = 1;      // N
    double eta = 0.0;    // learning rate
    int batch_size = 1;  // B
    std::int64_t steps = 0;
    std::vector<NoiseModel> noise;        // one per agent
    std::vector<Compressor> compressors;  // one per agent (compressed runs)
    std::vector<double> x0;
    double divergence_ceiling = 1e12;  // on the loss gap (|loss| if no optimum)
    bool halt_on_divergence = true;
    std::int64_t stride = 1;     // observable recording stride
    bool record_points = false;  // keep strided iterates in the Trajectory

    void validate(const Landscape& landscape, Algorithm algorithm) const;
};

struct Trajectory {
    std::vector<std::int64_t> recorded_steps;
    std::vector<double> loss;      // raw loss at each recorded step
    std::vector<double> loss_gap;  // empty when the landscape has no optimum
    std::vector<double> grad_l1;
    std::vector<double> grad_l2sq;
    std::vector<std::vector<double>> points;  // only when record_points
    std::optional<std::int64_t> diverged_at;

    void clear();
};

// One update x' = x - (eta/N) sum_i g_i with g_i the agent's stochastic
// gradient. streams[i] must be seeked to the current step.
void dsgd_step(std::span<double> x, const Landscape& landscape, const ClusterConfig& cfg,
               std::span<RngStream> streams);

// Compressed variant: each agent's stochastic gradient goes through its own
// compressor before averaging.
void dcsgd_step(std::span<double> x, const Landscape& landscape, const ClusterConfig& cfg,
                std::span<RngStream> streams);

// Sign variant: x' = x - (eta/N) sum_i sign(g_i), componentwise, sign(0)=0.
void dsignsgd_step(std::span<double> x, const Landscape& landscape, const ClusterConfig& cfg,
                   std::span<RngStream> streams);

// Runs one path. Deterministic in (seed, path_index); divergence (loss-gap
// ceiling or non-finite iterate) is recorded, and stepping stops there when
// cfg.halt_on_divergence is set.
Trajectory run_trajectory(Algorithm algorithm, const Landscape& landscape,
                          const ClusterConfig& cfg, std::uint64_t seed, std::uint64_t path_index);

// Allocation-reusing variant for ensemble loops.
void run_trajectory_into(Trajectory& out, Algorithm algorithm, const Landscape& landscape,
                         const ClusterConfig& cfg, std::uint64_t seed, std::uint64_t path_index);

}  // namespace dsim
