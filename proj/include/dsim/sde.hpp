// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// Continuous-time weak-approximation models of the discrete optimizers:
// drift/diffusion pairs, their Euler-Maruyama integration, and covariance
// factorization helpers. Diffusion is represented by any factor A with
// A A^T equal to the model covariance — Brownian increments only see the
// covariance, so the factor choice is free (and cheaper than a matrix
// square root).

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dsim/compressor.hpp"
#include "dsim/landscape.hpp"
#include "dsim/noise.hpp"
#include "dsim/optimizer.hpp"
#include "dsim/rng.hpp"

namespace dsim {

// A d x d factor A of a covariance matrix, stored in the cheapest exact
// form: zero, diagonal (componentwise square root), lower-triangular from a
// diagonal-plus-rank-one Cholesky recurrence (applied in O(d) via a prefix
// sum), or a dense column-scaled eigenbasis.
class DiffusionFactor {
  public:
    enum class Kind { Zero, Diagonal, DiagPlusRank1, Dense };

    void set_zero(int dim);
    void set_diagonal(std::vector<double> sqrt_entries);
    // Copying variant that reuses existing storage (hot integrator path).
    void set_diagonal_view(std::span<const double> sqrt_entries);
    // L L^T = diag(diag_cov) + scale * w w^T, built in O(d).
    void set_diag_plus_rank1(std::span<const double> diag_cov, double scale,
                             std::span<const double> w);
    void set_dense(std::vector<double> row_major, int dim);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }

    // out = A z (z has length dim).
    void apply(std::span<const double> z, std::span<double> out) const;

    // Materializes A row-major (for reconstruction tests and inspection).
    std::vector<double> dense() const;

  private:
    Kind kind_ = Kind::Zero;
    int dim_ = 0;
    std::vector<double> a_;  // Diagonal: sqrt entries; Dense: row-major
    std::vector<double> r_;  // DiagPlusRank1 diagonal of L
    std::vector<double> c_;  // DiagPlusRank1 column multipliers
    std::vector<double> w_;  // DiagPlusRank1 rank-one direction
};

// Componentwise square root of a diagonal covariance; negative dust above
// -1e-8 clamps to zero, anything lower is a not-PSD error.
DiffusionFactor diffusion_factorize(std::span<const double> cov_diag);
// Dense symmetric PSD covariance: eigendecomposition with the same clamp
// policy, returning the column-scaled eigenbasis V diag(sqrt(lambda)).
DiffusionFactor diffusion_factorize(const std::vector<double>& cov_row_major, int dim);

struct SdeModel {
    int dim = 0;
    std::string label;
    const Landscape* landscape = nullptr;  // observable evaluation hooks
    std::function<void(std::span<const double> x, std::span<double> out)> drift;
    std::function<void(std::span<const double> x, DiffusionFactor& out)> diffusion;
    // Diagonal-covariance entries clamped up to zero so far (the sign-descent
    // models' linearized variances can brush below zero).
    std::shared_ptr<std::atomic<std::uint64_t>> variance_clamps =
        std::make_shared<std::atomic<std::uint64_t>>(0);
};

// dX = -grad f dt + sqrt(eta/(N B)) sqrt(Sigma_hat) dW, Sigma_hat the mean
// per-agent noise covariance (raw scales; the batch factor enters here,
// exactly once). Requires finite-variance noise on every agent.
SdeModel dsgd_sde(const Landscape& landscape, std::span<const NoiseModel> noises, double eta,
                  int agents, int batch_size);

// Compressed variant: covariance (eta/N) * [omega_bar grad grad^T + D(x)]
// with D the averaged (omega_i + 1)-weighted effective noise covariances.
// Requires unbiased compressors (identity or rand_k); mc_samples is reserved
// for future unbiased kinds without a closed form and is unused for these.
SdeModel dcsgd_sde(const Landscape& landscape, std::span<const NoiseModel> noises,
                   std::span<const Compressor> compressors, double eta, int agents,
                   int batch_size, int mc_samples = 0);

// Sign-descent model: drift_j = -(2/N) sum_i xi_nu(sqrt(B) g_j / sigma_{j,i}),
// diagonal covariance (eta/N)(1 - (4/N) sum_i xi^2), entries in [0, eta/N].
// Every coordinate of every agent needs a positive noise scale.
SdeModel dsignsgd_sde(const Landscape& landscape, std::span<const NoiseModel> noises, double eta,
                      int agents, int batch_size);

// Saturated (phase 1: dX = -sign(grad f) dt, no diffusion) and small-signal
// (phase 3: drift -ell_nu (sqrt(B)/N) sum_i Sigma_i^{-1/2} grad f, linearized
// diagonal diffusion) limits of the sign-descent model.
SdeModel phase_sde(const Landscape& landscape, std::span<const NoiseModel> noises, double eta,
                   int agents, int batch_size, int phase, double nu);

struct EmOptions {
    double divergence_ceiling = 1e12;
    bool halt_on_divergence = true;
    bool record_points = false;
};

// x' = x + dt b(x) + sqrt(dt) A(x) Z, observables recorded every stride
// steps (plus step 0 and the final step). Deterministic per rng stream.
Trajectory euler_maruyama(const SdeModel& model, std::span<const double> x0, double dt,
                          std::int64_t steps, RngStream& rng, std::int64_t stride = 1,
                          const EmOptions& options = {});

}  // namespace dsim
