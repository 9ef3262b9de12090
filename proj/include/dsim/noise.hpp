// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// Per-agent gradient-noise synthesis: none, Gaussian, or Student-t with a
// per-coordinate scale vector. Batch averaging enters exactly once, here,
// as the 1/sqrt(B) factor on the sampled noise.

#pragma once

#include <span>
#include <vector>

#include "dsim/landscape.hpp"
#include "dsim/rng.hpp"
#include "dsim/special.hpp"

namespace dsim {

enum class NoiseKind { None, Gaussian, StudentT };

struct NoiseModel {
    NoiseKind kind = NoiseKind::None;
    // Per-coordinate scales (sigma_1, ..., sigma_d); entries >= 0.
    std::vector<double> scale_diag;
    // Degrees of freedom (StudentT only); nu_infinity selects the Gaussian
    // limit through the t route. nu <= 2 (no variance) and nu <= 1 (no mean)
    // are legal — divergence monitors are told what to expect instead.
    double nu = nu_infinity;
    // Sensitivity knob: draw each coordinate with its own chi-square divisor
    // instead of one shared divisor (spherical t). Off by default; the
    // spherical form is the modeled one.
    bool product_t = false;

    bool has_finite_variance() const {
        return kind != NoiseKind::StudentT || nu > 2.0;
    }
    bool has_finite_mean() const { return kind != NoiseKind::StudentT || nu > 1.0; }

    // Marginal variance multiplier relative to sigma_j^2 (t inflates by
    // nu/(nu-2)); infinity when the variance does not exist.
    double variance_factor() const;

    void validate(int d) const;  // throws std::invalid_argument with context
};

// Draws one noise vector: sigma_j/sqrt(B) * z_j with z a standard normal
// (Gaussian) or spherical Student-t (one chi-square divisor shared across
// coordinates). Writes d values into out.
void sample_noise(const NoiseModel& model, int d, int batch_size, RngStream& rng,
                  std::span<double> out);
std::vector<double> sample_noise(const NoiseModel& model, int d, int batch_size, RngStream& rng);

// gradient(x) plus one sample_noise draw.
void stochastic_gradient(const Landscape& landscape, const NoiseModel& model,
                         std::span<const double> x, int batch_size, RngStream& rng,
                         std::span<double> out);
std::vector<double> stochastic_gradient(const Landscape& landscape, const NoiseModel& model,
                                        std::span<const double> x, int batch_size, RngStream& rng);

// Trace of the per-agent gradient-noise covariance at batch size B:
// sum_j sigma_j^2 / B, times nu/(nu-2) for Student-t. Infinity when nu <= 2.
double trace_bound(const NoiseModel& model, int batch_size);

}  // namespace dsim
