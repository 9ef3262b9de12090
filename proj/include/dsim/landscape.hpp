// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// Analytic test losses with exact gradients and curvature data: quadratics
// (diagonal or dense symmetric), the 2-D Rosenbrock valley, and a quartic
// with an embedded saddle for non-convex SDE-tracking runs.

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dsim {

enum class LandscapeKind { Quadratic, Rosenbrock, EmbeddedSaddle };

class Landscape {
  public:
    // Zero-dimensional placeholder; any cluster validation rejects it. Build
    // real instances through the factories below.
    Landscape() = default;

    static Landscape quadratic_diag(std::vector<double> h_diag);
    // Row-major symmetric matrix; eigenvalues are extracted once here.
    static Landscape quadratic_dense(std::vector<double> h, int dim);
    static Landscape rosenbrock(double a = 1.0, double b = 100.0);
    static Landscape embedded_saddle(std::vector<double> h_diag, double lambda = 1.0,
                                     double xi = 1.0);

    LandscapeKind kind() const { return kind_; }
    int dim() const { return dim_; }

    double loss(std::span<const double> x) const;
    void gradient(std::span<const double> x, std::span<double> out) const;
    std::vector<double> gradient(std::span<const double> x) const;

    // loss(x) - f_star, clamped at zero. Clamps deeper than 1e-12 are
    // counted (and reported once on stderr) rather than silently dropped.
    double loss_gap(std::span<const double> x) const;

    // Writes the Hessian diagonal at x and returns its trace.
    double hessian_diag_trace(std::span<const double> x, std::span<double> diag_out) const;
    double hessian_trace(std::span<const double> x) const;

    bool has_f_star() const { return has_f_star_; }
    double f_star() const;

    // Strong-convexity / smoothness constants; present only for convex
    // quadratics (mu = smallest eigenvalue, L = largest, trace bound = Tr H).
    bool has_pl_constants() const { return has_pl_; }
    double mu() const;
    double smoothness() const;
    double hessian_trace_bound() const;

    bool is_diagonal_quadratic() const;
    // Hessian diagonal of a diagonal quadratic (stationary-moment formulas).
    const std::vector<double>& h_diag() const;

    std::uint64_t negative_gap_clamps() const { return clamp_count_->load(); }

    std::string describe() const;

  private:
    void check_dim(std::size_t n) const;

    LandscapeKind kind_ = LandscapeKind::Quadratic;
    int dim_ = 0;
    bool diagonal_ = true;
    std::vector<double> h_diag_;   // Quadratic (diagonal) and EmbeddedSaddle
    std::vector<double> h_dense_;  // Quadratic (dense, row-major)
    double a_ = 1.0, b_ = 100.0;   // Rosenbrock
    double lambda_ = 1.0, xi_ = 1.0;
    bool has_f_star_ = false;
    double f_star_ = 0.0;
    bool has_pl_ = false;
    double mu_ = 0.0, smoothness_ = 0.0, trace_bound_ = 0.0;
    // Shared so Landscape stays copyable while all copies report clamps.
    std::shared_ptr<std::atomic<std::uint64_t>> clamp_count_ =
        std::make_shared<std::atomic<std::uint64_t>>(0);
};

}  // namespace dsim
