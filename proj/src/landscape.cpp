// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include "dsim/landscape.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dsim {

namespace {

constexpr double kGapClampNote = 1e-12;

}  // namespace

Landscape Landscape::quadratic_diag(std::vector<double> h_diag) {
    if (h_diag.empty()) throw std::invalid_argument("quadratic_diag: empty diagonal");
    Landscape l;
    l.kind_ = LandscapeKind::Quadratic;
    l.dim_ = static_cast<int>(h_diag.size());
    l.diagonal_ = true;
    double lo = h_diag.front();
    double hi = h_diag.front();
    double tr = 0.0;
    for (double v : h_diag) {
        if (!std::isfinite(v)) throw std::invalid_argument("quadratic_diag: non-finite entry");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        tr += v;
    }
    l.h_diag_ = std::move(h_diag);
    if (lo >= 0.0) {
        l.has_f_star_ = true;
        l.f_star_ = 0.0;
        l.has_pl_ = true;
        l.mu_ = lo;
        l.smoothness_ = hi;
        l.trace_bound_ = tr;
    }
    return l;
}

Landscape Landscape::quadratic_dense(std::vector<double> h, int dim) {
    if (dim <= 0 || h.size() != static_cast<std::size_t>(dim) * dim) {
        throw std::invalid_argument("quadratic_dense: matrix size does not match dim");
    }
    Eigen::MatrixXd m(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            m(i, j) = h[static_cast<std::size_t>(i) * dim + j];
        }
    }
    if (!m.isApprox(m.transpose(), 1e-12)) {
        throw std::invalid_argument("quadratic_dense: matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    Landscape l;
    l.kind_ = LandscapeKind::Quadratic;
    l.dim_ = dim;
    l.diagonal_ = false;
    l.h_dense_ = std::move(h);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo >= -1e-12) {
        l.has_f_star_ = true;
        l.f_star_ = 0.0;
        l.has_pl_ = true;
        l.mu_ = std::max(lo, 0.0);
        l.smoothness_ = hi;
        l.trace_bound_ = m.trace();
    }
    return l;
}

Landscape Landscape::rosenbrock(double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b) || b <= 0.0) {
        throw std::invalid_argument("rosenbrock: requires finite a and b > 0");
    }
    Landscape l;
    l.kind_ = LandscapeKind::Rosenbrock;
    l.dim_ = 2;
    l.a_ = a;
    l.b_ = b;
    l.has_f_star_ = true;  // minimum at (a, a^2)
    l.f_star_ = 0.0;
    return l;
}

Landscape Landscape::embedded_saddle(std::vector<double> h_diag, double lambda, double xi) {
    if (h_diag.empty()) throw std::invalid_argument("embedded_saddle: empty diagonal");
    if (!(lambda > 0.0)) throw std::invalid_argument("embedded_saddle: lambda must be positive");
    Landscape l;
    l.kind_ = LandscapeKind::EmbeddedSaddle;
    l.dim_ = static_cast<int>(h_diag.size());
    l.h_diag_ = std::move(h_diag);
    l.lambda_ = lambda;
    l.xi_ = xi;
    // Non-convex with no reported optimum: gap-based observables refuse it.
    return l;
}

void Landscape::check_dim(std::size_t n) const {
    if (n != static_cast<std::size_t>(dim_)) {
        throw std::invalid_argument("landscape: point has dimension " + std::to_string(n) +
                                    ", expected " + std::to_string(dim_));
    }
}

double Landscape::loss(std::span<const double> x) const {
    check_dim(x.size());
    switch (kind_) {
        case LandscapeKind::Quadratic: {
            double s = 0.0;
            if (diagonal_) {
                for (int i = 0; i < dim_; ++i) s += h_diag_[i] * x[i] * x[i];
                return 0.5 * s;
            }
            for (int i = 0; i < dim_; ++i) {
                double row = 0.0;
                const double* h = &h_dense_[static_cast<std::size_t>(i) * dim_];
                for (int j = 0; j < dim_; ++j) row += h[j] * x[j];
                s += x[i] * row;
            }
            return 0.5 * s;
        }
        case LandscapeKind::Rosenbrock: {
            const double u = a_ - x[0];
            const double v = x[1] - x[0] * x[0];
            return u * u + b_ * v * v;
        }
        case LandscapeKind::EmbeddedSaddle: {
            double s = 0.0;
            for (int i = 0; i < dim_; ++i) {
                const double xi2 = x[i] * x[i];
                s += 0.5 * h_diag_[i] * xi2 + 0.25 * lambda_ * xi2 * xi2 -
                     (xi_ / 3.0) * xi2 * x[i];
            }
            return s;
        }
    }
    return 0.0;  // unreachable
}

void Landscape::gradient(std::span<const double> x, std::span<double> out) const {
    check_dim(x.size());
    check_dim(out.size());
    switch (kind_) {
        case LandscapeKind::Quadratic:
            if (diagonal_) {
                for (int i = 0; i < dim_; ++i) out[i] = h_diag_[i] * x[i];
            } else {
                for (int i = 0; i < dim_; ++i) {
                    double row = 0.0;
                    const double* h = &h_dense_[static_cast<std::size_t>(i) * dim_];
                    for (int j = 0; j < dim_; ++j) row += h[j] * x[j];
                    out[i] = row;
                }
            }
            return;
        case LandscapeKind::Rosenbrock: {
            const double v = x[1] - x[0] * x[0];
            out[0] = -2.0 * (a_ - x[0]) - 4.0 * b_ * v * x[0];
            out[1] = 2.0 * b_ * v;
            return;
        }
        case LandscapeKind::EmbeddedSaddle:
            for (int i = 0; i < dim_; ++i) {
                out[i] = h_diag_[i] * x[i] + lambda_ * x[i] * x[i] * x[i] - xi_ * x[i] * x[i];
            }
            return;
    }
}

std::vector<double> Landscape::gradient(std::span<const double> x) const {
    std::vector<double> g(dim_);
    gradient(x, g);
    return g;
}

double Landscape::loss_gap(std::span<const double> x) const {
    if (!has_f_star_) {
        throw std::runtime_error("loss_gap: landscape reports no optimal value (" + describe() +
                                 ")");
    }
    const double gap = loss(x) - f_star_;
    if (gap < 0.0) {
        if (gap < -kGapClampNote) {
            if (clamp_count_->fetch_add(1) == 0) {
                std::fprintf(stderr,
                             "dsim: loss gap %.3e below zero clamped (reported once; see "
                             "negative_gap_clamps())\n",
                             gap);
            }
        }
        return 0.0;
    }
    return gap;
}

double Landscape::hessian_diag_trace(std::span<const double> x, std::span<double> diag_out) const {
    check_dim(x.size());
    check_dim(diag_out.size());
    double tr = 0.0;
    switch (kind_) {
        case LandscapeKind::Quadratic:
            for (int i = 0; i < dim_; ++i) {
                diag_out[i] =
                    diagonal_ ? h_diag_[i] : h_dense_[static_cast<std::size_t>(i) * dim_ + i];
                tr += diag_out[i];
            }
            return tr;
        case LandscapeKind::Rosenbrock:
            diag_out[0] = 2.0 - 4.0 * b_ * (x[1] - x[0] * x[0]) + 8.0 * b_ * x[0] * x[0];
            diag_out[1] = 2.0 * b_;
            return diag_out[0] + diag_out[1];
        case LandscapeKind::EmbeddedSaddle:
            for (int i = 0; i < dim_; ++i) {
                diag_out[i] = h_diag_[i] + 3.0 * lambda_ * x[i] * x[i] - 2.0 * xi_ * x[i];
                tr += diag_out[i];
            }
            return tr;
    }
    return tr;
}

double Landscape::hessian_trace(std::span<const double> x) const {
    std::vector<double> diag(dim_);
    return hessian_diag_trace(x, diag);
}

double Landscape::f_star() const {
    if (!has_f_star_) throw std::runtime_error("f_star: unavailable for " + describe());
    return f_star_;
}

double Landscape::mu() const {
    if (!has_pl_) throw std::runtime_error("mu: unavailable for " + describe());
    return mu_;
}

double Landscape::smoothness() const {
    if (!has_pl_) throw std::runtime_error("smoothness: unavailable for " + describe());
    return smoothness_;
}

double Landscape::hessian_trace_bound() const {
    if (!has_pl_) throw std::runtime_error("hessian_trace_bound: unavailable for " + describe());
    return trace_bound_;
}

bool Landscape::is_diagonal_quadratic() const {
    return kind_ == LandscapeKind::Quadratic && diagonal_;
}

const std::vector<double>& Landscape::h_diag() const {
    if (!is_diagonal_quadratic() && kind_ != LandscapeKind::EmbeddedSaddle) {
        throw std::runtime_error("h_diag: landscape has no diagonal Hessian parameterization");
    }
    return h_diag_;
}

std::string Landscape::describe() const {
    switch (kind_) {
        case LandscapeKind::Quadratic:
            return (diagonal_ ? "quadratic-diag d=" : "quadratic-dense d=") + std::to_string(dim_);
        case LandscapeKind::Rosenbrock:
            return "rosenbrock(a=" + std::to_string(a_) + ", b=" + std::to_string(b_) + ")";
        case LandscapeKind::EmbeddedSaddle:
            return "embedded-saddle d=" + std::to_string(dim_);
    }
    return "landscape";
}

}  // namespace dsim
