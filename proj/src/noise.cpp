// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include "dsim/noise.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dsim {

double NoiseModel::variance_factor() const {
    switch (kind) {
        case NoiseKind::None:
            return 0.0;
        case NoiseKind::Gaussian:
            return 1.0;
        case NoiseKind::StudentT:
            if (std::isinf(nu)) return 1.0;
            if (nu <= 2.0) return std::numeric_limits<double>::infinity();
            return nu / (nu - 2.0);
    }
    return 0.0;
}

void NoiseModel::validate(int d) const {
    if (kind == NoiseKind::None) {
        if (!scale_diag.empty() && scale_diag.size() != static_cast<std::size_t>(d)) {
            throw std::invalid_argument("noise: scale vector length " +
                                        std::to_string(scale_diag.size()) +
                                        " does not match dimension " + std::to_string(d));
        }
        return;
    }
    if (scale_diag.size() != static_cast<std::size_t>(d)) {
        throw std::invalid_argument("noise: scale vector length " +
                                    std::to_string(scale_diag.size()) +
                                    " does not match dimension " + std::to_string(d));
    }
    for (double s : scale_diag) {
        if (!std::isfinite(s) || s < 0.0) {
            throw std::invalid_argument("noise: scales must be finite and non-negative");
        }
    }
    if (kind == NoiseKind::StudentT && !(nu > 0.0)) {
        throw std::invalid_argument("noise: Student-t nu must be positive or infinite");
    }
}

namespace {

// Accumulates one noise draw onto inout (callers zero it for a pure sample).
void add_noise(const NoiseModel& model, int d, int batch_size, RngStream& rng,
               std::span<double> inout) {
    if (batch_size < 1) {
        throw std::invalid_argument("sample_noise: batch size must be >= 1, got " +
                                    std::to_string(batch_size));
    }
    if (inout.size() != static_cast<std::size_t>(d)) {
        throw std::invalid_argument("sample_noise: output span has wrong length");
    }
    if (model.kind == NoiseKind::None) return;
    model.validate(d);
    const double inv_sqrt_b = 1.0 / std::sqrt(static_cast<double>(batch_size));
    if (model.kind == NoiseKind::Gaussian || std::isinf(model.nu)) {
        for (int j = 0; j < d; ++j) {
            inout[j] += model.scale_diag[j] * inv_sqrt_b * rng.normal();
        }
        return;
    }
    if (model.product_t) {
        for (int j = 0; j < d; ++j) {
            inout[j] += model.scale_diag[j] * inv_sqrt_b * rng.student_t(model.nu);
        }
        return;
    }
    // Spherical t: one radial chi-square divisor shared by every coordinate.
    const double scale = inv_sqrt_b / std::sqrt(rng.chi_square(model.nu) / model.nu);
    for (int j = 0; j < d; ++j) {
        inout[j] += model.scale_diag[j] * scale * rng.normal();
    }
}

}  // namespace

void sample_noise(const NoiseModel& model, int d, int batch_size, RngStream& rng,
                  std::span<double> out) {
    for (double& v : out) v = 0.0;
    add_noise(model, d, batch_size, rng, out);
}

std::vector<double> sample_noise(const NoiseModel& model, int d, int batch_size, RngStream& rng) {
    std::vector<double> out(d);
    sample_noise(model, d, batch_size, rng, out);
    return out;
}

void stochastic_gradient(const Landscape& landscape, const NoiseModel& model,
                         std::span<const double> x, int batch_size, RngStream& rng,
                         std::span<double> out) {
    landscape.gradient(x, out);
    add_noise(model, landscape.dim(), batch_size, rng, out);
}

std::vector<double> stochastic_gradient(const Landscape& landscape, const NoiseModel& model,
                                        std::span<const double> x, int batch_size,
                                        RngStream& rng) {
    std::vector<double> out(landscape.dim());
    stochastic_gradient(landscape, model, x, batch_size, rng, out);
    return out;
}

double trace_bound(const NoiseModel& model, int batch_size) {
    if (batch_size < 1) {
        throw std::invalid_argument("trace_bound: batch size must be >= 1");
    }
    if (model.kind == NoiseKind::None) return 0.0;
    const double factor = model.variance_factor();
    if (std::isinf(factor)) return std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (double s : model.scale_diag) sum += s * s;
    return factor * sum / static_cast<double>(batch_size);
}

}  // namespace dsim
