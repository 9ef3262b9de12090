// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include "dsim/sde.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dsim/special.hpp"

namespace dsim {

namespace {

constexpr double kPsdDust = 1e-8;  // tolerated negative eigen/variance dust

void require_length(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw std::invalid_argument(std::string(what) + ": length " + std::to_string(got) +
                                    ", expected " + std::to_string(want));
    }
}

void require_finite_variance(std::span<const NoiseModel> noises, const char* what) {
    for (const auto& n : noises) {
        if (!n.has_finite_variance()) {
            throw std::runtime_error(std::string(what) +
                                     ": SDE unavailable: infinite variance (Student-t nu <= 2)");
        }
    }
}

void require_positive_scales(std::span<const NoiseModel> noises, int d, const char* what) {
    for (const auto& n : noises) {
        if (n.kind == NoiseKind::None || n.scale_diag.size() != static_cast<std::size_t>(d)) {
            throw std::invalid_argument(std::string(what) +
                                        ": every agent needs a full positive scale vector");
        }
        for (double s : n.scale_diag) {
            if (!(s > 0.0)) {
                throw std::invalid_argument(
                    std::string(what) + ": zero noise scale makes the signal-to-noise undefined");
            }
        }
    }
}

// Mean per-agent covariance diagonal of the effective gradient noise:
// (1/N) sum_i weight_i * var_factor_i * sigma_{j,i}^2. Throws on t without
// variance. weights may be empty (all ones).
std::vector<double> mean_noise_cov_diag(std::span<const NoiseModel> noises, int d,
                                        std::span<const double> weights) {
    std::vector<double> out(d, 0.0);
    const double inv_n = 1.0 / static_cast<double>(noises.size());
    for (std::size_t i = 0; i < noises.size(); ++i) {
        const auto& n = noises[i];
        const double wf = (weights.empty() ? 1.0 : weights[i]) * n.variance_factor();
        if (n.kind == NoiseKind::None) continue;
        for (int j = 0; j < d; ++j) {
            const double s = n.scale_diag[j];
            out[j] += inv_n * wf * s * s;
        }
    }
    return out;
}

}  // namespace

void DiffusionFactor::set_zero(int dim) {
    kind_ = Kind::Zero;
    dim_ = dim;
}

void DiffusionFactor::set_diagonal(std::vector<double> sqrt_entries) {
    dim_ = static_cast<int>(sqrt_entries.size());
    kind_ = Kind::Diagonal;
    a_ = std::move(sqrt_entries);
}

void DiffusionFactor::set_diagonal_view(std::span<const double> sqrt_entries) {
    dim_ = static_cast<int>(sqrt_entries.size());
    kind_ = Kind::Diagonal;
    a_.assign(sqrt_entries.begin(), sqrt_entries.end());
}

void DiffusionFactor::set_diag_plus_rank1(std::span<const double> diag_cov, double scale,
                                          std::span<const double> w) {
    const int d = static_cast<int>(diag_cov.size());
    require_length(w.size(), diag_cov.size(), "set_diag_plus_rank1");
    if (scale < 0.0) {
        throw std::invalid_argument("set_diag_plus_rank1: rank-one scale must be >= 0");
    }
    kind_ = Kind::DiagPlusRank1;
    dim_ = d;
    r_.resize(d);
    c_.resize(d);
    w_.assign(w.begin(), w.end());
    // Cholesky of diag(D) + scale * w w^T in one O(d) sweep (Gill, Golub,
    // Murray & Saunders, "Methods for modifying matrix factorizations"):
    //   L_jj = r_j,  L_ij = c_j w_i  (i > j).
    double alpha = scale;
    for (int j = 0; j < d; ++j) {
        double dj = diag_cov[j];
        if (dj < 0.0) {
            if (dj < -kPsdDust) {
                throw std::runtime_error("set_diag_plus_rank1: diagonal entry " +
                                         std::to_string(dj) + " is not PSD");
            }
            dj = 0.0;
        }
        const double t = dj + alpha * w_[j] * w_[j];
        r_[j] = std::sqrt(t);
        if (t > 0.0) {
            c_[j] = alpha * w_[j] / r_[j];
            alpha *= dj / t;
        } else {
            c_[j] = 0.0;  // degenerate coordinate; alpha carries over
        }
    }
}

void DiffusionFactor::set_dense(std::vector<double> row_major, int dim) {
    require_length(row_major.size(), static_cast<std::size_t>(dim) * dim, "set_dense");
    kind_ = Kind::Dense;
    dim_ = dim;
    a_ = std::move(row_major);
}

void DiffusionFactor::apply(std::span<const double> z, std::span<double> out) const {
    require_length(z.size(), static_cast<std::size_t>(dim_), "DiffusionFactor::apply z");
    require_length(out.size(), static_cast<std::size_t>(dim_), "DiffusionFactor::apply out");
    switch (kind_) {
        case Kind::Zero:
            for (double& v : out) v = 0.0;
            return;
        case Kind::Diagonal:
            for (int i = 0; i < dim_; ++i) out[i] = a_[i] * z[i];
            return;
        case Kind::DiagPlusRank1: {
            // (L z)_i = r_i z_i + w_i * sum_{m < i} c_m z_m.
            double prefix = 0.0;
            for (int i = 0; i < dim_; ++i) {
                out[i] = r_[i] * z[i] + w_[i] * prefix;
                prefix += c_[i] * z[i];
            }
            return;
        }
        case Kind::Dense:
            for (int i = 0; i < dim_; ++i) {
                const double* row = &a_[static_cast<std::size_t>(i) * dim_];
                double s = 0.0;
                for (int j = 0; j < dim_; ++j) s += row[j] * z[j];
                out[i] = s;
            }
            return;
    }
}

std::vector<double> DiffusionFactor::dense() const {
    std::vector<double> m(static_cast<std::size_t>(dim_) * dim_, 0.0);
    switch (kind_) {
        case Kind::Zero:
            break;
        case Kind::Diagonal:
            for (int i = 0; i < dim_; ++i) m[static_cast<std::size_t>(i) * dim_ + i] = a_[i];
            break;
        case Kind::DiagPlusRank1:
            for (int i = 0; i < dim_; ++i) {
                m[static_cast<std::size_t>(i) * dim_ + i] = r_[i];
                for (int j = 0; j < i; ++j) {
                    m[static_cast<std::size_t>(i) * dim_ + j] = c_[j] * w_[i];
                }
            }
            break;
        case Kind::Dense:
            m = a_;
            break;
    }
    return m;
}

DiffusionFactor diffusion_factorize(std::span<const double> cov_diag) {
    std::vector<double> s(cov_diag.size());
    for (std::size_t i = 0; i < cov_diag.size(); ++i) {
        double v = cov_diag[i];
        if (v < 0.0) {
            if (v < -kPsdDust) {
                throw std::runtime_error("diffusion_factorize: diagonal entry " +
                                         std::to_string(v) + " is not PSD");
            }
            v = 0.0;
        }
        s[i] = std::sqrt(v);
    }
    DiffusionFactor f;
    f.set_diagonal(std::move(s));
    return f;
}

DiffusionFactor diffusion_factorize(const std::vector<double>& cov_row_major, int dim) {
    require_length(cov_row_major.size(), static_cast<std::size_t>(dim) * dim,
                   "diffusion_factorize");
    Eigen::MatrixXd m(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) m(i, j) = cov_row_major[static_cast<std::size_t>(i) * dim + j];
    }
    if (!m.isApprox(m.transpose(), 1e-10)) {
        throw std::invalid_argument("diffusion_factorize: covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd lam = es.eigenvalues();
    for (int i = 0; i < dim; ++i) {
        if (lam[i] < -kPsdDust) {
            throw std::runtime_error("diffusion_factorize: eigenvalue " + std::to_string(lam[i]) +
                                     " is not PSD");
        }
        lam[i] = lam[i] > 0.0 ? std::sqrt(lam[i]) : 0.0;
    }
    const Eigen::MatrixXd a = es.eigenvectors() * lam.asDiagonal();
    std::vector<double> out(static_cast<std::size_t>(dim) * dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) out[static_cast<std::size_t>(i) * dim + j] = a(i, j);
    }
    DiffusionFactor f;
    f.set_dense(std::move(out), dim);
    return f;
}

SdeModel dsgd_sde(const Landscape& landscape, std::span<const NoiseModel> noises, double eta,
                  int agents, int batch_size) {
    const int d = landscape.dim();
    require_length(noises.size(), static_cast<std::size_t>(agents), "dsgd_sde noises");
    for (const auto& n : noises) n.validate(d);
    require_finite_variance(noises, "dsgd_sde");
    if (!(eta > 0.0) || batch_size < 1) {
        throw std::invalid_argument("dsgd_sde: eta must be positive, batch size >= 1");
    }

    // The covariance (eta/(N B)) Sigma_hat is x-independent: precompute its
    // square root once.
    std::vector<double> cov = mean_noise_cov_diag(noises, d, {});
    const double pref = eta / (static_cast<double>(agents) * batch_size);
    for (double& v : cov) v *= pref;
    DiffusionFactor fixed = diffusion_factorize(cov);

    SdeModel model;
    model.dim = d;
    model.label = "dsgd";
    model.landscape = &landscape;
    model.drift = [&landscape, d](std::span<const double> x, std::span<double> out) {
        landscape.gradient(x, out);
        for (int j = 0; j < d; ++j) out[j] = -out[j];
    };
    model.diffusion = [fixed](std::span<const double>, DiffusionFactor& out) { out = fixed; };
    return model;
}

SdeModel dcsgd_sde(const Landscape& landscape, std::span<const NoiseModel> noises,
                   std::span<const Compressor> compressors, double eta, int agents,
                   int batch_size, int mc_samples) {
    const int d = landscape.dim();
    require_length(noises.size(), static_cast<std::size_t>(agents), "dcsgd_sde noises");
    require_length(compressors.size(), static_cast<std::size_t>(agents),
                   "dcsgd_sde compressors");
    for (const auto& n : noises) n.validate(d);
    require_finite_variance(noises, "dcsgd_sde");
    if (!(eta > 0.0) || batch_size < 1) {
        throw std::invalid_argument("dcsgd_sde: eta must be positive, batch size >= 1");
    }
    (void)mc_samples;  // reserved for unbiased kinds without a closed form

    double omega_bar = 0.0;
    std::vector<double> weights(compressors.size());
    for (std::size_t i = 0; i < compressors.size(); ++i) {
        const auto om = omega(compressors[i], d);
        if (!om) {
            throw std::invalid_argument(
                "dcsgd_sde: compressor '" + compressors[i].name() +
                "' is biased; the compressed model requires unbiased compressors");
        }
        omega_bar += *om;
        weights[i] = *om + 1.0;
    }
    omega_bar /= static_cast<double>(agents);

    // Covariance (eta/N) [omega_bar g g^T + D], D diagonal from the
    // (omega_i + 1)-weighted effective (batch-scaled) noise covariances.
    std::vector<double> diag = mean_noise_cov_diag(noises, d, weights);
    const double pref = eta / static_cast<double>(agents);
    for (double& v : diag) v *= pref / batch_size;
    const double rank1_scale = pref * omega_bar;

    SdeModel model;
    model.dim = d;
    model.label = "dcsgd";
    model.landscape = &landscape;
    model.drift = [&landscape, d](std::span<const double> x, std::span<double> out) {
        landscape.gradient(x, out);
        for (int j = 0; j < d; ++j) out[j] = -out[j];
    };
    if (rank1_scale == 0.0) {
        DiffusionFactor fixed = diffusion_factorize(diag);
        model.diffusion = [fixed](std::span<const double>, DiffusionFactor& out) { out = fixed; };
    } else {
        model.diffusion = [&landscape, d, diag = std::move(diag), rank1_scale](
                              std::span<const double> x, DiffusionFactor& out) {
            thread_local std::vector<double> grad;
            grad.resize(d);
            landscape.gradient(x, grad);
            out.set_diag_plus_rank1(diag, rank1_scale, grad);
        };
    }
    return model;
}

SdeModel dsignsgd_sde(const Landscape& landscape, std::span<const NoiseModel> noises, double eta,
                      int agents, int batch_size) {
    const int d = landscape.dim();
    require_length(noises.size(), static_cast<std::size_t>(agents), "dsignsgd_sde noises");
    for (const auto& n : noises) {
        n.validate(d);
        if (n.kind == NoiseKind::None) {
            throw std::invalid_argument("dsignsgd_sde: noiseless agents have no sign statistics");
        }
    }
    require_positive_scales(noises, d, "dsignsgd_sde");
    if (!(eta > 0.0) || batch_size < 1) {
        throw std::invalid_argument("dsignsgd_sde: eta must be positive, batch size >= 1");
    }

    // Per-agent (scale vector, nu) pairs, copied so the model owns its data.
    struct AgentView {
        std::vector<double> scales;
        double nu;
    };
    std::vector<AgentView> views;
    views.reserve(noises.size());
    for (const auto& n : noises) {
        views.push_back({n.scale_diag, n.kind == NoiseKind::Gaussian ? nu_infinity : n.nu});
    }

    const double inv_n = 1.0 / static_cast<double>(agents);
    const double sqrt_b = std::sqrt(static_cast<double>(batch_size));
    const double step_var = eta * inv_n;

    SdeModel model;
    model.dim = d;
    model.label = "dsignsgd";
    model.landscape = &landscape;
    auto clamps = model.variance_clamps;

    model.drift = [&landscape, d, views, inv_n, sqrt_b](std::span<const double> x,
                                                        std::span<double> out) {
        thread_local std::vector<double> grad;
        grad.resize(d);
        landscape.gradient(x, grad);
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            for (const auto& v : views) {
                acc += xi_nu(sqrt_b * grad[j] / v.scales[j], v.nu);
            }
            out[j] = -2.0 * inv_n * acc;
        }
    };
    model.diffusion = [&landscape, d, views, inv_n, sqrt_b, step_var, clamps](
                          std::span<const double> x, DiffusionFactor& out) {
        thread_local std::vector<double> grad;
        thread_local std::vector<double> sqrts;
        grad.resize(d);
        sqrts.resize(d);
        landscape.gradient(x, grad);
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            for (const auto& v : views) {
                const double xi = xi_nu(sqrt_b * grad[j] / v.scales[j], v.nu);
                acc += xi * xi;
            }
            // 1 - (4/N) sum xi^2 >= 0 analytically (|xi| <= 1/2); floating-
            // point dust below zero is clamped and counted.
            double vj = step_var * (1.0 - 4.0 * inv_n * acc);
            if (vj < 0.0) {
                clamps->fetch_add(1);
                vj = 0.0;
            }
            sqrts[j] = std::sqrt(vj > step_var ? step_var : vj);
        }
        out.set_diagonal_view(sqrts);
    };
    return model;
}

SdeModel phase_sde(const Landscape& landscape, std::span<const NoiseModel> noises, double eta,
                   int agents, int batch_size, int phase, double nu) {
    const int d = landscape.dim();
    require_length(noises.size(), static_cast<std::size_t>(agents), "phase_sde noises");
    if (phase != 1 && phase != 3) {
        throw std::invalid_argument("phase_sde: phase must be 1 or 3 (phase 2 has no reduced "
                                    "model; use the full sign-descent SDE)");
    }
    if (!(eta > 0.0) || batch_size < 1) {
        throw std::invalid_argument("phase_sde: eta must be positive, batch size >= 1");
    }

    SdeModel model;
    model.dim = d;
    model.landscape = &landscape;

    if (phase == 1) {
        // Saturated signal: the deterministic sign-flow ODE.
        model.label = "signgd_ode";
        model.drift = [&landscape, d](std::span<const double> x, std::span<double> out) {
            thread_local std::vector<double> grad;
            grad.resize(d);
            landscape.gradient(x, grad);
            for (int j = 0; j < d; ++j) {
                out[j] = grad[j] > 0.0 ? -1.0 : (grad[j] < 0.0 ? 1.0 : 0.0);
            }
        };
        model.diffusion = [d](std::span<const double>, DiffusionFactor& out) { out.set_zero(d); };
        return model;
    }

    for (const auto& n : noises) n.validate(d);
    require_positive_scales(noises, d, "phase_sde");
    const double ell = ell_nu(nu);
    const double inv_n = 1.0 / static_cast<double>(agents);
    const double sqrt_b = std::sqrt(static_cast<double>(batch_size));
    const double step_var = eta * inv_n;
    auto clamps = model.variance_clamps;

    model.label = "dsignsgd_linear";
    model.drift = [&landscape, d, noises = std::vector<NoiseModel>(noises.begin(), noises.end()),
                   ell, inv_n, sqrt_b](std::span<const double> x, std::span<double> out) {
        thread_local std::vector<double> grad;
        grad.resize(d);
        landscape.gradient(x, grad);
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            for (const auto& n : noises) acc += grad[j] / n.scale_diag[j];
            out[j] = -ell * sqrt_b * inv_n * acc;
        }
    };
    model.diffusion = [&landscape, d,
                       noises = std::vector<NoiseModel>(noises.begin(), noises.end()), ell, inv_n,
                       sqrt_b, step_var, clamps](std::span<const double> x, DiffusionFactor& out) {
        thread_local std::vector<double> grad;
        thread_local std::vector<double> sqrts;
        grad.resize(d);
        sqrts.resize(d);
        landscape.gradient(x, grad);
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            for (const auto& n : noises) {
                const double y = sqrt_b * grad[j] / n.scale_diag[j];
                acc += y * y;
            }
            // Linearized variance can cross zero where the small-signal
            // expansion stops being valid; clamp and count.
            double vj = step_var * (1.0 - ell * ell * inv_n * acc);
            if (vj < 0.0) {
                clamps->fetch_add(1);
                vj = 0.0;
            }
            sqrts[j] = std::sqrt(vj);
        }
        out.set_diagonal_view(sqrts);
    };
    return model;
}

Trajectory euler_maruyama(const SdeModel& model, std::span<const double> x0, double dt,
                          std::int64_t steps, RngStream& rng, std::int64_t stride,
                          const EmOptions& options) {
    if (!(dt > 0.0)) throw std::invalid_argument("euler_maruyama: dt must be positive");
    if (steps < 0) throw std::invalid_argument("euler_maruyama: steps must be >= 0");
    if (stride < 1) throw std::invalid_argument("euler_maruyama: stride must be >= 1");
    const int d = model.dim;
    require_length(x0.size(), static_cast<std::size_t>(d), "euler_maruyama x0");
    const Landscape& landscape = *model.landscape;
    const bool has_gap = landscape.has_f_star();

    Trajectory out;
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> drift(d);
    std::vector<double> z(d);
    std::vector<double> dw(d);
    std::vector<double> grad(d);
    DiffusionFactor factor;
    const double sqrt_dt = std::sqrt(dt);

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
        if (options.record_points) out.points.emplace_back(x);
    };

    record(0);
    for (std::int64_t k = 0; k < steps; ++k) {
        rng.seek(static_cast<std::uint64_t>(k));
        model.drift(x, drift);
        model.diffusion(x, factor);
        for (int j = 0; j < d; ++j) z[j] = rng.normal();
        factor.apply(z, dw);
        for (int j = 0; j < d; ++j) x[j] += dt * drift[j] + sqrt_dt * dw[j];

        bool finite = true;
        for (double v : x) {
            if (!std::isfinite(v)) {
                finite = false;
                break;
            }
        }
        double metric = std::numeric_limits<double>::infinity();
        if (finite) {
            const double raw = landscape.loss(x);
            metric = has_gap ? std::max(raw - landscape.f_star(), 0.0) : std::fabs(raw);
        }
        if (!finite || !(metric <= options.divergence_ceiling)) {
            if (!out.diverged_at) out.diverged_at = k + 1;
            if (options.halt_on_divergence) return out;
        }
        const std::int64_t done = k + 1;
        if (done % stride == 0 || done == steps) record(done);
    }
    return out;
}

}  // namespace dsim
