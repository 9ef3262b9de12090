// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include "dsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dsim/compressor.hpp"
#include "dsim/landscape.hpp"
#include "dsim/noise.hpp"
#include "dsim/optimizer.hpp"

namespace dsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

double mean_of(const std::vector<double>& v, const char* what) {
    if (v.empty()) throw std::invalid_argument(what);
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

// exp(-rate * t) that tolerates t = +infinity (rate > 0).
double decay(double rate, double t) {
    if (std::isinf(t)) return 0.0;
    return std::exp(-rate * t);
}

}  // namespace

// --- BoundParams -------------------------------------------------------------

double BoundParams::mean_noise_trace() const {
    return mean_of(noise_traces, "BoundParams: noise_traces is empty");
}

double BoundParams::mean_omega() const {
    return mean_of(omegas, "BoundParams: omegas is empty");
}

double BoundParams::mean_omega_noise_trace() const {
    if (omegas.size() != noise_traces.size() || omegas.empty())
        throw std::invalid_argument(
            "BoundParams: omegas and noise_traces must be non-empty and of "
            "equal length");
    double sum = 0.0;
    for (std::size_t i = 0; i < omegas.size(); ++i)
        sum += omegas[i] * noise_traces[i];
    return sum / static_cast<double>(omegas.size());
}

double BoundParams::sigma_harmonic_inverse(int power) const {
    if (sigma_maxes.empty())
        throw std::invalid_argument("BoundParams: sigma_maxes is empty");
    require(power >= 1, "BoundParams: harmonic power must be >= 1");
    double sum = 0.0;
    for (double s : sigma_maxes) {
        if (!(s > 0.0))
            throw std::invalid_argument(
                "BoundParams: sigma_maxes entries must be positive");
        sum += std::pow(s, -static_cast<double>(power));
    }
    return sum / static_cast<double>(sigma_maxes.size());
}

double BoundParams::sigma_harmonic(int power) const {
    return 1.0 / sigma_harmonic_inverse(power);
}

void BoundParams::validate() const {
    require(std::isfinite(mu) && mu > 0.0, "BoundParams: mu must be positive");
    require(std::isfinite(smoothness) && smoothness > 0.0,
            "BoundParams: smoothness must be positive");
    require(std::isfinite(hessian_trace) && hessian_trace >= 0.0,
            "BoundParams: hessian_trace must be non-negative");
    require(dim >= 1, "BoundParams: dim must be >= 1");
    require(std::isfinite(eta) && eta > 0.0,
            "BoundParams: eta must be positive");
    require(batch_size >= 1, "BoundParams: batch_size must be >= 1");
    require(agents >= 1, "BoundParams: agents must be >= 1");
    require(std::isfinite(s0) && s0 >= 0.0,
            "BoundParams: s0 must be non-negative");
    const std::size_t n = static_cast<std::size_t>(agents);
    auto check_len = [&](const std::vector<double>& v, const char* what) {
        if (!v.empty() && v.size() != n) throw std::invalid_argument(what);
    };
    check_len(noise_traces, "BoundParams: noise_traces has the wrong length");
    check_len(omegas, "BoundParams: omegas has the wrong length");
    check_len(sigma_maxes, "BoundParams: sigma_maxes has the wrong length");
    for (double v : noise_traces)
        require(std::isfinite(v) && v >= 0.0,
                "BoundParams: noise_traces entries must be finite and >= 0");
    for (double v : omegas)
        require(std::isfinite(v) && v >= 0.0,
                "BoundParams: omegas entries must be finite and >= 0");
}

BoundParams bound_params_from(const Landscape& landscape,
                              const ClusterConfig& config) {
    if (!landscape.has_pl_constants())
        throw std::invalid_argument(
            "bound_params_from: landscape has no PL constants (" +
            landscape.describe() + ")");
    BoundParams p;
    p.mu = landscape.mu();
    p.smoothness = landscape.smoothness();
    p.hessian_trace = landscape.hessian_trace_bound();
    p.dim = landscape.dim();
    p.eta = config.eta;
    p.batch_size = config.batch_size;
    p.agents = config.agents;
    p.s0 = landscape.loss_gap(config.x0);

    if (config.noise.size() != static_cast<std::size_t>(config.agents))
        throw std::invalid_argument(
            "bound_params_from: config must carry one noise model per agent");
    p.noise_traces.reserve(config.noise.size());
    p.sigma_maxes.reserve(config.noise.size());
    for (const NoiseModel& m : config.noise) {
        // Raw trace: batch scaling is re-applied inside the bound formulas.
        const double tr = trace_bound(m, 1);
        if (!std::isfinite(tr))
            throw std::invalid_argument(
                "bound_params_from: agent noise has unbounded covariance "
                "trace (Student-t nu <= 2)");
        p.noise_traces.push_back(tr);
        double smax = 0.0;
        for (double s : m.scale_diag) smax = std::max(smax, s);
        p.sigma_maxes.push_back(smax);
    }

    if (config.compressors.empty()) {
        p.omegas.assign(static_cast<std::size_t>(config.agents), 0.0);
    } else {
        if (config.compressors.size() != static_cast<std::size_t>(config.agents))
            throw std::invalid_argument(
                "bound_params_from: config must carry one compressor per "
                "agent");
        for (const Compressor& c : config.compressors) {
            const std::optional<double> w = omega(c, landscape.dim());
            if (!w)
                throw std::invalid_argument(
                    "bound_params_from: compressor '" + std::string(c.name()) +
                    "' is biased and has no variance certificate");
            p.omegas.push_back(*w);
        }
    }
    p.validate();
    return p;
}

// --- Scheduler ---------------------------------------------------------------

Scheduler Scheduler::constant(double c) {
    Scheduler s;
    s.kind = Kind::Constant;
    s.c = c;
    s.validate();
    return s;
}

Scheduler Scheduler::power_decay(double c, double p) {
    Scheduler s;
    s.kind = Kind::PowerDecay;
    s.c = c;
    s.p = p;
    s.validate();
    return s;
}

void Scheduler::validate() const {
    require(std::isfinite(c) && c > 0.0, "Scheduler: c must be positive");
    if (kind == Kind::PowerDecay)
        require(p > 0.5 && p < 1.0,
                "Scheduler: power-decay exponent must lie in (1/2, 1)");
}

double Scheduler::rate(double t) const {
    require(t >= 0.0, "Scheduler: t must be >= 0");
    if (kind == Kind::Constant) return c;
    return c * std::pow(1.0 + t, -p);
}

double Scheduler::phi1(double t) const {
    require(t >= 0.0, "Scheduler: t must be >= 0");
    if (kind == Kind::Constant) return c * t;
    return c * (std::pow(1.0 + t, 1.0 - p) - 1.0) / (1.0 - p);
}

double Scheduler::phi2(double t) const {
    require(t >= 0.0, "Scheduler: t must be >= 0");
    if (kind == Kind::Constant) return c * c * t;
    return c * c * (1.0 - std::pow(1.0 + t, 1.0 - 2.0 * p)) / (2.0 * p - 1.0);
}

// --- PL bounds ---------------------------------------------------------------

double dsgd_pl_asymptote(const BoundParams& params) {
    params.validate();
    return params.eta * params.smoothness * params.mean_noise_trace() /
           (4.0 * params.mu * params.batch_size * params.agents);
}

double dsgd_pl_bound(double t, const BoundParams& params) {
    require(t >= 0.0, "dsgd_pl_bound: t must be >= 0");
    const double level = dsgd_pl_asymptote(params);
    const double e = decay(2.0 * params.mu, t);
    return params.s0 * e + (1.0 - e) * level;
}

double dcsgd_delta(const BoundParams& params) {
    params.validate();
    return 1.0 - params.eta * params.smoothness * params.smoothness *
                     params.mean_omega() / (2.0 * params.mu * params.agents);
}

double dcsgd_lr_threshold(const BoundParams& params) {
    params.validate();
    const double omega_bar = params.mean_omega();
    if (omega_bar == 0.0) return kInf;
    return 2.0 * params.mu * params.agents /
           (params.smoothness * params.smoothness * omega_bar);
}

double dcsgd_pl_asymptote(const BoundParams& params) {
    const double delta = dcsgd_delta(params);
    if (delta <= 0.0) return kInf;
    return params.eta * params.smoothness *
           (params.mean_noise_trace() + params.mean_omega_noise_trace()) /
           (4.0 * params.mu * params.batch_size * params.agents * delta);
}

double dcsgd_pl_bound(double t, const BoundParams& params) {
    require(t >= 0.0, "dcsgd_pl_bound: t must be >= 0");
    const double delta = dcsgd_delta(params);
    if (delta <= 0.0) return kInf;
    const double level = dcsgd_pl_asymptote(params);
    const double e = decay(2.0 * params.mu * delta, t);
    return params.s0 * e + (1.0 - e) * level;
}

// --- Sign-descent phase bounds -------------------------------------------------

double dsignsgd_descent_time(const BoundParams& params) {
    params.validate();
    return 2.0 * std::sqrt(params.s0 / params.mu);
}

double dsignsgd_phase_delta(int phase, const BoundParams& params,
                            const PhaseConstants& constants) {
    params.validate();
    require(phase == 2 || phase == 3,
            "dsignsgd_phase_delta: only phases 2 and 3 contract");
    const double slope = (phase == 2) ? constants.m : constants.ell;
    const double b = static_cast<double>(params.batch_size);
    return slope * std::sqrt(b) * params.sigma_harmonic_inverse(1) +
           params.eta * b * params.mu * slope * slope *
               params.sigma_harmonic_inverse(2) / (2.0 * params.agents);
}

namespace {

// Additive forcing term of the phase-2/3 suboptimality recursion.
double sign_phase_additive(int phase, const BoundParams& params,
                           const PhaseConstants& constants) {
    const double n = static_cast<double>(params.agents);
    if (phase == 3) return params.eta * params.hessian_trace / (2.0 * n);
    const double q = constants.q_hat;
    return params.eta *
           (params.hessian_trace - params.mu * params.dim * q * q) / (2.0 * n);
}

}  // namespace

double dsignsgd_phase_bound(double t, int phase, const BoundParams& params,
                            const PhaseConstants& constants,
                            bool* negative_additive) {
    params.validate();
    require(t >= 0.0, "dsignsgd_phase_bound: t must be >= 0");
    if (negative_additive) *negative_additive = false;
    if (phase == 1) {
        const double t_star = dsignsgd_descent_time(params);
        if (t >= t_star) return 0.0;
        const double r = std::sqrt(params.s0) - 0.5 * std::sqrt(params.mu) * t;
        return r * r;
    }
    require(phase == 2 || phase == 3,
            "dsignsgd_phase_bound: phase must be 1, 2 or 3");
    const double delta = dsignsgd_phase_delta(phase, params, constants);
    const double add = sign_phase_additive(phase, params, constants);
    if (negative_additive && add < 0.0) *negative_additive = true;
    const double e = decay(2.0 * params.mu * delta, t);
    return params.s0 * e + add * (1.0 - e) / (2.0 * params.mu * delta);
}

double dsignsgd_phase_asymptote(int phase, const BoundParams& params,
                                const PhaseConstants& constants,
                                bool* negative_additive) {
    params.validate();
    if (negative_additive) *negative_additive = false;
    if (phase == 1) return 0.0;
    require(phase == 2 || phase == 3,
            "dsignsgd_phase_asymptote: phase must be 1, 2 or 3");
    const double delta = dsignsgd_phase_delta(phase, params, constants);
    const double add = sign_phase_additive(phase, params, constants);
    if (negative_additive && add < 0.0) *negative_additive = true;
    return add / (2.0 * params.mu * delta);
}

// --- Certificates ------------------------------------------------------------

double Certificate::weight(double s) const {
    const double r = schedule.rate(s);
    if (kind == CertificateKind::DCSGD)
        return (r - tilt * r * r) / (phi1 - tilt * phi2);
    return r / phi1;
}

Certificate nonconvex_certificate(CertificateKind kind,
                                  const Scheduler& schedule, double horizon,
                                  const BoundParams& params, double nu,
                                  double epsilon) {
    params.validate();
    schedule.validate();
    require(std::isfinite(horizon) && horizon > 0.0,
            "nonconvex_certificate: horizon must be positive and finite");

    Certificate cert;
    cert.kind = kind;
    cert.horizon = horizon;
    cert.schedule = schedule;
    cert.phi1 = schedule.phi1(horizon);
    cert.phi2 = schedule.phi2(horizon);

    const double n = static_cast<double>(params.agents);
    const double b = static_cast<double>(params.batch_size);
    const double ratio = cert.phi2 / cert.phi1;

    switch (kind) {
        case CertificateKind::DSGD: {
            cert.quantity = "rate-weighted squared l2 gradient norm";
            cert.rhs = params.s0 / cert.phi1 +
                       params.eta * params.smoothness *
                           params.mean_noise_trace() / (2.0 * b * n) * ratio;
            break;
        }
        case CertificateKind::DCSGD: {
            cert.quantity = "tilt-weighted squared l2 gradient norm";
            const double omega_bar = params.mean_omega();
            cert.tilt =
                params.eta * params.smoothness * omega_bar / (2.0 * n);
            // The tilted weights must stay positive over the whole horizon;
            // both schedule kinds peak at t = 0.
            if (omega_bar > 0.0 && schedule.rate(0.0) >= 1.0 / cert.tilt)
                throw std::invalid_argument(
                    "nonconvex_certificate: schedule rate exceeds the "
                    "compressed step-size ceiling 2N/(eta L mean_omega)");
            const double drag = 1.0 - cert.tilt * ratio;
            cert.rhs = (params.s0 / cert.phi1 +
                        ratio * params.eta * params.smoothness *
                            (params.mean_noise_trace() +
                             params.mean_omega_noise_trace()) /
                            (2.0 * b * n)) /
                       drag;
            break;
        }
        case CertificateKind::DSignSGDPhase1: {
            cert.quantity = "rate-weighted l1 gradient norm";
            cert.rhs = params.s0 / cert.phi1;
            break;
        }
        case CertificateKind::DSignSGDPhase2:
        case CertificateKind::DSignSGDPhase3: {
            const PhaseConstants pc = phase_constants(nu, epsilon);
            const double harmonic = params.sigma_harmonic(1);
            const double root_b = std::sqrt(b);
            const double slope =
                (kind == CertificateKind::DSignSGDPhase2) ? pc.m : pc.ell;
            const double forcing = params.s0 + params.eta * params.smoothness *
                                                   params.dim * cert.phi2 /
                                                   (2.0 * n);
            cert.rhs = harmonic * forcing / (cert.phi1 * slope * root_b);
            if (kind == CertificateKind::DSignSGDPhase2) {
                cert.quantity =
                    "rate-weighted squared l2 plus scaled l1 gradient norm";
                cert.l1_coefficient =
                    pc.q_hat * harmonic / (pc.m * root_b);
            } else {
                cert.quantity = "rate-weighted squared l2 gradient norm";
            }
            break;
        }
    }
    return cert;
}

// --- Scaling rules -----------------------------------------------------------

namespace {

void validate_factors(const ScalingFactors& f) {
    require(std::isfinite(f.kappa) && f.kappa > 0.0,
            "ScalingFactors: kappa must be positive");
    require(std::isfinite(f.delta) && f.delta > 0.0,
            "ScalingFactors: delta must be positive");
    require(std::isfinite(f.alpha) && f.alpha > 0.0,
            "ScalingFactors: alpha must be positive");
    require(std::isfinite(f.beta) && f.beta >= 0.0,
            "ScalingFactors: beta must be non-negative");
}

// Residual of: rescaled DCSGD stationary level == unscaled DSGD level.
double dcsgd_master_residual(const ScalingFactors& f,
                             const BoundParams& params) {
    const double a = params.mean_noise_trace();
    require(a > 0.0, "scaling_check: dcsgd rules need a nonzero noise trace");
    const double w = params.mean_omega_noise_trace();
    const double g = params.mean_omega() * params.eta * params.smoothness *
                     params.smoothness / (2.0 * params.mu * params.agents);
    const double lhs = f.kappa * (a + f.beta * w + a * f.delta * f.beta * g);
    const double rhs = a * f.delta * f.alpha;
    return std::abs(lhs / rhs - 1.0);
}

void require_pinned(double value, const char* what) {
    if (std::abs(value - 1.0) > 1e-12)
        throw std::invalid_argument(std::string("scaling_check: ") + what +
                                    " is pinned to 1 for this rule");
}

}  // namespace

double scaling_check(std::string_view rule, const ScalingFactors& factors,
                     const BoundParams& params, double nu) {
    params.validate();
    validate_factors(factors);
    const ScalingFactors& f = factors;

    if (rule == "dsgd") return std::abs(f.kappa / (f.alpha * f.delta) - 1.0);
    if (rule == "dsignsgd")
        return std::abs(f.kappa / (f.alpha * std::sqrt(f.delta)) - 1.0);
    if (rule == "dsignsgd_general") {
        const double ell = ell_nu(nu);
        const double b = static_cast<double>(params.batch_size);
        const double k1 =
            ell * std::sqrt(b) * params.sigma_harmonic_inverse(1);
        const double k2 = params.eta * ell * ell * b * params.mu *
                          params.sigma_harmonic_inverse(2) /
                          (2.0 * params.agents);
        const double ratio =
            (f.kappa / f.alpha) * (k1 + k2) /
            (std::sqrt(f.delta) * k1 + (f.kappa * f.delta / f.alpha) * k2);
        return std::abs(ratio - 1.0);
    }
    if (rule == "dcsgd_simplified")
        return std::abs(f.kappa * (1.0 + f.beta * params.mean_omega()) /
                            (f.delta * f.alpha) -
                        1.0);
    if (rule == "dcsgd_general") return dcsgd_master_residual(f, params);
    if (rule == "dcsgd_rule1") {
        require_pinned(f.kappa, "kappa");
        require_pinned(f.delta, "delta");
        return dcsgd_master_residual(f, params);
    }
    if (rule == "dcsgd_rule2") {
        require_pinned(f.beta, "beta");
        require_pinned(f.delta, "delta");
        return dcsgd_master_residual(f, params);
    }
    if (rule == "dcsgd_rule3") {
        require_pinned(f.beta, "beta");
        require_pinned(f.kappa, "kappa");
        return dcsgd_master_residual(f, params);
    }
    if (rule == "dcsgd_rule4") {
        require_pinned(f.alpha, "alpha");
        require_pinned(f.delta, "delta");
        return dcsgd_master_residual(f, params);
    }
    if (rule == "dcsgd_rule5") {
        require_pinned(f.alpha, "alpha");
        require_pinned(f.kappa, "kappa");
        return dcsgd_master_residual(f, params);
    }
    if (rule == "dcsgd_rule6") {
        require_pinned(f.alpha, "alpha");
        require_pinned(f.beta, "beta");
        return dcsgd_master_residual(f, params);
    }
    throw std::invalid_argument("scaling_check: unknown rule '" +
                                std::string(rule) + "'");
}

double predicted_asymptote(AsymptoteKind kind, const ScalingFactors& factors,
                           const BoundParams& params, double nu) {
    params.validate();
    validate_factors(factors);
    const ScalingFactors& f = factors;
    const double eta = f.kappa * params.eta;
    const double b = f.delta * static_cast<double>(params.batch_size);
    const double n = f.alpha * static_cast<double>(params.agents);
    const double l = params.smoothness;

    switch (kind) {
        case AsymptoteKind::DSGD:
            return eta * l * params.mean_noise_trace() /
                   (4.0 * params.mu * b * n);
        case AsymptoteKind::DCSGD: {
            const double drag =
                1.0 - eta * l * l * f.beta * params.mean_omega() /
                          (2.0 * params.mu * n);
            if (drag <= 0.0) return kInf;
            return eta * l *
                   (params.mean_noise_trace() +
                    f.beta * params.mean_omega_noise_trace()) /
                   (4.0 * params.mu * b * n * drag);
        }
        case AsymptoteKind::DSignSGD: {
            const double ell = ell_nu(nu);
            const double delta3 =
                ell * std::sqrt(b) * params.sigma_harmonic_inverse(1) +
                eta * b * params.mu * ell * ell *
                    params.sigma_harmonic_inverse(2) / (2.0 * n);
            return eta * params.hessian_trace /
                   (4.0 * params.mu * n * delta3);
        }
    }
    throw std::invalid_argument("predicted_asymptote: unknown kind");
}

// --- Stationary moments -------------------------------------------------------

StationaryMoments dcsgd_stationary_moments(double t,
                                           std::span<const double> h_diag,
                                           int k, double sigma_sq, double eta,
                                           int agents,
                                           std::span<const double> x0) {
    const int d = static_cast<int>(h_diag.size());
    require(d >= 1, "dcsgd_stationary_moments: empty Hessian diagonal");
    require(k >= 1 && k <= d,
            "dcsgd_stationary_moments: k must lie in [1, dim]");
    require(std::isfinite(sigma_sq) && sigma_sq >= 0.0,
            "dcsgd_stationary_moments: sigma_sq must be >= 0");
    require(std::isfinite(eta) && eta > 0.0,
            "dcsgd_stationary_moments: eta must be positive");
    require(agents >= 1, "dcsgd_stationary_moments: agents must be >= 1");
    require(x0.size() == h_diag.size(),
            "dcsgd_stationary_moments: x0 and Hessian sizes differ");
    require(t >= 0.0, "dcsgd_stationary_moments: t must be >= 0");

    const double ratio = static_cast<double>(d) / static_cast<double>(k);
    const double n = static_cast<double>(agents);
    StationaryMoments out;
    out.mean.resize(h_diag.size());
    out.cov_diag.resize(h_diag.size());
    for (std::size_t j = 0; j < h_diag.size(); ++j) {
        const double h = h_diag[j];
        require(std::isfinite(h) && h > 0.0,
                "dcsgd_stationary_moments: Hessian diagonal must be positive");
        const double rate = 2.0 * h * (1.0 - eta * h * (ratio - 1.0) / (2.0 * n));
        if (rate <= 0.0)
            throw std::runtime_error(
                "dcsgd_stationary_moments: compression amplification removes "
                "mean reversion (increase k, agents, or lower eta)");
        const double x = x0[j];
        const double level = eta * ratio * sigma_sq / (n * rate);
        const double em = decay(rate, t);
        out.mean[j] = decay(h, t) * x;
        const double second = em * x * x + level * (1.0 - em);
        out.cov_diag[j] =
            std::max(0.0, second - out.mean[j] * out.mean[j]);
    }
    return out;
}

StationaryMoments dsignsgd_stationary_moments(
    double t, std::span<const double> h_diag,
    const std::vector<std::vector<double>>& agent_scales, double nu,
    double eta, int agents, int batch_size, std::span<const double> x0) {
    require(!h_diag.empty(), "dsignsgd_stationary_moments: empty Hessian");
    require(agents >= 1, "dsignsgd_stationary_moments: agents must be >= 1");
    require(agent_scales.size() == static_cast<std::size_t>(agents),
            "dsignsgd_stationary_moments: one scale vector per agent");
    require(std::isfinite(eta) && eta > 0.0,
            "dsignsgd_stationary_moments: eta must be positive");
    require(batch_size >= 1,
            "dsignsgd_stationary_moments: batch_size must be >= 1");
    require(x0.size() == h_diag.size(),
            "dsignsgd_stationary_moments: x0 and Hessian sizes differ");
    require(t >= 0.0, "dsignsgd_stationary_moments: t must be >= 0");

    const double ell = ell_nu(nu);
    const double n = static_cast<double>(agents);
    const double b = static_cast<double>(batch_size);
    const double root_b = std::sqrt(b);

    StationaryMoments out;
    out.mean.resize(h_diag.size());
    out.cov_diag.resize(h_diag.size());
    for (std::size_t j = 0; j < h_diag.size(); ++j) {
        const double h = h_diag[j];
        require(std::isfinite(h) && h > 0.0,
                "dsignsgd_stationary_moments: Hessian diagonal must be "
                "positive");
        double s1 = 0.0;  // sqrt(B) * mean of 1/sigma
        double s2 = 0.0;  // B * mean of 1/sigma^2
        for (const std::vector<double>& scales : agent_scales) {
            require(scales.size() == h_diag.size(),
                    "dsignsgd_stationary_moments: scale vector has the wrong "
                    "length");
            const double s = scales[j];
            require(std::isfinite(s) && s > 0.0,
                    "dsignsgd_stationary_moments: noise scales must be "
                    "positive");
            s1 += 1.0 / s;
            s2 += 1.0 / (s * s);
        }
        s1 *= root_b / n;
        s2 *= b / n;

        const double mean_rate = ell * s1 * h;
        const double second_rate =
            2.0 * (mean_rate + 0.5 * eta * ell * ell * s2 * h * h / n);
        const double level =
            0.5 * eta /
            (n * (ell + 0.5 * eta * ell * ell * s2 * h / (n * s1)) * h * s1);
        const double x = x0[j];
        const double em = decay(second_rate, t);
        out.mean[j] = decay(mean_rate, t) * x;
        // Exact moments of the linearized dynamics; transiently negative
        // variance is possible when x0 sits outside the small-signal region.
        out.cov_diag[j] = (em - decay(2.0 * mean_rate, t)) * x * x +
                          level * (1.0 - em);
    }
    return out;
}

}  // namespace dsim
