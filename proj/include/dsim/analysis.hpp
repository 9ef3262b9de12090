// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// Closed-form performance predictions for the distributed optimizers:
// expected-suboptimality bounds under a PL landscape, weighted-gradient
// certificates for general smooth landscapes, hyperparameter scaling rules
// with their predicted stationary levels, and exact first/second moments of
// the quadratic stationary dynamics. Everything here is analytic; the
// simulation harness consumes these as reference curves.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsim/special.hpp"

namespace dsim {

class Landscape;
struct ClusterConfig;

// Problem + cluster constants consumed by every bound evaluator.
//
// Per-agent vectors must all have length `agents`. The noise trace bounds are
// raw (no 1/batch_size factor); batch scaling is applied inside each formula
// exactly once. Aggregates are recomputed on demand so that callers can
// mutate fields between evaluations without stale caches.
struct BoundParams {
    double mu = 0.0;     // PL / strong-convexity constant
    double smoothness = 0.0;  // gradient Lipschitz constant L
    double hessian_trace = 0.0;  // trace-of-Hessian ceiling
    int dim = 0;         // parameter dimension
    double eta = 0.0;    // base learning rate
    int batch_size = 1;
    int agents = 0;
    double s0 = 0.0;     // initial suboptimality f(x0) - f*

    std::vector<double> noise_traces;  // per-agent: bound on Tr Sigma_i
    std::vector<double> omegas;        // per-agent compressor variance ratio
    std::vector<double> sigma_maxes;   // per-agent: largest coordinate scale

    // Means over agents.
    double mean_noise_trace() const;
    double mean_omega() const;
    double mean_omega_noise_trace() const;  // mean of omega_i * trace_i

    // Inverse harmonic moment (1/agents) * sum_i sigma_maxes[i]^-power, and
    // the harmonic mean itself (its reciprocal).
    double sigma_harmonic_inverse(int power) const;
    double sigma_harmonic(int power) const;

    // Throws std::invalid_argument when sizes or signs are inconsistent.
    void validate() const;
};

// Builds BoundParams from a landscape with PL constants and a cluster
// configuration. Throws if the landscape lacks PL constants, if any agent
// noise has unbounded covariance trace, or if any compressor is biased
// (no variance certificate exists for those).
BoundParams bound_params_from(const Landscape& landscape,
                              const ClusterConfig& config);

// Learning-rate schedule applied as a dimensionless multiplier on top of the
// base dynamics. phi1/phi2 are the running integrals of the rate and the
// squared rate; both are closed-form for the supported kinds.
struct Scheduler {
    enum class Kind { Constant, PowerDecay };

    Kind kind = Kind::Constant;
    double c = 1.0;  // rate at t = 0
    double p = 0.75;  // PowerDecay exponent, must lie in (1/2, 1)

    static Scheduler constant(double c = 1.0);
    static Scheduler power_decay(double c, double p);

    double rate(double t) const;  // c or c * (1 + t)^-p
    double phi1(double t) const;  // integral of rate over [0, t]
    double phi2(double t) const;  // integral of rate^2 over [0, t]

    void validate() const;  // throws std::invalid_argument
};

// --- Expected-suboptimality bounds on PL landscapes -------------------------

// Plain averaged SGD: s0 * exp(-2 mu t) + (1 - exp(-2 mu t)) * asymptote.
double dsgd_pl_bound(double t, const BoundParams& params);
double dsgd_pl_asymptote(const BoundParams& params);

// Compression drag factor Delta = 1 - eta L^2 mean_omega / (2 mu agents).
// Positive Delta contracts; Delta <= 0 means the compressed-gradient
// amplification overwhelms the curvature and no stationary level exists.
double dcsgd_delta(const BoundParams& params);

// Largest base learning rate with positive Delta: 2 mu N / (L^2 mean_omega).
// Infinite when every compressor is lossless.
double dcsgd_lr_threshold(const BoundParams& params);

// Unbiased-compression bound. Returns +infinity (the divergence-regime
// flag) when dcsgd_delta(params) <= 0.
double dcsgd_pl_bound(double t, const BoundParams& params);
double dcsgd_pl_asymptote(const BoundParams& params);

// Time at which the sign-descent deterministic phase ends when started at
// suboptimality s0: 2 * sqrt(s0 / mu).
double dsignsgd_descent_time(const BoundParams& params);

// Effective contraction rate multiplier for sign descent in the saturated
// (phase = 2) and linearized (phase = 3) regimes.
double dsignsgd_phase_delta(int phase, const BoundParams& params,
                            const PhaseConstants& constants);

// Sign-descent suboptimality bound for phase 1, 2 or 3, each clocked from
// its own phase start. Phase 1 is the descent parabola
// (sqrt(mu) t - 2 sqrt(s0))^2 / 4, clamped to zero past the descent time.
// Phases 2 and 3 contract at rate 2 mu Delta toward additive/(2 mu Delta).
// The phase-2 additive term eta (trace - mu d q_hat^2) / (2N) can be
// negative for tight saturation constants; it is used as-is and
// *negative_additive (when non-null) reports that condition.
double dsignsgd_phase_bound(double t, int phase, const BoundParams& params,
                            const PhaseConstants& constants,
                            bool* negative_additive = nullptr);
double dsignsgd_phase_asymptote(int phase, const BoundParams& params,
                                const PhaseConstants& constants,
                                bool* negative_additive = nullptr);

// --- Weighted-gradient certificates on general smooth landscapes ------------

enum class CertificateKind {
    DSGD,
    DCSGD,
    DSignSGDPhase1,  // bounds the l1 gradient norm
    DSignSGDPhase2,  // bounds a mix of squared-l2 and l1 gradient norms
    DSignSGDPhase3,
};

// A guarantee of the form
//   E[ quantity(X_t~) ] <= rhs,   t~ ~ weight(s) ds on [0, horizon],
// where quantity is the squared l2 gradient norm except for the sign-descent
// phases noted above. For phase 2 the left-hand side is
// ||grad||_2^2 + l1_coefficient * ||grad||_1 at independent weighted times.
struct Certificate {
    CertificateKind kind = CertificateKind::DSGD;
    double horizon = 0.0;
    double phi1 = 0.0;
    double phi2 = 0.0;
    double rhs = 0.0;
    double l1_coefficient = 0.0;  // nonzero only for DSignSGDPhase2
    std::string quantity;         // human-readable left-hand side
    Scheduler schedule;
    double tilt = 0.0;  // DCSGD weight tilt eta L mean_omega / (2 agents)

    // Normalized sampling density at time s in [0, horizon]:
    // rate(s)/phi1 for most kinds; DCSGD uses the tilted density
    // (rate - tilt rate^2) / (phi1 - tilt phi2).
    double weight(double s) const;
};

// Evaluates the certificate at the given horizon. nu and epsilon are only
// consulted by the sign-descent phases. Throws std::invalid_argument when a
// schedule violates the DCSGD step-size condition sup rate < 2N/(eta L
// mean_omega) or when inputs are inconsistent.
Certificate nonconvex_certificate(CertificateKind kind,
                                  const Scheduler& schedule, double horizon,
                                  const BoundParams& params,
                                  double nu = nu_infinity,
                                  double epsilon = 0.01);

// --- Hyperparameter scaling rules -------------------------------------------

// Joint rescaling (eta, B, N, omega) -> (kappa eta, delta B, alpha N,
// beta omega) measured against the unscaled configuration.
struct ScalingFactors {
    double kappa = 1.0;  // learning-rate factor
    double delta = 1.0;  // batch-size factor
    double alpha = 1.0;  // agent-count factor
    double beta = 1.0;   // compressor-variance factor
};

// Relative residual of a named invariance rule; zero means the rescaled run
// is predicted to reach the same stationary level as its reference.
//
//   "dsgd"                kappa / (alpha delta) = 1
//   "dsignsgd"            kappa / (alpha sqrt(delta)) = 1 (many-agent form)
//   "dsignsgd_general"    full finite-agent stationary-level match
//   "dcsgd_simplified"    kappa (1 + beta mean_omega) / (delta alpha) = 1,
//                         the negligible-drag form of the rule below
//   "dcsgd_general"       rescaled DCSGD matches *uncompressed* averaged SGD
//                         at the unit factors
//   "dcsgd_rule1".."dcsgd_rule6"
//                         dcsgd_general restricted to the six canonical
//                         pinnings (rule1: kappa=delta=1 solved for alpha,
//                         rule2: beta=delta=1, rule3: beta=kappa=1,
//                         rule4: alpha=delta=1, rule5: alpha=kappa=1,
//                         rule6: alpha=beta=1); throws when a pinned factor
//                         is not 1.
//
// Unknown identifiers throw std::invalid_argument.
double scaling_check(std::string_view rule, const ScalingFactors& factors,
                     const BoundParams& params, double nu = nu_infinity);

enum class AsymptoteKind { DSGD, DCSGD, DSignSGD };

// Stationary suboptimality level predicted for the rescaled configuration.
// DCSGD returns +infinity in the divergence regime. nu is only consulted by
// the sign-descent formula (linearized regime).
double predicted_asymptote(AsymptoteKind kind, const ScalingFactors& factors,
                           const BoundParams& params,
                           double nu = nu_infinity);

// --- Stationary moments on diagonal quadratics -------------------------------

struct StationaryMoments {
    std::vector<double> mean;      // per-coordinate E[X_t]
    std::vector<double> cov_diag;  // per-coordinate Var[X_t]
};

// Moments at time t (t may be +infinity) of the unbiased-compression SDE on
// the quadratic with Hessian diag(h_diag), rand-k compression with the given
// k, homogeneous per-coordinate gradient-noise variance sigma_sq, and
// deterministic start x0. Throws when the mean-reversion rate
// 2h (1 - eta h (d/k - 1) / (2 agents)) is not positive for some coordinate.
StationaryMoments dcsgd_stationary_moments(double t,
                                           std::span<const double> h_diag,
                                           int k, double sigma_sq, double eta,
                                           int agents,
                                           std::span<const double> x0);

// Moments at time t (t may be +infinity) of the sign-descent SDE on the
// quadratic with Hessian diag(h_diag). agent_scales[i] holds agent i's
// per-coordinate noise scales (all positive). The leading-order stationary
// variance is eta sigma / (2 N ell lambda sqrt(B)): linear in the noise
// scale, in contrast with the quadratic dependence above.
StationaryMoments dsignsgd_stationary_moments(
    double t, std::span<const double> h_diag,
    const std::vector<std::vector<double>>& agent_scales, double nu,
    double eta, int agents, int batch_size, std::span<const double> x0);

}  // namespace dsim
