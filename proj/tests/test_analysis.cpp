// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "dsim/analysis.hpp"
#include "dsim/compressor.hpp"
#include "dsim/landscape.hpp"
#include "dsim/noise.hpp"
#include "dsim/optimizer.hpp"
#include "dsim/special.hpp"
#include "doctest.h"

using dsim::AsymptoteKind;
using dsim::BoundParams;
using dsim::Certificate;
using dsim::CertificateKind;
using dsim::PhaseConstants;
using dsim::ScalingFactors;
using dsim::Scheduler;
using dsim::StationaryMoments;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Saturation-window constants for nu = infinity, epsilon = 0.01, solved
// independently with 40-digit arithmetic.
constexpr double kM = 0.19501509914228963;
constexpr double kQ2 = 0.57941762808867956;
constexpr double kEll = 0.79788456080286536;

// A 12-agent compressed cluster on an identity-Hessian landscape: mu = L = 1,
// rand-1-of-100 compressors (omega 49), unit noise trace per agent.
BoundParams compressed_params() {
    BoundParams p;
    p.mu = 1.0;
    p.smoothness = 1.0;
    p.hessian_trace = 100.0;
    p.dim = 100;
    p.eta = 0.01;
    p.batch_size = 1;
    p.agents = 12;
    p.s0 = 1.0;
    p.noise_traces.assign(12, 1.0);
    p.omegas.assign(12, 49.0);
    p.sigma_maxes.assign(12, 0.1);
    return p;
}

// The sign-descent reference cluster: d = 2 isotropic quadratic with h = 2,
// 12 agents, sigma = 0.1 everywhere, started at suboptimality 1/8.
BoundParams sign_params() {
    BoundParams p;
    p.mu = 2.0;
    p.smoothness = 2.0;
    p.hessian_trace = 4.0;
    p.dim = 2;
    p.eta = 0.001;
    p.batch_size = 1;
    p.agents = 12;
    p.s0 = 0.125;
    p.noise_traces.assign(12, 0.02);
    p.omegas.assign(12, 0.0);
    p.sigma_maxes.assign(12, 0.1);
    return p;
}

template <typename F>
double simpson(F f, double a, double b, int n) {
    const double h = (b - a) / n;
    double sum = f(a) + f(b);
    for (int i = 1; i < n; ++i) sum += f(a + h * i) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("bound parameter aggregates and validation") {
    BoundParams p;
    p.mu = 2.0;
    p.smoothness = 4.0;
    p.hessian_trace = 8.0;
    p.dim = 2;
    p.eta = 0.1;
    p.batch_size = 2;
    p.agents = 2;
    p.s0 = 1.0;
    p.noise_traces = {3.0, 5.0};
    p.omegas = {1.0, 3.0};
    p.sigma_maxes = {0.5, 0.25};
    p.validate();

    CHECK(p.mean_noise_trace() == 4.0);
    CHECK(p.mean_omega() == 2.0);
    CHECK(p.mean_omega_noise_trace() == 9.0);
    CHECK(p.sigma_harmonic_inverse(1) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(p.sigma_harmonic(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(p.sigma_harmonic_inverse(2) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK_THROWS_AS(p.sigma_harmonic_inverse(0), std::invalid_argument);

    BoundParams bad = p;
    bad.mu = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.noise_traces = {1.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.omegas = {1.0, -0.5};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.s0 = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.sigma_maxes = {0.5, 0.0};
    CHECK_THROWS_AS(bad.sigma_harmonic_inverse(1), std::invalid_argument);
}

TEST_CASE("bound parameters are extracted from a cluster configuration") {
    const dsim::Landscape lsc = dsim::Landscape::quadratic_diag({2.0, 1.0});
    dsim::ClusterConfig cfg;
    cfg.agents = 2;
    cfg.eta = 0.05;
    cfg.batch_size = 3;
    cfg.x0 = {1.0, -1.0};
    dsim::NoiseModel g;
    g.kind = dsim::NoiseKind::Gaussian;
    g.scale_diag = {0.3, 0.4};
    dsim::NoiseModel t;
    t.kind = dsim::NoiseKind::StudentT;
    t.scale_diag = {0.1, 0.2};
    t.nu = 5.0;
    cfg.noise = {g, t};
    dsim::Compressor rk;
    rk.kind = dsim::CompressorKind::RandK;
    rk.k = 1;
    cfg.compressors = {rk, dsim::Compressor{}};

    const BoundParams p = dsim::bound_params_from(lsc, cfg);
    CHECK(p.mu == 1.0);
    CHECK(p.smoothness == 2.0);
    CHECK(p.hessian_trace == 3.0);
    CHECK(p.dim == 2);
    CHECK(p.s0 == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(p.noise_traces[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(p.noise_traces[1] == doctest::Approx((5.0 / 3.0) * 0.05).epsilon(1e-14));
    CHECK(p.omegas == std::vector<double>{1.0, 0.0});
    CHECK(p.sigma_maxes == std::vector<double>{0.4, 0.2});

    // No certificates exist without curvature constants, with heavy-tailed
    // noise, or behind a biased compressor.
    const dsim::Landscape ros = dsim::Landscape::rosenbrock();
    dsim::ClusterConfig ros_cfg = cfg;
    ros_cfg.x0 = {1.0, 1.0};
    CHECK_THROWS_AS(dsim::bound_params_from(ros, ros_cfg), std::invalid_argument);

    dsim::ClusterConfig heavy = cfg;
    heavy.noise[1].nu = 2.0;
    CHECK_THROWS_AS(dsim::bound_params_from(lsc, heavy), std::invalid_argument);

    dsim::ClusterConfig biased = cfg;
    biased.compressors[0].kind = dsim::CompressorKind::TopK;
    CHECK_THROWS_AS(dsim::bound_params_from(lsc, biased), std::invalid_argument);

    dsim::ClusterConfig short_noise = cfg;
    short_noise.noise.pop_back();
    CHECK_THROWS_AS(dsim::bound_params_from(lsc, short_noise), std::invalid_argument);
}

TEST_CASE("scheduler closed forms match numerical integration") {
    const Scheduler c = Scheduler::constant(2.0);
    CHECK(c.rate(5.0) == 2.0);
    CHECK(c.phi1(3.0) == 6.0);
    CHECK(c.phi2(3.0) == 12.0);

    const Scheduler pd = Scheduler::power_decay(0.8, 0.75);
    CHECK(pd.rate(0.0) == 0.8);
    CHECK(pd.phi1(0.0) == 0.0);
    CHECK(pd.phi2(0.0) == 0.0);
    const double T = 37.5;
    const double phi1_num = simpson([&](double s) { return pd.rate(s); }, 0.0, T, 20000);
    const double phi2_num =
        simpson([&](double s) { return pd.rate(s) * pd.rate(s); }, 0.0, T, 20000);
    CHECK(pd.phi1(T) == doctest::Approx(phi1_num).epsilon(1e-9));
    CHECK(pd.phi2(T) == doctest::Approx(phi2_num).epsilon(1e-9));

    CHECK_THROWS_AS(Scheduler::constant(0.0), std::invalid_argument);
    CHECK_THROWS_AS(Scheduler::power_decay(1.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(Scheduler::power_decay(1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(Scheduler::power_decay(1.0, 0.4), std::invalid_argument);
    CHECK_THROWS_AS(c.rate(-0.1), std::invalid_argument);
}

TEST_CASE("plain averaged descent bound interpolates start and asymptote") {
    BoundParams p;
    p.mu = 1.0;
    p.smoothness = 2.0;
    p.hessian_trace = 2.0;
    p.dim = 1;
    p.eta = 0.2;
    p.batch_size = 1;
    p.agents = 1;
    p.s0 = 3.0;
    p.noise_traces = {1.0};
    p.omegas = {0.0};
    p.sigma_maxes = {1.0};

    CHECK(dsim::dsgd_pl_asymptote(p) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(dsim::dsgd_pl_bound(0.0, p) == 3.0);
    CHECK(dsim::dsgd_pl_bound(kInf, p) == doctest::Approx(0.1).epsilon(1e-15));
    // At t = ln(2) / (2 mu) the decay factor is exactly one half.
    const double t_half = std::log(2.0) / 2.0;
    CHECK(dsim::dsgd_pl_bound(t_half, p) == doctest::Approx(1.55).epsilon(1e-14));
    CHECK_THROWS_AS(dsim::dsgd_pl_bound(-1.0, p), std::invalid_argument);

    // Larger cluster or batch divides the asymptote linearly.
    BoundParams scaled = p;
    scaled.agents = 4;
    scaled.noise_traces.assign(4, 1.0);
    scaled.omegas.assign(4, 0.0);
    scaled.sigma_maxes.assign(4, 1.0);
    CHECK(dsim::dsgd_pl_asymptote(scaled) == doctest::Approx(0.025).epsilon(1e-15));
}

TEST_CASE("compressed descent drag, threshold, and asymptote") {
    const BoundParams p = compressed_params();
    CHECK(dsim::dcsgd_delta(p) == doctest::Approx(2351.0 / 2400.0).epsilon(1e-15));
    CHECK(dsim::dcsgd_lr_threshold(p) == doctest::Approx(24.0 / 49.0).epsilon(1e-15));
    CHECK(dsim::dcsgd_pl_asymptote(p) == doctest::Approx(25.0 / 2351.0).epsilon(1e-13));
    CHECK(dsim::dcsgd_pl_bound(0.0, p) == 1.0);
    CHECK(dsim::dcsgd_pl_bound(kInf, p) ==
          doctest::Approx(25.0 / 2351.0).epsilon(1e-13));

    // Compression can only hurt: the compressed asymptote dominates the
    // uncompressed one at identical parameters.
    CHECK(dsim::dcsgd_pl_asymptote(p) > dsim::dsgd_pl_asymptote(p));

    // Past the learning-rate threshold the drag factor flips sign and the
    // stationary level ceases to exist.
    BoundParams hot = p;
    hot.eta = 0.6;
    CHECK(dsim::dcsgd_delta(hot) < 0.0);
    CHECK(dsim::dcsgd_pl_asymptote(hot) == kInf);
    CHECK(dsim::dcsgd_pl_bound(1.0, hot) == kInf);

    // Lossless compressors reduce every formula to the plain one.
    BoundParams lossless = p;
    lossless.omegas.assign(12, 0.0);
    CHECK(dsim::dcsgd_delta(lossless) == 1.0);
    CHECK(dsim::dcsgd_lr_threshold(lossless) == kInf);
    CHECK(dsim::dcsgd_pl_asymptote(lossless) == dsim::dsgd_pl_asymptote(lossless));
}

TEST_CASE("sign-descent timing and phase contraction factors") {
    const BoundParams p = sign_params();
    CHECK(dsim::dsignsgd_descent_time(p) == 0.5);

    const PhaseConstants pc = dsim::phase_constants(dsim::nu_infinity, 0.01);
    // Hand-reduced at these parameters: Delta_2 = 10 m + m^2 / 120 and
    // Delta_3 = 10 ell + ell^2 / 120.
    const double d2 = dsim::dsignsgd_phase_delta(2, p, pc);
    const double d3 = dsim::dsignsgd_phase_delta(3, p, pc);
    CHECK(d2 == doctest::Approx(10.0 * kM + kM * kM / 120.0).epsilon(1e-8));
    CHECK(d3 == doctest::Approx(10.0 * kEll + kEll * kEll / 120.0).epsilon(1e-8));
    CHECK(d3 > d2);  // the tangent slope beats the chord slope
    CHECK_THROWS_AS(dsim::dsignsgd_phase_delta(1, p, pc), std::invalid_argument);
}

TEST_CASE("sign-descent phase bounds") {
    const BoundParams p = sign_params();
    const PhaseConstants pc = dsim::phase_constants(dsim::nu_infinity, 0.01);

    // Phase 1 is the descent parabola, hitting zero at the descent time.
    CHECK(dsim::dsignsgd_phase_bound(0.0, 1, p, pc) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(dsim::dsignsgd_phase_bound(0.25, 1, p, pc) ==
          doctest::Approx(0.03125).epsilon(1e-12));
    CHECK(dsim::dsignsgd_phase_bound(0.5, 1, p, pc) == 0.0);
    CHECK(dsim::dsignsgd_phase_bound(2.0, 1, p, pc) == 0.0);
    CHECK(dsim::dsignsgd_phase_asymptote(1, p, pc) == 0.0);

    // Phase 3 asymptote: eta Tr / (4 mu N Delta_3).
    const double d3 = 10.0 * kEll + kEll * kEll / 120.0;
    const double want3 = 0.001 * 4.0 / (2.0 * 12.0) / (2.0 * 2.0 * d3);
    bool negative = true;
    CHECK(dsim::dsignsgd_phase_asymptote(3, p, pc, &negative) ==
          doctest::Approx(want3).epsilon(1e-8));
    CHECK_FALSE(negative);
    CHECK(want3 == doctest::Approx(5.2187e-6).epsilon(1e-3));

    // The bound interpolates s0 and the asymptote.
    CHECK(dsim::dsignsgd_phase_bound(0.0, 3, p, pc) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(dsim::dsignsgd_phase_bound(kInf, 3, p, pc) ==
          doctest::Approx(want3).epsilon(1e-8));
    const double mid = dsim::dsignsgd_phase_bound(0.05, 3, p, pc);
    CHECK(mid < 0.125);
    CHECK(mid > want3);

    CHECK_THROWS_AS(dsim::dsignsgd_phase_bound(1.0, 4, p, pc), std::invalid_argument);
    CHECK_THROWS_AS(dsim::dsignsgd_phase_bound(-1.0, 3, p, pc), std::invalid_argument);
}

TEST_CASE("tight saturation constants can turn the phase-2 forcing negative") {
    BoundParams p = sign_params();
    p.dim = 50;
    p.hessian_trace = 1.0;  // far below mu * d * q_hat^2 = 100 q_hat^2
    const PhaseConstants pc = dsim::phase_constants(dsim::nu_infinity, 0.01);

    bool negative = false;
    const double asym2 = dsim::dsignsgd_phase_asymptote(2, p, pc, &negative);
    CHECK(negative);
    CHECK(asym2 < 0.0);

    // Phase 3 has no saturation correction, so the same parameters keep a
    // positive forcing term.
    negative = true;
    const double asym3 = dsim::dsignsgd_phase_asymptote(3, p, pc, &negative);
    CHECK_FALSE(negative);
    CHECK(asym3 > 0.0);
}

TEST_CASE("plain certificate splits into an optimality and a noise term") {
    BoundParams p;
    p.mu = 2.0;
    p.smoothness = 4.0;
    p.hessian_trace = 8.0;
    p.dim = 2;
    p.eta = 0.1;
    p.batch_size = 2;
    p.agents = 2;
    p.s0 = 1.0;
    p.noise_traces = {3.0, 5.0};
    p.omegas = {0.0, 0.0};
    p.sigma_maxes = {0.5, 0.25};

    const Certificate cert = dsim::nonconvex_certificate(
        CertificateKind::DSGD, Scheduler::constant(1.0), 10.0, p);
    CHECK(cert.rhs == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(cert.quantity == "rate-weighted squared l2 gradient norm");
    CHECK(cert.tilt == 0.0);
    CHECK(cert.l1_coefficient == 0.0);
    CHECK(cert.phi1 == doctest::Approx(10.0).epsilon(1e-15));
    // Constant schedules sample uniformly.
    CHECK(cert.weight(0.0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(cert.weight(7.3) == doctest::Approx(0.1).epsilon(1e-15));

    CHECK_THROWS_AS(
        dsim::nonconvex_certificate(CertificateKind::DSGD, Scheduler::constant(1.0), 0.0, p),
        std::invalid_argument);
    CHECK_THROWS_AS(
        dsim::nonconvex_certificate(CertificateKind::DSGD, Scheduler::constant(1.0), kInf, p),
        std::invalid_argument);
}

TEST_CASE("compressed certificate enforces the step-size ceiling") {
    const BoundParams p = compressed_params();

    // tilt = eta L mean_omega / (2N) = 49/2400; rates above its reciprocal
    // would tilt some weights negative.
    CHECK_NOTHROW(dsim::nonconvex_certificate(CertificateKind::DCSGD,
                                              Scheduler::constant(1.0), 10.0, p));
    CHECK_THROWS_AS(dsim::nonconvex_certificate(CertificateKind::DCSGD,
                                                Scheduler::constant(49.0), 10.0, p),
                    std::invalid_argument);

    // With lossless compressors the tilt vanishes and the compressed
    // certificate coincides with the plain one.
    BoundParams lossless = p;
    lossless.omegas.assign(12, 0.0);
    const Certificate a = dsim::nonconvex_certificate(CertificateKind::DCSGD,
                                                      Scheduler::constant(1.0), 10.0, lossless);
    const Certificate b = dsim::nonconvex_certificate(CertificateKind::DSGD,
                                                      Scheduler::constant(1.0), 10.0, lossless);
    CHECK(a.rhs == b.rhs);
    CHECK(a.tilt == 0.0);

    // The tilted sampling density still integrates to one.
    const Certificate tilted = dsim::nonconvex_certificate(
        CertificateKind::DCSGD, Scheduler::power_decay(2.0, 0.8), 25.0, p);
    CHECK(tilted.tilt == doctest::Approx(49.0 / 2400.0).epsilon(1e-15));
    const double mass =
        simpson([&](double s) { return tilted.weight(s); }, 0.0, 25.0, 20000);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("sign-descent certificates carry the saturation geometry") {
    const BoundParams p = sign_params();
    const double T = 10.0;
    const Scheduler sched = Scheduler::constant(1.0);

    const Certificate c1 =
        dsim::nonconvex_certificate(CertificateKind::DSignSGDPhase1, sched, T, p);
    CHECK(c1.rhs == doctest::Approx(0.125 / T).epsilon(1e-14));
    CHECK(c1.quantity == "rate-weighted l1 gradient norm");

    const Certificate c2 =
        dsim::nonconvex_certificate(CertificateKind::DSignSGDPhase2, sched, T, p);
    const Certificate c3 =
        dsim::nonconvex_certificate(CertificateKind::DSignSGDPhase3, sched, T, p);

    // rhs = harmonic * (s0 + eta L d phi2 / (2N)) / (phi1 slope sqrt(B)).
    const double forcing = 0.125 + 0.001 * 2.0 * 2.0 * T / 24.0;
    CHECK(c2.rhs == doctest::Approx(0.1 * forcing / (T * kM)).epsilon(1e-8));
    CHECK(c3.rhs == doctest::Approx(0.1 * forcing / (T * kEll)).epsilon(1e-8));
    CHECK(c3.rhs < c2.rhs);

    // Only the saturated phase pays an l1 penalty: q_hat harmonic / (m sqrt B).
    CHECK(c2.l1_coefficient == doctest::Approx(kQ2 * 0.1 / kM).epsilon(1e-8));
    CHECK(c3.l1_coefficient == 0.0);
    CHECK(c2.quantity == "rate-weighted squared l2 plus scaled l1 gradient norm");

    // A looser saturation window (larger epsilon) steepens the chord and
    // tightens the phase-2 certificate.
    const Certificate c2_loose = dsim::nonconvex_certificate(
        CertificateKind::DSignSGDPhase2, sched, T, p, dsim::nu_infinity, 0.05);
    CHECK(c2_loose.rhs < c2.rhs);
}

TEST_CASE("simple scaling rules are closed-form residuals") {
    const BoundParams p = compressed_params();

    CHECK(dsim::scaling_check("dsgd", {4.0, 2.0, 2.0, 1.0}, p) ==
          doctest::Approx(0.0).epsilon(1e-15));
    CHECK(dsim::scaling_check("dsgd", {3.0, 1.0, 2.0, 1.0}, p) ==
          doctest::Approx(0.5).epsilon(1e-14));

    CHECK(dsim::scaling_check("dsignsgd", {2.0, 4.0, 1.0, 1.0}, p) ==
          doctest::Approx(0.0).epsilon(1e-15));
    CHECK(dsim::scaling_check("dsignsgd", {2.0, 4.0, 0.5, 1.0}, p) ==
          doctest::Approx(1.0).epsilon(1e-14));

    // kappa (1 + beta mean_omega) / (delta alpha): mean_omega = 49.
    CHECK(dsim::scaling_check("dcsgd_simplified", {1.0, 50.0, 1.0, 1.0}, p) ==
          doctest::Approx(0.0).epsilon(1e-14));

    CHECK_THROWS_AS(dsim::scaling_check("nonsense", {1.0, 1.0, 1.0, 1.0}, p),
                    std::invalid_argument);
    CHECK_THROWS_AS(dsim::scaling_check("dsgd", {0.0, 1.0, 1.0, 1.0}, p),
                    std::invalid_argument);
    CHECK_THROWS_AS(dsim::scaling_check("dsgd", {1.0, 1.0, 1.0, -1.0}, p),
                    std::invalid_argument);
}

TEST_CASE("canonical compressed pinnings reject off-pin factors") {
    const BoundParams p = compressed_params();
    CHECK_THROWS_AS(dsim::scaling_check("dcsgd_rule1", {1.5, 1.0, 2.0, 1.0}, p),
                    std::invalid_argument);
    CHECK_THROWS_AS(dsim::scaling_check("dcsgd_rule4", {1.0, 2.0, 1.0, 1.0}, p),
                    std::invalid_argument);
    CHECK_THROWS_AS(dsim::scaling_check("dcsgd_rule6", {1.0, 1.0, 1.0, 0.5}, p),
                    std::invalid_argument);

    // rule1 pins kappa = delta = 1 and solves for the agent factor:
    // alpha* = (A + W + A G) / A.
    const double a = p.mean_noise_trace();
    const double w = p.mean_omega_noise_trace();
    const double g = p.mean_omega() * p.eta * p.smoothness * p.smoothness /
                     (2.0 * p.mu * p.agents);
    const double alpha_star = (a + w + a * g) / a;
    CHECK(dsim::scaling_check("dcsgd_rule1", {1.0, 1.0, alpha_star, 1.0}, p) <
          1e-12);
}

TEST_CASE("zero compressed residual predicts the uncompressed level") {
    // The master rule declares a rescaled compressed run equivalent to the
    // unit-factor *uncompressed* one. Solving it for alpha and checking the
    // two predicted stationary levels ties the residual and the asymptote
    // formulas together over a parameter sweep.
    std::mt19937_64 gen(20260816);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto pick = [&](double lo, double hi) { return lo + (hi - lo) * unit(gen); };

    int tested = 0;
    for (int trial = 0; trial < 200 && tested < 100; ++trial) {
        BoundParams p;
        p.agents = 1 + static_cast<int>(pick(1.0, 12.0));
        p.mu = pick(0.5, 2.0);
        p.smoothness = p.mu * pick(1.0, 2.0);
        p.hessian_trace = pick(1.0, 10.0);
        p.dim = 16;
        p.eta = pick(0.0005, 0.02);
        p.batch_size = 1 + static_cast<int>(pick(0.0, 7.0));
        p.s0 = pick(0.0, 4.0);
        for (int i = 0; i < p.agents; ++i) {
            p.noise_traces.push_back(pick(0.1, 5.0));
            p.omegas.push_back(pick(0.0, 60.0));
            p.sigma_maxes.push_back(pick(0.05, 0.5));
        }

        ScalingFactors f;
        f.kappa = pick(0.25, 4.0);
        f.delta = pick(0.25, 4.0);
        f.beta = pick(0.0, 2.0);
        const double a = p.mean_noise_trace();
        const double w = p.mean_omega_noise_trace();
        const double g = p.mean_omega() * p.eta * p.smoothness * p.smoothness /
                         (2.0 * p.mu * p.agents);
        f.alpha = f.kappa * (a + f.beta * w + a * f.delta * f.beta * g) / (a * f.delta);

        // Skip draws whose drag is too close to the divergence edge for the
        // ratio comparison to be well conditioned.
        const double drag = 1.0 - f.kappa * p.eta * p.smoothness * p.smoothness *
                                      f.beta * p.mean_omega() /
                                      (2.0 * p.mu * f.alpha * p.agents);
        if (drag < 0.05) continue;
        ++tested;

        CHECK(dsim::scaling_check("dcsgd_general", f, p) < 1e-12);
        const double scaled = dsim::predicted_asymptote(AsymptoteKind::DCSGD, f, p);
        const double reference =
            dsim::predicted_asymptote(AsymptoteKind::DSGD, ScalingFactors{}, p);
        CHECK(scaled / reference == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(tested >= 80);
}

TEST_CASE("zero sign-descent residual predicts an unchanged level") {
    std::mt19937_64 gen(816);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto pick = [&](double lo, double hi) { return lo + (hi - lo) * unit(gen); };
    const double nus[] = {1.0, 3.0, dsim::nu_infinity};

    for (int trial = 0; trial < 50; ++trial) {
        BoundParams p;
        p.agents = 1 + static_cast<int>(pick(1.0, 16.0));
        p.mu = pick(0.5, 4.0);
        p.smoothness = p.mu * pick(1.0, 2.0);
        p.hessian_trace = pick(1.0, 10.0);
        p.dim = 8;
        p.eta = pick(0.0001, 0.05);
        p.batch_size = 1 + static_cast<int>(pick(0.0, 7.0));
        p.s0 = 1.0;
        for (int i = 0; i < p.agents; ++i) {
            p.noise_traces.push_back(pick(0.1, 2.0));
            p.omegas.push_back(0.0);
            p.sigma_maxes.push_back(pick(0.05, 0.5));
        }
        const double nu = nus[trial % 3];

        ScalingFactors f;
        f.delta = pick(0.25, 4.0);
        f.alpha = pick(0.25, 4.0);
        // kappa solving (kappa/alpha)(K1+K2) = sqrt(delta) K1 + (kappa
        // delta/alpha) K2 in closed form.
        const double ell = dsim::ell_nu(nu);
        const double b = static_cast<double>(p.batch_size);
        const double k1 = ell * std::sqrt(b) * p.sigma_harmonic_inverse(1);
        const double k2 = p.eta * ell * ell * b * p.mu * p.sigma_harmonic_inverse(2) /
                          (2.0 * p.agents);
        f.kappa = f.alpha * std::sqrt(f.delta) * k1 / (k1 + k2 - f.delta * k2);
        REQUIRE(f.kappa > 0.0);

        CHECK(dsim::scaling_check("dsignsgd_general", f, p, nu) < 1e-10);
        const double scaled = dsim::predicted_asymptote(AsymptoteKind::DSignSGD, f, p, nu);
        const double reference =
            dsim::predicted_asymptote(AsymptoteKind::DSignSGD, ScalingFactors{}, p, nu);
        CHECK(scaled / reference == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("unit-factor predictions coincide with the direct asymptotes") {
    const BoundParams p = compressed_params();
    const ScalingFactors unit;
    CHECK(dsim::predicted_asymptote(AsymptoteKind::DSGD, unit, p) ==
          doctest::Approx(dsim::dsgd_pl_asymptote(p)).epsilon(1e-15));
    CHECK(dsim::predicted_asymptote(AsymptoteKind::DCSGD, unit, p) ==
          doctest::Approx(dsim::dcsgd_pl_asymptote(p)).epsilon(1e-15));

    const BoundParams s = sign_params();
    const PhaseConstants pc = dsim::phase_constants(dsim::nu_infinity, 0.01);
    CHECK(dsim::predicted_asymptote(AsymptoteKind::DSignSGD, unit, s) ==
          doctest::Approx(dsim::dsignsgd_phase_asymptote(3, s, pc)).epsilon(1e-12));

    // The compressed prediction flips to infinity in the divergence regime.
    ScalingFactors hot;
    hot.kappa = 60.0;
    CHECK(dsim::predicted_asymptote(AsymptoteKind::DCSGD, hot, p) == kInf);
}

TEST_CASE("compressed stationary moments match the integrated dynamics") {
    // Reference values from fourth-order integration of the moment equations:
    // d = 10 quadratic with h = (2, 1, ..., 1), 1-of-3 sparsification,
    // sigma^2 = 0.01, eta = 0.01, one agent.
    std::vector<double> h(10, 1.0);
    h[0] = 2.0;
    const std::vector<double> zeros(10, 0.0);

    const StationaryMoments at5 =
        dsim::dcsgd_stationary_moments(5.0, h, 3, 0.01, 0.01, 1, zeros);
    CHECK(at5.mean[0] == 0.0);
    CHECK(at5.cov_diag[0] == doctest::Approx(8.5324231801462653e-05).epsilon(1e-9));
    CHECK(at5.cov_diag[1] == doctest::Approx(0.0001686254607193345).epsilon(1e-9));

    const StationaryMoments at200 =
        dsim::dcsgd_stationary_moments(200.0, h, 3, 0.01, 0.01, 1, zeros);
    CHECK(at200.cov_diag[0] == doctest::Approx(8.5324232081909515e-05).epsilon(1e-9));
    CHECK(at200.cov_diag[1] == doctest::Approx(0.00016863406408093749).epsilon(1e-9));

    // t = infinity lands exactly on the stationary level.
    const StationaryMoments limit =
        dsim::dcsgd_stationary_moments(kInf, h, 3, 0.01, 0.01, 1, zeros);
    const double rate0 = 2.0 * 2.0 * (1.0 - 0.01 * 2.0 * (10.0 / 3.0 - 1.0) / 2.0);
    CHECK(limit.cov_diag[0] ==
          doctest::Approx(0.01 * (10.0 / 3.0) * 0.01 / rate0).epsilon(1e-13));
    CHECK(at200.cov_diag[0] == doctest::Approx(limit.cov_diag[0]).epsilon(1e-9));

    // Transient from x0 = 0.7 on the stiff coordinate.
    std::vector<double> x0 = zeros;
    x0[0] = 0.7;
    const StationaryMoments mid =
        dsim::dcsgd_stationary_moments(1.5, h, 3, 0.01, 0.01, 1, x0);
    CHECK(mid.mean[0] == doctest::Approx(0.034850947857504908).epsilon(1e-12));
    CHECK(mid.cov_diag[0] == doctest::Approx(0.00026760178985070921).epsilon(1e-9));

    // At t = 0 the start is deterministic.
    const StationaryMoments start =
        dsim::dcsgd_stationary_moments(0.0, h, 3, 0.01, 0.01, 1, x0);
    CHECK(start.mean[0] == 0.7);
    CHECK(start.cov_diag[0] == 0.0);

    // Keeping every coordinate removes the sparsification inflation.
    const StationaryMoments keep_all =
        dsim::dcsgd_stationary_moments(kInf, h, 10, 0.01, 0.01, 1, zeros);
    CHECK(keep_all.cov_diag[1] < limit.cov_diag[1]);
}

TEST_CASE("compressed stationary moments validate and flag lost reversion") {
    const std::vector<double> h = {2.0, 2.0};
    const std::vector<double> x0 = {0.0, 0.0};
    CHECK_THROWS_AS(dsim::dcsgd_stationary_moments(1.0, h, 0, 0.01, 0.01, 1, x0),
                    std::invalid_argument);
    CHECK_THROWS_AS(dsim::dcsgd_stationary_moments(1.0, h, 3, 0.01, 0.01, 1, x0),
                    std::invalid_argument);
    CHECK_THROWS_AS(dsim::dcsgd_stationary_moments(-1.0, h, 1, 0.01, 0.01, 1, x0),
                    std::invalid_argument);
    CHECK_THROWS_AS(dsim::dcsgd_stationary_moments(1.0, h, 1, 0.01, 0.01, 1,
                                                   std::vector<double>{0.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(dsim::dcsgd_stationary_moments(1.0, std::vector<double>{2.0, -1.0},
                                                   1, 0.01, 0.01, 1, x0),
                    std::invalid_argument);
    // eta h (d/k - 1) / (2N) = 1 wipes out the mean reversion entirely.
    CHECK_THROWS_AS(dsim::dcsgd_stationary_moments(1.0, h, 1, 0.01, 1.0, 1, x0),
                    std::runtime_error);
}

TEST_CASE("sign-descent stationary moments match the integrated dynamics") {
    // Reference values from the same integrator: sigma = 0.1, eta = 0.001,
    // one agent, B = 1, Gaussian signs.
    const std::vector<double> h = {2.0, 1.0};
    const std::vector<std::vector<double>> scales = {{0.1, 0.1}};
    const std::vector<double> zeros = {0.0, 0.0};
    const StationaryMoments limit = dsim::dsignsgd_stationary_moments(
        kInf, h, scales, dsim::nu_infinity, 0.001, 1, 1, zeros);
    CHECK(limit.mean[0] == 0.0);
    CHECK(limit.cov_diag[0] == doctest::Approx(3.1084832354777187e-05).epsilon(1e-9));
    CHECK(limit.cov_diag[1] == doctest::Approx(6.2416700258412352e-05).epsilon(1e-9));

    // Heterogeneous transient: two agents, B = 4, x0 = 0.05, t = 2.
    const StationaryMoments mid = dsim::dsignsgd_stationary_moments(
        2.0, std::vector<double>{1.0}, {{0.1}, {0.2}}, dsim::nu_infinity, 0.001, 2, 4,
        std::vector<double>{0.05});
    CHECK(mid.mean[0] == doctest::Approx(2.0112411484361178e-12).epsilon(1e-9));
    CHECK(mid.cov_diag[0] == doctest::Approx(2.0819354615188608e-05).epsilon(1e-9));

    // Leading order the level is linear in sigma (the compressed one above
    // is quadratic): doubling the scale doubles the variance.
    const double lo = dsim::dsignsgd_stationary_moments(kInf, std::vector<double>{1.0},
                                                        {{0.1}}, dsim::nu_infinity, 1e-5, 1,
                                                        1, std::vector<double>{0.0})
                          .cov_diag[0];
    const double hi = dsim::dsignsgd_stationary_moments(kInf, std::vector<double>{1.0},
                                                        {{0.2}}, dsim::nu_infinity, 1e-5, 1,
                                                        1, std::vector<double>{0.0})
                          .cov_diag[0];
    CHECK(hi / lo == doctest::Approx(2.0).epsilon(1e-3));

    CHECK_THROWS_AS(dsim::dsignsgd_stationary_moments(1.0, h, {{0.1, 0.1}, {0.1, 0.1}},
                                                      dsim::nu_infinity, 0.001, 1, 1, zeros),
                    std::invalid_argument);
    CHECK_THROWS_AS(dsim::dsignsgd_stationary_moments(1.0, h, {{0.1}}, dsim::nu_infinity,
                                                      0.001, 1, 1, zeros),
                    std::invalid_argument);
    CHECK_THROWS_AS(dsim::dsignsgd_stationary_moments(1.0, h, {{0.1, 0.0}},
                                                      dsim::nu_infinity, 0.001, 1, 1, zeros),
                    std::invalid_argument);
    CHECK_THROWS_AS(dsim::dsignsgd_stationary_moments(1.0, h, scales, dsim::nu_infinity,
                                                      0.001, 1, 0, zeros),
                    std::invalid_argument);
}

}  // TEST_SUITE("analysis")
