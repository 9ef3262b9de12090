// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dsim/landscape.hpp"
#include "dsim/optimizer.hpp"
#include "doctest.h"

using dsim::Algorithm;
using dsim::ClusterConfig;
using dsim::Compressor;
using dsim::CompressorKind;
using dsim::Landscape;
using dsim::NoiseKind;
using dsim::NoiseModel;
using dsim::Trajectory;

namespace {

NoiseModel gaussian(std::vector<double> scales) {
    NoiseModel m;
    m.kind = NoiseKind::Gaussian;
    m.scale_diag = std::move(scales);
    return m;
}

ClusterConfig base_config(int agents, int dim, double eta,
                          std::int64_t steps) {
    ClusterConfig cfg;
    cfg.agents = agents;
    cfg.eta = eta;
    cfg.steps = steps;
    cfg.x0.assign(static_cast<std::size_t>(dim), 1.0);
    cfg.noise.assign(static_cast<std::size_t>(agents), NoiseModel{});
    return cfg;
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("noise-free descent follows the exact dyadic contraction") {
    // h = 1, eta = 0.25: x_k = 0.75^k and every value is exactly
    // representable, so the comparison is bitwise.
    const Landscape l = Landscape::quadratic_diag({1.0});
    ClusterConfig cfg = base_config(1, 1, 0.25, 10);
    cfg.record_points = true;
    const Trajectory t = dsim::run_trajectory(Algorithm::DSGD, l, cfg, 1, 0);

    REQUIRE(t.recorded_steps.size() == 11);
    CHECK_FALSE(t.diverged_at.has_value());
    double x = 1.0;
    for (std::size_t i = 0; i < t.recorded_steps.size(); ++i) {
        CHECK(t.points[i][0] == x);
        CHECK(t.loss[i] == 0.5 * x * x);
        CHECK(t.loss_gap[i] == 0.5 * x * x);
        CHECK(t.grad_l1[i] == x);
        CHECK(t.grad_l2sq[i] == x * x);
        x *= 0.75;
    }
}

TEST_CASE("agents with identical deterministic gradients average to plain GD") {
    const Landscape l = Landscape::quadratic_diag({2.0, 0.5});
    ClusterConfig solo = base_config(1, 2, 0.1, 25);
    ClusterConfig crowd = base_config(8, 2, 0.1, 25);
    crowd.record_points = true;
    solo.record_points = true;
    const Trajectory a = dsim::run_trajectory(Algorithm::DSGD, l, solo, 3, 0);
    const Trajectory b = dsim::run_trajectory(Algorithm::DSGD, l, crowd, 3, 0);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i][0] == doctest::Approx(b.points[i][0]).epsilon(1e-15));
        CHECK(a.points[i][1] == doctest::Approx(b.points[i][1]).epsilon(1e-15));
    }
}

TEST_CASE("trajectories are a pure function of seed and path") {
    const Landscape l = Landscape::quadratic_diag({1.0, 1.0});
    ClusterConfig cfg = base_config(3, 2, 0.05, 40);
    cfg.noise.assign(3, gaussian({0.2, 0.2}));
    cfg.record_points = true;
    const Trajectory a = dsim::run_trajectory(Algorithm::DSGD, l, cfg, 77, 5);
    const Trajectory b = dsim::run_trajectory(Algorithm::DSGD, l, cfg, 77, 5);
    CHECK(a.points == b.points);
    CHECK(a.loss == b.loss);

    const Trajectory c = dsim::run_trajectory(Algorithm::DSGD, l, cfg, 77, 6);
    CHECK(a.loss != c.loss);
    const Trajectory d = dsim::run_trajectory(Algorithm::DSGD, l, cfg, 78, 5);
    CHECK(a.loss != d.loss);
}

TEST_CASE("identity-compressed descent reproduces the plain one bitwise") {
    const Landscape l = Landscape::quadratic_diag({1.5, 0.75});
    ClusterConfig plain = base_config(4, 2, 0.1, 30);
    plain.noise.assign(4, gaussian({0.3, 0.3}));
    plain.record_points = true;

    ClusterConfig compressed = plain;
    compressed.compressors.assign(4, Compressor{CompressorKind::Identity, 0});

    const Trajectory a =
        dsim::run_trajectory(Algorithm::DSGD, l, plain, 11, 2);
    const Trajectory b =
        dsim::run_trajectory(Algorithm::DCSGD, l, compressed, 11, 2);
    CHECK(a.points == b.points);
    CHECK(a.loss == b.loss);
}

TEST_CASE("top-k with k = d reproduces the plain path bitwise") {
    const Landscape l = Landscape::quadratic_diag({1.0, 2.0, 0.5});
    ClusterConfig plain = base_config(2, 3, 0.05, 20);
    plain.noise.assign(2, gaussian({0.1, 0.1, 0.1}));
    plain.record_points = true;

    ClusterConfig topk = plain;
    topk.compressors.assign(2, Compressor{CompressorKind::TopK, 3});

    const Trajectory a = dsim::run_trajectory(Algorithm::DSGD, l, plain, 5, 9);
    const Trajectory b =
        dsim::run_trajectory(Algorithm::TopKSGD, l, topk, 5, 9);
    CHECK(a.points == b.points);
}

TEST_CASE("sign descent moves every coordinate by at most eta") {
    const Landscape l = Landscape::quadratic_diag({2.0, 1.0});
    ClusterConfig cfg = base_config(5, 2, 0.01, 200);
    cfg.noise.assign(5, gaussian({0.1, 0.1}));
    cfg.record_points = true;
    cfg.stride = 1;
    const Trajectory t =
        dsim::run_trajectory(Algorithm::DSignSGD, l, cfg, 21, 0);
    for (std::size_t i = 1; i < t.points.size(); ++i) {
        for (int j = 0; j < 2; ++j) {
            const double move = std::abs(t.points[i][j] - t.points[i - 1][j]);
            CHECK(move <= cfg.eta + 1e-15);
        }
    }
}

TEST_CASE("sign of a zero gradient is zero, so the origin is a fixed point") {
    const Landscape l = Landscape::quadratic_diag({1.0, 1.0});
    ClusterConfig cfg = base_config(2, 2, 0.1, 10);
    cfg.x0 = {0.0, 0.0};
    cfg.record_points = true;
    const Trajectory t =
        dsim::run_trajectory(Algorithm::DSignSGD, l, cfg, 1, 0);
    for (const std::vector<double>& p : t.points) {
        CHECK(p[0] == 0.0);
        CHECK(p[1] == 0.0);
    }
}

TEST_CASE("noise-free sign descent steps at full rate toward the optimum") {
    const Landscape l = Landscape::quadratic_diag({1.0});
    ClusterConfig cfg = base_config(3, 1, 0.25, 3);
    cfg.record_points = true;
    const Trajectory t =
        dsim::run_trajectory(Algorithm::DSignSGD, l, cfg, 2, 0);
    // x: 1 -> 0.75 -> 0.5 -> 0.25; all agents agree on the sign.
    CHECK(t.points[0][0] == 1.0);
    CHECK(t.points[1][0] == 0.75);
    CHECK(t.points[2][0] == 0.5);
    CHECK(t.points[3][0] == 0.25);
}

TEST_CASE("divergence ceiling halts and flags the path") {
    const Landscape l = Landscape::quadratic_diag({1.0});
    // eta = 3 on h = 1 gives |1 - eta h| = 2: the gap doubles each step.
    ClusterConfig cfg = base_config(1, 1, 3.0, 100);
    cfg.divergence_ceiling = 1e6;
    cfg.stride = 1;
    const Trajectory t = dsim::run_trajectory(Algorithm::DSGD, l, cfg, 1, 0);
    REQUIRE(t.diverged_at.has_value());
    CHECK(*t.diverged_at > 0);
    CHECK(*t.diverged_at < 100);
    // Recording stops at the divergence step.
    CHECK(t.recorded_steps.back() <= *t.diverged_at);

    ClusterConfig keep_going = cfg;
    keep_going.halt_on_divergence = false;
    const Trajectory u =
        dsim::run_trajectory(Algorithm::DSGD, l, keep_going, 1, 0);
    REQUIRE(u.diverged_at.has_value());
    CHECK(u.recorded_steps.back() == 100);
    CHECK(*u.diverged_at == *t.diverged_at);
}

TEST_CASE("recording schedule covers start, stride hits, and the end") {
    const Landscape l = Landscape::quadratic_diag({1.0});
    ClusterConfig cfg = base_config(1, 1, 0.01, 10);
    cfg.stride = 3;
    const Trajectory t = dsim::run_trajectory(Algorithm::DSGD, l, cfg, 1, 0);
    CHECK(t.recorded_steps == std::vector<std::int64_t>{0, 3, 6, 9, 10});
}

TEST_CASE("validation rejects inconsistent cluster configurations") {
    const Landscape l = Landscape::quadratic_diag({1.0, 1.0});

    ClusterConfig cfg = base_config(2, 2, 0.1, 10);
    CHECK_NOTHROW(cfg.validate(l, Algorithm::DSGD));

    ClusterConfig bad = cfg;
    bad.agents = 0;
    CHECK_THROWS_AS(bad.validate(l, Algorithm::DSGD), std::invalid_argument);

    bad = cfg;
    bad.eta = 0.0;
    CHECK_THROWS_AS(bad.validate(l, Algorithm::DSGD), std::invalid_argument);

    bad = cfg;
    bad.x0 = {1.0};
    CHECK_THROWS_AS(bad.validate(l, Algorithm::DSGD), std::invalid_argument);

    bad = cfg;
    bad.noise.pop_back();
    CHECK_THROWS_AS(bad.validate(l, Algorithm::DSGD), std::invalid_argument);

    // Compressed algorithms need one compressor per agent with a valid k.
    bad = cfg;
    CHECK_THROWS_AS(bad.validate(l, Algorithm::DCSGD), std::invalid_argument);
    bad.compressors.assign(2, Compressor{CompressorKind::RandK, 3});
    CHECK_THROWS_AS(bad.validate(l, Algorithm::DCSGD), std::invalid_argument);
    bad.compressors.assign(2, Compressor{CompressorKind::RandK, 1});
    CHECK_NOTHROW(bad.validate(l, Algorithm::DCSGD));
    // topk_sgd refuses non-top-k compressors.
    CHECK_THROWS_AS(bad.validate(l, Algorithm::TopKSGD),
                    std::invalid_argument);

    bad = cfg;
    bad.divergence_ceiling = 0.0;
    CHECK_THROWS_AS(bad.validate(l, Algorithm::DSGD), std::invalid_argument);

    bad = cfg;
    bad.stride = 0;
    CHECK_THROWS_AS(bad.validate(l, Algorithm::DSGD), std::invalid_argument);
}

TEST_CASE("algorithm names and compressor requirements") {
    CHECK(dsim::algorithm_name(Algorithm::DSGD) == std::string("dsgd"));
    CHECK(dsim::algorithm_name(Algorithm::DCSGD) == std::string("dcsgd"));
    CHECK(dsim::algorithm_name(Algorithm::DSignSGD) == std::string("dsignsgd"));
    CHECK_FALSE(dsim::algorithm_uses_compressor(Algorithm::DSGD));
    CHECK_FALSE(dsim::algorithm_uses_compressor(Algorithm::DSignSGD));
    CHECK(dsim::algorithm_uses_compressor(Algorithm::DCSGD));
    CHECK(dsim::algorithm_uses_compressor(Algorithm::TopKSGD));
    CHECK(dsim::algorithm_uses_compressor(Algorithm::NormTopKSGD));
}

TEST_CASE("run_trajectory_into reuses storage without changing results") {
    const Landscape l = Landscape::quadratic_diag({1.0, 2.0});
    ClusterConfig cfg = base_config(2, 2, 0.1, 15);
    cfg.noise.assign(2, gaussian({0.2, 0.2}));
    const Trajectory fresh =
        dsim::run_trajectory(Algorithm::DSGD, l, cfg, 9, 3);
    Trajectory reused;
    dsim::run_trajectory_into(reused, Algorithm::DSGD, l, cfg, 9, 100);
    dsim::run_trajectory_into(reused, Algorithm::DSGD, l, cfg, 9, 3);
    CHECK(reused.loss == fresh.loss);
    CHECK(reused.recorded_steps == fresh.recorded_steps);
}

}  // TEST_SUITE("optimizer")
