// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// Counter-based random streams. Each (seed, path, agent, step) tuple owns an
// independent 2^32-block keyed sequence, so ensembles are bitwise reproducible
// no matter how paths are scheduled across workers.

#pragma once

#include <array>
#include <cstdint>

namespace dsim {

// Philox 4x32 with 10 rounds (Salmon et al., "Parallel random numbers: as
// easy as 1, 2, 3"). Pure function of counter and key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// A deterministic draw stream addressed by (seed, path, agent), advanced
// through named steps. seek(k) repositions the stream at step k and clears
// any cached state, so draws within a step never depend on previous steps.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t path_index, std::uint32_t agent_index);

    std::uint64_t path_index() const {
        return (static_cast<std::uint64_t>(path_hi_) << 32) | path_lo_;
    }
    std::uint32_t agent_index() const { return agent_; }

    // Position the stream at a step. Draw sequences at distinct steps are
    // independent; re-seeking the same step replays the same draws.
    void seek(std::uint64_t step);

    // Uniform on (0, 1] with 53 random bits (never returns 0).
    double uniform();

    // Standard normal via Box-Muller; the paired draw is cached until the
    // next seek.
    double normal();

    // Gamma(shape, 1) via Marsaglia-Tsang squeeze for shape >= 1 and the
    // power-of-uniform boost below 1.
    double gamma(double shape);

    // Chi-square with k degrees of freedom (k may be fractional).
    double chi_square(double k);

    // Student-t with nu degrees of freedom; nu_infinity gives a plain normal.
    double student_t(double nu);

  private:
    std::uint32_t next_u32();

    std::array<std::uint32_t, 2> key_;
    std::uint32_t path_lo_ = 0;
    std::uint32_t path_hi_ = 0;
    std::uint32_t agent_ = 0;
    std::uint32_t step_ = 0;
    std::uint32_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int buffer_pos_ = 4;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

}  // namespace dsim
