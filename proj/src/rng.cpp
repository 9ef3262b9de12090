// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include "dsim/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dsim {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;  // golden ratio
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;  // sqrt(3) - 1

inline void philox_round(std::array<std::uint32_t, 4>& c, std::uint32_t k0, std::uint32_t k1) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0, static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1, static_cast<std::uint32_t>(p0)};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        philox_round(counter, key[0], key[1]);
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return counter;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t path_index, std::uint32_t agent_index)
    : path_lo_(static_cast<std::uint32_t>(path_index)),
      path_hi_(static_cast<std::uint32_t>(path_index >> 32)),
      agent_(agent_index) {
    // Fold the high path word into the key so 64-bit path indices stay
    // collision-free while the common case (path < 2^32) keys on the seed
    // alone.
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32) ^ path_hi_};
}

void RngStream::seek(std::uint64_t step) {
    if (step >> 32) {
        throw std::invalid_argument("RngStream::seek: step index exceeds 2^32 - 1");
    }
    step_ = static_cast<std::uint32_t>(step);
    block_ = 0;
    buffer_pos_ = 4;
    has_spare_normal_ = false;
}

std::uint32_t RngStream::next_u32() {
    if (buffer_pos_ == 4) {
        buffer_ = philox4x32({path_lo_, agent_, step_, block_}, key_);
        ++block_;
        buffer_pos_ = 0;
    }
    return buffer_[buffer_pos_++];
}

double RngStream::uniform() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;  // (0, 1]
}

double RngStream::normal() {
    if (has_spare_normal_) {
        has_spare_normal_ = false;
        return spare_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(theta);
    has_spare_normal_ = true;
    return r * std::cos(theta);
}

double RngStream::gamma(double shape) {
    if (!(shape > 0.0)) {
        throw std::invalid_argument("RngStream::gamma: shape must be positive");
    }
    if (shape < 1.0) {
        // Boost: Gamma(a) = Gamma(a + 1) * U^(1/a).
        return gamma(shape + 1.0) * std::pow(uniform(), 1.0 / shape);
    }
    // Marsaglia & Tsang, "A simple method for generating gamma variables".
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double RngStream::chi_square(double k) {
    return 2.0 * gamma(0.5 * k);
}

double RngStream::student_t(double nu) {
    if (std::isinf(nu)) return normal();
    if (!(nu > 0.0)) {
        throw std::invalid_argument("RngStream::student_t: nu must be positive or infinite");
    }
    return normal() / std::sqrt(chi_square(nu) / nu);
}

}  // namespace dsim
