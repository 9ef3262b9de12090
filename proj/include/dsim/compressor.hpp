// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// Lossy gradient operators: the unbiased Rand-k sparsifier (rescaled by d/k)
// and the biased sign, Top-k, and normalized-Top-k maps, plus the omega
// second-moment contract for the unbiased ones.

#pragma once

#include <optional>
#include <span>
#include <string>

#include "dsim/rng.hpp"

namespace dsim {

enum class CompressorKind { Identity, RandK, TopK, Sign, NormalizedTopK };

struct Compressor {
    CompressorKind kind = CompressorKind::Identity;
    int k = 0;  // retained coordinates (RandK/TopK/NormalizedTopK)

    bool is_unbiased() const {
        return kind == CompressorKind::Identity || kind == CompressorKind::RandK;
    }
    bool uses_k() const {
        return kind == CompressorKind::RandK || kind == CompressorKind::TopK ||
               kind == CompressorKind::NormalizedTopK;
    }
    void validate(int d) const;  // k range check against the dimension
    std::string name() const;
};

// Applies the compressor in place. RandK keeps a uniform k-subset (chosen
// from rng) scaled by d/k; TopK keeps the k largest-magnitude entries (ties
// to the lowest index) unscaled; Sign maps to {-1, 0, +1}; NormalizedTopK
// runs TopK on v/||v||_2, passing an all-zero vector through unchanged.
void compress(const Compressor& c, std::span<double> v, RngStream& rng);

// Contract constant in E||C(v) - v||^2 <= omega ||v||^2. Identity: 0.
// RandK: d/k - 1 (tight). Biased kinds carry no such contract: nullopt.
std::optional<double> omega(const Compressor& c, int d);

}  // namespace dsim
