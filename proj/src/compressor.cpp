// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include "dsim/compressor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace dsim {

void Compressor::validate(int d) const {
    if (uses_k() && (k < 1 || k > d)) {
        throw std::invalid_argument("compressor " + name() + ": k = " + std::to_string(k) +
                                    " out of range [1, " + std::to_string(d) + "]");
    }
}

std::string Compressor::name() const {
    switch (kind) {
        case CompressorKind::Identity:
            return "identity";
        case CompressorKind::RandK:
            return "rand_k";
        case CompressorKind::TopK:
            return "top_k";
        case CompressorKind::Sign:
            return "sign";
        case CompressorKind::NormalizedTopK:
            return "normalized_top_k";
    }
    return "compressor";
}

namespace {

// Uniform integer in [0, n), consuming one uniform draw.
inline int uniform_index(RngStream& rng, int n) {
    const int idx = static_cast<int>(rng.uniform() * n);  // uniform() is (0, 1]
    return idx >= n ? n - 1 : idx;
}

thread_local std::vector<int> tl_index_scratch;
thread_local std::vector<char> tl_keep_scratch;

// Keeps the k largest-|.| entries of v (ties to the lowest index), zeroing
// the rest. scratch holds the index permutation.
void keep_top_k(std::span<double> v, int k, std::vector<int>& scratch) {
    const int d = static_cast<int>(v.size());
    if (k >= d) return;
    scratch.resize(d);
    for (int i = 0; i < d; ++i) scratch[i] = i;
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end(),
                     [&v](int a, int b) {
                         const double fa = std::fabs(v[a]);
                         const double fb = std::fabs(v[b]);
                         return fa != fb ? fa > fb : a < b;
                     });
    auto& keep = tl_keep_scratch;
    keep.assign(d, 0);
    for (int i = 0; i < k; ++i) keep[scratch[i]] = 1;
    for (int i = 0; i < d; ++i) {
        if (!keep[i]) v[i] = 0.0;
    }
}

}  // namespace

void compress(const Compressor& c, std::span<double> v, RngStream& rng) {
    const int d = static_cast<int>(v.size());
    c.validate(d);
    switch (c.kind) {
        case CompressorKind::Identity:
            return;
        case CompressorKind::RandK: {
            if (c.k == d) return;  // keep-everything: exact identity, no draws
            auto& idx = tl_index_scratch;
            idx.resize(d);
            for (int i = 0; i < d; ++i) idx[i] = i;
            // Partial Fisher-Yates: the first k slots become the kept set.
            const double scale = static_cast<double>(d) / c.k;
            auto& keep = tl_keep_scratch;
            keep.assign(d, 0);
            for (int i = 0; i < c.k; ++i) {
                const int j = i + uniform_index(rng, d - i);
                std::swap(idx[i], idx[j]);
                keep[idx[i]] = 1;
            }
            for (int i = 0; i < d; ++i) {
                v[i] = keep[i] ? v[i] * scale : 0.0;
            }
            return;
        }
        case CompressorKind::TopK:
            keep_top_k(v, c.k, tl_index_scratch);
            return;
        case CompressorKind::Sign:
            for (double& x : v) {
                x = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
            }
            return;
        case CompressorKind::NormalizedTopK: {
            double norm_sq = 0.0;
            for (double x : v) norm_sq += x * x;
            if (norm_sq == 0.0) return;  // zero vector passes through
            const double inv = 1.0 / std::sqrt(norm_sq);
            for (double& x : v) x *= inv;
            keep_top_k(v, c.k, tl_index_scratch);
            return;
        }
    }
}

std::optional<double> omega(const Compressor& c, int d) {
    c.validate(d);
    switch (c.kind) {
        case CompressorKind::Identity:
            return 0.0;
        case CompressorKind::RandK:
            return static_cast<double>(d) / c.k - 1.0;
        default:
            return std::nullopt;  // biased: no unbiased second-moment contract
    }
}

}  // namespace dsim
