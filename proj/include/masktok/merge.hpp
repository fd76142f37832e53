// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "masktok/mask_engine.hpp"
#include "masktok/tensor.hpp"

// Object-centric token merging. Every valid mask collapses the feature map
// into one token by weighted averaging:
//
//   token_n    = sum_i w[n][i] * f[i] / sum_i w[n][i]
//   centroid_n = sum_i w[n][i] * i    / sum_i w[n][i]
//
// with i the zero-based flattened raster index. Soft merging uses the
// probabilities as weights; hard merging uses the 0/1 hard labels, i.e. the
// arithmetic mean of the member features. Tokens are then sorted ascending
// by centroid to restore coarse spatial order.
//
// Accumulation runs in double over raster order and rounds once to f32, so
// results are reproducible bit-for-bit across runs and hosts.

namespace masktok {

enum class TokenKind : std::uint8_t { soft, hard, partial, passthrough };

inline std::string_view to_string(TokenKind kind) {
    switch (kind) {
        case TokenKind::soft: return "soft";
        case TokenKind::hard: return "hard";
        case TokenKind::partial: return "partial";
        case TokenKind::passthrough: return "passthrough";
    }
    throw ValidationError("unknown token kind");
}

inline TokenKind token_kind_from_string(std::string_view s) {
    if (s == "soft") return TokenKind::soft;
    if (s == "hard") return TokenKind::hard;
    if (s == "partial") return TokenKind::partial;
    if (s == "passthrough") return TokenKind::passthrough;
    throw ValidationError("unknown token kind '" + std::string(s) + "'");
}

struct MergedToken {
    std::vector<float> features;
    double centroid = 0.0;          // flattened raster-index units
    std::uint32_t source = 0;       // query id (or synthetic id)
    TokenKind kind = TokenKind::hard;
};

/// Ordered token list; centroids are nondecreasing along the sequence.
struct TokenSequence {
    std::vector<MergedToken> tokens;
    std::size_t grid_height = 0;
    std::size_t grid_width = 0;
};

/// Sort key: centroid, then passthrough before merged at equal positions,
/// then source id. Total over any token set one merge can produce.
inline bool token_order_less(const MergedToken& a, const MergedToken& b) {
    if (a.centroid != b.centroid) return a.centroid < b.centroid;
    const int ra = a.kind == TokenKind::passthrough ? 0 : 1;
    const int rb = b.kind == TokenKind::passthrough ? 0 : 1;
    if (ra != rb) return ra < rb;
    return a.source < b.source;
}

/// Stable ascending sort by centroid (ties: kind, then source id).
inline TokenSequence centroid_sort(std::vector<MergedToken> tokens, std::size_t grid_height,
                                   std::size_t grid_width) {
    const std::size_t grid = grid_height * grid_width;
    // Weighted index means stay in [0, grid-1] up to accumulation rounding.
    const double slack = 1e-9 * static_cast<double>(grid) + 1e-9;
    for (const MergedToken& t : tokens) {
        if (!(t.centroid >= -slack && t.centroid <= static_cast<double>(grid - 1) + slack)) {
            throw ValidationError("token centroid " + std::to_string(t.centroid) +
                                  " outside grid of " + std::to_string(grid) + " cells");
        }
    }
    std::stable_sort(tokens.begin(), tokens.end(), token_order_less);
    return TokenSequence{std::move(tokens), grid_height, grid_width};
}

namespace detail {

inline void check_merge_dims(const FeatureMap& features, const ValidMasks& valid) {
    if (features.height() != valid.height || features.width() != valid.width) {
        throw ValidationError("merge: feature grid " + std::to_string(features.height()) + "x" +
                              std::to_string(features.width()) + " does not match mask grid " +
                              std::to_string(valid.height) + "x" + std::to_string(valid.width));
    }
}

}  // namespace detail

/// Weighted merge with the full probability maps as weights.
/// One token per retained mask, sorted by centroid.
inline TokenSequence merge_soft(const FeatureMap& features, const ValidMasks& valid) {
    detail::check_merge_dims(features, valid);
    const std::size_t grid = valid.grid_size();
    const std::size_t channels = features.channels();
    const std::span<const float> f = features.data();

    std::vector<MergedToken> tokens;
    tokens.reserve(valid.query_ids.size());
    std::vector<double> acc(channels);
    for (std::size_t r = 0; r < valid.query_ids.size(); ++r) {
        const std::span<const float> weights = valid.soft_mask(r);
        std::fill(acc.begin(), acc.end(), 0.0);
        double weight_sum = 0.0;
        double index_acc = 0.0;
        for (std::size_t i = 0; i < grid; ++i) {
            const double w = weights[i];
            if (w == 0.0) continue;
            weight_sum += w;
            index_acc += w * static_cast<double>(i);
            const float* fp = f.data() + i * channels;
            for (std::size_t c = 0; c < channels; ++c) acc[c] += w * fp[c];
        }
        if (weight_sum < 1e-12) {
            throw ValidationError("merge_soft: degenerate soft mask for query " +
                                  std::to_string(valid.query_ids[r]));
        }
        MergedToken token;
        token.features.resize(channels);
        for (std::size_t c = 0; c < channels; ++c) {
            token.features[c] = static_cast<float>(acc[c] / weight_sum);
        }
        token.centroid = index_acc / weight_sum;
        token.source = valid.query_ids[r];
        token.kind = TokenKind::soft;
        tokens.push_back(std::move(token));
    }
    return centroid_sort(std::move(tokens), valid.height, valid.width);
}

/// 0/1 merge over the hard labeling: each token is the arithmetic mean of
/// its member features, the centroid the mean of the member indices.
inline TokenSequence merge_hard(const FeatureMap& features, const ValidMasks& valid) {
    detail::check_merge_dims(features, valid);
    const std::size_t grid = valid.grid_size();
    const std::size_t channels = features.channels();
    if (valid.hard.size() != grid) {
        throw ValidationError("merge_hard: hard labeling missing or wrong size");
    }
    const std::span<const float> f = features.data();

    std::unordered_map<std::uint32_t, std::size_t> row_of;
    row_of.reserve(valid.query_ids.size());
    for (std::size_t r = 0; r < valid.query_ids.size(); ++r) row_of[valid.query_ids[r]] = r;

    const std::size_t rows = valid.query_ids.size();
    std::vector<double> acc(rows * channels, 0.0);
    std::vector<double> index_acc(rows, 0.0);
    std::vector<std::size_t> member_count(rows, 0);
    for (std::size_t i = 0; i < grid; ++i) {
        const auto it = row_of.find(valid.hard[i]);
        if (it == row_of.end()) {
            throw ValidationError("merge_hard: hard label " + std::to_string(valid.hard[i]) +
                                  " is not a retained query");
        }
        const std::size_t r = it->second;
        ++member_count[r];
        index_acc[r] += static_cast<double>(i);
        const float* fp = f.data() + i * channels;
        double* ap = acc.data() + r * channels;
        for (std::size_t c = 0; c < channels; ++c) ap[c] += fp[c];
    }

    std::vector<MergedToken> tokens;
    tokens.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        if (member_count[r] == 0) {
            throw ValidationError("merge_hard: retained query " +
                                  std::to_string(valid.query_ids[r]) + " owns no pixels");
        }
        const double count = static_cast<double>(member_count[r]);
        MergedToken token;
        token.features.resize(channels);
        for (std::size_t c = 0; c < channels; ++c) {
            token.features[c] = static_cast<float>(acc[r * channels + c] / count);
        }
        token.centroid = index_acc[r] / count;
        token.source = valid.query_ids[r];
        token.kind = TokenKind::hard;
        tokens.push_back(std::move(token));
    }
    return centroid_sort(std::move(tokens), valid.height, valid.width);
}

}  // namespace masktok
