// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "masktok/mask_engine.hpp"
#include "masktok/merge.hpp"
#include "masktok/tensor.hpp"

// Budgeted fixed-rate merging. The budget delta = H*W - n_target counts the
// tokens to remove. Segments (hard-mask regions) are visited whole-object
// at a time, largest or smallest area first; a full merge of a segment of
// area A removes A-1 tokens. When the remaining budget cannot absorb a whole
// segment, its first budget+1 members (raster order) merge into one token
// and the rest pass through, landing exactly on n_target. Once the budget is
// spent, everything passes through at its original position.
//
// Output size is therefore clamp(n_target, n_segments, H*W): a target below
// the segment count overshoots to one token per segment.

namespace masktok {

enum class MergeStrategy : std::uint8_t { large_first, small_first };

inline std::string_view to_string(MergeStrategy s) {
    return s == MergeStrategy::large_first ? "large_first" : "small_first";
}

inline MergeStrategy merge_strategy_from_string(std::string_view s) {
    if (s == "large_first") return MergeStrategy::large_first;
    if (s == "small_first") return MergeStrategy::small_first;
    throw ValidationError("unknown strategy '" + std::string(s) + "'");
}

struct BudgetPlan {
    std::size_t n_target = 0;
    MergeStrategy strategy = MergeStrategy::large_first;
};

struct Segment {
    std::uint32_t query_id = 0;
    std::size_t area = 0;
    std::vector<std::uint32_t> members;  // flat raster indices, ascending
};

using SegmentOrder = std::vector<Segment>;

/// Orders the hard-mask segments for merging: by descending (large_first)
/// or ascending (small_first) area, ties by ascending query id. Member
/// indices come from a raster scan and are strictly increasing.
inline SegmentOrder plan_segments(const ValidMasks& valid, MergeStrategy strategy) {
    const std::size_t grid = valid.grid_size();
    if (valid.hard.size() != grid) {
        throw ValidationError("plan_segments: hard labeling missing or wrong size");
    }
    std::unordered_map<std::uint32_t, std::size_t> row_of;
    row_of.reserve(valid.query_ids.size());
    for (std::size_t r = 0; r < valid.query_ids.size(); ++r) row_of[valid.query_ids[r]] = r;

    SegmentOrder segments(valid.query_ids.size());
    for (std::size_t r = 0; r < valid.query_ids.size(); ++r) {
        segments[r].query_id = valid.query_ids[r];
    }
    for (std::size_t i = 0; i < grid; ++i) {
        const auto it = row_of.find(valid.hard[i]);
        if (it == row_of.end()) {
            throw ValidationError("plan_segments: hard label " + std::to_string(valid.hard[i]) +
                                  " is not a retained query");
        }
        segments[it->second].members.push_back(static_cast<std::uint32_t>(i));
    }
    for (Segment& s : segments) s.area = s.members.size();

    const bool large_first = strategy == MergeStrategy::large_first;
    std::sort(segments.begin(), segments.end(),
              [large_first](const Segment& a, const Segment& b) {
                  if (a.area != b.area) return large_first ? a.area > b.area : a.area < b.area;
                  return a.query_id < b.query_id;
              });
    return segments;
}

/// Fixed-rate merge output: the token sequence plus the bookkeeping the
/// serialized bundle records (per-token member groups, spent budget).
struct FixedRateResult {
    TokenSequence tokens;
    MergeStrategy strategy = MergeStrategy::large_first;
    std::size_t n_target = 0;
    std::size_t consumed_budget = 0;
    std::vector<std::vector<std::uint32_t>> groups;  // aligned with tokens.tokens
};

inline FixedRateResult fixed_rate_merge(const FeatureMap& features, const ValidMasks& valid,
                                        const BudgetPlan& plan) {
    if (plan.n_target == 0) {
        throw ValidationError("fixed_rate_merge: n_target must be >= 1");
    }
    detail::check_merge_dims(features, valid);
    const std::size_t grid = valid.grid_size();
    const std::size_t channels = features.channels();
    const std::span<const float> f = features.data();

    const SegmentOrder order = plan_segments(valid, plan.strategy);

    std::size_t budget = grid > plan.n_target ? grid - plan.n_target : 0;
    const std::size_t initial_budget = budget;

    struct Entry {
        MergedToken token;
        std::vector<std::uint32_t> group;
    };
    std::vector<Entry> entries;
    entries.reserve(std::min(grid, plan.n_target + order.size()));

    auto merged_over = [&](const Segment& seg, std::size_t take, TokenKind kind) {
        std::vector<double> acc(channels, 0.0);
        double index_acc = 0.0;
        for (std::size_t k = 0; k < take; ++k) {
            const std::size_t i = seg.members[k];
            index_acc += static_cast<double>(i);
            const float* fp = f.data() + i * channels;
            for (std::size_t c = 0; c < channels; ++c) acc[c] += fp[c];
        }
        Entry e;
        e.token.features.resize(channels);
        const double count = static_cast<double>(take);
        for (std::size_t c = 0; c < channels; ++c) {
            e.token.features[c] = static_cast<float>(acc[c] / count);
        }
        e.token.centroid = index_acc / count;
        e.token.source = seg.query_id;
        e.token.kind = kind;
        e.group.assign(seg.members.begin(), seg.members.begin() + static_cast<long>(take));
        return e;
    };
    auto passthrough = [&](const Segment& seg, std::size_t from) {
        for (std::size_t k = from; k < seg.members.size(); ++k) {
            const std::size_t i = seg.members[k];
            Entry e;
            const float* fp = f.data() + i * channels;
            e.token.features.assign(fp, fp + channels);
            e.token.centroid = static_cast<double>(i);
            e.token.source = seg.query_id;
            e.token.kind = TokenKind::passthrough;
            e.group = {static_cast<std::uint32_t>(i)};
            entries.push_back(std::move(e));
        }
    };

    for (const Segment& seg : order) {
        if (seg.area == 0) continue;  // cannot occur for filter output
        const std::size_t cost = seg.area - 1;
        if (budget > 0 && cost <= budget) {
            entries.push_back(merged_over(seg, seg.area, TokenKind::hard));
            budget -= cost;
        } else if (budget > 0) {
            entries.push_back(merged_over(seg, budget + 1, TokenKind::partial));
            passthrough(seg, budget + 1);
            budget = 0;
        } else {
            passthrough(seg, 0);
        }
    }

    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return token_order_less(a.token, b.token);
    });

    FixedRateResult result;
    result.strategy = plan.strategy;
    result.n_target = plan.n_target;
    result.consumed_budget = initial_budget - budget;
    result.tokens.grid_height = valid.height;
    result.tokens.grid_width = valid.width;
    result.tokens.tokens.reserve(entries.size());
    result.groups.reserve(entries.size());
    for (Entry& e : entries) {
        result.tokens.tokens.push_back(std::move(e.token));
        result.groups.push_back(std::move(e.group));
    }
    return result;
}

}  // namespace masktok
