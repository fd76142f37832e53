// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "masktok/tensor.hpp"

// Turns raw query probability masks into the valid mask set used for
// merging: resolution matching by bilinear interpolation, then a pixel-wise
// competitive filter that keeps exactly the queries winning the per-pixel
// argmax somewhere. No confidence thresholds, no NMS.

namespace masktok {

/// Filtered soft masks plus the derived non-overlapping hard labeling.
///
/// Invariants (produced by competitive_filter / soft_to_hard):
///  - every entry of query_ids wins the per-pixel argmax at >= 1 pixel,
///  - hard labels partition the grid (areas sum to height*width),
///  - query_ids, soft rows and areas are parallel and share one id set.
///
/// The soft list keeps whatever order it was built in; merging sorts by
/// centroid afterwards, so list order never affects final output.
struct ValidMasks {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint32_t> query_ids;  // soft-list order
    std::vector<float> soft;               // query_ids.size() * height * width
    std::vector<std::uint32_t> hard;       // height * width winner labels
    std::vector<std::size_t> areas;        // parallel to query_ids

    std::size_t grid_size() const { return height * width; }

    std::span<const float> soft_mask(std::size_t list_index) const {
        return std::span<const float>(soft).subspan(list_index * grid_size(), grid_size());
    }

    std::size_t area_of(std::uint32_t query_id) const {
        for (std::size_t i = 0; i < query_ids.size(); ++i) {
            if (query_ids[i] == query_id) return areas[i];
        }
        throw ValidationError("query id " + std::to_string(query_id) + " not retained");
    }
};

/// Bilinear resize with half-pixel centers and border clamping:
/// source coordinate s = (d + 0.5) * (src_size / dst_size) - 0.5.
/// Exact on constant fields and the identity when dimensions match.
inline MaskStack downsample_masks(const MaskStack& masks, std::size_t target_h,
                                  std::size_t target_w) {
    if (target_h == 0 || target_w == 0) {
        throw ValidationError("downsample_masks: target dimensions must be >= 1");
    }
    const std::size_t src_h = masks.height();
    const std::size_t src_w = masks.width();

    struct AxisTap {
        std::size_t lo, hi;
        double frac;
    };
    auto make_taps = [](std::size_t src, std::size_t dst) {
        std::vector<AxisTap> taps(dst);
        const double scale = static_cast<double>(src) / static_cast<double>(dst);
        for (std::size_t d = 0; d < dst; ++d) {
            const double s = (static_cast<double>(d) + 0.5) * scale - 0.5;
            const double f = std::floor(s);
            const long long i0 = static_cast<long long>(f);
            const long long last = static_cast<long long>(src) - 1;
            taps[d].lo = static_cast<std::size_t>(std::clamp(i0, 0LL, last));
            taps[d].hi = static_cast<std::size_t>(std::clamp(i0 + 1, 0LL, last));
            taps[d].frac = s - f;
        }
        return taps;
    };
    const auto ys = make_taps(src_h, target_h);
    const auto xs = make_taps(src_w, target_w);

    std::vector<float> out(masks.count() * target_h * target_w);
    std::size_t o = 0;
    for (std::size_t q = 0; q < masks.count(); ++q) {
        const std::span<const float> src = masks.mask(q);
        for (std::size_t dy = 0; dy < target_h; ++dy) {
            const AxisTap& ty = ys[dy];
            const float* row_lo = src.data() + ty.lo * src_w;
            const float* row_hi = src.data() + ty.hi * src_w;
            for (std::size_t dx = 0; dx < target_w; ++dx) {
                const AxisTap& tx = xs[dx];
                const double top = (1.0 - tx.frac) * row_lo[tx.lo] + tx.frac * row_lo[tx.hi];
                const double bot = (1.0 - tx.frac) * row_hi[tx.lo] + tx.frac * row_hi[tx.hi];
                out[o++] = static_cast<float>((1.0 - ty.frac) * top + ty.frac * bot);
            }
        }
    }
    return MaskStack(masks.count(), target_h, target_w, std::move(out));
}

namespace detail {

// Per-pixel argmax winner; ties go to the lowest query id, which makes the
// result independent of the order the masks are listed in.
inline std::vector<std::uint32_t> argmax_labels(std::span<const float> stacked,
                                                std::span<const std::uint32_t> ids,
                                                std::size_t grid) {
    std::vector<std::uint32_t> winner(grid);
    for (std::size_t p = 0; p < grid; ++p) {
        float best = stacked[p];
        std::uint32_t best_id = ids[0];
        for (std::size_t r = 1; r < ids.size(); ++r) {
            const float v = stacked[r * grid + p];
            if (v > best || (v == best && ids[r] < best_id)) {
                best = v;
                best_id = ids[r];
            }
        }
        winner[p] = best_id;
    }
    return winner;
}

}  // namespace detail

/// Pixel-wise competitive filtering. Retains the queries that win the
/// per-pixel argmax at least once; the soft output is those masks unmodified
/// and the hard output assigns every pixel its argmax winner.
inline ValidMasks competitive_filter(const MaskStack& masks) {
    const std::size_t grid = masks.grid_size();
    std::vector<std::uint32_t> all_ids(masks.count());
    for (std::size_t q = 0; q < masks.count(); ++q) all_ids[q] = static_cast<std::uint32_t>(q);

    const auto winner = detail::argmax_labels(masks.data(), all_ids, grid);

    std::vector<std::size_t> area_by_query(masks.count(), 0);
    for (std::uint32_t label : winner) ++area_by_query[label];

    ValidMasks out;
    out.height = masks.height();
    out.width = masks.width();
    out.hard = winner;
    for (std::size_t q = 0; q < masks.count(); ++q) {
        if (area_by_query[q] == 0) continue;
        out.query_ids.push_back(static_cast<std::uint32_t>(q));
        out.areas.push_back(area_by_query[q]);
        const auto m = masks.mask(q);
        out.soft.insert(out.soft.end(), m.begin(), m.end());
    }
    return out;
}

/// Recomputes the hard labeling (and areas) from the current soft list,
/// e.g. after the soft masks were edited or resized. Masks that no longer
/// win any pixel are dropped so the ValidMasks invariants keep holding.
/// Idempotent on competitive_filter output.
inline ValidMasks soft_to_hard(const ValidMasks& valid) {
    if (valid.query_ids.empty()) {
        throw ValidationError("soft_to_hard: empty soft mask list");
    }
    const std::size_t grid = valid.grid_size();
    if (valid.soft.size() != valid.query_ids.size() * grid) {
        throw ValidationError("soft_to_hard: soft data does not match grid");
    }

    const auto winner = detail::argmax_labels(valid.soft, valid.query_ids, grid);

    std::unordered_map<std::uint32_t, std::size_t> area_by_id;
    for (std::uint32_t label : winner) ++area_by_id[label];

    ValidMasks out;
    out.height = valid.height;
    out.width = valid.width;
    out.hard = winner;
    for (std::size_t r = 0; r < valid.query_ids.size(); ++r) {
        const auto it = area_by_id.find(valid.query_ids[r]);
        if (it == area_by_id.end()) continue;
        out.query_ids.push_back(valid.query_ids[r]);
        out.areas.push_back(it->second);
        const auto m = valid.soft_mask(r);
        out.soft.insert(out.soft.end(), m.begin(), m.end());
    }
    return out;
}

/// Resolution change for an already-filtered mask set: resizes every soft
/// mask, then re-derives the hard labeling on the new grid.
inline ValidMasks downsample_valid(const ValidMasks& valid, std::size_t target_h,
                                   std::size_t target_w) {
    if (valid.query_ids.empty()) {
        throw ValidationError("downsample_valid: empty soft mask list");
    }
    MaskStack stack(valid.query_ids.size(), valid.height, valid.width, valid.soft);
    MaskStack resized = downsample_masks(stack, target_h, target_w);
    ValidMasks out;
    out.height = target_h;
    out.width = target_w;
    out.query_ids = valid.query_ids;
    out.soft.assign(resized.data().begin(), resized.data().end());
    return soft_to_hard(out);
}

// Hard label maps travel through bundles as f32 tensors of integer-valued
// labels; f32 represents integers exactly below 2^24.

inline constexpr std::uint32_t kMaxSerializableLabel = 1u << 24;

inline Tensor labels_to_tensor(std::span<const std::uint32_t> labels, std::size_t height,
                               std::size_t width) {
    if (labels.size() != height * width) {
        throw ValidationError("labels_to_tensor: label count does not match grid");
    }
    Tensor t{{height, width}, {}};
    t.data.reserve(labels.size());
    for (std::uint32_t label : labels) {
        if (label >= kMaxSerializableLabel) {
            throw ValidationError("label " + std::to_string(label) + " exceeds f32 integer range");
        }
        t.data.push_back(static_cast<float>(label));
    }
    return t;
}

inline std::vector<std::uint32_t> labels_from_tensor(const Tensor& t,
                                                     const std::string& name = "labels") {
    std::vector<std::uint32_t> labels;
    labels.reserve(t.data.size());
    for (float v : t.data) {
        if (!(v >= 0.0f) || v != std::floor(v) || v >= static_cast<float>(kMaxSerializableLabel)) {
            throw ValidationError("tensor '" + name + "': not an integer label map");
        }
        labels.push_back(static_cast<std::uint32_t>(v));
    }
    return labels;
}

}  // namespace masktok
