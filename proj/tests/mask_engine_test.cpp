// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <numeric>
#include <vector>

#include "masktok/mask_engine.hpp"
#include "masktok/synth.hpp"
#include "test_util.hpp"

using masktok::MaskStack;
using masktok::ValidMasks;

TEST(DownsampleTest, ConstantFieldIsExact) {
    const MaskStack masks(1, 32, 32, std::vector<float>(32 * 32, 0.7f));
    const MaskStack out = masktok::downsample_masks(masks, 8, 8);
    ASSERT_EQ(out.height(), 8u);
    ASSERT_EQ(out.width(), 8u);
    for (float v : out.data()) EXPECT_EQ(v, 0.7f);
}

TEST(DownsampleTest, HalfPixelHandDerived) {
    // 2x2 mask [[0,1],[0,1]] -> 1x1: source coord (0.5, 0.5), all four taps
    // weighted 1/4 each -> 0.5
    const MaskStack masks(1, 2, 2, {0.0f, 1.0f, 0.0f, 1.0f});
    const MaskStack out = masktok::downsample_masks(masks, 1, 1);
    ASSERT_EQ(out.data().size(), 1u);
    EXPECT_FLOAT_EQ(out.data()[0], 0.5f);
}

TEST(DownsampleTest, IdentityIsBitExact) {
    masktok::SplitMix64 rng(99);
    const MaskStack masks = testutil::random_masks(rng, 3, 5, 7);
    const MaskStack out = masktok::downsample_masks(masks, 5, 7);
    ASSERT_EQ(out.data().size(), masks.data().size());
    for (std::size_t i = 0; i < masks.data().size(); ++i) {
        EXPECT_EQ(std::bit_cast<std::uint32_t>(out.data()[i]),
                  std::bit_cast<std::uint32_t>(masks.data()[i]));
    }
}

TEST(DownsampleTest, RangePreservedOnRandomStacks) {
    masktok::SplitMix64 rng(4242);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t sh = 2 + rng.next() % 20;
        const std::size_t sw = 2 + rng.next() % 20;
        const std::size_t th = 1 + rng.next() % 20;
        const std::size_t tw = 1 + rng.next() % 20;
        const MaskStack masks = testutil::random_masks(rng, 2, sh, sw);
        const MaskStack out = masktok::downsample_masks(masks, th, tw);
        for (float v : out.data()) {
            ASSERT_GE(v, 0.0f);
            ASSERT_LE(v, 1.0f);
        }
    }
}

TEST(DownsampleTest, RejectsZeroTarget) {
    const MaskStack masks(1, 2, 2, std::vector<float>(4, 0.5f));
    EXPECT_THROW(masktok::downsample_masks(masks, 0, 2), masktok::ValidationError);
}

TEST(CompetitiveFilterTest, SingleWinnerTakesAll) {
    // query 0 maximal everywhere
    std::vector<float> data;
    const std::size_t grid = 3 * 4;
    data.insert(data.end(), grid, 0.9f);
    data.insert(data.end(), grid, 0.3f);
    data.insert(data.end(), grid, 0.1f);
    const ValidMasks valid = masktok::competitive_filter(MaskStack(3, 3, 4, std::move(data)));

    ASSERT_EQ(valid.query_ids, (std::vector<std::uint32_t>{0}));
    EXPECT_EQ(valid.areas[0], grid);
    for (std::uint32_t label : valid.hard) EXPECT_EQ(label, 0u);
}

TEST(CompetitiveFilterTest, PerPixelArgmax) {
    // 1x2 grid, q0=[0.9,0.2], q1=[0.1,0.8]
    const ValidMasks valid =
        masktok::competitive_filter(MaskStack(2, 1, 2, {0.9f, 0.2f, 0.1f, 0.8f}));
    ASSERT_EQ(valid.query_ids, (std::vector<std::uint32_t>{0, 1}));
    EXPECT_EQ(valid.hard, (std::vector<std::uint32_t>{0, 1}));
    EXPECT_EQ(valid.areas, (std::vector<std::size_t>{1, 1}));
}

TEST(CompetitiveFilterTest, AllEqualTieBreaksToLowestIndex) {
    const ValidMasks valid =
        masktok::competitive_filter(MaskStack(4, 2, 2, std::vector<float>(4 * 4, 0.5f)));
    ASSERT_EQ(valid.query_ids, (std::vector<std::uint32_t>{0}));
    EXPECT_EQ(valid.areas[0], 4u);
}

TEST(CompetitiveFilterTest, PartitionInvariant) {
    masktok::SplitMix64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.next() % 8;
        const std::size_t h = 1 + rng.next() % 12;
        const std::size_t w = 1 + rng.next() % 12;
        const ValidMasks valid =
            masktok::competitive_filter(testutil::random_masks(rng, n, h, w));

        const std::size_t total =
            std::accumulate(valid.areas.begin(), valid.areas.end(), std::size_t{0});
        ASSERT_EQ(total, h * w);
        ASSERT_LE(valid.query_ids.size(), n);
        ASSERT_LE(valid.query_ids.size(), h * w);
        ASSERT_EQ(valid.hard.size(), h * w);
        ASSERT_EQ(valid.soft.size(), valid.query_ids.size() * h * w);
    }
}

TEST(CompetitiveFilterTest, WinnerRetentionMatchesExhaustiveScan) {
    masktok::SplitMix64 rng(31337);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.next() % 6;
        const std::size_t h = 2 + rng.next() % 8;
        const std::size_t w = 2 + rng.next() % 8;
        const MaskStack masks = testutil::random_masks(rng, n, h, w);
        const ValidMasks valid = masktok::competitive_filter(masks);

        // brute scan: winners by per-pixel max, strict > keeps lowest index
        std::vector<bool> wins(n, false);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                std::size_t best = 0;
                for (std::size_t q = 1; q < n; ++q) {
                    if (masks.at(q, y, x) > masks.at(best, y, x)) best = q;
                }
                wins[best] = true;
            }
        }
        std::vector<std::uint32_t> expected;
        for (std::size_t q = 0; q < n; ++q) {
            if (wins[q]) expected.push_back(static_cast<std::uint32_t>(q));
        }
        ASSERT_EQ(valid.query_ids, expected);
    }
}

TEST(SoftToHardTest, IdempotentOnFilterOutput) {
    masktok::SplitMix64 rng(55);
    const MaskStack masks = testutil::random_masks(rng, 4, 6, 6);
    const ValidMasks valid = masktok::competitive_filter(masks);
    const ValidMasks again = masktok::soft_to_hard(valid);

    EXPECT_EQ(again.hard, valid.hard);
    EXPECT_EQ(again.query_ids, valid.query_ids);
    EXPECT_EQ(again.areas, valid.areas);
    EXPECT_EQ(again.soft, valid.soft);
}

TEST(SoftToHardTest, SingleMaskCoversGrid) {
    ValidMasks v;
    v.height = 2;
    v.width = 3;
    v.query_ids = {9};
    v.soft.assign(6, 0.4f);
    const ValidMasks out = masktok::soft_to_hard(v);
    for (std::uint32_t label : out.hard) EXPECT_EQ(label, 9u);
    EXPECT_EQ(out.areas, (std::vector<std::size_t>{6}));
}

TEST(SoftToHardTest, MatchesBruteForceArgmax) {
    masktok::SplitMix64 rng(1001);
    const MaskStack masks = testutil::random_masks(rng, 3, 7, 5);
    const ValidMasks valid = masktok::competitive_filter(masks);

    for (std::size_t p = 0; p < valid.grid_size(); ++p) {
        float best = -1.0f;
        std::uint32_t best_id = 0;
        for (std::size_t r = 0; r < valid.query_ids.size(); ++r) {
            const float v = valid.soft[r * valid.grid_size() + p];
            if (v > best) {
                best = v;
                best_id = valid.query_ids[r];
            }
        }
        ASSERT_EQ(valid.hard[p], best_id);
    }
}

TEST(SoftToHardTest, TieBreaksByQueryIdNotListOrder) {
    // two identical masks listed high id first: low id must win everywhere
    ValidMasks v;
    v.height = 1;
    v.width = 4;
    v.query_ids = {5, 2};
    v.soft.assign(8, 0.5f);
    const ValidMasks out = masktok::soft_to_hard(v);
    ASSERT_EQ(out.query_ids, (std::vector<std::uint32_t>{2}));
    for (std::uint32_t label : out.hard) EXPECT_EQ(label, 2u);
}

TEST(DownsampleValidTest, ResizedSetKeepsInvariants) {
    masktok::SplitMix64 rng(808);
    const MaskStack masks = testutil::random_masks(rng, 5, 16, 16);
    const ValidMasks valid = masktok::competitive_filter(masks);
    const ValidMasks small = masktok::downsample_valid(valid, 6, 6);

    EXPECT_EQ(small.height, 6u);
    EXPECT_EQ(small.width, 6u);
    EXPECT_LE(small.query_ids.size(), valid.query_ids.size());
    std::size_t total = 0;
    for (std::size_t a : small.areas) total += a;
    EXPECT_EQ(total, 36u);
    for (std::uint32_t label : small.hard) {
        EXPECT_NE(std::find(small.query_ids.begin(), small.query_ids.end(), label),
                  small.query_ids.end());
    }
}

TEST(LabelTensorTest, RoundTripAndLimit) {
    const std::vector<std::uint32_t> labels = {0, 1, 77, (1u << 24) - 1};
    const masktok::Tensor t = masktok::labels_to_tensor(labels, 2, 2);
    EXPECT_EQ(masktok::labels_from_tensor(t), labels);

    const std::vector<std::uint32_t> too_big = {1u << 24};
    EXPECT_THROW(masktok::labels_to_tensor(too_big, 1, 1), masktok::ValidationError);
}
