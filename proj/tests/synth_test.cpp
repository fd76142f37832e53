// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "masktok/mask_engine.hpp"
#include "masktok/merge.hpp"
#include "masktok/synth.hpp"
#include "test_util.hpp"

using masktok::ObjectKind;
using masktok::Scene;
using masktok::SceneSpec;

TEST(SplitMix64Test, ReferenceSequence) {
    // reference outputs for seed 0 (the sequence xoshiro seeds from)
    masktok::SplitMix64 rng(0);
    EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
    EXPECT_EQ(rng.next(), 0x06C45D188009454FULL);
    EXPECT_EQ(rng.next(), 0xF88BB8A8724C81ECULL);

    // one-shot form matches a fresh stream
    EXPECT_EQ(masktok::splitmix64(0), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(masktok::splitmix64(42) , masktok::splitmix64(42));
}

TEST(SplitMix64Test, DoublesAreInUnitInterval) {
    masktok::SplitMix64 rng(77);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.next_double();
        ASSERT_GE(v, 0.0);
        ASSERT_LT(v, 1.0);
    }
}

TEST(DetExpTest, TracksLibmClosely) {
    for (double x = 0.0; x < 60.0; x += 0.37) {
        const double got = masktok::det_exp_neg(x);
        const double want = std::exp(-x);
        ASSERT_NEAR(got, want, 1e-12 + 1e-9 * want) << "x=" << x;
    }
    EXPECT_EQ(masktok::det_exp_neg(0.0), 1.0);
    EXPECT_EQ(masktok::det_exp_neg(800.0), 0.0);
    EXPECT_THROW(masktok::det_exp_neg(-1.0), masktok::ValidationError);
}

TEST(GenerateSceneTest, NoObjectsIsAllBackground) {
    SceneSpec spec;
    spec.seed = 5;
    spec.height = 6;
    spec.width = 4;
    spec.channels = 3;
    spec.n_objects = 0;

    const Scene scene = masktok::generate_scene(spec);
    ASSERT_EQ(scene.masks.count(), 1u);
    for (float v : scene.masks.data()) EXPECT_EQ(v, 1.0f);
    for (std::uint32_t label : scene.labels) EXPECT_EQ(label, 0u);

    const masktok::ValidMasks valid = masktok::competitive_filter(scene.masks);
    ASSERT_EQ(valid.query_ids, (std::vector<std::uint32_t>{0}));
    for (std::uint32_t label : valid.hard) EXPECT_EQ(label, 0u);
}

TEST(GenerateSceneTest, DeterministicAcrossRuns) {
    SceneSpec spec;
    spec.seed = 42;
    spec.height = 8;
    spec.width = 8;
    spec.channels = 4;
    spec.n_objects = 3;
    spec.object_kind = ObjectKind::blob;
    spec.softness = 0.5;

    const Scene a = masktok::generate_scene(spec);
    const Scene b = masktok::generate_scene(spec);
    ASSERT_EQ(a.features.data().size(), b.features.data().size());
    for (std::size_t i = 0; i < a.features.data().size(); ++i) {
        ASSERT_EQ(std::bit_cast<std::uint32_t>(a.features.data()[i]),
                  std::bit_cast<std::uint32_t>(b.features.data()[i]));
    }
    for (std::size_t i = 0; i < a.masks.data().size(); ++i) {
        ASSERT_EQ(std::bit_cast<std::uint32_t>(a.masks.data()[i]),
                  std::bit_cast<std::uint32_t>(b.masks.data()[i]));
    }
    EXPECT_EQ(a.labels, b.labels);
}

TEST(GenerateSceneTest, CrispScenesRecoverGroundTruth) {
    // with softness 0 the competitive filter must reproduce the label map
    for (const ObjectKind kind : {ObjectKind::rect, ObjectKind::blob}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            SceneSpec spec;
            spec.seed = seed;
            spec.height = 12;
            spec.width = 10;
            spec.channels = 2;
            spec.n_objects = 3;
            spec.object_kind = kind;
            spec.softness = 0.0;
            spec.feature_contrast = 8.0;

            const Scene scene = masktok::generate_scene(spec);
            const masktok::ValidMasks valid = masktok::competitive_filter(scene.masks);
            ASSERT_EQ(valid.hard, scene.labels) << "kind=" << masktok::to_string(kind)
                                                << " seed=" << seed;
        }
    }
}

TEST(GenerateSceneTest, FullCoverageRectYieldsSingleToken) {
    // scan for a seed whose one rect covers the whole grid; the scan is
    // deterministic, so the assertion below never flakes
    SceneSpec spec;
    spec.height = 4;
    spec.width = 4;
    spec.channels = 2;
    spec.n_objects = 1;
    spec.object_kind = ObjectKind::rect;
    spec.softness = 0.0;

    bool found = false;
    for (std::uint64_t seed = 0; seed < 2000 && !found; ++seed) {
        spec.seed = seed;
        const Scene scene = masktok::generate_scene(spec);
        bool covered = true;
        const auto object = scene.masks.mask(1);
        for (float v : object) covered = covered && v > 0.5f;
        if (!covered) continue;
        found = true;

        const masktok::ValidMasks valid = masktok::competitive_filter(scene.masks);
        ASSERT_EQ(valid.query_ids, (std::vector<std::uint32_t>{1}));
        const masktok::TokenSequence seq = masktok::merge_hard(scene.features, valid);
        ASSERT_EQ(seq.tokens.size(), 1u);
    }
    ASSERT_TRUE(found) << "no full-coverage rect in scanned seeds";
}

TEST(GenerateSceneTest, RejectsBadSpecs) {
    SceneSpec spec;
    spec.height = 2;
    spec.width = 2;
    spec.channels = 1;
    spec.n_objects = 5;  // more objects than cells
    EXPECT_THROW(masktok::generate_scene(spec), masktok::ValidationError);

    spec.n_objects = 1;
    spec.softness = -0.1;
    EXPECT_THROW(masktok::generate_scene(spec), masktok::ValidationError);
}

TEST(GenerateCorpusTest, SingleSceneMatchesDerivedSeed) {
    SceneSpec base;
    base.height = 6;
    base.width = 6;
    base.channels = 2;
    base.n_objects = 2;

    testutil::TempDir tmp;
    const auto entries = masktok::generate_corpus(base, 1, 99, tmp.path() / "c");
    ASSERT_EQ(entries.size(), 1u);
    EXPECT_EQ(entries[0].seed, masktok::splitmix64(99 ^ 0ULL));

    SceneSpec direct = base;
    direct.seed = entries[0].seed;
    const Scene scene = masktok::generate_scene(direct);

    const auto tensors = masktok::read_bundle(tmp.path() / "c" / entries[0].name);
    const auto features = masktok::read_feature_map(tensors, "features");
    ASSERT_EQ(features.data().size(), scene.features.data().size());
    for (std::size_t i = 0; i < features.data().size(); ++i) {
        ASSERT_EQ(std::bit_cast<std::uint32_t>(features.data()[i]),
                  std::bit_cast<std::uint32_t>(scene.features.data()[i]));
    }
}

TEST(GenerateCorpusTest, RegenerationIsByteIdentical) {
    SceneSpec base;
    base.height = 5;
    base.width = 7;
    base.channels = 3;
    base.n_objects = 2;
    base.object_kind = ObjectKind::blob;
    base.softness = 0.25;

    testutil::TempDir tmp;
    masktok::generate_corpus(base, 4, 1234, tmp.path() / "a", /*jobs=*/1);
    masktok::generate_corpus(base, 4, 1234, tmp.path() / "b", /*jobs=*/3);

    for (const auto& entry : std::filesystem::recursive_directory_iterator(tmp.path() / "a")) {
        if (!entry.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(entry.path(), tmp.path() / "a");
        const auto a = testutil::read_file_bytes(entry.path());
        const auto b = testutil::read_file_bytes(tmp.path() / "b" / rel);
        ASSERT_EQ(a, b) << "mismatch in " << rel;
    }
}

TEST(GenerateCorpusTest, CorpusIndexListsScenes) {
    SceneSpec base;
    base.height = 4;
    base.width = 4;
    base.channels = 1;
    base.n_objects = 1;

    testutil::TempDir tmp;
    masktok::generate_corpus(base, 3, 7, tmp.path() / "c");
    const auto index = masktok::detail::parse_json_file(tmp.path() / "c" / "corpus.json");
    EXPECT_EQ(index.at("count").get<std::size_t>(), 3u);
    ASSERT_EQ(index.at("scenes").size(), 3u);
    EXPECT_EQ(index.at("scenes").at(0).at("name").get<std::string>(), "scene_00000");
    for (const auto& scene : index.at("scenes")) {
        EXPECT_TRUE(std::filesystem::exists(tmp.path() / "c" /
                                            scene.at("name").get<std::string>() /
                                            "manifest.json"));
    }
}
