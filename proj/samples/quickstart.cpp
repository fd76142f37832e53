// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
//
// Minimal end-to-end walk: synthesize a scene, filter its masks, merge with
// every strategy and print the resulting token counts.

#include <iostream>

#include "masktok/masktok.hpp"

int main() {
    masktok::SceneSpec spec;
    spec.seed = 7;
    spec.height = 24;
    spec.width = 24;
    spec.channels = 8;
    spec.n_objects = 4;
    spec.object_kind = masktok::ObjectKind::blob;
    spec.softness = 0.3;

    const masktok::Scene scene = masktok::generate_scene(spec);
    const masktok::ValidMasks valid = masktok::competitive_filter(scene.masks);
    std::cout << "grid " << spec.height << "x" << spec.width << ", " << scene.masks.count()
              << " queries, " << valid.query_ids.size() << " retained\n";

    const masktok::TokenSequence soft = masktok::merge_soft(scene.features, valid);
    const masktok::TokenSequence hard = masktok::merge_hard(scene.features, valid);
    std::cout << "adaptive soft: " << soft.tokens.size() << " tokens\n";
    std::cout << "adaptive hard: " << hard.tokens.size() << " tokens\n";

    for (const auto strategy : {masktok::MergeStrategy::large_first,
                                masktok::MergeStrategy::small_first}) {
        const auto result = masktok::fixed_rate_merge(scene.features, valid,
                                                      masktok::BudgetPlan{64, strategy});
        std::cout << "fixed rate (" << masktok::to_string(strategy)
                  << ", target 64): " << result.tokens.tokens.size() << " tokens, budget spent "
                  << result.consumed_budget << "\n";
    }

    std::cout << "first hard centroids:";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, hard.tokens.size()); ++i) {
        std::cout << " " << hard.tokens[i].centroid;
    }
    std::cout << "\n";
    return 0;
}
