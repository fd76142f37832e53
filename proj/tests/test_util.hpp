// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "masktok/mask_engine.hpp"
#include "masktok/synth.hpp"
#include "masktok/tensor.hpp"

namespace testutil {

/// Self-deleting temporary directory.
class TempDir {
public:
    TempDir() {
        static std::atomic<std::uint64_t> counter{0};
        const auto id = counter.fetch_add(1);
        path_ = std::filesystem::temp_directory_path() /
                ("masktok_test_" + std::to_string(::getpid()) + "_" + std::to_string(id));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
}

/// Uniform random feature map, values in [-scale, scale].
inline masktok::FeatureMap random_features(masktok::SplitMix64& rng, std::size_t h, std::size_t w,
                                           std::size_t c, double scale = 10.0) {
    std::vector<float> data(h * w * c);
    for (float& v : data) {
        v = static_cast<float>((2.0 * rng.next_double() - 1.0) * scale);
    }
    return masktok::FeatureMap(h, w, c, std::move(data));
}

/// Uniform random probability stack.
inline masktok::MaskStack random_masks(masktok::SplitMix64& rng, std::size_t n, std::size_t h,
                                       std::size_t w) {
    std::vector<float> data(n * h * w);
    for (float& v : data) v = static_cast<float>(rng.next_double());
    return masktok::MaskStack(n, h, w, std::move(data));
}

/// ValidMasks from explicit (id, weights) rows; hard labels and areas are
/// derived with soft_to_hard.
inline masktok::ValidMasks make_valid(
    std::size_t h, std::size_t w,
    const std::vector<std::pair<std::uint32_t, std::vector<float>>>& rows) {
    masktok::ValidMasks v;
    v.height = h;
    v.width = w;
    for (const auto& [id, weights] : rows) {
        v.query_ids.push_back(id);
        v.soft.insert(v.soft.end(), weights.begin(), weights.end());
    }
    return masktok::soft_to_hard(v);
}

}  // namespace testutil
