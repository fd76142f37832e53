// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "masktok/bundle.hpp"
#include "masktok/fixed_rate.hpp"
#include "masktok/merge.hpp"

// Token sequences serialize as a bundle of two tensors plus metadata:
//
//   tokens.bin     N x C f32
//   centroids.bin  N f32
//   meta.json      { version, grid, sources, kinds, and for fixed-rate runs
//                    strategy, n_target, consumed_budget, groups }

namespace masktok {

namespace detail {

inline nlohmann::json token_meta(const TokenSequence& seq) {
    nlohmann::json meta;
    meta["version"] = 1;
    meta["grid"] = {seq.grid_height, seq.grid_width};
    auto& sources = meta["sources"] = nlohmann::json::array();
    auto& kinds = meta["kinds"] = nlohmann::json::array();
    for (const MergedToken& t : seq.tokens) {
        sources.push_back(t.source);
        kinds.push_back(std::string(to_string(t.kind)));
    }
    return meta;
}

inline void write_token_tensors(const std::filesystem::path& dir, const TokenSequence& seq,
                                const nlohmann::json& meta) {
    if (seq.tokens.empty()) {
        throw ValidationError("write_token_bundle: empty token sequence");
    }
    const std::size_t channels = seq.tokens.front().features.size();
    Tensor tokens{{seq.tokens.size(), channels}, {}};
    Tensor centroids{{seq.tokens.size()}, {}};
    tokens.data.reserve(seq.tokens.size() * channels);
    centroids.data.reserve(seq.tokens.size());
    for (const MergedToken& t : seq.tokens) {
        if (t.features.size() != channels) {
            throw ValidationError("write_token_bundle: inconsistent channel counts");
        }
        tokens.data.insert(tokens.data.end(), t.features.begin(), t.features.end());
        centroids.data.push_back(static_cast<float>(t.centroid));
    }
    TensorMap tensors;
    tensors.emplace("tokens", std::move(tokens));
    tensors.emplace("centroids", std::move(centroids));
    write_bundle(dir, tensors);
    detail::write_text_file(dir / "meta.json", meta.dump(2) + "\n");
}

}  // namespace detail

inline void write_token_bundle(const std::filesystem::path& dir, const TokenSequence& seq) {
    detail::write_token_tensors(dir, seq, detail::token_meta(seq));
}

inline void write_token_bundle(const std::filesystem::path& dir, const FixedRateResult& result) {
    nlohmann::json meta = detail::token_meta(result.tokens);
    meta["strategy"] = std::string(to_string(result.strategy));
    meta["n_target"] = result.n_target;
    meta["consumed_budget"] = result.consumed_budget;
    meta["groups"] = result.groups;
    detail::write_token_tensors(dir, result.tokens, meta);
}

inline TokenSequence read_token_bundle(const std::filesystem::path& dir) {
    const TensorMap tensors = read_bundle(dir);
    const auto tok_it = tensors.find("tokens");
    const auto cen_it = tensors.find("centroids");
    if (tok_it == tensors.end() || cen_it == tensors.end()) {
        throw ValidationError("token bundle needs 'tokens' and 'centroids' tensors");
    }
    const Tensor& tok = tok_it->second;
    const Tensor& cen = cen_it->second;
    if (tok.shape.size() != 2 || cen.shape.size() != 1 || cen.shape[0] != tok.shape[0]) {
        throw ValidationError("token bundle tensor shapes are inconsistent");
    }
    const nlohmann::json meta = detail::parse_json_file(dir / "meta.json");
    const auto& sources = meta.at("sources");
    const auto& kinds = meta.at("kinds");
    if (sources.size() != tok.shape[0] || kinds.size() != tok.shape[0]) {
        throw ValidationError("token bundle meta does not match tensor shapes");
    }

    TokenSequence seq;
    seq.grid_height = meta.at("grid").at(0).get<std::size_t>();
    seq.grid_width = meta.at("grid").at(1).get<std::size_t>();
    const std::size_t n = tok.shape[0];
    const std::size_t channels = tok.shape[1];
    seq.tokens.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        MergedToken t;
        t.features.assign(tok.data.begin() + static_cast<long>(i * channels),
                          tok.data.begin() + static_cast<long>((i + 1) * channels));
        t.centroid = cen.data[i];
        t.source = sources.at(i).get<std::uint32_t>();
        t.kind = token_kind_from_string(kinds.at(i).get<std::string>());
        seq.tokens.push_back(std::move(t));
    }
    return seq;
}

}  // namespace masktok
