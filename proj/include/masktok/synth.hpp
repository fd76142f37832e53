// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "masktok/bundle.hpp"
#include "masktok/mask_engine.hpp"
#include "masktok/tensor.hpp"

// Deterministic synthetic scenes: a feature map, a query probability stack
// (query 0 = background, queries 1..n = objects) and the ground-truth label
// map, all reproducible bit-for-bit from a 64-bit seed on any platform.
//
// Randomness comes from a single splitmix64 stream with a fixed draw order:
//   1. per object, in order: center x, center y, extent(s), peak
//      (rect draws half-width and half-height, blob draws one radius)
//   2. feature signatures, background first then objects, channel by channel
//   3. per-pixel feature noise in raster order, channel innermost
//
// Everything else is arithmetic with a fixed evaluation order; the only
// transcendental, exp, is computed by det_exp_neg below instead of libm so
// that no host math library can change the bytes.

namespace masktok {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// One-shot mix, used to derive per-scene seeds: splitmix64(seed ^ index).
inline std::uint64_t splitmix64(std::uint64_t value) {
    return splitmix64_next(value);
}

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() { return splitmix64_next(state_); }

    /// Uniform double in [0, 1), 53 mantissa bits.
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

/// exp(-x) for x >= 0 using only correctly-rounded IEEE operations
/// (+ - * /, floor, ldexp), so the result is identical on every host.
/// Absolute error is below 1e-13, far inside what mask values need.
inline double det_exp_neg(double x) {
    if (!(x >= 0.0)) throw ValidationError("det_exp_neg: argument must be >= 0");
    if (x > 745.0) return 0.0;  // would underflow to subnormal noise
    const double inv_ln2 = 1.4426950408889634;
    const double ln2 = 0.6931471805599453;
    const double y = x * inv_ln2;
    const double n = std::floor(y);
    const double t = (y - n) * ln2;  // [0, ln2)
    // e^t by a 13-term Horner Taylor series, exact order of operations.
    double p = 1.0;
    for (int k = 13; k >= 1; --k) p = 1.0 + p * t / static_cast<double>(k);
    return std::ldexp(1.0 / p, -static_cast<int>(n));
}

enum class ObjectKind : std::uint8_t { rect, blob };

inline std::string_view to_string(ObjectKind kind) {
    return kind == ObjectKind::rect ? "rect" : "blob";
}

inline ObjectKind object_kind_from_string(std::string_view s) {
    if (s == "rect") return ObjectKind::rect;
    if (s == "blob") return ObjectKind::blob;
    throw ValidationError("unknown object kind '" + std::string(s) + "'");
}

struct SceneSpec {
    std::uint64_t seed = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::size_t n_objects = 0;
    ObjectKind object_kind = ObjectKind::rect;
    double softness = 0.0;          // boundary blur; 0 = crisp analytic shape
    double feature_contrast = 4.0;  // scale separating per-object signatures
};

struct Scene {
    FeatureMap features;
    MaskStack masks;                    // query 0 = background
    std::vector<std::uint32_t> labels;  // ground truth, flat raster order
};

namespace detail {

struct ObjectGeom {
    double cx = 0.0, cy = 0.0;
    double half_w = 0.0, half_h = 0.0;  // blob keeps its radius in half_w
    double peak = 0.0;
};

// Object probability at a pixel. softness = 0 gives the crisp shape the
// ground-truth labels are defined on.
inline double object_prob(const ObjectGeom& g, ObjectKind kind, double softness, double px,
                          double py) {
    if (kind == ObjectKind::rect) {
        const double dx = std::max(std::abs(px - g.cx) - g.half_w, 0.0);
        const double dy = std::max(std::abs(py - g.cy) - g.half_h, 0.0);
        if (softness <= 0.0) return (dx == 0.0 && dy == 0.0) ? g.peak : 0.0;
        return g.peak * det_exp_neg((dx * dx + dy * dy) / (2.0 * softness * softness));
    }
    const double dx = px - g.cx;
    const double dy = py - g.cy;
    const double sigma = g.half_w * (1.0 + softness);
    return g.peak * det_exp_neg((dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

}  // namespace detail

inline Scene generate_scene(const SceneSpec& spec) {
    if (spec.height == 0 || spec.width == 0 || spec.channels == 0) {
        throw ValidationError("generate_scene: grid and channel dims must be positive");
    }
    if (spec.n_objects > spec.height * spec.width) {
        throw ValidationError("generate_scene: more objects than grid cells");
    }
    if (spec.softness < 0.0 || spec.feature_contrast < 0.0) {
        throw ValidationError("generate_scene: softness and contrast must be >= 0");
    }

    const std::size_t h = spec.height;
    const std::size_t w = spec.width;
    const std::size_t grid = h * w;
    const std::size_t n_queries = spec.n_objects + 1;
    SplitMix64 rng(spec.seed);

    // 1. geometry
    std::vector<detail::ObjectGeom> geoms(spec.n_objects);
    for (detail::ObjectGeom& g : geoms) {
        g.cx = rng.next_double() * static_cast<double>(w - 1);
        g.cy = rng.next_double() * static_cast<double>(h - 1);
        if (spec.object_kind == ObjectKind::rect) {
            g.half_w = (0.05 + 0.45 * rng.next_double()) * static_cast<double>(w);
            g.half_h = (0.05 + 0.45 * rng.next_double()) * static_cast<double>(h);
        } else {
            g.half_w = (0.08 + 0.25 * rng.next_double()) * static_cast<double>(std::min(h, w));
            g.half_h = g.half_w;
        }
        g.peak = 0.9 + 0.08 * rng.next_double();
    }

    // 2. signatures, background first
    std::vector<std::vector<double>> signatures(n_queries, std::vector<double>(spec.channels));
    for (auto& sig : signatures) {
        for (double& s : sig) s = 2.0 * rng.next_double() - 1.0;
    }

    // object masks at the requested softness, plus the crisp (softness 0)
    // values that define the ground truth
    std::vector<float> mask_data(n_queries * grid, 0.0f);
    std::vector<float> crisp(spec.n_objects * grid, 0.0f);
    for (std::size_t k = 0; k < spec.n_objects; ++k) {
        float* soft_row = mask_data.data() + (k + 1) * grid;
        float* crisp_row = crisp.data() + k * grid;
        std::size_t p = 0;
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x, ++p) {
                const double px = static_cast<double>(x);
                const double py = static_cast<double>(y);
                const double v =
                    detail::object_prob(geoms[k], spec.object_kind, spec.softness, px, py);
                soft_row[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
                const double v0 = spec.softness == 0.0
                                      ? v
                                      : detail::object_prob(geoms[k], spec.object_kind, 0.0, px, py);
                crisp_row[p] = static_cast<float>(std::clamp(v0, 0.0, 1.0));
            }
        }
    }
    // background query: complement of the strongest object
    for (std::size_t p = 0; p < grid; ++p) {
        float strongest = 0.0f;
        for (std::size_t k = 0; k < spec.n_objects; ++k) {
            strongest = std::max(strongest, mask_data[(k + 1) * grid + p]);
        }
        mask_data[p] = std::max(0.0f, 1.0f - strongest);
    }

    // ground truth from the crisp values, same argmax + lowest-id tie rule
    // the competitive filter uses
    std::vector<std::uint32_t> labels(grid, 0);
    for (std::size_t p = 0; p < grid; ++p) {
        float strongest = 0.0f;
        for (std::size_t k = 0; k < spec.n_objects; ++k) {
            strongest = std::max(strongest, crisp[k * grid + p]);
        }
        float best = std::max(0.0f, 1.0f - strongest);  // crisp background
        std::uint32_t best_id = 0;
        for (std::size_t k = 0; k < spec.n_objects; ++k) {
            if (crisp[k * grid + p] > best) {
                best = crisp[k * grid + p];
                best_id = static_cast<std::uint32_t>(k + 1);
            }
        }
        labels[p] = best_id;
    }

    // 3. features: owner signature plus uniform noise
    std::vector<float> feature_data(grid * spec.channels);
    std::size_t o = 0;
    for (std::size_t p = 0; p < grid; ++p) {
        const std::vector<double>& sig = signatures[labels[p]];
        for (std::size_t c = 0; c < spec.channels; ++c) {
            const double v = spec.feature_contrast * sig[c] + (rng.next_double() - 0.5);
            feature_data[o++] = static_cast<float>(v);
        }
    }

    return Scene{FeatureMap(h, w, spec.channels, std::move(feature_data)),
                 MaskStack(n_queries, h, w, std::move(mask_data)), std::move(labels)};
}

inline void write_scene_bundle(const std::filesystem::path& dir, const Scene& scene) {
    TensorMap tensors;
    tensors.emplace("features", to_tensor(scene.features));
    tensors.emplace("masks", to_tensor(scene.masks));
    tensors.emplace("labels",
                    labels_to_tensor(scene.labels, scene.masks.height(), scene.masks.width()));
    write_bundle(dir, tensors);
}

struct CorpusEntry {
    std::string name;
    std::uint64_t seed = 0;
};

inline std::string scene_dir_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%05zu", index);
    return buf;
}

/// Writes `count` scene bundles plus a corpus.json index. Scene i draws its
/// seed as splitmix64(seed ^ i), so corpora regenerate identically and scene
/// generation parallelizes without changing a byte.
inline std::vector<CorpusEntry> generate_corpus(const SceneSpec& base, std::size_t count,
                                                std::uint64_t seed,
                                                const std::filesystem::path& out_dir,
                                                std::size_t jobs = 1) {
    if (count == 0) throw ValidationError("generate_corpus: count must be >= 1");

    std::vector<CorpusEntry> entries(count);
    for (std::size_t i = 0; i < count; ++i) {
        entries[i] = {scene_dir_name(i), splitmix64(seed ^ static_cast<std::uint64_t>(i))};
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory '" + out_dir.string() + "': " + ec.message());

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                SceneSpec spec = base;
                spec.seed = entries[i].seed;
                write_scene_bundle(out_dir / entries[i].name, generate_scene(spec));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    const std::size_t n_workers = std::max<std::size_t>(1, std::min(jobs, count));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    nlohmann::json index;
    index["version"] = 1;
    index["count"] = count;
    index["seed"] = seed;
    index["grid"] = {base.height, base.width};
    index["channels"] = base.channels;
    index["objects"] = base.n_objects;
    index["kind"] = std::string(to_string(base.object_kind));
    index["softness"] = base.softness;
    index["contrast"] = base.feature_contrast;
    auto& scenes = index["scenes"] = nlohmann::json::array();
    for (const CorpusEntry& e : entries) {
        scenes.push_back({{"name", e.name}, {"seed", e.seed}});
    }
    detail::write_text_file(out_dir / "corpus.json", index.dump(2) + "\n");
    return entries;
}

}  // namespace masktok
