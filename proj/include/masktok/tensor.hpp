// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace masktok {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid data or configuration. The CLI reports these with exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Filesystem or serialization failure. The CLI reports these with exit code 3.
class IoError : public Error {
public:
    using Error::Error;
};

// Mask probabilities may overshoot [0, 1] by at most this much (upstream
// float error); overshoots within the slack are clamped, larger ones rejected.
inline constexpr float kMaskRangeSlack = 1e-6f;

namespace detail {

inline std::string shape_string(std::span<const std::size_t> dims) {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(dims[i]);
    }
    return s;
}

}  // namespace detail

/// Dense H x W x C feature tensor, row-major with channel innermost.
/// The flattened pixel index i = y*W + x follows raster order (top to
/// bottom, left to right) and is the spatial coordinate used for centroids.
class FeatureMap {
public:
    FeatureMap(std::size_t height, std::size_t width, std::size_t channels,
               std::vector<float> data)
        : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
        if (height_ == 0 || width_ == 0 || channels_ == 0) {
            throw ValidationError("FeatureMap: dimensions must be positive");
        }
        if (data_.size() != height_ * width_ * channels_) {
            const std::size_t dims[] = {height_, width_, channels_};
            throw ValidationError("FeatureMap: data length " + std::to_string(data_.size()) +
                                  " does not match shape " + detail::shape_string(dims));
        }
        for (float v : data_) {
            if (!std::isfinite(v)) {
                throw ValidationError("FeatureMap: non-finite element");
            }
        }
    }

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t channels() const { return channels_; }
    std::size_t pixels() const { return height_ * width_; }

    std::span<const float> data() const { return data_; }

    /// C-dim feature vector of the pixel with flattened raster index i.
    std::span<const float> pixel(std::size_t flat_index) const {
        return std::span<const float>(data_).subspan(flat_index * channels_, channels_);
    }

    float at(std::size_t y, std::size_t x, std::size_t c) const {
        return data_[(y * width_ + x) * channels_ + c];
    }

private:
    std::size_t height_;
    std::size_t width_;
    std::size_t channels_;
    std::vector<float> data_;
};

/// N query probability maps over an h x w grid, values in [0, 1].
/// Layout is row-major with the query index outermost: value(q, y, x) =
/// data[q*h*w + y*w + x].
class MaskStack {
public:
    MaskStack(std::size_t count, std::size_t height, std::size_t width,
              std::vector<float> data)
        : count_(count), height_(height), width_(width), data_(std::move(data)) {
        if (count_ == 0) {
            throw ValidationError("MaskStack: at least one query mask required");
        }
        if (height_ == 0 || width_ == 0) {
            throw ValidationError("MaskStack: dimensions must be positive");
        }
        if (data_.size() != count_ * height_ * width_) {
            const std::size_t dims[] = {count_, height_, width_};
            throw ValidationError("MaskStack: data length " + std::to_string(data_.size()) +
                                  " does not match shape " + detail::shape_string(dims));
        }
        for (float& v : data_) {
            // NaN fails both comparisons and is rejected.
            if (!(v >= -kMaskRangeSlack && v <= 1.0f + kMaskRangeSlack)) {
                throw ValidationError("MaskStack: probability outside [0, 1]");
            }
            v = std::clamp(v, 0.0f, 1.0f);
        }
    }

    std::size_t count() const { return count_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t grid_size() const { return height_ * width_; }

    std::span<const float> data() const { return data_; }

    /// Probability map of query q, h*w values in raster order.
    std::span<const float> mask(std::size_t q) const {
        return std::span<const float>(data_).subspan(q * grid_size(), grid_size());
    }

    float at(std::size_t q, std::size_t y, std::size_t x) const {
        return data_[(q * height_ + y) * width_ + x];
    }

private:
    std::size_t count_;
    std::size_t height_;
    std::size_t width_;
    std::vector<float> data_;
};

/// Shape-erased f32 tensor, the unit stored in on-disk bundles.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<float> data;  // row-major

    std::size_t element_count() const {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }
};

inline Tensor to_tensor(const FeatureMap& map) {
    return Tensor{{map.height(), map.width(), map.channels()},
                  std::vector<float>(map.data().begin(), map.data().end())};
}

inline Tensor to_tensor(const MaskStack& masks) {
    return Tensor{{masks.count(), masks.height(), masks.width()},
                  std::vector<float>(masks.data().begin(), masks.data().end())};
}

inline FeatureMap feature_map_from_tensor(const Tensor& t, const std::string& name = "features") {
    if (t.shape.size() != 3) {
        throw ValidationError("tensor '" + name + "': feature maps need a HxWxC shape, got rank " +
                              std::to_string(t.shape.size()));
    }
    try {
        return FeatureMap(t.shape[0], t.shape[1], t.shape[2], t.data);
    } catch (const ValidationError& e) {
        throw ValidationError("tensor '" + name + "': " + e.what());
    }
}

inline MaskStack mask_stack_from_tensor(const Tensor& t, const std::string& name = "masks") {
    if (t.shape.size() != 3) {
        throw ValidationError("tensor '" + name + "': mask stacks need a NxHxW shape, got rank " +
                              std::to_string(t.shape.size()));
    }
    try {
        return MaskStack(t.shape[0], t.shape[1], t.shape[2], t.data);
    } catch (const ValidationError& e) {
        throw ValidationError("tensor '" + name + "': " + e.what());
    }
}

}  // namespace masktok
