// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "masktok/tensor.hpp"

// On-disk tensor container. A bundle is a directory holding
//
//   manifest.json   { "version": 1, "tensors": { "<name>":
//                     { "dtype": "f32", "shape": [..], "file": "<name>.bin" } } }
//   <name>.bin      raw little-endian IEEE-754 f32, row-major, no header
//
// The layout is fixed little-endian regardless of host endianness, so a
// bundle written on any machine reloads bit-identically on any other.

namespace masktok {

using TensorMap = std::map<std::string, Tensor>;

inline bool valid_tensor_name(std::string_view name) {
    if (name.empty()) return false;
    for (char ch : name) {
        const bool ok = (ch >= 'A' && ch <= 'Z') || (ch >= 'a' && ch <= 'z') ||
                        (ch >= '0' && ch <= '9') || ch == '_';
        if (!ok) return false;
    }
    return true;
}

namespace detail {

inline void write_f32_le(std::ostream& out, std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(float)));
    } else {
        for (float v : values) {
            const auto bits = std::bit_cast<std::uint32_t>(v);
            const char bytes[4] = {static_cast<char>(bits & 0xffu),
                                   static_cast<char>((bits >> 8) & 0xffu),
                                   static_cast<char>((bits >> 16) & 0xffu),
                                   static_cast<char>((bits >> 24) & 0xffu)};
            out.write(bytes, 4);
        }
    }
}

inline std::vector<float> read_f32_le(std::istream& in, std::size_t count) {
    std::vector<float> values(count);
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            unsigned char bytes[4];
            in.read(reinterpret_cast<char*>(bytes), 4);
            const std::uint32_t bits = std::uint32_t(bytes[0]) | (std::uint32_t(bytes[1]) << 8) |
                                       (std::uint32_t(bytes[2]) << 16) |
                                       (std::uint32_t(bytes[3]) << 24);
            values[i] = std::bit_cast<float>(bits);
        }
    }
    return values;
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline nlohmann::json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("'" + path.string() + "': " + e.what());
    }
}

}  // namespace detail

inline void write_bundle(const std::filesystem::path& dir,
                         std::span<const std::pair<std::string, Tensor>> tensors) {
    std::set<std::string> seen;
    for (const auto& [name, tensor] : tensors) {
        if (!valid_tensor_name(name)) {
            throw ValidationError("tensor name '" + name + "' is not [A-Za-z0-9_]+");
        }
        if (!seen.insert(name).second) {
            throw ValidationError("duplicate tensor name '" + name + "'");
        }
        if (tensor.data.size() != tensor.element_count()) {
            throw ValidationError("tensor '" + name + "': data length does not match shape");
        }
    }

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());

    nlohmann::json manifest;
    manifest["version"] = 1;
    auto& entries = manifest["tensors"] = nlohmann::json::object();
    for (const auto& [name, tensor] : tensors) {
        const std::string file = name + ".bin";
        std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + (dir / file).string() + "' for writing");
        detail::write_f32_le(out, tensor.data);
        if (!out) throw IoError("write failed for '" + (dir / file).string() + "'");
        entries[name] = {{"dtype", "f32"}, {"shape", tensor.shape}, {"file", file}};
    }
    detail::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline void write_bundle(const std::filesystem::path& dir, const TensorMap& tensors) {
    std::vector<std::pair<std::string, Tensor>> list(tensors.begin(), tensors.end());
    write_bundle(dir, std::span<const std::pair<std::string, Tensor>>(list));
}

inline TensorMap read_bundle(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) {
        throw IoError("missing manifest.json in '" + dir.string() + "'");
    }
    const nlohmann::json manifest = detail::parse_json_file(manifest_path);
    if (!manifest.is_object() || manifest.value("version", 0) != 1) {
        throw ValidationError("'" + manifest_path.string() + "': unsupported manifest version");
    }
    if (!manifest.contains("tensors") || !manifest["tensors"].is_object()) {
        throw ValidationError("'" + manifest_path.string() + "': missing tensors object");
    }

    TensorMap out;
    for (const auto& [name, entry] : manifest["tensors"].items()) {
        if (!valid_tensor_name(name)) {
            throw ValidationError("manifest tensor name '" + name + "' is not [A-Za-z0-9_]+");
        }
        if (entry.value("dtype", "") != "f32") {
            throw ValidationError("tensor '" + name + "': only dtype f32 is supported");
        }
        if (!entry.contains("shape") || !entry["shape"].is_array() || entry["shape"].empty()) {
            throw ValidationError("tensor '" + name + "': missing shape");
        }
        Tensor tensor;
        for (const auto& d : entry["shape"]) {
            if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0) {
                throw ValidationError("tensor '" + name + "': shape entries must be positive");
            }
            tensor.shape.push_back(d.get<std::size_t>());
        }
        const std::string file = entry.value("file", "");
        if (file.empty() || file.find('/') != std::string::npos ||
            file.find("..") != std::string::npos) {
            throw ValidationError("tensor '" + name + "': bad payload file name '" + file + "'");
        }
        const auto payload = dir / file;
        if (!std::filesystem::exists(payload)) {
            throw IoError("tensor '" + name + "': missing payload '" + payload.string() + "'");
        }
        const std::uintmax_t byte_size = std::filesystem::file_size(payload);
        const std::size_t expected = tensor.element_count() * sizeof(float);
        if (byte_size != expected) {
            throw ValidationError("tensor '" + name + "': payload is " + std::to_string(byte_size) +
                                  " bytes, shape requires " + std::to_string(expected));
        }
        std::ifstream in(payload, std::ios::binary);
        if (!in) throw IoError("cannot open '" + payload.string() + "'");
        tensor.data = detail::read_f32_le(in, tensor.element_count());
        if (!in) throw IoError("read failed for '" + payload.string() + "'");
        out.emplace(name, std::move(tensor));
    }
    return out;
}

/// Typed lookup; validates FeatureMap invariants (finiteness).
inline FeatureMap read_feature_map(const TensorMap& tensors, const std::string& name) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw ValidationError("bundle has no tensor '" + name + "'");
    return feature_map_from_tensor(it->second, name);
}

/// Typed lookup; validates MaskStack invariants ([0,1] range with slack).
inline MaskStack read_mask_stack(const TensorMap& tensors, const std::string& name) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw ValidationError("bundle has no tensor '" + name + "'");
    return mask_stack_from_tensor(it->second, name);
}

}  // namespace masktok
