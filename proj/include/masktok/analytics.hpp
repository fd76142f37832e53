// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "masktok/tensor.hpp"

// Token-count statistics and analytic inference-cost estimators.

namespace masktok {

struct TokenCountStats {
    std::uint64_t min = 0;
    std::uint64_t max = 0;
    double mean = 0.0;
    double median = 0.0;  // lower-middle element for even lengths
    double sd = 0.0;      // population standard deviation
};

inline TokenCountStats compute_stats(std::span<const std::uint64_t> counts) {
    if (counts.empty()) throw ValidationError("compute_stats: empty count list");
    std::vector<std::uint64_t> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end());

    TokenCountStats stats;
    stats.min = sorted.front();
    stats.max = sorted.back();
    stats.median = static_cast<double>(sorted[(sorted.size() - 1) / 2]);

    double sum = 0.0;
    for (std::uint64_t v : sorted) sum += static_cast<double>(v);
    stats.mean = sum / static_cast<double>(sorted.size());

    double sq = 0.0;
    for (std::uint64_t v : sorted) {
        const double d = static_cast<double>(v) - stats.mean;
        sq += d * d;
    }
    stats.sd = std::sqrt(sq / static_cast<double>(sorted.size()));
    return stats;
}

struct HistogramBin {
    std::uint64_t start = 0;
    std::uint64_t frequency = 0;
};

/// Fixed-width bins covering [0, max(counts)], empty bins included, so the
/// frequencies always sum to the input length.
inline std::vector<HistogramBin> histogram(std::span<const std::uint64_t> counts,
                                           std::uint64_t bin_width) {
    if (bin_width == 0) throw ValidationError("histogram: bin width must be >= 1");
    if (counts.empty()) return {};
    const std::uint64_t max = *std::max_element(counts.begin(), counts.end());
    std::vector<HistogramBin> bins(max / bin_width + 1);
    for (std::size_t b = 0; b < bins.size(); ++b) {
        bins[b].start = static_cast<std::uint64_t>(b) * bin_width;
    }
    for (std::uint64_t v : counts) ++bins[v / bin_width].frequency;
    return bins;
}

// Reference per-image FLOPs of the vision stacks the estimators are usually
// pointed at (an OpenCLIP ConvNeXt-L backbone with a Mask2Former head, and
// the CLIP ViT-L/14 encoder it replaces).
inline constexpr double kConvNextLBackboneFlops = 1.44e12;
inline constexpr double kMask2FormerHeadFlops = 0.30e12;
inline constexpr double kSegmenterVisionFlops = kConvNextLBackboneFlops + kMask2FormerHeadFlops;
inline constexpr double kClipVitL14Flops = 1.91e12;

struct ModelCostConfig {
    std::uint64_t llm_params = 7'000'000'000;  // decoder parameter count
    std::uint64_t n_layers = 32;               // decoder layers
    std::uint64_t hidden_dim = 4096;
    std::uint64_t bytes_per_element = 2;       // 2 (fp16) or 4 (fp32)
    double vision_flops = kSegmenterVisionFlops;  // fixed per-image cost
    bool include_quadratic_attention = false;

    void validate() const {
        if (llm_params == 0 || n_layers == 0 || hidden_dim == 0) {
            throw ValidationError("ModelCostConfig: counts must be positive");
        }
        if (bytes_per_element != 2 && bytes_per_element != 4) {
            throw ValidationError("ModelCostConfig: bytes_per_element must be 2 or 4");
        }
        if (vision_flops < 0.0) {
            throw ValidationError("ModelCostConfig: vision_flops must be >= 0");
        }
    }
};

/// Key/value cache bytes for a prefill of n tokens:
/// 2 (K and V) * layers * tokens * hidden_dim * bytes_per_element.
inline std::uint64_t kv_cache_bytes(std::uint64_t n_tokens, const ModelCostConfig& cfg) {
    cfg.validate();
    const double estimate = 2.0 * static_cast<double>(cfg.n_layers) *
                            static_cast<double>(n_tokens) * static_cast<double>(cfg.hidden_dim) *
                            static_cast<double>(cfg.bytes_per_element);
    if (estimate > 1.8e19) throw ValidationError("kv_cache_bytes: result overflows 64 bits");
    return 2ULL * cfg.n_layers * n_tokens * cfg.hidden_dim * cfg.bytes_per_element;
}

/// Decoder prefill FLOPs for n visual tokens (fractional counts allowed so
/// corpus means plug in directly): vision_flops + 2*P*n, plus the quadratic
/// attention term 4*L*n^2*d when enabled.
inline double prefill_flops(double n_tokens, const ModelCostConfig& cfg) {
    cfg.validate();
    if (n_tokens < 0.0) throw ValidationError("prefill_flops: token count must be >= 0");
    double flops = cfg.vision_flops + 2.0 * static_cast<double>(cfg.llm_params) * n_tokens;
    if (cfg.include_quadratic_attention) {
        flops += 4.0 * static_cast<double>(cfg.n_layers) * n_tokens * n_tokens *
                 static_cast<double>(cfg.hidden_dim);
    }
    return flops;
}

struct ReductionReport {
    double flops_ratio = 0.0;
    double kv_ratio = 0.0;
    double token_ratio = 0.0;
};

/// Baseline/compressed ratios from the analytic formulas. The KV ratio
/// follows the linear model; reported figures elsewhere may use a different
/// accounting for the compressed side.
inline ReductionReport reduction_report(double baseline_tokens, const ModelCostConfig& baseline,
                                        double compressed_tokens,
                                        const ModelCostConfig& compressed) {
    if (baseline_tokens <= 0.0) {
        throw ValidationError("reduction_report: baseline token count must be positive");
    }
    if (compressed_tokens <= 0.0) {
        throw ValidationError("reduction_report: compressed token count is zero");
    }
    const double base_flops = prefill_flops(baseline_tokens, baseline);
    const double comp_flops = prefill_flops(compressed_tokens, compressed);
    if (comp_flops == 0.0) throw ValidationError("reduction_report: compressed FLOPs is zero");

    auto kv_linear = [](double n, const ModelCostConfig& cfg) {
        return 2.0 * static_cast<double>(cfg.n_layers) * n * static_cast<double>(cfg.hidden_dim) *
               static_cast<double>(cfg.bytes_per_element);
    };
    const double comp_kv = kv_linear(compressed_tokens, compressed);
    if (comp_kv == 0.0) throw ValidationError("reduction_report: compressed KV cache is zero");

    ReductionReport report;
    report.flops_ratio = base_flops / comp_flops;
    report.kv_ratio = kv_linear(baseline_tokens, baseline) / comp_kv;
    report.token_ratio = baseline_tokens / compressed_tokens;
    return report;
}

}  // namespace masktok
