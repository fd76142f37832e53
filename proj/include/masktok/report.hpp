// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "masktok/analytics.hpp"

// CSV / JSON / SVG emitters for stats tables and token-count histograms.
// Number formatting goes through to_chars (shortest round-trip), so emitted
// reports are byte-stable across hosts and locales.

namespace masktok {

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string stats_csv(std::string_view label, const TokenCountStats& stats) {
    std::string out = "label,min,max,mean,median,sd\n";
    out += label;
    out += ',';
    out += std::to_string(stats.min);
    out += ',';
    out += std::to_string(stats.max);
    out += ',';
    out += detail::format_double(stats.mean);
    out += ',';
    out += detail::format_double(stats.median);
    out += ',';
    out += detail::format_double(stats.sd);
    out += '\n';
    return out;
}

inline nlohmann::json stats_to_json(std::string_view label, const TokenCountStats& stats) {
    return nlohmann::json{{"label", std::string(label)}, {"min", stats.min},
                          {"max", stats.max},           {"mean", stats.mean},
                          {"median", stats.median},     {"sd", stats.sd}};
}

inline std::string histogram_csv(const std::vector<HistogramBin>& bins) {
    std::string out = "bin_start,frequency\n";
    for (const HistogramBin& b : bins) {
        out += std::to_string(b.start);
        out += ',';
        out += std::to_string(b.frequency);
        out += '\n';
    }
    return out;
}

/// Static bar chart: token-count intervals on the x axis, frequencies on y.
inline std::string histogram_svg(const std::vector<HistogramBin>& bins, std::string_view title) {
    const int width = 640, height = 400;
    const int left = 56, right = 16, top = 40, bottom = 48;
    const int plot_w = width - left - right;
    const int plot_h = height - top - bottom;

    std::uint64_t max_freq = 1;
    for (const HistogramBin& b : bins) max_freq = std::max(max_freq, b.frequency);

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
           " " + std::to_string(height) + "\">\n";
    svg += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "  <text x=\"" + std::to_string(width / 2) +
           "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
           std::string(title) + "</text>\n";

    // axes
    svg += "  <line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(top) + "\" x2=\"" +
           std::to_string(left) + "\" y2=\"" + std::to_string(top + plot_h) +
           "\" stroke=\"black\"/>\n";
    svg += "  <line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(top + plot_h) +
           "\" x2=\"" + std::to_string(left + plot_w) + "\" y2=\"" + std::to_string(top + plot_h) +
           "\" stroke=\"black\"/>\n";

    // y ticks at 0, 1/2 and max
    for (int i = 0; i <= 2; ++i) {
        const std::uint64_t value = max_freq * static_cast<std::uint64_t>(i) / 2;
        const int y = top + plot_h - static_cast<int>(static_cast<double>(plot_h) *
                                                      static_cast<double>(value) /
                                                      static_cast<double>(max_freq));
        svg += "  <text x=\"" + std::to_string(left - 6) + "\" y=\"" + std::to_string(y + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
               std::to_string(value) + "</text>\n";
    }

    if (!bins.empty()) {
        const int slot = plot_w / static_cast<int>(bins.size());
        const int bar = std::max(1, slot - 2);
        const std::size_t label_step = bins.size() > 16 ? (bins.size() + 15) / 16 : 1;
        for (std::size_t i = 0; i < bins.size(); ++i) {
            const int x = left + static_cast<int>(i) * slot + 1;
            const int bh = static_cast<int>(static_cast<double>(plot_h) *
                                            static_cast<double>(bins[i].frequency) /
                                            static_cast<double>(max_freq));
            const int y = top + plot_h - bh;
            svg += "  <rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
                   "\" width=\"" + std::to_string(bar) + "\" height=\"" + std::to_string(bh) +
                   "\" fill=\"#4878a8\"/>\n";
            if (i % label_step == 0) {
                svg += "  <text x=\"" + std::to_string(x + bar / 2) + "\" y=\"" +
                       std::to_string(top + plot_h + 16) +
                       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
                       std::to_string(bins[i].start) + "</text>\n";
            }
        }
    }
    svg += "  <text x=\"" + std::to_string(left + plot_w / 2) + "\" y=\"" +
           std::to_string(height - 12) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">token count"
           "</text>\n";
    svg += "</svg>\n";
    return svg;
}

}  // namespace masktok
