// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
//
// masktok CLI: runs the mask-guided token compression pipeline over tensor
// bundles, generates synthetic corpora, aggregates run statistics and
// evaluates the analytic cost estimators.
//
// Run summaries go to stdout as JSON (one line per scene); diagnostics go
// to stderr. Exit codes: 0 success, 2 validation error, 3 I/O error.

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "masktok/masktok.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class PipelineMode { adaptive_soft, adaptive_hard, fixed_rate };

PipelineMode pipeline_mode_from_string(const std::string& s) {
    if (s == "adaptive_soft") return PipelineMode::adaptive_soft;
    if (s == "adaptive_hard") return PipelineMode::adaptive_hard;
    if (s == "fixed_rate") return PipelineMode::fixed_rate;
    throw masktok::ValidationError("unknown mode '" + s + "'");
}

struct PipelineOptions {
    std::string in;
    std::string out;
    std::string mode;
    std::optional<std::int64_t> n_target;
    std::optional<std::string> strategy;
    std::string order = "downsample_first";
    std::vector<std::string> emit = {"tokens"};
    std::size_t jobs = 1;
    std::uint64_t bin_width = 10;
    std::string config;
};

struct SynthOptions {
    std::string out;
    std::size_t count = 1;
    std::uint64_t seed = 0;
    std::size_t height = 16, width = 16, channels = 8, objects = 3;
    std::string kind = "rect";
    double softness = 0.0;
    double contrast = 4.0;
    std::size_t jobs = 1;
};

struct StatsOptions {
    std::string in;
    std::string field = "tokens";
    std::string label = "corpus";
    std::uint64_t bin_width = 10;
    std::string out = ".";
    std::vector<std::string> emit = {"json"};
};

struct EstimateOptions {
    double tokens = 0.0;
    std::uint64_t llm_params = 7'000'000'000ULL;
    std::uint64_t layers = 32;
    std::uint64_t hidden_dim = 4096;
    std::uint64_t bytes_per_element = 2;
    double vision_flops = masktok::kSegmenterVisionFlops;
    bool quadratic = false;
    std::optional<double> baseline_tokens;
    double baseline_vision_flops = masktok::kClipVitL14Flops;
};

struct ValidateOptions {
    std::string in;
};

bool has_emit(const std::vector<std::string>& emit, std::string_view what) {
    for (const auto& e : emit) {
        if (e == what) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// pipeline

struct ResolvedPipeline {
    PipelineMode mode = PipelineMode::adaptive_hard;
    std::size_t n_target = 0;
    masktok::MergeStrategy strategy = masktok::MergeStrategy::large_first;
    bool filter_first = false;
    bool emit_tokens = true;
};

json run_pipeline_single(const fs::path& in, const fs::path& out, const ResolvedPipeline& rp) {
    const masktok::TensorMap tensors = masktok::read_bundle(in);
    const masktok::FeatureMap features = masktok::read_feature_map(tensors, "features");
    const masktok::MaskStack masks = masktok::read_mask_stack(tensors, "masks");

    const bool needs_resize =
        masks.height() != features.height() || masks.width() != features.width();
    masktok::ValidMasks valid;
    if (rp.filter_first) {
        valid = masktok::competitive_filter(masks);
        if (needs_resize) {
            valid = masktok::downsample_valid(valid, features.height(), features.width());
        }
    } else {
        if (needs_resize) {
            valid = masktok::competitive_filter(
                masktok::downsample_masks(masks, features.height(), features.width()));
        } else {
            valid = masktok::competitive_filter(masks);
        }
    }

    json summary;
    summary["input"] = in.string();
    summary["grid"] = {features.height(), features.width()};
    summary["masks_retained"] = valid.query_ids.size();

    std::size_t token_count = 0;
    switch (rp.mode) {
        case PipelineMode::adaptive_soft: {
            summary["mode"] = "adaptive_soft";
            const masktok::TokenSequence seq = masktok::merge_soft(features, valid);
            token_count = seq.tokens.size();
            if (rp.emit_tokens) masktok::write_token_bundle(out, seq);
            break;
        }
        case PipelineMode::adaptive_hard: {
            summary["mode"] = "adaptive_hard";
            const masktok::TokenSequence seq = masktok::merge_hard(features, valid);
            token_count = seq.tokens.size();
            if (rp.emit_tokens) masktok::write_token_bundle(out, seq);
            break;
        }
        case PipelineMode::fixed_rate: {
            summary["mode"] = "fixed_rate";
            const masktok::FixedRateResult result = masktok::fixed_rate_merge(
                features, valid, masktok::BudgetPlan{rp.n_target, rp.strategy});
            token_count = result.tokens.tokens.size();
            summary["n_target"] = result.n_target;
            summary["strategy"] = std::string(masktok::to_string(result.strategy));
            summary["consumed_budget"] = result.consumed_budget;
            summary["overshoot"] = token_count > result.n_target;
            if (rp.emit_tokens) masktok::write_token_bundle(out, result);
            break;
        }
    }
    summary["tokens"] = token_count;
    if (rp.emit_tokens) summary["output"] = out.string();
    return summary;
}

void apply_pipeline_config(const CLI::App* cmd, PipelineOptions& opts) {
    if (opts.config.empty()) return;
    const json cfg = masktok::detail::parse_json_file(opts.config);
    if (!cfg.is_object()) throw masktok::ValidationError("config must be a JSON object");
    auto unset = [&](const std::string& flag) {
        return cmd->get_option(flag)->count() == 0;
    };
    if (cfg.contains("mode") && unset("--mode")) opts.mode = cfg["mode"].get<std::string>();
    if (cfg.contains("in") && unset("--in")) opts.in = cfg["in"].get<std::string>();
    if (cfg.contains("out") && unset("--out")) opts.out = cfg["out"].get<std::string>();
    if (cfg.contains("n_target") && unset("--n-target")) {
        opts.n_target = cfg["n_target"].get<std::int64_t>();
    }
    if (cfg.contains("strategy") && unset("--strategy")) {
        opts.strategy = cfg["strategy"].get<std::string>();
    }
    if (cfg.contains("order") && unset("--order")) opts.order = cfg["order"].get<std::string>();
    if (cfg.contains("emit") && unset("--emit")) {
        opts.emit = cfg["emit"].get<std::vector<std::string>>();
    }
    if (cfg.contains("jobs") && unset("--jobs")) opts.jobs = cfg["jobs"].get<std::size_t>();
    if (cfg.contains("bin_width") && unset("--bin-width")) {
        opts.bin_width = cfg["bin_width"].get<std::uint64_t>();
    }
}

int cmd_pipeline(const CLI::App* cmd, PipelineOptions opts) {
    apply_pipeline_config(cmd, opts);
    if (opts.in.empty()) throw masktok::ValidationError("pipeline: --in is required");
    if (opts.out.empty()) throw masktok::ValidationError("pipeline: --out is required");
    if (opts.mode.empty()) throw masktok::ValidationError("pipeline: --mode is required");
    for (const auto& e : opts.emit) {
        if (e != "tokens" && e != "stats" && e != "svg") {
            throw masktok::ValidationError("pipeline: unknown emit target '" + e + "'");
        }
    }

    ResolvedPipeline rp;
    rp.mode = pipeline_mode_from_string(opts.mode);
    rp.emit_tokens = has_emit(opts.emit, "tokens");
    if (opts.order == "filter_first") {
        rp.filter_first = true;
    } else if (opts.order != "downsample_first") {
        throw masktok::ValidationError("pipeline: unknown order '" + opts.order + "'");
    }
    if (rp.mode == PipelineMode::fixed_rate) {
        if (!opts.n_target) {
            throw masktok::ValidationError("pipeline: fixed_rate mode requires --n-target");
        }
        if (*opts.n_target < 1) {
            throw masktok::ValidationError("pipeline: --n-target must be >= 1");
        }
        rp.n_target = static_cast<std::size_t>(*opts.n_target);
        if (opts.strategy) {
            rp.strategy = masktok::merge_strategy_from_string(*opts.strategy);
        }
    } else {
        if (opts.n_target) {
            throw masktok::ValidationError("pipeline: adaptive modes reject --n-target");
        }
        if (opts.strategy) {
            throw masktok::ValidationError("pipeline: adaptive modes reject --strategy");
        }
    }

    const fs::path in_path(opts.in);
    const fs::path out_path(opts.out);

    // A corpus.json marks a multi-scene input; otherwise a single bundle.
    std::vector<std::string> scene_names;
    if (fs::exists(in_path / "corpus.json")) {
        const json corpus = masktok::detail::parse_json_file(in_path / "corpus.json");
        for (const auto& scene : corpus.at("scenes")) {
            scene_names.push_back(scene.at("name").get<std::string>());
        }
        if (scene_names.empty()) throw masktok::ValidationError("corpus lists no scenes");
    }

    std::vector<std::uint64_t> token_counts;
    if (scene_names.empty()) {
        const json summary = run_pipeline_single(in_path, out_path, rp);
        std::cout << summary.dump() << "\n";
        token_counts.push_back(summary.at("tokens").get<std::uint64_t>());
    } else {
        std::vector<json> summaries(scene_names.size());
        std::vector<std::exception_ptr> errors(scene_names.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= scene_names.size()) return;
                try {
                    summaries[i] = run_pipeline_single(in_path / scene_names[i],
                                                       out_path / scene_names[i], rp);
                    summaries[i]["scene"] = scene_names[i];
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        const std::size_t n_workers =
            std::max<std::size_t>(1, std::min(opts.jobs, scene_names.size()));
        if (n_workers == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
            for (std::thread& t : pool) t.join();
        }

        int worst = 0;
        for (std::size_t i = 0; i < scene_names.size(); ++i) {
            if (errors[i]) {
                try {
                    std::rethrow_exception(errors[i]);
                } catch (const masktok::ValidationError& e) {
                    std::cerr << "error: scene " << scene_names[i] << ": " << e.what() << "\n";
                    worst = 2;
                } catch (const masktok::IoError& e) {
                    std::cerr << "error: scene " << scene_names[i] << ": " << e.what() << "\n";
                    if (worst != 2) worst = 3;
                }
                continue;
            }
            std::cout << summaries[i].dump() << "\n";
            token_counts.push_back(summaries[i].at("tokens").get<std::uint64_t>());
        }
        if (worst != 0) return worst;
    }

    if (has_emit(opts.emit, "stats")) {
        const masktok::TokenCountStats stats = masktok::compute_stats(token_counts);
        json line;
        line["scenes"] = token_counts.size();
        line["stats"] = masktok::stats_to_json("tokens", stats);
        std::cout << line.dump() << "\n";
    }
    if (has_emit(opts.emit, "svg")) {
        const auto bins = masktok::histogram(token_counts, opts.bin_width);
        fs::create_directories(out_path);
        masktok::detail::write_text_file(out_path / "token_histogram.svg",
                                         masktok::histogram_svg(bins, "token distribution"));
    }
    return 0;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const SynthOptions& opts) {
    masktok::SceneSpec spec;
    spec.height = opts.height;
    spec.width = opts.width;
    spec.channels = opts.channels;
    spec.n_objects = opts.objects;
    spec.object_kind = masktok::object_kind_from_string(opts.kind);
    spec.softness = opts.softness;
    spec.feature_contrast = opts.contrast;

    const auto entries =
        masktok::generate_corpus(spec, opts.count, opts.seed, fs::path(opts.out), opts.jobs);
    json summary;
    summary["out"] = opts.out;
    summary["count"] = entries.size();
    summary["seed"] = opts.seed;
    std::cout << summary.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// stats

int cmd_stats(const StatsOptions& opts) {
    std::istream* in = &std::cin;
    std::ifstream file;
    if (opts.in != "-") {
        file.open(opts.in);
        if (!file) throw masktok::IoError("cannot open '" + opts.in + "'");
        in = &file;
    }
    std::vector<std::uint64_t> counts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(*in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json entry;
        try {
            entry = json::parse(line);
        } catch (const json::exception& e) {
            throw masktok::ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!entry.contains(opts.field)) continue;  // e.g. trailing stats lines
        counts.push_back(entry.at(opts.field).get<std::uint64_t>());
    }
    if (counts.empty()) {
        throw masktok::ValidationError("no '" + opts.field + "' values found in input");
    }

    const masktok::TokenCountStats stats = masktok::compute_stats(counts);
    json out;
    out["label"] = opts.label;
    out["count"] = counts.size();
    out["stats"] = masktok::stats_to_json(opts.label, stats);
    std::cout << out.dump() << "\n";

    if (has_emit(opts.emit, "csv")) {
        fs::create_directories(opts.out);
        masktok::detail::write_text_file(fs::path(opts.out) / "stats.csv",
                                         masktok::stats_csv(opts.label, stats));
        const auto bins = masktok::histogram(counts, opts.bin_width);
        masktok::detail::write_text_file(fs::path(opts.out) / "histogram.csv",
                                         masktok::histogram_csv(bins));
    }
    if (has_emit(opts.emit, "svg")) {
        fs::create_directories(opts.out);
        const auto bins = masktok::histogram(counts, opts.bin_width);
        masktok::detail::write_text_file(fs::path(opts.out) / "token_histogram.svg",
                                         masktok::histogram_svg(bins, opts.label));
    }
    return 0;
}

// ---------------------------------------------------------------------------
// estimate

int cmd_estimate(const EstimateOptions& opts) {
    masktok::ModelCostConfig cfg;
    cfg.llm_params = opts.llm_params;
    cfg.n_layers = opts.layers;
    cfg.hidden_dim = opts.hidden_dim;
    cfg.bytes_per_element = opts.bytes_per_element;
    cfg.vision_flops = opts.vision_flops;
    cfg.include_quadratic_attention = opts.quadratic;

    json out;
    out["tokens"] = opts.tokens;
    out["flops"] = masktok::prefill_flops(opts.tokens, cfg);
    if (opts.tokens >= 0.0 && opts.tokens == std::floor(opts.tokens)) {
        const auto bytes =
            masktok::kv_cache_bytes(static_cast<std::uint64_t>(opts.tokens), cfg);
        out["kv_cache_bytes"] = bytes;
        out["kv_cache_mib"] = static_cast<double>(bytes) / (1024.0 * 1024.0);
    } else {
        const double bytes = 2.0 * static_cast<double>(cfg.n_layers) * opts.tokens *
                             static_cast<double>(cfg.hidden_dim) *
                             static_cast<double>(cfg.bytes_per_element);
        out["kv_cache_bytes"] = bytes;
        out["kv_cache_mib"] = bytes / (1024.0 * 1024.0);
    }

    if (opts.baseline_tokens) {
        masktok::ModelCostConfig base_cfg = cfg;
        base_cfg.vision_flops = opts.baseline_vision_flops;
        const masktok::ReductionReport r =
            masktok::reduction_report(*opts.baseline_tokens, base_cfg, opts.tokens, cfg);
        out["baseline"] = {{"tokens", *opts.baseline_tokens},
                           {"flops", masktok::prefill_flops(*opts.baseline_tokens, base_cfg)}};
        out["reduction"] = {{"flops_x", r.flops_ratio},
                            {"kv_x", r.kv_ratio},
                            {"tokens_x", r.token_ratio}};
    }
    std::cout << out.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// validate

int cmd_validate(const ValidateOptions& opts) {
    const masktok::TensorMap tensors = masktok::read_bundle(opts.in);
    json report;
    report["valid"] = true;
    auto& listing = report["tensors"] = json::object();
    for (const auto& [name, tensor] : tensors) {
        listing[name] = {{"shape", tensor.shape}};
        if (name == "features") masktok::feature_map_from_tensor(tensor, name);
        if (name == "masks") masktok::mask_stack_from_tensor(tensor, name);
        if (name == "labels") masktok::labels_from_tensor(tensor, name);
    }
    std::cout << report.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mask-guided visual token compression"};
    app.require_subcommand(1);

    PipelineOptions popts;
    CLI::App* pipeline = app.add_subcommand(
        "pipeline", "run masks+features through filtering and merging");
    pipeline->add_option("--in", popts.in, "input bundle or corpus directory");
    pipeline->add_option("--out", popts.out, "output directory");
    pipeline->add_option("--mode", popts.mode, "adaptive_soft | adaptive_hard | fixed_rate");
    pipeline->add_option("--n-target", popts.n_target, "token budget (fixed_rate only)");
    pipeline->add_option("--strategy", popts.strategy, "large_first | small_first");
    pipeline->add_option("--order", popts.order, "downsample_first | filter_first");
    pipeline->add_option("--emit", popts.emit, "outputs: tokens,stats,svg")->delimiter(',');
    pipeline->add_option("--jobs", popts.jobs, "parallel scenes")->check(CLI::PositiveNumber);
    pipeline->add_option("--bin-width", popts.bin_width, "histogram bin width")
        ->check(CLI::PositiveNumber);
    pipeline->add_option("--config", popts.config, "JSON config mirroring these flags");

    SynthOptions sopts;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene corpus");
    synth->add_option("--out", sopts.out, "corpus output directory")->required();
    synth->add_option("--count", sopts.count, "number of scenes")->check(CLI::PositiveNumber);
    synth->add_option("--seed", sopts.seed, "corpus seed");
    synth->add_option("--height", sopts.height, "grid height")->check(CLI::PositiveNumber);
    synth->add_option("--width", sopts.width, "grid width")->check(CLI::PositiveNumber);
    synth->add_option("--channels", sopts.channels, "feature channels")
        ->check(CLI::PositiveNumber);
    synth->add_option("--objects", sopts.objects, "objects per scene");
    synth->add_option("--kind", sopts.kind, "rect | blob");
    synth->add_option("--softness", sopts.softness, "boundary blur, >= 0");
    synth->add_option("--contrast", sopts.contrast, "feature signature scale, >= 0");
    synth->add_option("--jobs", sopts.jobs, "parallel scenes")->check(CLI::PositiveNumber);

    StatsOptions topts;
    CLI::App* stats = app.add_subcommand("stats", "aggregate run summaries (JSON lines)");
    stats->add_option("--in", topts.in, "summary file, or - for stdin")->required();
    stats->add_option("--field", topts.field, "JSON field to aggregate");
    stats->add_option("--label", topts.label, "report label");
    stats->add_option("--bin-width", topts.bin_width, "histogram bin width")
        ->check(CLI::PositiveNumber);
    stats->add_option("--out", topts.out, "directory for csv/svg outputs");
    stats->add_option("--emit", topts.emit, "outputs: json,csv,svg")->delimiter(',');

    EstimateOptions eopts;
    CLI::App* estimate = app.add_subcommand("estimate", "analytic FLOPs / KV-cache estimates");
    estimate->add_option("--tokens", eopts.tokens, "visual token count (fractional ok)")
        ->required();
    estimate->add_option("--llm-params", eopts.llm_params, "LLM parameter count");
    estimate->add_option("--layers", eopts.layers, "decoder layers");
    estimate->add_option("--hidden-dim", eopts.hidden_dim, "decoder hidden width");
    estimate->add_option("--bytes-per-element", eopts.bytes_per_element, "2 (fp16) or 4 (fp32)");
    estimate->add_option("--vision-flops", eopts.vision_flops, "fixed per-image vision FLOPs");
    estimate->add_flag("--quadratic", eopts.quadratic, "include quadratic attention term");
    estimate->add_option("--baseline-tokens", eopts.baseline_tokens,
                         "uncompressed token count for reduction ratios");
    estimate->add_option("--baseline-vision-flops", eopts.baseline_vision_flops,
                         "vision FLOPs of the baseline stack");

    ValidateOptions vopts;
    CLI::App* validate = app.add_subcommand("validate", "lint a tensor bundle");
    validate->add_option("--in", vopts.in, "bundle directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (pipeline->parsed()) return cmd_pipeline(pipeline, popts);
        if (synth->parsed()) return cmd_synth(sopts);
        if (stats->parsed()) return cmd_stats(topts);
        if (estimate->parsed()) return cmd_estimate(eopts);
        if (validate->parsed()) return cmd_validate(vopts);
    } catch (const masktok::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const masktok::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
