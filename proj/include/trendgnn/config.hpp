#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trendgnn/evaluate.hpp"
#include "trendgnn/explain.hpp"
#include "trendgnn/panel.hpp"
#include "trendgnn/similarity.hpp"
#include "trendgnn/synth.hpp"

namespace trendgnn::config {

/// INI-style sections of `key = value` lines; '#' and ';' start comments.
/// Unknown sections or keys are rejected so typos fail loudly.
struct RunConfig {
    // [data]
    std::string data_panel;
    signals::Schema data_schema = signals::Schema::Wide;
    std::string data_categories;
    bool data_weekly_resample = true;
    signals::NormMode data_normalization = signals::NormMode::FullSeries;
    signals::NormScope data_norm_scope = signals::NormScope::PerSeries;
    signals::ConstantSeriesPolicy data_constant_series =
        signals::ConstantSeriesPolicy::MapToHalf;

    // [synth]
    signals::SynthSpec synth;
    std::string synth_relations_raw;  // canonical text of the relations key

    // [similarity]
    sim::SimilarityParams similarity;

    // [graph]
    graphs::Strategy graph_strategy = graphs::Strategy::DtwS;
    std::size_t graph_k = 5;
    double graph_k_avg = 5.0;
    bool graph_random_exact = false;
    std::uint64_t graph_seed = 0;

    // [model]
    models::SageConfig model;

    // [eval]
    std::vector<std::string> eval_models = {"flat", "ar", "sage_random", "sage_lagged",
                                            "sage_dtw_s"};
    std::string eval_tau_raw = "auto";  // "auto", "20..60", "20..60:5", "20,24,28"
    std::size_t eval_seeds = 5;
    std::uint64_t eval_seed_base = 0;
    int eval_threads = 0;

    // [train]
    std::size_t train_tau_start = 20;

    // [explain]
    explain::MaskConfig mask;
    std::string explain_focus_signal;
    std::size_t explain_top_n = 1;
    std::string explain_tau_raw = "auto";
    std::size_t explain_random_seeds = 5;

    /// Resolves the tau schedule text against a panel length.
    static std::vector<std::size_t> parse_tau_schedule(const std::string& raw,
                                                       std::size_t total_weeks);

    eval::ModelSpec model_spec_for(const std::string& name) const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical serialization: fixed section and key order. parse(serialize(c))
/// reproduces the config exactly.
std::string serialize_config(const RunConfig& config);

bool operator==(const RunConfig& a, const RunConfig& b);

/// Parses the `[synth] relations` syntax: semicolon-separated
/// `src->dst:lag:gain` with signal indices or sigNN names.
std::vector<signals::Relation> parse_relations(const std::string& text, std::size_t n_signals);

}  // namespace trendgnn::config
