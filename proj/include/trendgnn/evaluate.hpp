#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trendgnn/graph.hpp"
#include "trendgnn/models.hpp"
#include "trendgnn/panel.hpp"
#include "trendgnn/similarity.hpp"

namespace trendgnn::eval {

enum class ModelKind { Flat, AR, SageRandom, SageFull, SageLagged, SageDtwS };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

/// Everything needed to instantiate one forecasting model.
struct ModelSpec {
    ModelKind kind = ModelKind::Flat;
    models::SageConfig sage;
    sim::SimilarityParams similarity;
    std::size_t top_k = 5;
    double k_avg = 5.0;
    bool random_exact_out_degree = false;

    std::string name() const { return model_kind_name(kind); }
    bool is_sage() const {
        return kind == ModelKind::SageRandom || kind == ModelKind::SageFull ||
               kind == ModelKind::SageLagged || kind == ModelKind::SageDtwS;
    }
    /// Flat and AR need no seed; they run once per split.
    bool deterministic() const { return !is_sage(); }
};

struct ExperimentConfig {
    ModelSpec model;
    std::vector<std::size_t> tau_schedule;  // strictly increasing
    std::size_t n_seeds = 5;
    std::uint64_t seed_base = 0;
    int threads = 0;  // 0 = hardware concurrency

    void validate(std::size_t total_weeks) const;
};

/// Every week from 20 to T-4 inclusive.
std::vector<std::size_t> default_tau_schedule(std::size_t total_weeks);

struct ForecastRecord {
    std::string model;
    std::uint64_t seed = 0;
    std::size_t tau_start = 0;
    std::string state;
    std::string signal;
    int horizon = 1;  // 1..4
    double pred = 0.0;
    double truth = 0.0;

    bool operator==(const ForecastRecord&) const = default;
};

/// Rolling-origin evaluation: for each (seed, tau) train/fit on weeks
/// [0, tau) only, forecast weeks [tau, tau+4) from the last four training
/// weeks, one record per (state, signal, horizon). Deterministic given the
/// config; jobs run in parallel but assemble in a fixed order.
std::vector<ForecastRecord> run_experiment(const ExperimentConfig& config,
                                           const signals::Panel& panel);

/// Builds the graph a sage strategy uses for a given split; exposed so the
/// CLI and the explainer construct exactly the graphs evaluation uses.
graphs::BlockAdjacency build_strategy_graph(const ModelSpec& spec, const signals::Panel& panel,
                                            std::size_t train_end, std::uint64_t seed);

// ---- aggregation -----------------------------------------------------------

struct Cell {
    double mean = 0.0;
    std::optional<double> stddev;  // absent for deterministic models
};

inline constexpr std::array<signals::Category, 4> kCategoryOrder = {
    signals::Category::B, signals::Category::DB, signals::Category::H, signals::Category::TV};

/// Category x horizon MAE table. Errors are pooled within each
/// (model, seed, horizon, category) cell first, then averaged across seeds;
/// the AVG column is the unweighted mean of the four category cells.
struct MetricsTable {
    std::vector<std::string> models;  // first-appearance order
    // [model][horizon 0..3][category in kCategoryOrder]
    std::vector<std::array<std::array<Cell, 4>, 4>> cells;
    std::vector<std::array<Cell, 4>> avg;  // [model][horizon]

    std::size_t model_index(const std::string& name) const;
};

MetricsTable aggregate(const std::vector<ForecastRecord>& records,
                       const signals::CategoryMap& categories);

enum class TableFormat { Csv, Markdown };

/// Markdown marks the best / second-best / worst value per column
/// (`**x**`, `_x_`, `!x!`); ties share the rank. Needs >= 2 models for
/// highlighting; CSV is plain and re-parses to the identical table.
std::string render_table(const MetricsTable& table, TableFormat format);

MetricsTable parse_table_csv(const std::string& text);

// ---- record persistence ----------------------------------------------------

void export_records(const std::vector<ForecastRecord>& records, const std::string& path);
std::vector<ForecastRecord> load_records(const std::string& path);

}  // namespace trendgnn::eval
