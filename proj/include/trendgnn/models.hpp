#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trendgnn/adjacency.hpp"
#include "trendgnn/graph.hpp"
#include "trendgnn/panel.hpp"
#include "trendgnn/tape.hpp"
#include "trendgnn/tensor.hpp"

namespace trendgnn::models {

inline constexpr std::size_t kHorizons = 4;

/// Persistence baseline: every horizon repeats the last input week.
ad::Tensor flat_predict(const signals::WindowSample& window);
std::array<double, kHorizons> flat_predict(std::span<const double> history);

// ---- autoregressive baseline -------------------------------------------

/// AR(p) with optional first differencing, fit by ordinary least squares and
/// selected by AIC over a (d, p) grid. Near-constant series fall back to the
/// persistence rule with a flag.
struct ARModel {
    int d = 0;                    // differencing order, 0 or 1
    int p = 1;                    // AR order
    std::vector<double> phi;      // lag coefficients, phi[0] is lag 1
    double intercept = 0.0;
    double residual_variance = 0.0;
    double aic = 0.0;
    bool flat_fallback = false;
};

struct ARGrid {
    std::vector<int> d_grid = {0, 1};
    std::vector<int> p_grid = {1, 2, 3, 4};
};

ARModel ar_fit(std::span<const double> series, const ARGrid& grid = {});

/// Iterated one-step forecasts, feeding predictions back; un-differences
/// when d=1 and clips into [0, 1].
std::array<double, kHorizons> ar_predict(const ARModel& model, std::span<const double> history);

/// Ordinary least squares via normal equations; throws on singular systems.
/// Columns of X are regressors, y the response.
std::vector<double> ols_solve(const std::vector<std::vector<double>>& columns,
                              std::span<const double> y);

// ---- GraphSAGE forecaster ------------------------------------------------

struct SageConfig {
    int layers = 2;
    int hidden = 64;
    int epochs = 300;
    double lr = 1e-3;
    bool mse_loss = false;           // default trains on MAE, the reported metric
    bool aggregator_weighted = false;  // weight neighbor means by edge weight

    void validate() const;
};

/// Mean-aggregator GraphSAGE: each layer maps concat(self, neighbor-mean)
/// through a learned matrix and relu, a linear readout emits 4 horizons.
struct SageForecaster {
    SageConfig config;
    std::uint64_t seed = 0;
    std::vector<ad::Tensor> layer_weights;  // W_l: (2 * d_in) x d_out
    ad::Tensor readout;                     // hidden x 4

    static SageForecaster init(const SageConfig& config, std::uint64_t seed);

    std::size_t parameter_count() const;
};

/// Forward pass for arbitrary node count (the graph may be the block
/// adjacency, one state's slice, or windows batched by replication).
/// `edge_sigma`, when set, switches aggregation to the masked weighted mean
/// (used by the explainer); `edge_weights` applies constant weights instead.
ad::Var sage_graph_forward(ad::Tape& tape, const SageForecaster& model, ad::Var features,
                           const InNeighbors& adj, std::optional<ad::Var> edge_sigma = {},
                           bool train_weights = false,
                           std::vector<ad::Var>* weight_vars = nullptr);

/// Convenience value-level forward over a block adjacency.
ad::Tensor sage_forward(const SageForecaster& model, const ad::Tensor& node_features,
                        const graphs::BlockAdjacency& adj);

struct TrainResult {
    std::vector<double> loss_trace;  // one entry per epoch
};

/// Full-batch training on every rolling window of the training region
/// (weeks [0, split.tau_start)), minimizing mean MAE over all windows, nodes
/// and horizons. Deterministic given the seed. Aborts when the loss turns
/// non-finite.
TrainResult sage_train(SageForecaster& model, const signals::Panel& panel,
                       const graphs::BlockAdjacency& adj, const signals::SplitSpec& split);

/// JSON checkpoint; loading reproduces forward outputs exactly.
void save_sage(const SageForecaster& model, const std::string& path);
SageForecaster load_sage(const std::string& path);

}  // namespace trendgnn::models
