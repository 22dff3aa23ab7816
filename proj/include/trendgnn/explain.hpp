#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trendgnn/graph.hpp"
#include "trendgnn/models.hpp"
#include "trendgnn/panel.hpp"

namespace trendgnn::explain {

/// Continuous per-edge mask over one state's edges, held as logits so the
/// sigmoid keeps the relaxed weights inside (0, 1). Binarization keeps an
/// edge when its sigmoid is at least 0.5.
struct EdgeMask {
    std::vector<double> logits;  // one per edge of the state block

    std::vector<double> sigmoids() const;
    /// Hard 0/1 weights after thresholding at 0.5.
    std::vector<double> binarized() const;
    std::vector<std::size_t> removed_edge_ids() const;
};

struct MaskConfig {
    double beta = 0.1;        // sparsity pressure against removals
    int budget = 500;         // optimization iterations
    double lr = 0.05;         // mask step size
    double init_logit = 4.0;  // sigmoid(4) ~ 0.982: start near the original graph
    double tolerance = 1e-6;  // slack on the threshold constraint
};

/// Forward pass of a frozen model on one state's subgraph with relaxed edge
/// weights. `mask_sigmas` must carry one weight per edge of that state (in
/// block edge order); fully masked neighborhoods aggregate to zero.
ad::Tensor masked_forward(const models::SageForecaster& model, const InNeighbors& state_adj,
                          const std::vector<double>& mask_sigmas,
                          const ad::Tensor& state_features);

struct CounterfactualResult {
    std::string state;
    std::string signal;
    std::size_t tau_start = 0;
    double threshold = 0.0;      // random-graph reference MAE for this target
    double unmasked_mae = 0.0;
    double achieved_mae = 0.0;   // hard-mask MAE of the reported edge set
    bool converged = false;
    int iterations = 0;
    std::vector<std::size_t> removed_edge_ids;                      // into the state block
    std::vector<std::pair<std::string, std::string>> removed_edges;  // (src, dst) names
};

/// Finds the smallest edge removal that pushes the target node's forecast
/// error to the random-graph reference level: gradient steps on the mask
/// minimize relu(threshold - MAE(masked)) + beta * sum(1 - sigmoid(m)),
/// tracking the best (fewest-removal) binarized mask whose hard-mask MAE
/// reaches the threshold. Model weights stay frozen throughout. Reports the
/// best effort with converged=false when the budget runs out first.
CounterfactualResult counterfactual_search(const models::SageForecaster& model,
                                           const graphs::BlockAdjacency& adj,
                                           const signals::Panel& panel, std::size_t state,
                                           std::size_t signal, std::size_t tau_start,
                                           double threshold, const MaskConfig& config);

/// Per-edge removal counts accumulated over counterfactual runs. Edges that
/// keep getting removed are the ones the forecasts depend on.
struct EdgeImportance {
    struct Key {
        std::string state, src, dst;
        bool operator<(const Key& o) const {
            if (state != o.state) return state < o.state;
            if (src != o.src) return src < o.src;
            return dst < o.dst;
        }
    };
    std::map<Key, std::size_t> counts;
    std::map<std::string, std::size_t> runs_per_state;

    double frequency(const Key& k) const;

    struct RankedEdge {
        std::string src, dst;
        std::size_t count = 0;
        double frequency = 0.0;
    };
    /// Edges pointing at `signal`, summed across states, most frequent
    /// first (ties by name).
    std::vector<RankedEdge> ranked_for_signal(const std::string& signal) const;
};

/// One explained model + per-(state, signal) thresholds for a single split.
struct ScanWindow {
    const models::SageForecaster* model = nullptr;
    std::size_t tau_start = 0;
    std::vector<std::vector<double>> thresholds;  // [state][signal]
};

/// Runs counterfactual_search for every (state, signal, window) and counts
/// removed edges. Failed runs are skipped with a note on stderr.
EdgeImportance importance_scan(const std::vector<ScanWindow>& windows,
                               const graphs::BlockAdjacency& adj, const signals::Panel& panel,
                               const MaskConfig& config);

/// CSV `state,src,dst,count,frequency`.
void save_importance(const EdgeImportance& importance, const std::string& path);

/// DOT and node-link JSON for the focus signal's neighborhood in one state's
/// graph; the top_n most important in-edges are flagged.
struct SubgraphExport {
    std::string dot;
    std::string node_link_json;
};
SubgraphExport export_explained_subgraph(const EdgeImportance& importance,
                                         const graphs::SignalGraph& graph,
                                         const std::string& focus_signal, std::size_t top_n,
                                         const signals::CategoryMap& categories);

}  // namespace trendgnn::explain
