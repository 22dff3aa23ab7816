#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trendgnn/adjacency.hpp"
#include "trendgnn/panel.hpp"
#include "trendgnn/similarity.hpp"

namespace trendgnn::graphs {

enum class Strategy { Random, Full, Lagged, DtwS };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct Edge {
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    double weight = 1.0;
    double score = 0.0;  // provenance: similarity score behind the edge
};

/// Directed signal graph for one state. Edges point source -> destination:
/// an edge j -> i means "j is among i's most similar signals", so mean
/// aggregation pulls each node's representation from its best-matched peers.
struct SignalGraph {
    std::string state;
    std::vector<std::string> signal_names;
    Strategy strategy = Strategy::Full;
    std::vector<Edge> edges;

    std::size_t n_signals() const { return signal_names.size(); }
    void validate() const;  // no duplicates, no self-loops, indices in range
};

/// Keeps the top-k most similar sources per destination signal. Ties break
/// by signal-name lexicographic order so the graph is deterministic.
SignalGraph topk_graph(const sim::SimilarityMatrix& similarity, std::size_t k);

/// Independent Bernoulli edges with probability k_avg/(n-1) per ordered
/// pair, giving each node k_avg outgoing edges on average.
SignalGraph random_graph(std::size_t n_signals, double k_avg, std::uint64_t seed,
                         const std::vector<std::string>& signal_names = {},
                         const std::string& state = "");

/// Variant with exactly `k` outgoing edges per node.
SignalGraph random_graph_exact(std::size_t n_signals, std::size_t k, std::uint64_t seed,
                               const std::vector<std::string>& signal_names = {},
                               const std::string& state = "");

/// All n*(n-1) ordered pairs.
SignalGraph full_graph(std::size_t n_signals, const std::vector<std::string>& signal_names = {},
                       const std::string& state = "");

/// Block-diagonal multi-state graph: per-state subgraphs, no cross-state
/// edges, global node id = state_index * n_signals + signal_index.
class BlockAdjacency {
public:
    BlockAdjacency() = default;
    explicit BlockAdjacency(std::vector<SignalGraph> per_state);

    const std::vector<SignalGraph>& blocks() const { return blocks_; }
    std::size_t n_states() const { return blocks_.size(); }
    std::size_t n_signals() const { return blocks_.empty() ? 0 : blocks_[0].n_signals(); }
    std::size_t n_nodes() const { return n_states() * n_signals(); }
    std::size_t n_edges() const;

    /// Global edges in (state-major, per-state edge order).
    struct GlobalEdge {
        std::uint32_t src, dst;
        double weight;
    };
    std::vector<GlobalEdge> global_edges() const;

    /// Aggregation view; built once, cached.
    const InNeighbors& in_neighbors() const;

    /// Dense n_nodes x n_nodes matrix (row = destination), for tests and
    /// small exports.
    std::vector<std::vector<double>> dense() const;

    /// Single-state slice: local node ids 0..n_signals-1, local edge ids in
    /// the same order as blocks()[state].edges.
    InNeighbors state_in_neighbors(std::size_t state) const;

private:
    std::vector<SignalGraph> blocks_;
    mutable InNeighbors cache_;
    mutable bool cached_ = false;
};

BlockAdjacency assemble_block(std::vector<SignalGraph> per_state);

/// CSV `state,src,dst,weight,score`.
void save_edge_list(const BlockAdjacency& adj, const std::string& path);

/// Graphviz DOT of every state block (or one state if `state` is set).
std::string to_dot(const BlockAdjacency& adj, const std::optional<std::string>& state = {});

/// Node-link JSON: nodes carry state/signal/category, edges carry weight
/// (and importance when the caller provides it via the importance hook in
/// the explain module).
std::string to_node_link_json(const BlockAdjacency& adj, const signals::CategoryMap& categories);

}  // namespace trendgnn::graphs
