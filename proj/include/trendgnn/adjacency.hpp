#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace trendgnn {

/// In-neighbor table: for every destination node, the source nodes feeding it
/// and the index of each edge in the owning edge list. This is the only view
/// of a graph the autodiff aggregation ops need, which keeps the tensor layer
/// independent of graph construction.
struct InNeighbors {
    std::size_t node_count = 0;
    std::vector<std::vector<std::uint32_t>> sources;   // [dst] -> src node ids
    std::vector<std::vector<std::uint32_t>> edge_ids;  // [dst] -> edge index, parallel to sources

    std::size_t edge_count() const {
        std::size_t n = 0;
        for (const auto& s : sources) n += s.size();
        return n;
    }

    /// Replicates the table `copies` times along the node axis (node ids and
    /// edge ids offset per copy). Used to batch many rolling windows over the
    /// same graph into one forward pass.
    InNeighbors replicate(std::size_t copies, std::size_t edges_per_copy) const {
        InNeighbors out;
        out.node_count = node_count * copies;
        out.sources.resize(out.node_count);
        out.edge_ids.resize(out.node_count);
        for (std::size_t c = 0; c < copies; ++c) {
            const auto node_off = static_cast<std::uint32_t>(c * node_count);
            const auto edge_off = static_cast<std::uint32_t>(c * edges_per_copy);
            for (std::size_t v = 0; v < node_count; ++v) {
                auto& src = out.sources[c * node_count + v];
                auto& eid = out.edge_ids[c * node_count + v];
                src.reserve(sources[v].size());
                eid.reserve(edge_ids[v].size());
                for (std::size_t j = 0; j < sources[v].size(); ++j) {
                    src.push_back(sources[v][j] + node_off);
                    eid.push_back(edge_ids[v][j] + edge_off);
                }
            }
        }
        return out;
    }
};

}  // namespace trendgnn
