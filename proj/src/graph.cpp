#include "trendgnn/graph.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "trendgnn/csvio.hpp"
#include "trendgnn/rng.hpp"

namespace trendgnn::graphs {

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Random: return "random";
        case Strategy::Full: return "full";
        case Strategy::Lagged: return "lagged";
        case Strategy::DtwS: return "dtw_s";
    }
    throw std::logic_error("strategy_name: bad enum");
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "random") return Strategy::Random;
    if (name == "full") return Strategy::Full;
    if (name == "lagged") return Strategy::Lagged;
    if (name == "dtw_s") return Strategy::DtwS;
    throw std::runtime_error("unknown graph strategy '" + name + "'");
}

void SignalGraph::validate() const {
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& e : edges) {
        if (e.src >= n_signals() || e.dst >= n_signals()) {
            throw std::logic_error("graph: edge index out of range");
        }
        if (e.src == e.dst) throw std::logic_error("graph: self-loop");
        if (!seen.emplace(e.src, e.dst).second) throw std::logic_error("graph: duplicate edge");
    }
}

namespace {

std::vector<std::string> default_names(std::size_t n) {
    std::vector<std::string> names;
    names.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string s = std::to_string(i);
        while (s.size() < 2) s.insert(s.begin(), '0');
        names.push_back("sig" + s);
    }
    return names;
}

std::vector<std::string> names_or_default(const std::vector<std::string>& names, std::size_t n) {
    if (names.empty()) return default_names(n);
    if (names.size() != n) throw std::invalid_argument("graph: signal name count mismatch");
    return names;
}

}  // namespace

SignalGraph topk_graph(const sim::SimilarityMatrix& similarity, std::size_t k) {
    const std::size_t n = similarity.size();
    if (k < 1) throw std::invalid_argument("topk_graph: k must be >= 1");
    if (k >= n) {
        throw std::invalid_argument("topk_graph: k = " + std::to_string(k) +
                                    " must be below the signal count " + std::to_string(n));
    }
    SignalGraph g;
    g.state = similarity.state;
    g.signal_names = similarity.signal_names;
    g.strategy = similarity.measure == sim::Measure::DtwS ? Strategy::DtwS : Strategy::Lagged;
    for (std::uint32_t dst = 0; dst < n; ++dst) {
        std::vector<std::uint32_t> cand;
        cand.reserve(n - 1);
        for (std::uint32_t src = 0; src < n; ++src) {
            if (src != dst) cand.push_back(src);
        }
        std::sort(cand.begin(), cand.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double sa = similarity.at(dst, a), sb = similarity.at(dst, b);
            if (sa != sb) return sa > sb;
            return similarity.signal_names[a] < similarity.signal_names[b];
        });
        for (std::size_t i = 0; i < k; ++i) {
            g.edges.push_back({cand[i], dst, 1.0, similarity.at(dst, cand[i])});
        }
    }
    return g;
}

SignalGraph random_graph(std::size_t n_signals, double k_avg, std::uint64_t seed,
                         const std::vector<std::string>& signal_names,
                         const std::string& state) {
    if (n_signals < 2) throw std::invalid_argument("random_graph: need at least 2 signals");
    if (k_avg < 0.0 || k_avg >= static_cast<double>(n_signals - 1)) {
        throw std::invalid_argument("random_graph: k_avg must lie in [0, n-1), got " +
                                    std::to_string(k_avg));
    }
    SignalGraph g;
    g.state = state;
    g.signal_names = names_or_default(signal_names, n_signals);
    g.strategy = Strategy::Random;
    const double p = k_avg / static_cast<double>(n_signals - 1);
    Rng rng(seed);
    for (std::uint32_t src = 0; src < n_signals; ++src) {
        for (std::uint32_t dst = 0; dst < n_signals; ++dst) {
            if (src == dst) continue;
            if (rng.uniform() < p) g.edges.push_back({src, dst, 1.0, p});
        }
    }
    return g;
}

SignalGraph random_graph_exact(std::size_t n_signals, std::size_t k, std::uint64_t seed,
                               const std::vector<std::string>& signal_names,
                               const std::string& state) {
    if (n_signals < 2) throw std::invalid_argument("random_graph: need at least 2 signals");
    if (k >= n_signals) {
        throw std::invalid_argument("random_graph_exact: k must be below the signal count");
    }
    SignalGraph g;
    g.state = state;
    g.signal_names = names_or_default(signal_names, n_signals);
    g.strategy = Strategy::Random;
    Rng rng(seed);
    std::vector<std::uint32_t> others(n_signals - 1);
    for (std::uint32_t src = 0; src < n_signals; ++src) {
        std::uint32_t w = 0;
        for (std::uint32_t v = 0; v < n_signals; ++v) {
            if (v != src) others[w++] = v;
        }
        // partial Fisher-Yates: first k entries are the chosen targets
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(others.size() - i));
            std::swap(others[i], others[j]);
            g.edges.push_back({src, others[i], 1.0, 0.0});
        }
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    return g;
}

SignalGraph full_graph(std::size_t n_signals, const std::vector<std::string>& signal_names,
                       const std::string& state) {
    if (n_signals < 2) throw std::invalid_argument("full_graph: need at least 2 signals");
    SignalGraph g;
    g.state = state;
    g.signal_names = names_or_default(signal_names, n_signals);
    g.strategy = Strategy::Full;
    for (std::uint32_t src = 0; src < n_signals; ++src) {
        for (std::uint32_t dst = 0; dst < n_signals; ++dst) {
            if (src != dst) g.edges.push_back({src, dst, 1.0, 1.0});
        }
    }
    return g;
}

BlockAdjacency::BlockAdjacency(std::vector<SignalGraph> per_state) : blocks_(std::move(per_state)) {
    if (blocks_.empty()) throw std::invalid_argument("block adjacency: no state graphs");
    for (const auto& b : blocks_) {
        if (b.signal_names != blocks_[0].signal_names) {
            throw std::invalid_argument("block adjacency: state '" + b.state +
                                        "' has an inconsistent signal list");
        }
        b.validate();
    }
}

BlockAdjacency assemble_block(std::vector<SignalGraph> per_state) {
    return BlockAdjacency(std::move(per_state));
}

std::size_t BlockAdjacency::n_edges() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.edges.size();
    return n;
}

std::vector<BlockAdjacency::GlobalEdge> BlockAdjacency::global_edges() const {
    std::vector<GlobalEdge> out;
    out.reserve(n_edges());
    const std::uint32_t ns = static_cast<std::uint32_t>(n_signals());
    for (std::size_t s = 0; s < blocks_.size(); ++s) {
        const auto off = static_cast<std::uint32_t>(s) * ns;
        for (const auto& e : blocks_[s].edges) {
            out.push_back({off + e.src, off + e.dst, e.weight});
        }
    }
    return out;
}

const InNeighbors& BlockAdjacency::in_neighbors() const {
    if (!cached_) {
        cache_.node_count = n_nodes();
        cache_.sources.assign(cache_.node_count, {});
        cache_.edge_ids.assign(cache_.node_count, {});
        const auto edges = global_edges();
        for (std::uint32_t i = 0; i < edges.size(); ++i) {
            cache_.sources[edges[i].dst].push_back(edges[i].src);
            cache_.edge_ids[edges[i].dst].push_back(i);
        }
        cached_ = true;
    }
    return cache_;
}

std::vector<std::vector<double>> BlockAdjacency::dense() const {
    std::vector<std::vector<double>> m(n_nodes(), std::vector<double>(n_nodes(), 0.0));
    for (const auto& e : global_edges()) m[e.dst][e.src] = e.weight;
    return m;
}

InNeighbors BlockAdjacency::state_in_neighbors(std::size_t state) const {
    if (state >= blocks_.size()) throw std::invalid_argument("block adjacency: bad state index");
    InNeighbors t;
    t.node_count = n_signals();
    t.sources.assign(t.node_count, {});
    t.edge_ids.assign(t.node_count, {});
    const auto& edges = blocks_[state].edges;
    for (std::uint32_t i = 0; i < edges.size(); ++i) {
        t.sources[edges[i].dst].push_back(edges[i].src);
        t.edge_ids[edges[i].dst].push_back(i);
    }
    return t;
}

void save_edge_list(const BlockAdjacency& adj, const std::string& path) {
    std::string out = "state,src,dst,weight,score\n";
    for (const auto& b : adj.blocks()) {
        for (const auto& e : b.edges) {
            out += b.state + "," + b.signal_names[e.src] + "," + b.signal_names[e.dst] + "," +
                   csvio::format_double(e.weight) + "," + csvio::format_double(e.score) + "\n";
        }
    }
    csvio::write_text_file(path, out);
}

std::string to_dot(const BlockAdjacency& adj, const std::optional<std::string>& state) {
    std::string out = "digraph signals {\n";
    for (const auto& b : adj.blocks()) {
        if (state && b.state != *state) continue;
        out += "  subgraph cluster_" + b.state + " {\n";
        out += "    label=\"" + b.state + "\";\n";
        for (const auto& name : b.signal_names) {
            out += "    \"" + b.state + "/" + name + "\" [label=\"" + name + "\"];\n";
        }
        for (const auto& e : b.edges) {
            out += "    \"" + b.state + "/" + b.signal_names[e.src] + "\" -> \"" + b.state + "/" +
                   b.signal_names[e.dst] + "\" [weight=" + csvio::format_double(e.weight) + "];\n";
        }
        out += "  }\n";
    }
    out += "}\n";
    return out;
}

std::string to_node_link_json(const BlockAdjacency& adj, const signals::CategoryMap& categories) {
    nlohmann::json j;
    j["directed"] = true;
    j["nodes"] = nlohmann::json::array();
    j["links"] = nlohmann::json::array();
    const std::size_t ns = adj.n_signals();
    for (std::size_t s = 0; s < adj.n_states(); ++s) {
        const auto& b = adj.blocks()[s];
        for (std::size_t g = 0; g < ns; ++g) {
            nlohmann::json node;
            node["id"] = s * ns + g;
            node["state"] = b.state;
            node["signal"] = b.signal_names[g];
            const auto it = categories.find(b.signal_names[g]);
            if (it != categories.end()) node["category"] = signals::category_name(it->second);
            j["nodes"].push_back(std::move(node));
        }
    }
    for (const auto& e : adj.global_edges()) {
        nlohmann::json link;
        link["source"] = e.src;
        link["target"] = e.dst;
        link["weight"] = e.weight;
        j["links"].push_back(std::move(link));
    }
    return j.dump(2) + "\n";
}

}  // namespace trendgnn::graphs
