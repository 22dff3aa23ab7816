#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "trendgnn/csvio.hpp"
#include "trendgnn/graph.hpp"
#include "trendgnn/rng.hpp"
#include "trendgnn/similarity.hpp"
#include "trendgnn/synth.hpp"

using namespace trendgnn;
using namespace trendgnn::graphs;

namespace {

sim::SimilarityMatrix matrix_from(std::vector<std::string> names, std::vector<double> scores,
                                  sim::Measure measure = sim::Measure::DtwS) {
    sim::SimilarityMatrix m;
    m.state = "S0";
    m.signal_names = std::move(names);
    m.measure = measure;
    m.scores = std::move(scores);
    return m;
}

}  // namespace

TEST_CASE("topk: k=1 picks each row's best off-diagonal source") {
    // row i's max off-diagonal sits at column (i+1) mod 3
    const auto m = matrix_from({"a", "b", "c"}, {1.0, 0.9, 0.1,   //
                                                 0.2, 1.0, 0.8,   //
                                                 0.7, 0.3, 1.0});
    const auto g = topk_graph(m, 1);
    REQUIRE(g.edges.size() == 3);
    std::set<std::pair<std::uint32_t, std::uint32_t>> got;
    for (const auto& e : g.edges) got.emplace(e.src, e.dst);
    CHECK(got == std::set<std::pair<std::uint32_t, std::uint32_t>>{{1, 0}, {2, 1}, {0, 2}});
}

TEST_CASE("topk: all-equal scores fall back to lexicographic signal order") {
    const auto m = matrix_from({"delta", "alpha", "charlie", "bravo"}, std::vector<double>(16, 0.5));
    const auto g = topk_graph(m, 2);
    // destination 0 ("delta"): candidates alpha(1), bravo(3), charlie(2) -> alpha, bravo
    std::vector<std::uint32_t> dst0;
    for (const auto& e : g.edges) {
        if (e.dst == 0) dst0.push_back(e.src);
    }
    std::sort(dst0.begin(), dst0.end());
    CHECK(dst0 == std::vector<std::uint32_t>{1, 3});
}

TEST_CASE("topk matches an independent sort oracle on random matrices") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 5;
        std::vector<double> scores(n * n);
        for (auto& s : scores) s = rng.uniform(0.0, 1.0);
        std::vector<std::string> names;
        for (std::size_t i = 0; i < n; ++i) names.push_back("s" + std::to_string(i));
        const auto m = matrix_from(names, scores);
        const auto g = topk_graph(m, 2);

        for (std::uint32_t dst = 0; dst < n; ++dst) {
            // oracle: scan for the maximum twice
            std::vector<std::uint32_t> expect;
            std::set<std::uint32_t> used;
            for (int pick = 0; pick < 2; ++pick) {
                double best = -1.0;
                std::uint32_t who = 0;
                for (std::uint32_t src = 0; src < n; ++src) {
                    if (src == dst || used.count(src)) continue;
                    if (scores[dst * n + src] > best) {
                        best = scores[dst * n + src];
                        who = src;
                    }
                }
                used.insert(who);
                expect.push_back(who);
            }
            std::vector<std::uint32_t> got;
            for (const auto& e : g.edges) {
                if (e.dst == dst) got.push_back(e.src);
            }
            std::sort(got.begin(), got.end());
            std::sort(expect.begin(), expect.end());
            CHECK(got == expect);
        }
    }
}

TEST_CASE("topk: in-degree is exactly min(k, n-1) and k bounds are enforced") {
    Rng rng(42);
    const std::size_t n = 6;
    std::vector<double> scores(n * n);
    for (auto& s : scores) s = rng.uniform(0.0, 1.0);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("s" + std::to_string(i));
    const auto m = matrix_from(names, scores);
    for (std::size_t k = 1; k < n; ++k) {
        const auto g = topk_graph(m, k);
        std::vector<std::size_t> indeg(n, 0);
        for (const auto& e : g.edges) ++indeg[e.dst];
        for (const auto d : indeg) CHECK(d == k);
        g.validate();
    }
    CHECK_THROWS_AS(topk_graph(m, n), std::invalid_argument);
    CHECK_THROWS_AS(topk_graph(m, 0), std::invalid_argument);
}

TEST_CASE("random graph: empirical mean out-degree matches k_avg") {
    const std::size_t n = 26;
    double total = 0.0;
    for (int seed = 0; seed < 1000; ++seed) {
        const auto g = random_graph(n, 5.0, static_cast<std::uint64_t>(seed));
        total += static_cast<double>(g.edges.size());
    }
    const double mean_out = total / (1000.0 * static_cast<double>(n));
    CHECK(mean_out > 5.0 * 0.95);
    CHECK(mean_out < 5.0 * 1.05);
}

TEST_CASE("random graph: determinism, empty case, bad k_avg") {
    const auto a = random_graph(10, 3.0, 7);
    const auto b = random_graph(10, 3.0, 7);
    REQUIRE(a.edges.size() == b.edges.size());
    for (std::size_t i = 0; i < a.edges.size(); ++i) {
        CHECK(a.edges[i].src == b.edges[i].src);
        CHECK(a.edges[i].dst == b.edges[i].dst);
    }
    CHECK(random_graph(10, 0.0, 3).edges.empty());
    CHECK_THROWS_AS(random_graph(10, 9.0, 3), std::invalid_argument);
    a.validate();
}

TEST_CASE("random graph with exact out-degree") {
    const auto g = random_graph_exact(8, 3, 11);
    std::vector<std::size_t> outdeg(8, 0);
    for (const auto& e : g.edges) ++outdeg[e.src];
    for (const auto d : outdeg) CHECK(d == 3);
    g.validate();
}

TEST_CASE("full graph: 26 signals give 650 edges, in-degree n-1") {
    const auto g = full_graph(26);
    CHECK(g.edges.size() == 650);
    std::vector<std::size_t> indeg(26, 0);
    for (const auto& e : g.edges) ++indeg[e.dst];
    for (const auto d : indeg) CHECK(d == 25);
    CHECK(full_graph(2).edges.size() == 2);
}

TEST_CASE("block assembly: dimensions, block purity, edge count") {
    std::vector<SignalGraph> per_state;
    for (int s = 0; s < 2; ++s) {
        auto g = full_graph(3, {"a", "b", "c"}, "S" + std::to_string(s));
        per_state.push_back(std::move(g));
    }
    const auto block = assemble_block(std::move(per_state));
    CHECK(block.n_nodes() == 6);
    CHECK(block.n_edges() == 12);

    const auto dense = block.dense();
    REQUIRE(dense.size() == 6);
    for (std::size_t u = 0; u < 6; ++u) {
        for (std::size_t v = 0; v < 6; ++v) {
            if (u / 3 != v / 3) CHECK(dense[u][v] == 0.0);  // off-diagonal blocks stay zero
        }
    }
    for (const auto& e : block.global_edges()) CHECK(e.src / 3 == e.dst / 3);
}

TEST_CASE("block assembly at the paper's scale: 26 states x 26 signals") {
    std::vector<SignalGraph> per_state;
    for (int s = 0; s < 26; ++s) per_state.push_back(full_graph(26));
    const auto block = assemble_block(std::move(per_state));
    CHECK(block.n_nodes() == 676);
    CHECK(block.n_edges() == 26 * 650);
    CHECK(block.dense().size() == 676);
}

TEST_CASE("block assembly rejects inconsistent signal lists") {
    auto a = full_graph(3, {"a", "b", "c"}, "S0");
    auto b = full_graph(3, {"a", "b", "x"}, "S1");
    std::vector<SignalGraph> gs;
    gs.push_back(std::move(a));
    gs.push_back(std::move(b));
    CHECK_THROWS_AS(assemble_block(std::move(gs)), std::invalid_argument);
}

TEST_CASE("in-neighbor table matches the edge list") {
    auto g = random_graph(5, 2.0, 9, {"a", "b", "c", "d", "e"}, "S0");
    const auto block = assemble_block({g});
    const auto& in = block.in_neighbors();
    std::size_t count = 0;
    for (std::size_t v = 0; v < in.node_count; ++v) count += in.sources[v].size();
    CHECK(count == block.n_edges());
    const auto edges = block.global_edges();
    for (std::size_t v = 0; v < in.node_count; ++v) {
        for (std::size_t j = 0; j < in.sources[v].size(); ++j) {
            const auto eid = in.edge_ids[v][j];
            CHECK(edges[eid].dst == v);
            CHECK(edges[eid].src == in.sources[v][j]);
        }
    }
}

TEST_CASE("graph recovery: lagged top-k finds >= 70% of planted edges") {
    // gains well above noise; averaged over 10 seeds
    double recovered = 0.0, total = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        signals::SynthSpec spec;
        spec.n_states = 5;
        spec.n_signals = 8;
        spec.weeks = 80;
        spec.noise_sigma = 0.01;
        spec.season_amp = 0.2;
        spec.relations = {{0, 4, 1, 1.5}, {1, 5, 2, 1.5}, {2, 6, 1, 1.5}, {3, 7, 3, 1.5}};
        const auto [panel, planted] = signals::synth_panel(spec, 500 + seed);

        sim::SimilarityParams params;
        params.measure = sim::Measure::Lagged;
        std::set<std::tuple<std::string, std::string, std::string>> edges;
        for (std::size_t s = 0; s < panel.n_states(); ++s) {
            const auto m = sim::similarity_matrix(panel, panel.states[s], params);
            const auto g = topk_graph(m, 2);
            for (const auto& e : g.edges) {
                edges.insert({panel.states[s], g.signal_names[e.src], g.signal_names[e.dst]});
            }
        }
        for (const auto& p : planted) {
            total += 1.0;
            if (edges.count({p.state, p.src, p.dst})) recovered += 1.0;
        }
    }
    CHECK(recovered / total >= 0.7);
}

TEST_CASE("edge list export and dot/json rendering") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "tg_graph_test";
    fs::create_directories(dir);
    auto g = full_graph(3, {"a", "b", "c"}, "S0");
    const auto block = assemble_block({g});
    const auto path = (dir / "edges.csv").string();
    save_edge_list(block, path);
    const auto rows = csvio::read_rows(path);
    CHECK(rows.size() == 7);  // header + 6 edges
    CHECK(rows[0] == std::vector<std::string>{"state", "src", "dst", "weight", "score"});

    const auto dot = to_dot(block);
    CHECK(dot.find("digraph") != std::string::npos);
    CHECK(dot.find("\"S0/a\" -> \"S0/b\"") != std::string::npos);

    signals::CategoryMap cats{{"a", signals::Category::H},
                              {"b", signals::Category::B},
                              {"c", signals::Category::TV}};
    const auto json = to_node_link_json(block, cats);
    CHECK(json.find("\"links\"") != std::string::npos);
    fs::remove_all(dir);
}
