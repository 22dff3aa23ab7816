#include "trendgnn/explain.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

#include "trendgnn/csvio.hpp"
#include "trendgnn/optim.hpp"
#include "trendgnn/tape.hpp"

namespace trendgnn::explain {

std::vector<double> EdgeMask::sigmoids() const {
    std::vector<double> s(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double x = logits[i];
        s[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    return s;
}

std::vector<double> EdgeMask::binarized() const {
    std::vector<double> b(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) b[i] = logits[i] >= 0.0 ? 1.0 : 0.0;
    return b;
}

std::vector<std::size_t> EdgeMask::removed_edge_ids() const {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (logits[i] < 0.0) ids.push_back(i);
    }
    return ids;
}

ad::Tensor masked_forward(const models::SageForecaster& model, const InNeighbors& state_adj,
                          const std::vector<double>& mask_sigmas,
                          const ad::Tensor& state_features) {
    if (mask_sigmas.size() != state_adj.edge_count()) {
        throw std::invalid_argument("masked_forward: " + std::to_string(state_adj.edge_count()) +
                                    " edges vs mask of " + std::to_string(mask_sigmas.size()));
    }
    ad::Tape tape;
    const ad::Var f = tape.constant(state_features);
    const ad::Var w = tape.constant(ad::Tensor({mask_sigmas.size()}, mask_sigmas));
    const ad::Var out = models::sage_graph_forward(tape, model, f, state_adj, w);
    return tape.value(out);
}

namespace {

struct TargetSlice {
    ad::Tensor features;  // n_signals x 4
    ad::Tensor truth;     // n_signals x 4
};

TargetSlice state_window(const signals::Panel& panel, std::size_t state, std::size_t tau) {
    if (tau < signals::kWindowWeeks || tau + models::kHorizons > panel.n_steps()) {
        throw std::invalid_argument("counterfactual: tau " + std::to_string(tau) +
                                    " leaves no input or test window");
    }
    const std::size_t ng = panel.n_signals();
    TargetSlice ts;
    ts.features = ad::Tensor::zeros(ng, signals::kWindowWeeks);
    ts.truth = ad::Tensor::zeros(ng, models::kHorizons);
    for (std::size_t g = 0; g < ng; ++g) {
        for (std::size_t c = 0; c < signals::kWindowWeeks; ++c) {
            ts.features.at(g, c) = panel.value(state, g, tau - signals::kWindowWeeks + c);
        }
        for (std::size_t h = 0; h < models::kHorizons; ++h) {
            ts.truth.at(g, h) = panel.value(state, g, tau + h);
        }
    }
    return ts;
}

double target_mae(const ad::Tensor& pred, const ad::Tensor& truth, std::size_t row) {
    double acc = 0.0;
    for (std::size_t h = 0; h < models::kHorizons; ++h) {
        acc += std::abs(pred.at(row, h) - truth.at(row, h));
    }
    return acc / static_cast<double>(models::kHorizons);
}

}  // namespace

CounterfactualResult counterfactual_search(const models::SageForecaster& model,
                                           const graphs::BlockAdjacency& adj,
                                           const signals::Panel& panel, std::size_t state,
                                           std::size_t signal, std::size_t tau_start,
                                           double threshold, const MaskConfig& config) {
    if (state >= panel.n_states() || signal >= panel.n_signals()) {
        throw std::invalid_argument("counterfactual: state/signal out of range");
    }
    const InNeighbors state_adj = adj.state_in_neighbors(state);
    const std::size_t n_edges = state_adj.edge_count();
    const auto slice = state_window(panel, state, tau_start);
    const std::vector<std::size_t> target_rows = {signal};

    CounterfactualResult result;
    result.state = panel.states[state];
    result.signal = panel.signal_names[signal];
    result.tau_start = tau_start;
    result.threshold = threshold;

    EdgeMask mask;
    mask.logits.assign(n_edges, config.init_logit);

    // Hard-mask evaluation used both for convergence checks and reporting.
    auto evaluate_hard = [&](const EdgeMask& m) {
        const auto pred = masked_forward(model, state_adj, m.binarized(), slice.features);
        return target_mae(pred, slice.truth, signal);
    };

    result.unmasked_mae = evaluate_hard(mask);  // all edges kept

    bool have_best = false;
    std::size_t best_removed = 0;
    double best_mae = 0.0;
    EdgeMask best_mask;
    // Fallback when nothing satisfies the constraint: the closest attempt.
    double fallback_mae = result.unmasked_mae;
    EdgeMask fallback_mask = mask;

    auto consider = [&](const EdgeMask& m, double hard_mae) {
        const std::size_t removed = m.removed_edge_ids().size();
        if (hard_mae >= threshold - config.tolerance) {
            if (!have_best || removed < best_removed) {
                have_best = true;
                best_removed = removed;
                best_mae = hard_mae;
                best_mask = m;
            }
        } else if (hard_mae > fallback_mae) {
            fallback_mae = hard_mae;
            fallback_mask = m;
        }
    };
    consider(mask, result.unmasked_mae);

    if (!have_best && n_edges > 0) {
        ad::AdamState::Options opts;
        opts.lr = config.lr;
        ad::Tensor logits({n_edges}, mask.logits);
        ad::AdamState adam({logits}, opts);
        for (int it = 0; it < config.budget; ++it) {
            ad::Tape tape;
            const ad::Var m = tape.leaf(logits, true);
            const ad::Var sig = tape.sigmoid(m);
            const ad::Var f = tape.constant(slice.features);
            const ad::Var pred = models::sage_graph_forward(tape, model, f, state_adj, sig);
            const ad::Var truth = tape.constant(slice.truth);
            const ad::Var mae = tape.mae_loss(pred, truth, &target_rows);
            // relu(threshold - MAE): zero once the forecast is no better
            // than the random-graph reference.
            const ad::Var gap = tape.relu(tape.sub(tape.constant_scalar(threshold), mae));
            const ad::Var ones = tape.constant(ad::Tensor::full({n_edges}, 1.0));
            const ad::Var removal_mass = tape.sum(tape.sub(ones, sig));
            const ad::Var loss = tape.add(gap, tape.scale(removal_mass, config.beta));
            tape.backward(loss);
            adam.step({&logits}, {&tape.grad(m)});

            result.iterations = it + 1;
            EdgeMask current;
            current.logits = logits.data();
            consider(current, evaluate_hard(current));
            if (have_best) break;
        }
    }

    const EdgeMask& chosen = have_best ? best_mask : fallback_mask;
    result.converged = have_best;
    result.achieved_mae = have_best ? best_mae : fallback_mae;
    result.removed_edge_ids = chosen.removed_edge_ids();
    const auto& block = adj.blocks()[state];
    for (const auto id : result.removed_edge_ids) {
        const auto& e = block.edges[id];
        result.removed_edges.emplace_back(block.signal_names[e.src], block.signal_names[e.dst]);
    }
    return result;
}

double EdgeImportance::frequency(const Key& k) const {
    const auto runs = runs_per_state.find(k.state);
    const auto count = counts.find(k);
    if (runs == runs_per_state.end() || runs->second == 0 || count == counts.end()) return 0.0;
    return static_cast<double>(count->second) / static_cast<double>(runs->second);
}

std::vector<EdgeImportance::RankedEdge> EdgeImportance::ranked_for_signal(
    const std::string& signal) const {
    std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> pooled;
    for (const auto& [key, count] : counts) {
        if (key.dst != signal) continue;
        auto& slot = pooled[{key.src, key.dst}];
        slot.first += count;
        const auto runs = runs_per_state.find(key.state);
        slot.second += runs == runs_per_state.end() ? 0 : runs->second;
    }
    std::vector<RankedEdge> ranked;
    for (const auto& [names, cr] : pooled) {
        RankedEdge e;
        e.src = names.first;
        e.dst = names.second;
        e.count = cr.first;
        e.frequency = cr.second ? static_cast<double>(cr.first) / static_cast<double>(cr.second)
                                : 0.0;
        ranked.push_back(std::move(e));
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedEdge& a, const RankedEdge& b) {
        if (a.count != b.count) return a.count > b.count;
        if (a.src != b.src) return a.src < b.src;
        return a.dst < b.dst;
    });
    return ranked;
}

EdgeImportance importance_scan(const std::vector<ScanWindow>& windows,
                               const graphs::BlockAdjacency& adj, const signals::Panel& panel,
                               const MaskConfig& config) {
    EdgeImportance importance;
    for (const auto& w : windows) {
        if (!w.model) throw std::invalid_argument("importance_scan: null model");
        if (w.thresholds.size() != panel.n_states()) {
            throw std::invalid_argument("importance_scan: thresholds must cover every state");
        }
        for (std::size_t s = 0; s < panel.n_states(); ++s) {
            if (w.thresholds[s].size() != panel.n_signals()) {
                throw std::invalid_argument(
                    "importance_scan: thresholds must cover every signal");
            }
            for (std::size_t g = 0; g < panel.n_signals(); ++g) {
                try {
                    const auto res = counterfactual_search(*w.model, adj, panel, s, g,
                                                           w.tau_start, w.thresholds[s][g],
                                                           config);
                    importance.runs_per_state[panel.states[s]] += 1;
                    for (const auto& [src, dst] : res.removed_edges) {
                        importance.counts[{panel.states[s], src, dst}] += 1;
                    }
                } catch (const std::exception& e) {
                    std::cerr << "warning: explain run skipped (state " << panel.states[s]
                              << ", signal " << panel.signal_names[g] << ", tau " << w.tau_start
                              << "): " << e.what() << "\n";
                }
            }
        }
    }
    return importance;
}

void save_importance(const EdgeImportance& importance, const std::string& path) {
    std::string out = "state,src,dst,count,frequency\n";
    for (const auto& [key, count] : importance.counts) {
        out += key.state + "," + key.src + "," + key.dst + "," + std::to_string(count) + "," +
               csvio::format_double(importance.frequency(key)) + "\n";
    }
    csvio::write_text_file(path, out);
}

SubgraphExport export_explained_subgraph(const EdgeImportance& importance,
                                         const graphs::SignalGraph& graph,
                                         const std::string& focus_signal, std::size_t top_n,
                                         const signals::CategoryMap& categories) {
    const auto it =
        std::find(graph.signal_names.begin(), graph.signal_names.end(), focus_signal);
    if (it == graph.signal_names.end()) {
        throw std::invalid_argument("export_explained_subgraph: unknown signal '" + focus_signal +
                                    "'");
    }
    const auto focus = static_cast<std::uint32_t>(it - graph.signal_names.begin());

    // Neighborhood = focus node plus everything joined to it by an edge.
    std::vector<bool> in_hood(graph.n_signals(), false);
    in_hood[focus] = true;
    std::vector<const graphs::Edge*> hood_edges;
    for (const auto& e : graph.edges) {
        if (e.src == focus || e.dst == focus) {
            in_hood[e.src] = true;
            in_hood[e.dst] = true;
            hood_edges.push_back(&e);
        }
    }

    const auto ranked = importance.ranked_for_signal(focus_signal);
    auto importance_rank = [&](const graphs::Edge& e) -> std::size_t {
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            if (ranked[i].src == graph.signal_names[e.src] && e.dst == focus) return i;
        }
        return ranked.size();
    };
    auto edge_frequency = [&](const graphs::Edge& e) {
        return importance.frequency(
            {graph.state, graph.signal_names[e.src], graph.signal_names[e.dst]});
    };

    SubgraphExport out;
    out.dot = "digraph explained {\n";
    nlohmann::json j;
    j["directed"] = true;
    j["focus"] = focus_signal;
    j["state"] = graph.state;
    j["nodes"] = nlohmann::json::array();
    j["links"] = nlohmann::json::array();

    for (std::size_t g = 0; g < graph.n_signals(); ++g) {
        if (!in_hood[g]) continue;
        const auto cat = categories.find(graph.signal_names[g]);
        const std::string color = cat == categories.end()
                                      ? "gray"
                                      : (cat->second == signals::Category::H    ? "red"
                                         : cat->second == signals::Category::B  ? "blue"
                                         : cat->second == signals::Category::TV ? "green"
                                                                                : "orange");
        out.dot += "  \"" + graph.signal_names[g] + "\" [color=" + color +
                   (g == focus ? ", penwidth=3" : "") + "];\n";
        nlohmann::json node;
        node["id"] = graph.signal_names[g];
        node["focus"] = g == focus;
        if (cat != categories.end()) node["category"] = signals::category_name(cat->second);
        j["nodes"].push_back(std::move(node));
    }
    for (const auto* e : hood_edges) {
        const bool important = e->dst == focus && importance_rank(*e) < top_n;
        const double freq = edge_frequency(*e);
        out.dot += "  \"" + graph.signal_names[e->src] + "\" -> \"" + graph.signal_names[e->dst] +
                   "\" [penwidth=" + (important ? std::string("3") : std::string("1")) +
                   ", label=\"" + csvio::format_fixed(freq, 2) + "\"];\n";
        nlohmann::json link;
        link["source"] = graph.signal_names[e->src];
        link["target"] = graph.signal_names[e->dst];
        link["weight"] = e->weight;
        link["importance"] = freq;
        link["important"] = important;
        j["links"].push_back(std::move(link));
    }
    out.dot += "}\n";
    out.node_link_json = j.dump(2) + "\n";
    return out;
}

}  // namespace trendgnn::explain
