#include "trendgnn/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "trendgnn/csvio.hpp"
#include "trendgnn/optim.hpp"
#include "trendgnn/rng.hpp"

namespace trendgnn::models {

ad::Tensor flat_predict(const signals::WindowSample& window) {
    const auto& in = window.input;
    ad::Tensor out = ad::Tensor::zeros(in.rows(), kHorizons);
    const std::size_t last = in.cols() - 1;
    for (std::size_t r = 0; r < in.rows(); ++r) {
        for (std::size_t h = 0; h < kHorizons; ++h) out.at(r, h) = in.at(r, last);
    }
    return out;
}

std::array<double, kHorizons> flat_predict(std::span<const double> history) {
    if (history.empty()) throw std::invalid_argument("flat_predict: empty history");
    std::array<double, kHorizons> out{};
    out.fill(history.back());
    return out;
}

// ---- AR ------------------------------------------------------------------

std::vector<double> ols_solve(const std::vector<std::vector<double>>& columns,
                              std::span<const double> y) {
    const std::size_t k = columns.size();
    if (k == 0) throw std::invalid_argument("ols: no regressors");
    const std::size_t n = y.size();
    for (const auto& c : columns) {
        if (c.size() != n) throw std::invalid_argument("ols: column length mismatch");
    }
    // normal equations: (X^T X) beta = X^T y
    std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i; j < k; ++j) {
            double dot = 0.0;
            for (std::size_t t = 0; t < n; ++t) dot += columns[i][t] * columns[j][t];
            a[i][j] = dot;
            a[j][i] = dot;
        }
        double dot = 0.0;
        for (std::size_t t = 0; t < n; ++t) dot += columns[i][t] * y[t];
        a[i][k] = dot;
    }
    // Gaussian elimination with partial pivoting.
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < k; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        if (std::abs(a[pivot][col]) < 1e-12) {
            throw std::runtime_error("ols: singular system (near-constant regressors)");
        }
        std::swap(a[col], a[pivot]);
        for (std::size_t r = 0; r < k; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= k; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<double> beta(k);
    for (std::size_t i = 0; i < k; ++i) beta[i] = a[i][k] / a[i][i];
    return beta;
}

namespace {

std::vector<double> difference(std::span<const double> x) {
    std::vector<double> z;
    z.reserve(x.size() - 1);
    for (std::size_t t = 1; t < x.size(); ++t) z.push_back(x[t] - x[t - 1]);
    return z;
}

struct FitCandidate {
    ARModel model;
    bool ok = false;
};

FitCandidate fit_one(std::span<const double> series, int d, int p) {
    std::vector<double> z(series.begin(), series.end());
    if (d == 1) z = difference(series);
    const std::size_t n = z.size();
    if (n < static_cast<std::size_t>(p) + 4) return {};

    const std::size_t rows = n - static_cast<std::size_t>(p);
    std::vector<std::vector<double>> cols;
    cols.emplace_back(rows, 1.0);  // intercept
    for (int lag = 1; lag <= p; ++lag) {
        std::vector<double> c(rows);
        for (std::size_t t = 0; t < rows; ++t) c[t] = z[t + static_cast<std::size_t>(p - lag)];
        cols.push_back(std::move(c));
    }
    std::vector<double> y(rows);
    for (std::size_t t = 0; t < rows; ++t) y[t] = z[t + static_cast<std::size_t>(p)];

    FitCandidate cand;
    std::vector<double> beta;
    try {
        beta = ols_solve(cols, y);
    } catch (const std::runtime_error&) {
        return {};  // singular; caller falls back
    }
    double rss = 0.0;
    for (std::size_t t = 0; t < rows; ++t) {
        double pred = beta[0];
        for (int lag = 1; lag <= p; ++lag) pred += beta[lag] * cols[lag][t];
        const double r = y[t] - pred;
        rss += r * r;
    }
    cand.model.d = d;
    cand.model.p = p;
    cand.model.intercept = beta[0];
    cand.model.phi.assign(beta.begin() + 1, beta.end());
    cand.model.residual_variance = rss / static_cast<double>(rows);
    const double sigma2 = std::max(cand.model.residual_variance, 1e-300);
    cand.model.aic = static_cast<double>(rows) * std::log(sigma2) + 2.0 * (p + 2);
    for (const auto c : cand.model.phi) {
        if (!std::isfinite(c)) return {};
    }
    cand.ok = std::isfinite(cand.model.intercept) && std::isfinite(cand.model.aic);
    return cand;
}

}  // namespace

ARModel ar_fit(std::span<const double> series, const ARGrid& grid) {
    int max_p = 0;
    for (const auto p : grid.p_grid) max_p = std::max(max_p, p);
    if (series.size() < static_cast<std::size_t>(3 * max_p + 8)) {
        throw std::invalid_argument("ar_fit: need at least " + std::to_string(3 * max_p + 8) +
                                    " observations, got " + std::to_string(series.size()));
    }
    ARModel best;
    bool have_best = false;
    for (const auto d : grid.d_grid) {
        if (d != 0 && d != 1) throw std::invalid_argument("ar_fit: d must be 0 or 1");
        for (const auto p : grid.p_grid) {
            if (p < 1) throw std::invalid_argument("ar_fit: p must be >= 1");
            const auto cand = fit_one(series, d, p);
            if (cand.ok && (!have_best || cand.model.aic < best.aic)) {
                best = cand.model;
                have_best = true;
            }
        }
    }
    if (!have_best) {
        // Near-constant series: nothing fits, fall back to persistence.
        best = ARModel{};
        best.phi = {0.0};
        best.flat_fallback = true;
    }
    return best;
}

std::array<double, kHorizons> ar_predict(const ARModel& model, std::span<const double> history) {
    const std::size_t need = static_cast<std::size_t>(model.p + model.d);
    if (history.size() < std::max<std::size_t>(need, 1)) {
        throw std::invalid_argument("ar_predict: history of " + std::to_string(history.size()) +
                                    " values, need " + std::to_string(need));
    }
    std::array<double, kHorizons> out{};
    if (model.flat_fallback) {
        out.fill(std::clamp(history.back(), 0.0, 1.0));
        return out;
    }
    // Work on the (possibly differenced) series, then integrate back.
    std::vector<double> z;
    if (model.d == 1) {
        for (std::size_t t = 1; t < history.size(); ++t) {
            z.push_back(history[t] - history[t - 1]);
        }
    } else {
        z.assign(history.begin(), history.end());
    }
    double level = history.back();
    for (std::size_t h = 0; h < kHorizons; ++h) {
        double zhat = model.intercept;
        for (int lag = 1; lag <= model.p; ++lag) {
            const std::size_t idx = z.size() - static_cast<std::size_t>(lag);
            zhat += model.phi[static_cast<std::size_t>(lag - 1)] *
                    (idx < z.size() ? z[idx] : 0.0);
        }
        z.push_back(zhat);
        const double value = model.d == 1 ? level + zhat : zhat;
        level = value;
        out[h] = std::clamp(value, 0.0, 1.0);
    }
    return out;
}

// ---- GraphSAGE -------------------------------------------------------------

void SageConfig::validate() const {
    if (layers < 1) throw std::invalid_argument("sage: layers must be >= 1");
    if (hidden < 1) throw std::invalid_argument("sage: hidden width must be >= 1");
    if (epochs < 1) throw std::invalid_argument("sage: epochs must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("sage: learning rate must be positive");
}

SageForecaster SageForecaster::init(const SageConfig& config, std::uint64_t seed) {
    config.validate();
    SageForecaster m;
    m.config = config;
    m.seed = seed;
    Rng rng(Rng::mix(seed, 0x5a6e));
    auto glorot = [&](std::size_t fan_in, std::size_t fan_out) {
        ad::Tensor w = ad::Tensor::zeros(fan_in, fan_out);
        const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-s, s);
        return w;
    };
    std::size_t d_in = signals::kWindowWeeks;
    for (int l = 0; l < config.layers; ++l) {
        const std::size_t d_out = static_cast<std::size_t>(config.hidden);
        m.layer_weights.push_back(glorot(2 * d_in, d_out));
        d_in = d_out;
    }
    m.readout = glorot(d_in, kHorizons);
    return m;
}

std::size_t SageForecaster::parameter_count() const {
    std::size_t n = readout.size();
    for (const auto& w : layer_weights) n += w.size();
    return n;
}

ad::Var sage_graph_forward(ad::Tape& tape, const SageForecaster& model, ad::Var features,
                           const InNeighbors& adj, std::optional<ad::Var> edge_sigma,
                           bool train_weights, std::vector<ad::Var>* weight_vars) {
    if (tape.value(features).cols() != signals::kWindowWeeks) {
        throw std::invalid_argument("sage: features must have " +
                                    std::to_string(signals::kWindowWeeks) + " columns, got " +
                                    tape.value(features).shape_string());
    }
    ad::Var h = features;
    for (const auto& w : model.layer_weights) {
        const ad::Var wv = tape.leaf(w, train_weights);
        if (weight_vars) weight_vars->push_back(wv);
        const ad::Var nm = edge_sigma ? tape.masked_neighbor_mean(h, adj, *edge_sigma)
                                      : tape.neighbor_mean(h, adj);
        h = tape.relu(tape.matmul(tape.concat_cols(h, nm), wv));
    }
    const ad::Var ro = tape.leaf(model.readout, train_weights);
    if (weight_vars) weight_vars->push_back(ro);
    return tape.matmul(h, ro);
}

ad::Tensor sage_forward(const SageForecaster& model, const ad::Tensor& node_features,
                        const graphs::BlockAdjacency& adj) {
    if (node_features.rows() != adj.n_nodes()) {
        throw std::invalid_argument("sage_forward: " + std::to_string(adj.n_nodes()) +
                                    " graph nodes vs features " + node_features.shape_string());
    }
    ad::Tape tape;
    const ad::Var f = tape.constant(node_features);
    std::optional<ad::Var> weights;
    if (model.config.aggregator_weighted) {
        const auto edges = adj.global_edges();
        ad::Tensor w({edges.size()}, std::vector<double>(edges.size()));
        for (std::size_t i = 0; i < edges.size(); ++i) w[i] = edges[i].weight;
        weights = tape.constant(std::move(w));
    }
    const ad::Var out = sage_graph_forward(tape, model, f, adj.in_neighbors(), weights);
    return tape.value(out);
}

TrainResult sage_train(SageForecaster& model, const signals::Panel& panel,
                       const graphs::BlockAdjacency& adj, const signals::SplitSpec& split) {
    // Only the training side of the split is touched here; the panel may
    // already be truncated at tau_start.
    if (split.tau_start < 2 * signals::kWindowWeeks || split.tau_start > panel.n_steps()) {
        throw std::invalid_argument("sage_train: tau_start " + std::to_string(split.tau_start) +
                                    " outside [8, " + std::to_string(panel.n_steps()) + "]");
    }
    if (panel.n_nodes() != adj.n_nodes()) {
        throw std::invalid_argument("sage_train: panel has " + std::to_string(panel.n_nodes()) +
                                    " nodes, adjacency " + std::to_string(adj.n_nodes()));
    }
    const auto windows = signals::rolling_windows(panel, 0, split.tau_start);
    if (windows.empty()) throw std::invalid_argument("sage_train: no training windows");

    // Batch all windows into one stacked graph: window-major node copies.
    const std::size_t n = adj.n_nodes();
    const std::size_t copies = windows.size();
    ad::Tensor inputs = ad::Tensor::zeros(copies * n, signals::kWindowWeeks);
    ad::Tensor targets = ad::Tensor::zeros(copies * n, kHorizons);
    for (std::size_t w = 0; w < copies; ++w) {
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < signals::kWindowWeeks; ++c) {
                inputs.at(w * n + r, c) = windows[w].input.at(r, c);
                targets.at(w * n + r, c) = windows[w].target.at(r, c);
            }
        }
    }
    const std::size_t edges_per_copy = adj.n_edges();
    const InNeighbors stacked = adj.in_neighbors().replicate(copies, edges_per_copy);

    std::optional<ad::Tensor> edge_w;
    if (model.config.aggregator_weighted) {
        const auto edges = adj.global_edges();
        ad::Tensor w({copies * edges_per_copy}, std::vector<double>(copies * edges_per_copy));
        for (std::size_t c = 0; c < copies; ++c) {
            for (std::size_t i = 0; i < edges.size(); ++i) {
                w[c * edges_per_copy + i] = edges[i].weight;
            }
        }
        edge_w = std::move(w);
    }

    ad::AdamState::Options opts;
    opts.lr = model.config.lr;
    std::vector<ad::Tensor> params = model.layer_weights;
    params.push_back(model.readout);
    ad::AdamState adam(params, opts);

    TrainResult result;
    result.loss_trace.reserve(static_cast<std::size_t>(model.config.epochs));
    for (int epoch = 0; epoch < model.config.epochs; ++epoch) {
        ad::Tape tape;
        const ad::Var f = tape.constant(inputs);
        const ad::Var t = tape.constant(targets);
        std::optional<ad::Var> sigma;
        if (edge_w) sigma = tape.constant(*edge_w);
        std::vector<ad::Var> weight_vars;
        const ad::Var pred = sage_graph_forward(tape, model, f, stacked, sigma, true, &weight_vars);
        const ad::Var loss =
            model.config.mse_loss ? tape.mse_loss(pred, t) : tape.mae_loss(pred, t);
        const double loss_value = tape.value(loss).scalar_value();
        if (!std::isfinite(loss_value)) {
            throw std::runtime_error("sage_train: loss diverged to " +
                                     std::to_string(loss_value) + " at epoch " +
                                     std::to_string(epoch) + " (lr " +
                                     std::to_string(model.config.lr) + ")");
        }
        result.loss_trace.push_back(loss_value);
        tape.backward(loss);

        std::vector<ad::Tensor*> ps;
        std::vector<const ad::Tensor*> gs;
        for (std::size_t i = 0; i < model.layer_weights.size(); ++i) {
            ps.push_back(&model.layer_weights[i]);
            gs.push_back(&tape.grad(weight_vars[i]));
        }
        ps.push_back(&model.readout);
        gs.push_back(&tape.grad(weight_vars.back()));
        adam.step(ps, gs);
    }
    return result;
}

void save_sage(const SageForecaster& model, const std::string& path) {
    nlohmann::json j;
    j["format"] = "trendgnn-sage";
    j["version"] = 1;
    j["seed"] = model.seed;
    j["config"]["layers"] = model.config.layers;
    j["config"]["hidden"] = model.config.hidden;
    j["config"]["epochs"] = model.config.epochs;
    j["config"]["lr"] = model.config.lr;
    j["config"]["mse_loss"] = model.config.mse_loss;
    j["config"]["aggregator_weighted"] = model.config.aggregator_weighted;
    auto dump_tensor = [](const ad::Tensor& t) {
        nlohmann::json out;
        out["shape"] = t.shape();
        out["data"] = t.data();
        return out;
    };
    j["layer_weights"] = nlohmann::json::array();
    for (const auto& w : model.layer_weights) j["layer_weights"].push_back(dump_tensor(w));
    j["readout"] = dump_tensor(model.readout);
    csvio::write_text_file(path, j.dump() + "\n");
}

SageForecaster load_sage(const std::string& path) {
    const auto j = nlohmann::json::parse(csvio::read_text_file(path));
    if (j.value("format", "") != "trendgnn-sage") {
        throw std::runtime_error(path + ": not a sage checkpoint");
    }
    SageForecaster m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config.layers = j.at("config").at("layers").get<int>();
    m.config.hidden = j.at("config").at("hidden").get<int>();
    m.config.epochs = j.at("config").at("epochs").get<int>();
    m.config.lr = j.at("config").at("lr").get<double>();
    m.config.mse_loss = j.at("config").at("mse_loss").get<bool>();
    m.config.aggregator_weighted = j.at("config").at("aggregator_weighted").get<bool>();
    auto read_tensor = [&](const nlohmann::json& t) {
        return ad::Tensor(t.at("shape").get<std::vector<std::size_t>>(),
                          t.at("data").get<std::vector<double>>());
    };
    for (const auto& w : j.at("layer_weights")) m.layer_weights.push_back(read_tensor(w));
    m.readout = read_tensor(j.at("readout"));
    return m;
}

}  // namespace trendgnn::models
