#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "fd_check.hpp"
#include "trendgnn/graph.hpp"
#include "trendgnn/models.hpp"
#include "trendgnn/rng.hpp"
#include "trendgnn/synth.hpp"

using namespace trendgnn;
using namespace trendgnn::models;

namespace {

/// Independent OLS oracle: assembles the normal equations with plain loops
/// and solves them by Cramer's rule with cofactor-expansion determinants.
/// Completely separate from the production solver's elimination path.
double det(const std::vector<std::vector<double>>& m) {
    const std::size_t n = m.size();
    if (n == 1) return m[0][0];
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::vector<std::vector<double>> minor;
        for (std::size_t r = 1; r < n; ++r) {
            std::vector<double> row;
            for (std::size_t cc = 0; cc < n; ++cc) {
                if (cc != c) row.push_back(m[r][cc]);
            }
            minor.push_back(std::move(row));
        }
        acc += (c % 2 == 0 ? 1.0 : -1.0) * m[0][c] * det(minor);
    }
    return acc;
}

std::vector<double> ols_cramer(const std::vector<std::vector<double>>& columns,
                               const std::vector<double>& y) {
    const std::size_t k = columns.size(), n = y.size();
    std::vector<std::vector<double>> ata(k, std::vector<double>(k, 0.0));
    std::vector<double> aty(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t t = 0; t < n; ++t) ata[i][j] += columns[i][t] * columns[j][t];
        }
        for (std::size_t t = 0; t < n; ++t) aty[i] += columns[i][t] * y[t];
    }
    const double d = det(ata);
    std::vector<double> beta(k);
    for (std::size_t i = 0; i < k; ++i) {
        auto replaced = ata;
        for (std::size_t r = 0; r < k; ++r) replaced[r][i] = aty[r];
        beta[i] = det(replaced) / d;
    }
    return beta;
}

signals::WindowSample make_window(const ad::Tensor& input, const ad::Tensor& target) {
    signals::WindowSample w;
    w.window_start = 0;
    w.input = input;
    w.target = target;
    return w;
}

}  // namespace

TEST_CASE("flat baseline repeats the last input week") {
    ad::Tensor in = ad::Tensor::zeros(2, 4);
    for (std::size_t c = 0; c < 4; ++c) {
        in.at(0, c) = 0.3;
        in.at(1, c) = 0.1 * static_cast<double>(c);
    }
    const auto w = make_window(in, ad::Tensor::zeros(2, 4));
    const auto pred = flat_predict(w);
    for (std::size_t h = 0; h < 4; ++h) {
        CHECK(pred.at(0, h) == 0.3);
        CHECK(pred.at(1, h) == in.at(1, 3));  // last week of the ramp row
    }
}

TEST_CASE("flat baseline on a linear ramp: MAE at horizon h is h*slope") {
    const double slope = 0.02;
    std::vector<double> series(30);
    for (std::size_t t = 0; t < series.size(); ++t) series[t] = slope * static_cast<double>(t);
    const auto pred = flat_predict(std::span<const double>(series.data(), 10));
    for (std::size_t h = 1; h <= 4; ++h) {
        const double truth = series[9 + h];
        CHECK(std::abs(pred[h - 1] - truth) ==
              doctest::Approx(static_cast<double>(h) * slope).epsilon(1e-12));
    }
}

TEST_CASE("ols matches the Cramer normal-equations oracle to 1e-8") {
    Rng rng(51);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 50;
        std::vector<std::vector<double>> cols;
        cols.emplace_back(n, 1.0);
        for (int j = 0; j < 3; ++j) {
            std::vector<double> c(n);
            for (auto& v : c) v = rng.uniform(-1.0, 1.0);
            cols.push_back(std::move(c));
        }
        std::vector<double> y(n);
        for (std::size_t t = 0; t < n; ++t) {
            y[t] = 0.4 + 1.2 * cols[1][t] - 0.7 * cols[2][t] + 0.1 * cols[3][t] +
                   0.05 * rng.gaussian();
        }
        const auto fast = ols_solve(cols, y);
        const auto oracle = ols_cramer(cols, y);
        REQUIRE(fast.size() == oracle.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
            CHECK(fast[i] == doctest::Approx(oracle[i]).epsilon(1e-8));
        }
    }
}

TEST_CASE("ols rejects singular systems") {
    std::vector<std::vector<double>> cols = {{1, 1, 1, 1}, {2, 2, 2, 2}};
    const std::vector<double> y = {1, 2, 3, 4};
    CHECK_THROWS_AS(ols_solve(cols, y), std::runtime_error);
}

TEST_CASE("ar_fit recovers AR(1) phi=0.8 within 0.05 on T=500") {
    Rng rng(52);
    std::vector<double> x(500);
    x[0] = 0.0;
    for (std::size_t t = 1; t < x.size(); ++t) x[t] = 0.8 * x[t - 1] + 0.1 * rng.gaussian();
    const auto model = ar_fit(x);
    CHECK(!model.flat_fallback);
    REQUIRE(!model.phi.empty());
    CHECK(model.phi[0] > 0.75);
    CHECK(model.phi[0] < 0.85);
}

TEST_CASE("ar_fit: constant series falls back to flat with a flag") {
    std::vector<double> flat(60, 0.42);
    const auto model = ar_fit(flat);
    CHECK(model.flat_fallback);
    const auto pred = ar_predict(model, flat);
    for (const auto v : pred) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));
}

TEST_CASE("ar_fit enforces the minimum training length") {
    std::vector<double> x(10, 0.0);
    CHECK_THROWS_AS(ar_fit(x), std::invalid_argument);
}

TEST_CASE("ar_predict closed forms") {
    // AR(1) phi=1, c=0: random walk repeats the last value
    ARModel walk;
    walk.d = 0;
    walk.p = 1;
    walk.phi = {1.0};
    const std::vector<double> hist = {0.2, 0.5, 0.8};
    for (const auto v : ar_predict(walk, hist)) CHECK(v == doctest::Approx(0.8).epsilon(1e-12));

    // AR(1) phi=0.5: geometric decay from 0.8
    ARModel decay = walk;
    decay.phi = {0.5};
    const auto pred = ar_predict(decay, hist);
    CHECK(pred[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(pred[1] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(pred[2] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(pred[3] == doctest::Approx(0.05).epsilon(1e-12));

    // d=1 with zero AR coefficients repeats the last observed value
    ARModel diff;
    diff.d = 1;
    diff.p = 1;
    diff.phi = {0.0};
    for (const auto v : ar_predict(diff, hist)) CHECK(v == doctest::Approx(0.8).epsilon(1e-12));

    // intercept-only model forecasts the intercept at every horizon
    ARModel icept;
    icept.d = 0;
    icept.p = 1;
    icept.phi = {0.0};
    icept.intercept = 0.33;
    for (const auto v : ar_predict(icept, hist)) CHECK(v == doctest::Approx(0.33).epsilon(1e-12));

    CHECK_THROWS_AS(ar_predict(walk, std::span<const double>()), std::invalid_argument);
}

TEST_CASE("sage init: parameter shapes follow (layers, widths)") {
    SageConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 16;
    const auto m = SageForecaster::init(cfg, 1);
    REQUIRE(m.layer_weights.size() == 2);
    CHECK(m.layer_weights[0].rows() == 8);   // 2 * input width 4
    CHECK(m.layer_weights[0].cols() == 16);
    CHECK(m.layer_weights[1].rows() == 32);  // 2 * hidden
    CHECK(m.layer_weights[1].cols() == 16);
    CHECK(m.readout.rows() == 16);
    CHECK(m.readout.cols() == 4);

    const auto m2 = SageForecaster::init(cfg, 1);
    CHECK(m.layer_weights[0].data() == m2.layer_weights[0].data());  // seeded init
}

TEST_CASE("sage forward: empty edge set depends on self features only") {
    SageConfig cfg;
    cfg.hidden = 8;
    const auto model = SageForecaster::init(cfg, 3);
    std::vector<graphs::SignalGraph> empty_graphs;
    graphs::SignalGraph g;
    g.state = "S0";
    g.signal_names = {"a", "b", "c"};
    empty_graphs.push_back(g);
    const auto adj = graphs::assemble_block(std::move(empty_graphs));

    ad::Tensor f = ad::Tensor::zeros(3, 4);
    for (std::size_t c = 0; c < 4; ++c) {
        f.at(0, c) = 0.3 + 0.1 * static_cast<double>(c);
        f.at(1, c) = f.at(0, c);  // same features as node 0
        f.at(2, c) = 0.9 - 0.2 * static_cast<double>(c);
    }
    const auto out = sage_forward(model, f, adj);
    for (std::size_t h = 0; h < 4; ++h) CHECK(out.at(0, h) == out.at(1, h));
}

TEST_CASE("sage forward: identical features on a full graph give identical outputs") {
    SageConfig cfg;
    cfg.hidden = 8;
    const auto model = SageForecaster::init(cfg, 4);
    const auto adj = graphs::assemble_block({graphs::full_graph(5)});
    ad::Tensor f = ad::Tensor::zeros(5, 4);
    for (std::size_t r = 0; r < 5; ++r) {
        for (std::size_t c = 0; c < 4; ++c) f.at(r, c) = 0.2 + 0.05 * static_cast<double>(c);
    }
    const auto out = sage_forward(model, f, adj);
    for (std::size_t r = 1; r < 5; ++r) {
        for (std::size_t h = 0; h < 4; ++h) CHECK(out.at(r, h) == out.at(0, h));
    }
}

TEST_CASE("sage forward is permutation-equivariant") {
    Rng rng(53);
    SageConfig cfg;
    cfg.hidden = 8;
    const auto model = SageForecaster::init(cfg, 5);

    const std::size_t n = 6;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges = {{0, 1}, {2, 1}, {3, 4},
                                                                  {5, 0}, {1, 5}, {4, 2}};
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("s" + std::to_string(i));
    graphs::SignalGraph g;
    g.state = "S0";
    g.signal_names = names;
    for (const auto& [s, d] : edges) g.edges.push_back({s, d, 1.0, 0.0});
    const auto adj = graphs::assemble_block({g});
    const auto f = tgtest::random_tensor(rng, {n, 4}, 0.0, 1.0);
    const auto out = sage_forward(model, f, adj);

    // permute nodes with a fixed cycle
    std::vector<std::uint32_t> perm = {2, 0, 4, 5, 1, 3};  // new index of old node i
    graphs::SignalGraph pg;
    pg.state = "S0";
    pg.signal_names = names;
    for (const auto& [s, d] : edges) pg.edges.push_back({perm[s], perm[d], 1.0, 0.0});
    const auto padj = graphs::assemble_block({pg});
    ad::Tensor pf = ad::Tensor::zeros(n, 4);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < 4; ++c) pf.at(perm[r], c) = f.at(r, c);
    }
    const auto pout = sage_forward(model, pf, padj);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t h = 0; h < 4; ++h) {
            CHECK(pout.at(perm[r], h) == doctest::Approx(out.at(r, h)).epsilon(1e-12));
        }
    }
}

TEST_CASE("sage forward gradients match finite differences on a 6-node instance") {
    Rng rng(54);
    SageConfig cfg;
    cfg.hidden = 5;
    const auto model = SageForecaster::init(cfg, 6);
    graphs::SignalGraph g;
    g.state = "S0";
    g.signal_names = {"a", "b", "c", "d", "e", "f"};
    g.edges = {{0, 1, 1, 0}, {2, 1, 1, 0}, {1, 3, 1, 0}, {4, 5, 1, 0}, {5, 0, 1, 0}};
    const auto adj = graphs::assemble_block({g});
    const auto& in = adj.in_neighbors();
    const auto features = tgtest::random_tensor(rng, {6, 4}, 0.0, 1.0);
    const auto target = tgtest::random_tensor(rng, {6, 4}, 0.0, 1.0);

    std::vector<ad::Tensor> params = model.layer_weights;
    params.push_back(model.readout);
    const auto r = tgtest::fd_check(params, [&](ad::Tape& t, const std::vector<ad::Var>& p) {
        // rebuild the forward pass over the perturbed weights
        ad::Var h = t.constant(features);
        for (std::size_t l = 0; l + 1 < p.size(); ++l) {
            h = t.relu(t.matmul(t.concat_cols(h, t.neighbor_mean(h, in)), p[l]));
        }
        return t.mse_loss(t.matmul(h, p.back()), t.constant(target));
    });
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("block locality: other states' outputs are bit-identical under perturbation") {
    Rng rng(55);
    SageConfig cfg;
    cfg.hidden = 8;
    const auto model = SageForecaster::init(cfg, 7);
    std::vector<graphs::SignalGraph> gs;
    for (int s = 0; s < 3; ++s) gs.push_back(graphs::full_graph(4));
    const auto adj = graphs::assemble_block(std::move(gs));
    auto f = tgtest::random_tensor(rng, {12, 4}, 0.0, 1.0);
    const auto base = sage_forward(model, f, adj);
    // perturb state 0's rows only
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) f.at(r, c) = rng.uniform(0.0, 1.0);
    }
    const auto bumped = sage_forward(model, f, adj);
    for (std::size_t r = 4; r < 12; ++r) {
        for (std::size_t h = 0; h < 4; ++h) CHECK(bumped.at(r, h) == base.at(r, h));
    }
}

TEST_CASE("sage training: loss descends, same seed gives identical parameters") {
    signals::SynthSpec spec;
    spec.n_states = 2;
    spec.n_signals = 4;
    spec.weeks = 30;
    spec.relations = {{0, 1, 1, 1.0}};
    const auto [panel, edges] = signals::synth_panel(spec, 61);
    (void)edges;
    std::vector<graphs::SignalGraph> gs;
    for (std::size_t s = 0; s < 2; ++s) {
        gs.push_back(graphs::random_graph(4, 2.0, 100 + s, panel.signal_names, panel.states[s]));
    }
    const auto adj = graphs::assemble_block(std::move(gs));

    SageConfig cfg;
    cfg.hidden = 12;
    cfg.epochs = 60;
    cfg.lr = 5e-3;

    auto m1 = SageForecaster::init(cfg, 9);
    const auto r1 = sage_train(m1, panel, adj, signals::SplitSpec{24, 4});
    CHECK(r1.loss_trace.size() == 60);
    CHECK(r1.loss_trace.back() <= r1.loss_trace.front());

    auto m2 = SageForecaster::init(cfg, 9);
    sage_train(m2, panel, adj, signals::SplitSpec{24, 4});
    for (std::size_t l = 0; l < m1.layer_weights.size(); ++l) {
        CHECK(m1.layer_weights[l].data() == m2.layer_weights[l].data());
    }
    CHECK(m1.readout.data() == m2.readout.data());
}

TEST_CASE("sage training: descent holds across 20 seeds") {
    int descended = 0;
    for (int seed = 0; seed < 20; ++seed) {
        signals::SynthSpec spec;
        spec.n_states = 1;
        spec.n_signals = 4;
        spec.weeks = 20;
        const auto [panel, edges] = signals::synth_panel(spec, 700 + seed);
        (void)edges;
        const auto adj = graphs::assemble_block({graphs::full_graph(4, panel.signal_names,
                                                                    panel.states[0])});
        SageConfig cfg;
        cfg.hidden = 8;
        cfg.epochs = 30;
        cfg.lr = 5e-3;
        auto m = SageForecaster::init(cfg, static_cast<std::uint64_t>(seed));
        const auto r = sage_train(m, panel, adj, signals::SplitSpec{16, 4});
        if (r.loss_trace.back() <= r.loss_trace.front()) ++descended;
    }
    CHECK(descended == 20);
}

TEST_CASE("sage overfits a single window") {
    signals::SynthSpec spec;
    spec.n_states = 1;
    spec.n_signals = 4;
    spec.weeks = 8;
    const auto [panel, edges] = signals::synth_panel(spec, 62);
    (void)edges;
    const auto adj =
        graphs::assemble_block({graphs::full_graph(4, panel.signal_names, panel.states[0])});
    SageConfig cfg;
    cfg.hidden = 64;
    cfg.epochs = 500;
    cfg.lr = 5e-3;
    auto m = SageForecaster::init(cfg, 8);
    const auto r = sage_train(m, panel, adj, signals::SplitSpec{8, 4});
    CHECK(r.loss_trace.back() < 0.02);
}

TEST_CASE("checkpoint round-trip reproduces forward outputs exactly") {
    namespace fs = std::filesystem;
    Rng rng(56);
    SageConfig cfg;
    cfg.hidden = 8;
    const auto model = SageForecaster::init(cfg, 77);
    const auto dir = fs::temp_directory_path() / "tg_models_test";
    fs::create_directories(dir);
    const auto path = (dir / "model.json").string();
    save_sage(model, path);
    const auto loaded = load_sage(path);
    CHECK(loaded.seed == 77);
    const auto adj = graphs::assemble_block({graphs::full_graph(4)});
    const auto f = tgtest::random_tensor(rng, {4, 4}, 0.0, 1.0);
    const auto a = sage_forward(model, f, adj);
    const auto b = sage_forward(loaded, f, adj);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    fs::remove_all(dir);
}

TEST_CASE("sage config validation") {
    SageConfig cfg;
    cfg.layers = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.layers = 1;
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
