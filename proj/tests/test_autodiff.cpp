#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "trendgnn/adjacency.hpp"
#include "trendgnn/optim.hpp"
#include "trendgnn/tape.hpp"
#include "trendgnn/tensor.hpp"

using namespace trendgnn;
using namespace trendgnn::ad;
using tgtest::fd_check;
using tgtest::random_tensor;
using tgtest::random_tensor_away_from;

namespace {

InNeighbors table_from_edges(std::size_t n,
                             const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
    InNeighbors t;
    t.node_count = n;
    t.sources.assign(n, {});
    t.edge_ids.assign(n, {});
    for (std::uint32_t i = 0; i < edges.size(); ++i) {
        t.sources[edges[i].second].push_back(edges[i].first);
        t.edge_ids[edges[i].second].push_back(i);
    }
    return t;
}

}  // namespace

TEST_CASE("tensor construction validates shape and finiteness") {
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2}, {1.0, std::nan("")}), std::invalid_argument);
    const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.at(1, 2) == 6.0);
}

TEST_CASE("matmul identity and hand-computed products") {
    Tape tape;
    const Var eye = tape.constant(Tensor({2, 2}, {1, 0, 0, 1}));
    const Var b = tape.constant(Tensor({2, 2}, {3, 4, 5, 6}));
    const Tensor& prod = tape.value(tape.matmul(eye, b));
    CHECK(prod.data() == std::vector<double>{3, 4, 5, 6});

    const Var row = tape.constant(Tensor({1, 2}, {1, 2}));
    const Var col = tape.constant(Tensor({2, 1}, {3, 4}));
    CHECK(tape.value(tape.matmul(row, col)).scalar_value() == 11.0);

    const Var bad = tape.constant(Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
    CHECK_THROWS_WITH_AS(tape.matmul(eye, bad), doctest::Contains("2x2"),
                         std::invalid_argument);
}

TEST_CASE("matmul backward matches finite differences") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_tensor(rng, {3, 4});
        const auto b = random_tensor(rng, {4, 2});
        const auto r = fd_check({a, b}, [](Tape& t, const std::vector<Var>& p) {
            return t.sum(t.matmul(p[0], p[1]));
        });
        CHECK(r.max_rel_err < 1e-4);
    }
}

TEST_CASE("elementwise ops: values and shape errors") {
    Tape tape;
    const Var a = tape.constant(Tensor({3}, {-1, 0, 2}));
    CHECK(tape.value(tape.relu(a)).data() == std::vector<double>{0, 0, 2});
    const Var z = tape.constant(Tensor({1}, {0.0}));
    CHECK(tape.value(tape.sigmoid(z))[0] == 0.5);

    const Var m = tape.constant(Tensor::zeros(2, 3));
    const Var n = tape.constant(Tensor::zeros(2, 2));
    CHECK(tape.value(tape.concat_cols(m, n)).cols() == 5);
    CHECK_THROWS_AS(tape.add(m, n), std::invalid_argument);
    const Var k = tape.constant(Tensor::zeros(3, 2));
    CHECK_THROWS_AS(tape.concat_cols(m, k), std::invalid_argument);
}

TEST_CASE("elementwise and activation gradients match finite differences") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_tensor(rng, {4, 3});
        const auto b = random_tensor(rng, {4, 3});
        for (const char op : {'a', 's', 'm', 'g', 'c', 'k'}) {
            const auto r = fd_check({a, b}, [op](Tape& t, const std::vector<Var>& p) {
                switch (op) {
                    case 'a': return t.sum(t.add(p[0], p[1]));
                    case 's': return t.sum(t.sub(p[0], p[1]));
                    case 'm': return t.sum(t.mul(p[0], p[1]));
                    case 'g': return t.sum(t.mul(t.sigmoid(p[0]), p[1]));
                    case 'c': return t.sum(t.mul(t.concat_cols(p[0], p[1]),
                                                 t.concat_cols(p[1], p[0])));
                    default: return t.sum(t.scale(p[0], 1.7));
                }
            });
            CHECK(r.max_rel_err < 1e-4);
        }
        const auto c = random_tensor_away_from(rng, {4, 3}, 0.0, 1e-3);
        const auto r = fd_check({c}, [](Tape& t, const std::vector<Var>& p) {
            return t.sum(t.relu(p[0]));
        });
        CHECK(r.max_rel_err < 1e-4);
    }
}

TEST_CASE("neighbor_mean aggregates in-neighbors, zero rows without them") {
    const auto adj = table_from_edges(3, {{1, 0}, {2, 0}});
    Tape tape;
    const Var h = tape.constant(Tensor({3, 1}, {1, 3, 5}));
    const Tensor& out = tape.value(tape.neighbor_mean(h, adj));
    CHECK(out.at(0, 0) == 4.0);
    CHECK(out.at(1, 0) == 0.0);
    CHECK(out.at(2, 0) == 0.0);

    const auto empty = table_from_edges(3, {});
    const Tensor& zero = tape.value(tape.neighbor_mean(h, empty));
    for (std::size_t i = 0; i < zero.size(); ++i) CHECK(zero[i] == 0.0);
}

TEST_CASE("neighbor_mean equals multiplication by the row-stochastic matrix") {
    Rng rng(13);
    const std::size_t n = 6, d = 3;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t s = 0; s < n; ++s) {
        for (std::uint32_t t = 0; t < n; ++t) {
            if (s != t && rng.uniform() < 0.4) edges.push_back({s, t});
        }
    }
    const auto adj = table_from_edges(n, edges);
    Tensor dense = Tensor::zeros(n, n);
    for (std::size_t v = 0; v < n; ++v) {
        if (adj.sources[v].empty()) continue;
        for (const auto u : adj.sources[v]) {
            dense.at(v, u) = 1.0 / static_cast<double>(adj.sources[v].size());
        }
    }
    const auto h = random_tensor(rng, {n, d});
    Tape tape;
    const Var hv = tape.constant(h);
    const Tensor& fast = tape.value(tape.neighbor_mean(hv, adj));
    const Tensor& ref = tape.value(tape.matmul(tape.constant(dense), hv));
    for (std::size_t i = 0; i < fast.size(); ++i) {
        CHECK(fast[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("neighbor_mean and masked variant gradients match finite differences") {
    Rng rng(14);
    const auto adj = table_from_edges(5, {{0, 1}, {2, 1}, {1, 3}, {4, 3}, {3, 0}});
    for (int trial = 0; trial < 10; ++trial) {
        const auto h = random_tensor(rng, {5, 2});
        const auto r = fd_check({h}, [&adj](Tape& t, const std::vector<Var>& p) {
            return t.sum(t.mul(t.neighbor_mean(p[0], adj), p[0]));
        });
        CHECK(r.max_rel_err < 1e-4);

        const auto w = random_tensor(rng, {5}, 0.1, 1.5);  // positive weights
        const auto rm = fd_check({h, w}, [&adj](Tape& t, const std::vector<Var>& p) {
            return t.sum(t.mul(t.masked_neighbor_mean(p[0], adj, p[1]), p[0]));
        });
        CHECK(rm.max_rel_err < 1e-4);
    }
}

TEST_CASE("mae_loss values, row subsets and gradients") {
    Tape tape;
    const Var p = tape.constant(Tensor({2}, {0, 1}));
    const Var t = tape.constant(Tensor({2}, {1, 1}));
    CHECK(tape.value(tape.mae_loss(p, t)).scalar_value() == 0.5);
    CHECK(tape.value(tape.mae_loss(t, t)).scalar_value() == 0.0);

    Rng rng(15);
    const auto a = random_tensor(rng, {5, 4});
    const auto b = random_tensor(rng, {5, 4});
    // scalar-loop oracle
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    Tape tape2;
    const double got =
        tape2.value(tape2.mae_loss(tape2.constant(a), tape2.constant(b))).scalar_value();
    CHECK(got == doctest::Approx(acc / 20.0).epsilon(1e-12));

    const std::vector<std::size_t> rows = {1, 3};
    double sub = 0.0;
    for (const auto r : rows) {
        for (std::size_t c = 0; c < 4; ++c) sub += std::abs(a.at(r, c) - b.at(r, c));
    }
    Tape tape3;
    const double got_rows =
        tape3.value(tape3.mae_loss(tape3.constant(a), tape3.constant(b), &rows)).scalar_value();
    CHECK(got_rows == doctest::Approx(sub / 8.0).epsilon(1e-12));

    const std::vector<std::size_t> none;
    Tape tape4;
    CHECK_THROWS_AS(tape4.mae_loss(tape4.constant(a), tape4.constant(b), &none),
                    std::invalid_argument);

    const auto r = fd_check({a}, [&b](Tape& t, const std::vector<Var>& p) {
        return t.mae_loss(p[0], t.constant(b));
    });
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("backward: ones for sum, zero for constant paths, W gradient by FD") {
    Rng rng(16);
    const auto x = random_tensor(rng, {3, 2});
    Tape tape;
    const Var xv = tape.leaf(x, true);
    tape.backward(tape.sum(xv));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(tape.grad(xv)[i] == 1.0);

    // constant loss: gradient never reaches the leaf
    Tape tape2;
    const Var y = tape2.leaf(x, true);
    const Var c = tape2.constant_scalar(3.0);
    tape2.backward(tape2.scale(c, 2.0));
    (void)y;
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(tape2.grad(y)[i] == 0.0);

    const auto w = random_tensor(rng, {4, 3});
    const auto xin = random_tensor(rng, {3, 2});
    const auto target = random_tensor(rng, {4, 2});
    const auto r = fd_check({w}, [&](Tape& t, const std::vector<Var>& p) {
        return t.mae_loss(t.matmul(p[0], t.constant(xin)), t.constant(target));
    });
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("backward guards: double run, non-scalar loss, detached node") {
    Tape tape;
    const Var x = tape.leaf(Tensor({2}, {1, 2}), true);
    const Var s = tape.sum(x);
    tape.backward(s);
    CHECK_THROWS_AS(tape.backward(s), std::logic_error);

    Tape tape2;
    const Var y = tape2.leaf(Tensor({2}, {1, 2}), true);
    CHECK_THROWS_AS(tape2.backward(y), std::invalid_argument);

    Tape tape3;
    CHECK_THROWS_AS(tape3.backward(s), std::invalid_argument);  // belongs to `tape`
}

TEST_CASE("backward is linear in the loss") {
    Rng rng(17);
    const auto x = random_tensor(rng, {4});
    const double a = 1.7, b = -0.6;

    auto grad_of = [&](auto&& lossfn) {
        Tape tape;
        const Var xv = tape.leaf(x, true);
        tape.backward(lossfn(tape, xv));
        return tape.grad(xv).data();
    };
    auto f = [](Tape& t, Var x) { return t.sum(t.mul(x, x)); };
    auto g = [](Tape& t, Var x) { return t.sum(t.sigmoid(x)); };
    const auto gf = grad_of(f);
    const auto gg = grad_of(g);
    const auto combined = grad_of([&](Tape& t, Var x) {
        return t.add(t.scale(f(t, x), a), t.scale(g(t, x), b));
    });
    for (std::size_t i = 0; i < combined.size(); ++i) {
        CHECK(combined[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-10));
    }
}

TEST_CASE("determinism: identical seeds give bit-identical results") {
    auto run = [] {
        Rng rng(99);
        const auto a = random_tensor(rng, {6, 6});
        const auto b = random_tensor(rng, {6, 6});
        Tape tape;
        const Var loss = tape.mae_loss(tape.matmul(tape.leaf(a, true), tape.constant(b)),
                                       tape.constant(Tensor::zeros(6, 6)));
        return tape.value(loss).scalar_value();
    };
    CHECK(run() == run());
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Tensor p({2}, {0.4, -0.3});
    AdamState adam({p});
    const Tensor g({2}, {0.0, 0.0});
    Tensor before = p;
    adam.step({&p}, {&g});
    CHECK(p.data() == before.data());
}

TEST_CASE("adam: bias-corrected first step moves by ~lr") {
    Tensor p({1}, {1.0});
    AdamState::Options opts;
    opts.lr = 0.1;
    AdamState adam({p}, opts);
    const Tensor g({1}, {1.0});
    adam.step({&p}, {&g});
    // first step: m-hat = g, v-hat = g^2, so the update is lr * 1/(1 + eps)
    CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("adam: converges on a quadratic bowl") {
    Tensor w({1}, {-4.0});
    AdamState::Options opts;
    opts.lr = 0.05;
    AdamState adam({w}, opts);
    for (int i = 0; i < 500; ++i) {
        const Tensor g({1}, {2.0 * (w[0] - 3.0)});
        adam.step({&w}, {&g});
    }
    CHECK(std::abs(w[0] - 3.0) < 1e-2);
}

TEST_CASE("adam: shape mismatch is rejected") {
    Tensor p({2}, {1.0, 2.0});
    AdamState adam({p});
    Tensor wrong({3}, {1.0, 2.0, 3.0});
    const Tensor g({3}, {0.0, 0.0, 0.0});
    CHECK_THROWS_AS(adam.step({&wrong}, {&g}), std::invalid_argument);
}
