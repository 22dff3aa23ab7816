#include "trendgnn/tape.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

namespace trendgnn::ad {

namespace {

std::uint64_t next_tape_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_string() +
                                    " vs " + b.shape_string());
    }
}

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(op) + ": expected a matrix, got " +
                                    t.shape_string());
    }
}

#ifndef NDEBUG
#define TG_DEBUG_FINITE(tensor, where) (tensor).check_finite(where)
#else
#define TG_DEBUG_FINITE(tensor, where) ((void)0)
#endif

}  // namespace

Tape::Tape() : id_(next_tape_id()) {}

const Tape::Node& Tape::node(Var v) const {
    check_owned(v, "node access");
    return nodes_[v.index];
}

Tape::Node& Tape::mutable_node(Var v) {
    check_owned(v, "node access");
    return nodes_[v.index];
}

void Tape::check_owned(Var v, const char* op) const {
    if (v.tape_id != id_ || v.index >= nodes_.size()) {
        throw std::invalid_argument(std::string(op) + ": variable does not belong to this tape");
    }
}

Var Tape::push(Tensor value, bool requires_grad,
               std::function<void(Tape&, const Node&)> fn) {
    Node n;
    TG_DEBUG_FINITE(value, "op output");
    n.grad = Tensor::uninitialized(value.shape());
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.is_leaf = fn == nullptr;
    n.backprop = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1), id_};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    value.check_finite("leaf");
    return push(std::move(value), requires_grad, nullptr);
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& A = node(a).value;
    const Tensor& B = node(b).value;
    require_matrix(A, "matmul");
    require_matrix(B, "matmul");
    if (A.cols() != B.rows()) {
        throw std::invalid_argument("matmul: inner dimensions differ: " + A.shape_string() +
                                    " vs " + B.shape_string());
    }
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C = Tensor::uninitialized({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A.at(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                C.at(i, j) += av * B.at(p, j);
            }
        }
    }
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(C), rg, [a, b, m, k, n](Tape& t, const Node& out) {
        const Tensor& g = out.grad;
        const Tensor& A = t.nodes_[a.index].value;
        const Tensor& B = t.nodes_[b.index].value;
        if (!t.nodes_[a.index].is_leaf || t.nodes_[a.index].requires_grad) {
            Tensor& ga = t.grad_buf(a.index);  // dA = dC * B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double gv = g.at(i, j);
                    if (gv == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p) ga.at(i, p) += gv * B.at(p, j);
                }
        }
        if (!t.nodes_[b.index].is_leaf || t.nodes_[b.index].requires_grad) {
            Tensor& gb = t.grad_buf(b.index);  // dB = A^T * dC
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = A.at(i, p);
                    if (av == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j) gb.at(p, j) += av * g.at(i, j);
                }
        }
    });
}

Var Tape::add(Var a, Var b) {
    const Tensor& A = node(a).value;
    const Tensor& B = node(b).value;
    require_same_shape(A, B, "add");
    Tensor C = Tensor::uninitialized(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] + B[i];
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(C), rg, [a, b](Tape& t, const Node& out) {
        Tensor& ga = t.grad_buf(a.index);
        Tensor& gb = t.grad_buf(b.index);
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            ga[i] += out.grad[i];
            gb[i] += out.grad[i];
        }
    });
}

Var Tape::sub(Var a, Var b) {
    const Tensor& A = node(a).value;
    const Tensor& B = node(b).value;
    require_same_shape(A, B, "sub");
    Tensor C = Tensor::uninitialized(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] - B[i];
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(C), rg, [a, b](Tape& t, const Node& out) {
        Tensor& ga = t.grad_buf(a.index);
        Tensor& gb = t.grad_buf(b.index);
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            ga[i] += out.grad[i];
            gb[i] -= out.grad[i];
        }
    });
}

Var Tape::mul(Var a, Var b) {
    const Tensor& A = node(a).value;
    const Tensor& B = node(b).value;
    require_same_shape(A, B, "mul");
    Tensor C = Tensor::uninitialized(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] * B[i];
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(C), rg, [a, b](Tape& t, const Node& out) {
        const Tensor& A = t.nodes_[a.index].value;
        const Tensor& B = t.nodes_[b.index].value;
        Tensor& ga = t.grad_buf(a.index);
        Tensor& gb = t.grad_buf(b.index);
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            ga[i] += out.grad[i] * B[i];
            gb[i] += out.grad[i] * A[i];
        }
    });
}

Var Tape::relu(Var a) {
    const Tensor& A = node(a).value;
    Tensor C = Tensor::uninitialized(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] > 0.0 ? A[i] : 0.0;
    return push(std::move(C), node(a).requires_grad, [a](Tape& t, const Node& out) {
        const Tensor& A = t.nodes_[a.index].value;
        Tensor& ga = t.grad_buf(a.index);
        // subgradient at 0 is 0
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            if (A[i] > 0.0) ga[i] += out.grad[i];
        }
    });
}

Var Tape::sigmoid(Var a) {
    const Tensor& A = node(a).value;
    Tensor C = Tensor::uninitialized(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) {
        const double x = A[i];
        if (x >= 0.0) {
            C[i] = 1.0 / (1.0 + std::exp(-x));
        } else {
            const double e = std::exp(x);
            C[i] = e / (1.0 + e);
        }
    }
    const std::uint32_t self = static_cast<std::uint32_t>(nodes_.size());
    return push(std::move(C), node(a).requires_grad, [a, self](Tape& t, const Node& out) {
        const Tensor& s = t.nodes_[self].value;
        Tensor& ga = t.grad_buf(a.index);
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            ga[i] += out.grad[i] * s[i] * (1.0 - s[i]);
        }
    });
}

Var Tape::concat_cols(Var a, Var b) {
    const Tensor& A = node(a).value;
    const Tensor& B = node(b).value;
    require_matrix(A, "concat_cols");
    require_matrix(B, "concat_cols");
    if (A.rows() != B.rows()) {
        throw std::invalid_argument("concat_cols: row counts differ: " + A.shape_string() +
                                    " vs " + B.shape_string());
    }
    const std::size_t r = A.rows(), ca = A.cols(), cb = B.cols();
    Tensor C = Tensor::uninitialized({r, ca + cb});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < ca; ++j) C.at(i, j) = A.at(i, j);
        for (std::size_t j = 0; j < cb; ++j) C.at(i, ca + j) = B.at(i, j);
    }
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(C), rg, [a, b, r, ca, cb](Tape& t, const Node& out) {
        Tensor& ga = t.grad_buf(a.index);
        Tensor& gb = t.grad_buf(b.index);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < ca; ++j) ga.at(i, j) += out.grad.at(i, j);
            for (std::size_t j = 0; j < cb; ++j) gb.at(i, j) += out.grad.at(i, ca + j);
        }
    });
}

Var Tape::scale(Var a, double c) {
    if (!std::isfinite(c)) throw std::invalid_argument("scale: non-finite factor");
    const Tensor& A = node(a).value;
    Tensor C = Tensor::uninitialized(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = c * A[i];
    return push(std::move(C), node(a).requires_grad, [a, c](Tape& t, const Node& out) {
        Tensor& ga = t.grad_buf(a.index);
        for (std::size_t i = 0; i < out.grad.size(); ++i) ga[i] += c * out.grad[i];
    });
}

Var Tape::sum(Var a) {
    const Tensor& A = node(a).value;
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
    return push(Tensor::scalar(s), node(a).requires_grad, [a](Tape& t, const Node& out) {
        Tensor& ga = t.grad_buf(a.index);
        const double g = out.grad[0];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

Var Tape::neighbor_mean(Var h, const InNeighbors& adj) {
    const Tensor& H = node(h).value;
    require_matrix(H, "neighbor_mean");
    if (H.rows() != adj.node_count) {
        throw std::invalid_argument("neighbor_mean: " + std::to_string(adj.node_count) +
                                    " graph nodes vs features " + H.shape_string());
    }
    const std::size_t n = H.rows(), d = H.cols();
    Tensor C = Tensor::uninitialized({n, d});
    for (std::size_t v = 0; v < n; ++v) {
        const auto& src = adj.sources[v];
        if (src.empty()) continue;  // zero row
        const double inv = 1.0 / static_cast<double>(src.size());
        for (const auto u : src) {
            for (std::size_t j = 0; j < d; ++j) C.at(v, j) += H.at(u, j);
        }
        for (std::size_t j = 0; j < d; ++j) C.at(v, j) *= inv;
    }
    return push(std::move(C), node(h).requires_grad, [h, &adj, n, d](Tape& t, const Node& out) {
        Tensor& gh = t.grad_buf(h.index);
        for (std::size_t v = 0; v < n; ++v) {
            const auto& src = adj.sources[v];
            if (src.empty()) continue;
            const double inv = 1.0 / static_cast<double>(src.size());
            for (const auto u : src) {
                for (std::size_t j = 0; j < d; ++j) gh.at(u, j) += inv * out.grad.at(v, j);
            }
        }
    });
}

Var Tape::masked_neighbor_mean(Var h, const InNeighbors& adj, Var edge_weights) {
    const Tensor& H = node(h).value;
    const Tensor& W = node(edge_weights).value;
    require_matrix(H, "masked_neighbor_mean");
    if (H.rows() != adj.node_count) {
        throw std::invalid_argument("masked_neighbor_mean: " + std::to_string(adj.node_count) +
                                    " graph nodes vs features " + H.shape_string());
    }
    if (W.size() != adj.edge_count()) {
        throw std::invalid_argument("masked_neighbor_mean: " + std::to_string(adj.edge_count()) +
                                    " edges vs " + std::to_string(W.size()) + " weights");
    }
    const std::size_t n = H.rows(), d = H.cols();
    Tensor C = Tensor::uninitialized({n, d});
    std::vector<double> wsum(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        const auto& src = adj.sources[v];
        const auto& eid = adj.edge_ids[v];
        for (std::size_t j = 0; j < src.size(); ++j) wsum[v] += W[eid[j]];
        if (wsum[v] == 0.0) continue;  // fully masked neighborhood -> zero row
        for (std::size_t j = 0; j < src.size(); ++j) {
            const double w = W[eid[j]];
            if (w == 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) C.at(v, k) += w * H.at(src[j], k);
        }
        for (std::size_t k = 0; k < d; ++k) C.at(v, k) /= wsum[v];
    }
    const bool rg = node(h).requires_grad || node(edge_weights).requires_grad;
    const std::uint32_t self = static_cast<std::uint32_t>(nodes_.size());
    return push(std::move(C), rg,
                [h, edge_weights, &adj, n, d, self, wsum = std::move(wsum)](Tape& t, const Node& out) {
                    const Tensor& H = t.nodes_[h.index].value;
                    const Tensor& W = t.nodes_[edge_weights.index].value;
                    const Tensor& R = t.nodes_[self].value;  // the weighted means
                    Tensor& gh = t.grad_buf(h.index);
                    Tensor& gw = t.grad_buf(edge_weights.index);
                    for (std::size_t v = 0; v < n; ++v) {
                        if (wsum[v] == 0.0) continue;
                        const auto& src = adj.sources[v];
                        const auto& eid = adj.edge_ids[v];
                        const double inv = 1.0 / wsum[v];
                        for (std::size_t j = 0; j < src.size(); ++j) {
                            const double w = W[eid[j]];
                            double dot = 0.0;
                            for (std::size_t k = 0; k < d; ++k) {
                                const double go = out.grad.at(v, k);
                                gh.at(src[j], k) += w * inv * go;
                                dot += (H.at(src[j], k) - R.at(v, k)) * go;
                            }
                            gw[eid[j]] += inv * dot;
                        }
                    }
                });
}

Var Tape::mae_loss(Var pred, Var target, const std::vector<std::size_t>* rows) {
    const Tensor& P = node(pred).value;
    const Tensor& T = node(target).value;
    require_same_shape(P, T, "mae_loss");
    std::vector<std::size_t> selected;
    if (rows) {
        for (auto r : *rows) {
            if (r >= P.rows()) {
                throw std::invalid_argument("mae_loss: row " + std::to_string(r) +
                                            " out of range for " + P.shape_string());
            }
            selected.push_back(r);
        }
    }
    const std::size_t cols = P.rank() == 2 ? P.cols() : P.size();
    const std::size_t count = rows ? selected.size() * cols : P.size();
    if (count == 0) throw std::invalid_argument("mae_loss: empty selection");
    double acc = 0.0;
    auto for_each = [&](auto&& fn) {
        if (rows) {
            for (auto r : selected)
                for (std::size_t j = 0; j < cols; ++j) fn(r * cols + j);
        } else {
            for (std::size_t i = 0; i < P.size(); ++i) fn(i);
        }
    };
    for_each([&](std::size_t i) { acc += std::abs(P[i] - T[i]); });
    const bool rg = node(pred).requires_grad || node(target).requires_grad;
    return push(Tensor::scalar(acc / static_cast<double>(count)), rg,
                [pred, target, selected, rows_set = rows != nullptr, cols,
                 count](Tape& t, const Node& out) {
                    const Tensor& P = t.nodes_[pred.index].value;
                    const Tensor& T = t.nodes_[target.index].value;
                    Tensor& gp = t.grad_buf(pred.index);
                    Tensor& gt = t.grad_buf(target.index);
                    const double g = out.grad[0] / static_cast<double>(count);
                    auto touch = [&](std::size_t i) {
                        const double diff = P[i] - T[i];
                        const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                        gp[i] += g * s;
                        gt[i] -= g * s;
                    };
                    if (rows_set) {
                        for (auto r : selected)
                            for (std::size_t j = 0; j < cols; ++j) touch(r * cols + j);
                    } else {
                        for (std::size_t i = 0; i < P.size(); ++i) touch(i);
                    }
                });
}

Var Tape::mse_loss(Var pred, Var target) {
    const Tensor& P = node(pred).value;
    const Tensor& T = node(target).value;
    require_same_shape(P, T, "mse_loss");
    if (P.size() == 0) throw std::invalid_argument("mse_loss: empty selection");
    double acc = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        const double d = P[i] - T[i];
        acc += d * d;
    }
    const std::size_t count = P.size();
    const bool rg = node(pred).requires_grad || node(target).requires_grad;
    return push(Tensor::scalar(acc / static_cast<double>(count)), rg,
                [pred, target, count](Tape& t, const Node& out) {
                    const Tensor& P = t.nodes_[pred.index].value;
                    const Tensor& T = t.nodes_[target.index].value;
                    Tensor& gp = t.grad_buf(pred.index);
                    Tensor& gt = t.grad_buf(target.index);
                    const double g = 2.0 * out.grad[0] / static_cast<double>(count);
                    for (std::size_t i = 0; i < count; ++i) {
                        gp[i] += g * (P[i] - T[i]);
                        gt[i] -= g * (P[i] - T[i]);
                    }
                });
}

void Tape::backward(Var loss) {
    check_owned(loss, "backward");
    if (backward_done_) {
        throw std::logic_error("backward: already run on this tape; rebuild the tape");
    }
    const Node& l = nodes_[loss.index];
    if (l.value.size() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    l.value.shape_string());
    }
    backward_done_ = true;
    nodes_[loss.index].grad[0] = 1.0;
    for (std::size_t i = loss.index + 1; i-- > 0;) {
        const Node& n = nodes_[i];
        if (n.backprop) n.backprop(*this, n);
    }
}

const Tensor& Tape::grad(Var v) const {
    const Node& n = node(v);
    if (!backward_done_) {
        throw std::logic_error("grad: backward() has not run on this tape");
    }
    return n.grad;
}

}  // namespace trendgnn::ad
