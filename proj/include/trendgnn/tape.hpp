#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "trendgnn/adjacency.hpp"
#include "trendgnn/tensor.hpp"

namespace trendgnn::ad {

class Tape;

/// Handle to a node on a specific tape. Cheap to copy; only valid for the
/// tape that produced it.
struct Var {
    std::uint32_t index = 0;
    std::uint64_t tape_id = 0;
};

/// Define-by-run recorder. A tape is built fresh for every forward pass,
/// backward() runs once over it in reverse creation order, then gradients of
/// grad-enabled leaves are read off. Single-threaded by design; run
/// concurrent work on separate tapes.
class Tape {
public:
    Tape();

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    /// Inserts a leaf value. Grad-enabled leaves receive gradients on
    /// backward(); plain leaves are treated as constants.
    Var leaf(Tensor value, bool requires_grad = false);
    Var constant(Tensor value) { return leaf(std::move(value), false); }
    Var constant_scalar(double v) { return leaf(Tensor::scalar(v), false); }

    // ---- recorded operations -------------------------------------------

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var relu(Var a);
    Var sigmoid(Var a);
    Var concat_cols(Var a, Var b);
    Var scale(Var a, double c);
    Var sum(Var a);

    /// Mean of each node's in-neighbor rows; nodes without in-neighbors get
    /// a zero row. Differentiable w.r.t. h; the adjacency is constant and
    /// must outlive the tape (it is captured by reference).
    Var neighbor_mean(Var h, const InNeighbors& adj);

    /// Weighted-mean variant: row v = sum_e w_e * h_src(e) / sum_e w_e over
    /// v's in-edges, zero row when the weight sum vanishes. `edge_weights`
    /// is a flat tensor indexed by the adjacency's edge ids; gradients flow
    /// into both h and the weights.
    Var masked_neighbor_mean(Var h, const InNeighbors& adj, Var edge_weights);

    /// Mean absolute error over all entries, or over the selected rows only.
    Var mae_loss(Var pred, Var target, const std::vector<std::size_t>* rows = nullptr);
    Var mse_loss(Var pred, Var target);

    // ---- gradient pass --------------------------------------------------

    /// Runs reverse accumulation from a scalar loss. Calling it a second
    /// time on the same tape is an error (rebuild the tape instead).
    void backward(Var loss);

    const Tensor& value(Var v) const { return node(v).value; }
    /// Gradient of the last backward()'s loss w.r.t. this node.
    const Tensor& grad(Var v) const;

    std::size_t node_count() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool is_leaf = false;
        std::function<void(Tape&, const Node&)> backprop;  // null for leaves
    };

    const Node& node(Var v) const;
    Node& mutable_node(Var v);
    Var push(Tensor value, bool requires_grad, std::function<void(Tape&, const Node&)> fn);
    void check_owned(Var v, const char* op) const;
    Tensor& grad_buf(std::uint32_t index) { return nodes_[index].grad; }

    std::vector<Node> nodes_;
    std::uint64_t id_;
    bool backward_done_ = false;
};

}  // namespace trendgnn::ad
