#pragma once

#include <vector>

#include "trendgnn/tensor.hpp"

namespace trendgnn::ad {

/// Adaptive-moment (Adam) optimizer state over a fixed parameter list.
/// Moment accumulators are laid out to match the parameters exactly and the
/// update is fully deterministic given the state.
class AdamState {
public:
    struct Options {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
    };

    AdamState() = default;
    explicit AdamState(const std::vector<Tensor>& params) : AdamState(params, Options()) {}
    AdamState(const std::vector<Tensor>& params, Options opts);

    /// One update step in place. `params` and `grads` must match the shapes
    /// the state was built with.
    void step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads);

    long step_count() const { return step_count_; }
    const Options& options() const { return opts_; }

private:
    Options opts_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    long step_count_ = 0;
};

}  // namespace trendgnn::ad
