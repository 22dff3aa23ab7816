#include "trendgnn/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace trendgnn::ad {

AdamState::AdamState(const std::vector<Tensor>& params, Options opts) : opts_(opts) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        m_.emplace_back(p.shape());
        v_.emplace_back(p.shape());
    }
}

void AdamState::step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw std::invalid_argument("adam: expected " + std::to_string(m_.size()) +
                                    " parameters, got " + std::to_string(params.size()) +
                                    " params / " + std::to_string(grads.size()) + " grads");
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        if (!p.same_shape(m_[i]) || !g.same_shape(m_[i])) {
            throw std::invalid_argument("adam: parameter " + std::to_string(i) +
                                        " shape mismatch: state " + m_[i].shape_string() +
                                        ", param " + p.shape_string() + ", grad " +
                                        g.shape_string());
        }
        for (std::size_t j = 0; j < p.size(); ++j) {
            m_[i][j] = opts_.beta1 * m_[i][j] + (1.0 - opts_.beta1) * g[j];
            v_[i][j] = opts_.beta2 * v_[i][j] + (1.0 - opts_.beta2) * g[j] * g[j];
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            p[j] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.epsilon);
        }
    }
}

}  // namespace trendgnn::ad
