#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "auglab/nn/model.hpp"
#include "auglab/nn/tensor.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// SGD with momentum and decoupled-from-nothing classic weight decay:
//   v <- momentum*v + grad + wd*param
//   param <- param - lr*v
// Biases and batch-norm scale/shift are excluded from weight decay.
// ---------------------------------------------------------------------------

struct OptimConfig {
    double momentum = 0.9;
    double weight_decay = 1e-4;
};

template <typename T>
inline void sgd_update(T* param, const T* grad, T* velocity, std::size_t n, double lr,
                       double momentum, double weight_decay) {
    const T mom = static_cast<T>(momentum);
    const T wd = static_cast<T>(weight_decay);
    const T step = static_cast<T>(lr);
    for (std::size_t i = 0; i < n; ++i) {
        const T g = grad[i] + wd * param[i];
        velocity[i] = mom * velocity[i] + g;
        param[i] -= step * velocity[i];
    }
}

template <typename T>
class SgdOptimizer {
public:
    explicit SgdOptimizer(OptimConfig cfg = {}) : cfg_(cfg) {}

    const OptimConfig& config() const { return cfg_; }

    void attach(Model<T>& model) {
        velocity_.clear();
        for (auto ref : model.params()) {
            velocity_.emplace_back(ref.tensor->count(), T(0));
        }
    }

    void step(Model<T>& model, double lr) {
        auto refs = model.params();
        if (velocity_.size() != refs.size()) attach(model);
        for (std::size_t i = 0; i < refs.size(); ++i) {
            auto& p = *refs[i].tensor;
            sgd_update(p.values.data(), p.grad.data(), velocity_[i].data(), p.count(), lr,
                       cfg_.momentum, refs[i].weight_decay ? cfg_.weight_decay : 0.0);
        }
    }

    std::vector<std::vector<T>>& velocity() { return velocity_; }
    const std::vector<std::vector<T>>& velocity() const { return velocity_; }

private:
    OptimConfig cfg_;
    std::vector<std::vector<T>> velocity_;
};

}  // namespace auglab
