#pragma once

#include <cmath>
#include <vector>

#include "auglab/dataset.hpp"
#include "auglab/errors.hpp"
#include "auglab/nn/tensor.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// Soft-label cross entropy over a logits batch:
//   -(1/B) sum_b sum_c y[b,c] * log softmax(z[b])[c]
// computed with max-subtracted log-sum-exp and double accumulation.
// ---------------------------------------------------------------------------

template <typename T>
inline double log_sum_exp_row(const T* z, int n, double& max_out) {
    double m = static_cast<double>(z[0]);
    for (int c = 1; c < n; ++c) m = std::max(m, static_cast<double>(z[c]));
    double sum = 0.0;
    for (int c = 0; c < n; ++c) sum += std::exp(static_cast<double>(z[c]) - m);
    max_out = m;
    return m + std::log(sum);
}

template <typename T>
inline double soft_ce_loss(const Tensor<T>& logits, const std::vector<LabelDist>& labels) {
    const int batch = logits.dim(0);
    const int classes = logits.dim(1);
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
        const T* z = logits.values.data() + static_cast<std::size_t>(b) * classes;
        for (int c = 0; c < classes; ++c) {
            if (!std::isfinite(static_cast<double>(z[c]))) {
                throw NumericError("soft_ce_loss: non-finite logit");
            }
        }
        double m = 0.0;
        const double lse = log_sum_exp_row(z, classes, m);
        double row = 0.0;
        const LabelDist& y = labels[static_cast<std::size_t>(b)];
        for (int c = 0; c < classes; ++c) {
            const double yc = y.probs[static_cast<std::size_t>(c)];
            if (yc != 0.0) row += yc * (lse - static_cast<double>(z[c]));
        }
        total += row;
    }
    return total / batch;
}

// dL/dz = (softmax(z) - y) / B
template <typename T>
inline Tensor<T> soft_ce_grad(const Tensor<T>& logits, const std::vector<LabelDist>& labels) {
    const int batch = logits.dim(0);
    const int classes = logits.dim(1);
    Tensor<T> grad(logits.shape);
    for (int b = 0; b < batch; ++b) {
        const T* z = logits.values.data() + static_cast<std::size_t>(b) * classes;
        T* g = grad.values.data() + static_cast<std::size_t>(b) * classes;
        double m = 0.0;
        const double lse = log_sum_exp_row(z, classes, m);
        const LabelDist& y = labels[static_cast<std::size_t>(b)];
        for (int c = 0; c < classes; ++c) {
            const double p = std::exp(static_cast<double>(z[c]) - lse);
            g[c] = static_cast<T>((p - y.probs[static_cast<std::size_t>(c)]) / batch);
        }
    }
    return grad;
}

}  // namespace auglab
