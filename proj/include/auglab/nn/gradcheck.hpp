#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "auglab/dataset.hpp"
#include "auglab/nn/loss.hpp"
#include "auglab/nn/model.hpp"
#include "auglab/rng.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// Gradient verification: analytic float32 backward against a central
// finite-difference oracle run on a float64 replica of the same model.
// The oracle never touches the implementation path being checked: it only
// re-evaluates the loss at perturbed parameters.
// ---------------------------------------------------------------------------

struct GradCheckResult {
    double max_rel_error = 0.0;
    double mean_rel_error = 0.0;
    int instances = 0;
    std::size_t params_checked = 0;
    // Parameters whose perturbation flips a relu sign inside [theta-h,
    // theta+h]; central differences are invalid there and these are not
    // compared.
    std::size_t params_skipped_at_kinks = 0;
};

namespace detail {

inline std::vector<LabelDist> random_soft_labels(int batch, int classes, RngStream& rng) {
    std::vector<LabelDist> labels;
    labels.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        const int a = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(classes)));
        const int c = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(classes)));
        const float lam = rng.next_float();
        LabelDist y;
        y.probs.assign(static_cast<std::size_t>(classes), 0.0f);
        y.probs[static_cast<std::size_t>(a)] += lam;
        y.probs[static_cast<std::size_t>(c)] += 1.0f - lam;
        labels.push_back(std::move(y));
    }
    return labels;
}

}  // namespace detail

// Checks one random instance; accumulates into result. grad_perturbation
// injects a relative error into the first analytic gradient (a test fixture
// proving the check catches a broken backward pass).
inline void gradient_check_instance(const ModelSpec& spec, int batch, std::uint64_t seed,
                                    double fd_step, GradCheckResult& result,
                                    double grad_perturbation = 0.0) {
    RngStream rng(seed);
    RngStream init_rng = rng.fork(rng_tag::model_init);
    Model<float> model(spec, init_rng);

    // random batch with pixel-domain inputs
    Tensor<float> input({batch, spec.in_channels, spec.in_height, spec.in_width});
    RngStream input_rng = rng.fork(rng_tag::sample);
    for (float& v : input.values) v = input_rng.next_float();
    RngStream label_rng = rng.fork(rng_tag::batch_mix);
    const auto labels = detail::random_soft_labels(batch, spec.num_classes, label_rng);

    model.zero_grad();
    Tensor<float> logits = model.forward(input, Mode::train);
    Tensor<float> dlogits = soft_ce_grad(logits, labels);
    model.backward(dlogits);

    std::vector<double> analytic;
    for (auto ref : model.params()) {
        for (float g : ref.tensor->grad) analytic.push_back(static_cast<double>(g));
    }
    if (grad_perturbation != 0.0 && !analytic.empty()) {
        analytic[0] = analytic[0] * (1.0 + grad_perturbation) + grad_perturbation;
    }

    // float64 replica for the oracle
    RngStream dummy(0);
    Model<double> oracle(spec, dummy);
    oracle.copy_state_from(model);
    Tensor<double> input64({batch, spec.in_channels, spec.in_height, spec.in_width});
    for (std::size_t i = 0; i < input.values.size(); ++i) {
        input64.values[i] = static_cast<double>(input.values[i]);
    }
    auto loss_at = [&](std::uint64_t& signature) {
        Tensor<double> z = oracle.forward(input64, Mode::train);
        signature = oracle.nonlinearity_signature();
        return soft_ce_loss(z, labels);
    };

    auto central_difference = [&](double saved, Tensor<double>& tensor, std::size_t i,
                                  double step, bool& valid) {
        std::uint64_t sig_plus = 0;
        std::uint64_t sig_minus = 0;
        tensor.values[i] = saved + step;
        const double plus = loss_at(sig_plus);
        tensor.values[i] = saved - step;
        const double minus = loss_at(sig_minus);
        tensor.values[i] = saved;
        valid = sig_plus == sig_minus;
        return (plus - minus) / (2.0 * step);
    };

    std::size_t flat = 0;
    for (auto ref : oracle.params()) {
        for (std::size_t i = 0; i < ref.tensor->count(); ++i, ++flat) {
            const double saved = ref.tensor->values[i];
            bool valid = false;
            double fd = central_difference(saved, *ref.tensor, i, fd_step, valid);
            if (!valid) {
                // a relu argument changed sign inside the interval; retry
                // with a narrower step before giving up on the parameter
                fd = central_difference(saved, *ref.tensor, i, fd_step / 32.0, valid);
            }
            if (!valid) {
                result.params_skipped_at_kinks += 1;
                continue;
            }
            const double a = analytic[flat];
            const double rel = std::fabs(a - fd) / std::max({1.0, std::fabs(a), std::fabs(fd)});
            result.max_rel_error = std::max(result.max_rel_error, rel);
            result.mean_rel_error += rel;
            result.params_checked += 1;
        }
    }
    result.instances += 1;
}

// Alternating tiny MLPs (<= 500 parameters) and one-block conv nets
// (<= 2000 parameters, exercising conv + batch-norm + pooling).
inline GradCheckResult run_gradient_check(int instances, std::uint64_t seed, double fd_step = 1e-3,
                                          double grad_perturbation = 0.0) {
    GradCheckResult result;
    RngStream seeder(seed);
    for (int i = 0; i < instances; ++i) {
        const std::uint64_t inst_seed = seeder.next_u64();
        ModelSpec spec;
        if (i % 2 == 0) {
            spec.kind = ModelKind::mlp;
            spec.in_channels = 3;
            spec.in_height = 4;
            spec.in_width = 4;
            spec.widths = {static_cast<int>(4 + (inst_seed % 5))};  // 48*w + w + w*3 + 3 params
            spec.num_classes = 3;
        } else {
            spec.kind = ModelKind::convnet;
            spec.in_channels = 3;
            spec.in_height = 8;
            spec.in_width = 8;
            spec.widths = {static_cast<int>(3 + (inst_seed % 3))};
            spec.num_classes = 3;
        }
        spec.norm_mean = {0.5f, 0.5f, 0.5f};
        spec.norm_std = {0.5f, 0.5f, 0.5f};
        spec.eligible_mix_layers = {0};
        gradient_check_instance(spec, 4, inst_seed, fd_step, result, grad_perturbation);
    }
    if (result.params_checked > 0) {
        result.mean_rel_error /= static_cast<double>(result.params_checked);
    }
    return result;
}

}  // namespace auglab
