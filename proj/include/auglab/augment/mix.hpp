#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "auglab/dataset.hpp"
#include "auglab/rng.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// Batch-level mixing: Mixup and CutMix.
// ---------------------------------------------------------------------------

struct MixCoefficient {
    double lambda = 1.0;  // convex combination weight in [0,1]
    double gamma = 1.0;   // Beta concentration it was drawn with
};

// Half-open pixel rectangle [x0,x1) x [y0,y1) inside an image.
struct CutMask {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    long long area() const {
        return static_cast<long long>(x1 - x0) * static_cast<long long>(y1 - y0);
    }
};

inline double beta_sample(double gamma, RngStream& rng) { return rng.beta_symmetric(gamma); }

// Single mixing expression, shared by every code path that blends pixels,
// labels or activations so that equal inputs give bit-equal outputs.
inline float mix_value(float lambda, float a, float b) {
    return lambda * a + (1.0f - lambda) * b;
}

inline LabelDist mix_labels(float lambda, const LabelDist& a, const LabelDist& b) {
    LabelDist out;
    out.probs.resize(a.probs.size());
    for (std::size_t i = 0; i < a.probs.size(); ++i) {
        out.probs[i] = mix_value(lambda, a.probs[i], b.probs[i]);
    }
    return out;
}

// Mixup with fixed lambda and an explicit partner permutation:
//   out[i] = lambda * batch[i] + (1 - lambda) * batch[perm[i]]
inline std::vector<Sample> mixup_batch_with(const std::vector<Sample>& batch, double lambda,
                                            const std::vector<int>& perm) {
    if (batch.empty()) throw std::invalid_argument("mixup_batch: empty batch");
    const float lam = static_cast<float>(lambda);
    std::vector<Sample> out(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Sample& a = batch[i];
        const Sample& b = batch[static_cast<std::size_t>(perm[i])];
        if (!a.image.same_shape(b.image)) throw std::invalid_argument("mixup_batch: shape mismatch");
        out[i].image = Image(a.image.channels, a.image.height, a.image.width);
        for (std::size_t p = 0; p < a.image.size(); ++p) {
            out[i].image.pixels[p] = mix_value(lam, a.image.pixels[p], b.image.pixels[p]);
        }
        out[i].label = mix_labels(lam, a.label, b.label);
    }
    return out;
}

// One lambda ~ Beta(gamma, gamma) per batch; partners come from a seeded
// permutation of the same batch.
inline std::vector<Sample> mixup_batch(const std::vector<Sample>& batch, double gamma,
                                       RngStream& rng) {
    const double lambda = beta_sample(gamma, rng);
    const std::vector<int> perm = random_permutation(static_cast<int>(batch.size()), rng);
    return mixup_batch_with(batch, lambda, perm);
}

// Rectangle for a given raw lambda and center. Target side lengths are
// W*sqrt(1-lambda) and H*sqrt(1-lambda); after clipping to the image the
// coefficient is re-derived from the surviving area.
inline std::pair<CutMask, MixCoefficient> cutmix_mask_at(int height, int width, double raw_lambda,
                                                         int cx, int cy) {
    const double ratio = std::sqrt(1.0 - raw_lambda);
    const int cut_w = static_cast<int>(width * ratio);
    const int cut_h = static_cast<int>(height * ratio);
    CutMask mask;
    mask.x0 = std::clamp(cx - cut_w / 2, 0, width);
    mask.y0 = std::clamp(cy - cut_h / 2, 0, height);
    mask.x1 = std::clamp(cx - cut_w / 2 + cut_w, 0, width);
    mask.y1 = std::clamp(cy - cut_h / 2 + cut_h, 0, height);
    MixCoefficient coeff;
    coeff.gamma = 1.0;
    coeff.lambda = 1.0 - static_cast<double>(mask.area()) /
                             (static_cast<double>(height) * static_cast<double>(width));
    return {mask, coeff};
}

inline std::pair<CutMask, MixCoefficient> cutmix_masks(int height, int width, RngStream& rng) {
    if (height < 1 || width < 1) throw std::invalid_argument("cutmix_masks: empty image");
    const double raw_lambda = rng.beta_symmetric(1.0);
    const int cx = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(width)));
    const int cy = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(height)));
    return cutmix_mask_at(height, width, raw_lambda, cx, cy);
}

// CutMix with explicit mask, coefficient and partner permutation. Pixels
// inside the mask come from the partner; labels mix with the adjusted
// lambda.
inline std::vector<Sample> cutmix_batch_with(const std::vector<Sample>& batch, const CutMask& mask,
                                             const MixCoefficient& coeff,
                                             const std::vector<int>& perm) {
    if (batch.empty()) throw std::invalid_argument("cutmix_batch: empty batch");
    const float lam = static_cast<float>(coeff.lambda);
    std::vector<Sample> out(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Sample& a = batch[i];
        const Sample& b = batch[static_cast<std::size_t>(perm[i])];
        if (!a.image.same_shape(b.image)) throw std::invalid_argument("cutmix_batch: shape mismatch");
        out[i].image = a.image;
        for (int c = 0; c < a.image.channels; ++c) {
            for (int y = mask.y0; y < mask.y1; ++y) {
                for (int x = mask.x0; x < mask.x1; ++x) {
                    out[i].image.at(c, y, x) = b.image.at(c, y, x);
                }
            }
        }
        out[i].label = mix_labels(lam, a.label, b.label);
    }
    return out;
}

// One coin per batch at apply_probability; when it lands "no" the batch is
// returned unchanged.
inline std::vector<Sample> cutmix_batch(const std::vector<Sample>& batch, double apply_probability,
                                        RngStream& rng) {
    if (batch.empty()) throw std::invalid_argument("cutmix_batch: empty batch");
    if (!(apply_probability >= 0.0 && apply_probability <= 1.0)) {
        throw std::invalid_argument("cutmix_batch: apply_probability must be in [0,1]");
    }
    if (!rng.bernoulli(apply_probability)) return batch;
    const Image& first = batch.front().image;
    auto [mask, coeff] = cutmix_masks(first.height, first.width, rng);
    const std::vector<int> perm = random_permutation(static_cast<int>(batch.size()), rng);
    return cutmix_batch_with(batch, mask, coeff, perm);
}

}  // namespace auglab
