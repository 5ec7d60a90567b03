#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "auglab/augment/mix.hpp"
#include "auglab/augment/ops.hpp"
#include "auglab/augment/policy.hpp"
#include "auglab/dataset.hpp"
#include "auglab/rng.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// AugPipeline: moderate per-image ops plus at most one intensive op.
// ---------------------------------------------------------------------------

struct ModerateOps {
    double flip_probability = 0.5;
    int pad_crop_padding = 0;
    bool enabled = true;
};

enum class IntensiveKind { None, Mixup, ManifoldMixup, CutMix, PolicyAug };

inline const char* intensive_kind_name(IntensiveKind k) {
    switch (k) {
        case IntensiveKind::None: return "none";
        case IntensiveKind::Mixup: return "mixup";
        case IntensiveKind::ManifoldMixup: return "manifold_mixup";
        case IntensiveKind::CutMix: return "cutmix";
        case IntensiveKind::PolicyAug: return "policy";
    }
    return "?";
}

struct IntensiveOp {
    IntensiveKind kind = IntensiveKind::None;
    double gamma = 1.0;               // Mixup, ManifoldMixup
    std::vector<int> eligible_layers; // ManifoldMixup; empty = use model default
    double apply_probability = 1.0;   // CutMix, PolicyAug
    Policy policy;                    // PolicyAug
    MagnitudeTable magnitude_table = default_magnitude_table();
    int cutout_size = 0;              // PolicyAug trailing cutout
};

struct AugPipeline {
    ModerateOps moderate;
    IntensiveOp intensive;
    double intensity_scale = 1.0;  // 1 = full intensity, 0 = intensive disabled

    std::string describe() const {
        std::ostringstream out;
        out << "moderate(flip=" << moderate.flip_probability
            << ",pad=" << moderate.pad_crop_padding << ")";
        if (!moderate.enabled) out << "[off]";
        switch (intensive.kind) {
            case IntensiveKind::None: break;
            case IntensiveKind::Mixup: out << "+mixup(gamma=" << intensive.gamma << ")"; break;
            case IntensiveKind::ManifoldMixup:
                out << "+manifold_mixup(gamma=" << intensive.gamma << ")";
                break;
            case IntensiveKind::CutMix:
                out << "+cutmix(p=" << intensive.apply_probability << ")";
                break;
            case IntensiveKind::PolicyAug:
                out << "+policy(" << intensive.policy.name << ",cutout=" << intensive.cutout_size
                    << ",p=" << intensive.apply_probability << ")";
                break;
        }
        if (intensity_scale != 1.0) out << "@scale=" << intensity_scale;
        return out.str();
    }
};

inline AugPipeline moderate_only(const AugPipeline& pipeline) {
    AugPipeline out = pipeline;
    out.intensive = IntensiveOp{};
    out.intensity_scale = 0.0;
    return out;
}

// Scales the intensive op toward a no-op. Mixup-family concentrations scale
// multiplicatively and hit None at scale 0; CutMix and PolicyAug scale their
// apply probability. Moderate ops are unchanged.
inline AugPipeline weaken_intensity(const AugPipeline& pipeline, double scale) {
    if (!(scale >= 0.0 && scale <= 1.0)) {
        throw std::invalid_argument("weaken_intensity: scale must be in [0,1]");
    }
    AugPipeline out = pipeline;
    out.intensity_scale = pipeline.intensity_scale * scale;
    if (scale == 1.0) return out;
    switch (pipeline.intensive.kind) {
        case IntensiveKind::None: break;
        case IntensiveKind::Mixup:
        case IntensiveKind::ManifoldMixup:
            if (scale == 0.0) {
                out.intensive = IntensiveOp{};
            } else {
                out.intensive.gamma = pipeline.intensive.gamma * scale;
            }
            break;
        case IntensiveKind::CutMix:
        case IntensiveKind::PolicyAug:
            if (scale == 0.0) {
                out.intensive = IntensiveOp{};
            } else {
                out.intensive.apply_probability = pipeline.intensive.apply_probability * scale;
            }
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch application. Moderate ops and PolicyAug run per sample on a stream
// forked from the sample's dataset index; Mixup and CutMix run once per
// batch. ManifoldMixup is not a data transform and is handled by the
// training loop through the model's mix hook; here it applies moderate ops
// only.
// ---------------------------------------------------------------------------

// What was done to a batch, for preview sidecars.
struct AppliedMixInfo {
    IntensiveKind kind = IntensiveKind::None;
    bool applied = false;
    double lambda = 1.0;
    CutMask mask;
    std::vector<int> partner;
};

inline Sample apply_moderate(const Sample& sample, const ModerateOps& ops, RngStream rng,
                             std::vector<std::string>* log = nullptr) {
    if (!ops.enabled) return sample;
    Sample out = sample;
    RngStream flip_rng = rng.fork(rng_tag::hflip);
    if (flip_rng.bernoulli(ops.flip_probability)) {
        out.image = hflip_apply(out.image);
        if (log) log->push_back("hflip");
    }
    if (ops.pad_crop_padding > 0) {
        RngStream crop_rng = rng.fork(rng_tag::pad_crop);
        const int span = 2 * ops.pad_crop_padding + 1;
        const int dx = static_cast<int>(crop_rng.next_below(static_cast<std::uint32_t>(span)));
        const int dy = static_cast<int>(crop_rng.next_below(static_cast<std::uint32_t>(span)));
        out.image = pad_crop_at(out.image, ops.pad_crop_padding, dx, dy);
        if (log) {
            log->push_back("pad_crop(pad=" + std::to_string(ops.pad_crop_padding) +
                           ",dx=" + std::to_string(dx) + ",dy=" + std::to_string(dy) + ")");
        }
    }
    return out;
}

// epoch_rng: the per-epoch stream; indices: dataset indices of the batch
// members (per-sample draws key off the dataset index, so results do not
// depend on batch composition); batch_index keys the batch-level mix draws.
inline std::vector<Sample> apply_pipeline_batch(const Dataset& dataset,
                                                const std::vector<int>& indices,
                                                const AugPipeline& pipeline, RngStream epoch_rng,
                                                int batch_index,
                                                AppliedMixInfo* info = nullptr,
                                                std::vector<std::vector<std::string>>* op_logs = nullptr) {
    std::vector<Sample> batch;
    batch.reserve(indices.size());
    if (op_logs) op_logs->assign(indices.size(), {});
    RngStream sample_root = epoch_rng.fork(rng_tag::sample);
    for (std::size_t bi = 0; bi < indices.size(); ++bi) {
        const int idx = indices[bi];
        std::vector<std::string>* log = op_logs ? &(*op_logs)[bi] : nullptr;
        RngStream srng = sample_root.fork(static_cast<std::uint64_t>(idx));
        Sample s = apply_moderate(dataset.samples[static_cast<std::size_t>(idx)],
                                  pipeline.moderate, srng, log);
        if (pipeline.intensive.kind == IntensiveKind::PolicyAug) {
            RngStream prng = srng.fork(rng_tag::policy);
            if (prng.bernoulli(pipeline.intensive.apply_probability)) {
                s.image = apply_policy(s.image, pipeline.intensive.policy,
                                       pipeline.intensive.cutout_size,
                                       pipeline.intensive.magnitude_table, prng, log);
            }
        }
        batch.push_back(std::move(s));
    }

    if (info) {
        info->kind = pipeline.intensive.kind;
        info->applied = false;
    }

    RngStream mix_rng =
        epoch_rng.fork(rng_tag::batch_mix).fork(static_cast<std::uint64_t>(batch_index));
    switch (pipeline.intensive.kind) {
        case IntensiveKind::Mixup: {
            const double lambda = beta_sample(pipeline.intensive.gamma, mix_rng);
            const std::vector<int> perm =
                random_permutation(static_cast<int>(batch.size()), mix_rng);
            if (info) {
                info->applied = true;
                info->lambda = lambda;
                info->partner = perm;
            }
            return mixup_batch_with(batch, lambda, perm);
        }
        case IntensiveKind::CutMix: {
            if (!mix_rng.bernoulli(pipeline.intensive.apply_probability)) break;
            const Image& first = batch.front().image;
            auto [mask, coeff] = cutmix_masks(first.height, first.width, mix_rng);
            const std::vector<int> perm =
                random_permutation(static_cast<int>(batch.size()), mix_rng);
            if (info) {
                info->applied = true;
                info->lambda = coeff.lambda;
                info->mask = mask;
                info->partner = perm;
            }
            return cutmix_batch_with(batch, mask, coeff, perm);
        }
        case IntensiveKind::None:
        case IntensiveKind::ManifoldMixup:
        case IntensiveKind::PolicyAug: break;
    }
    return batch;
}

}  // namespace auglab
