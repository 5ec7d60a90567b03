#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "auglab/augment/pipeline.hpp"
#include "auglab/dataset.hpp"
#include "auglab/errors.hpp"
#include "auglab/metrics.hpp"
#include "auglab/nn/checkpoint.hpp"
#include "auglab/nn/loss.hpp"
#include "auglab/nn/model.hpp"
#include "auglab/nn/optim.hpp"
#include "auglab/train/schedule.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// Two-stage training: N epochs under an intensive augmentation pipeline,
// then M refinement epochs on the original data (moderate augmentation
// kept) at a small, constant learning rate.
// ---------------------------------------------------------------------------

struct RefineLrRule {
    enum class Kind { continue_final, fixed };
    Kind kind = Kind::continue_final;
    // For fixed: the refinement learning rate; values <= 0 select the
    // default lr0/1000.
    double value = -1.0;
};

struct StageConfig {
    int epochs_augment = 40;  // N
    int epochs_refine = 10;   // M
    AugPipeline stage1_pipeline;
    AugPipeline stage2_pipeline;  // moderate only; gradual mode derives its own
    LrSchedule stage1_schedule = LrSchedule::step(0.1, {15, 30}, 0.1);
    RefineLrRule refine_lr;
    int batch_size = 128;
    std::uint64_t seed = 1;
    int eval_every = 1;
    OptimConfig optim;

    void validate() const {
        if (epochs_augment < 0 || epochs_refine < 0 || epochs_augment + epochs_refine < 1) {
            throw std::invalid_argument("stage config: need N >= 0, M >= 0, N+M >= 1");
        }
        if (batch_size < 1) throw std::invalid_argument("stage config: batch_size must be >= 1");
        if (eval_every < 1) throw std::invalid_argument("stage config: eval_every must be >= 1");
        stage1_schedule.validate();
    }

    // Constant learning rate used for every refinement epoch.
    double refinement_lr() const {
        if (refine_lr.kind == RefineLrRule::Kind::fixed) {
            return refine_lr.value > 0.0 ? refine_lr.value : stage1_schedule.lr0 / 1000.0;
        }
        const int last = epochs_augment > 0 ? epochs_augment - 1 : 0;
        return lr_at(stage1_schedule, last);
    }
};

struct RunResult {
    std::vector<EpochRecord> records;  // epoch-0 baseline plus one row per epoch
    CheckpointMeta final_meta;
    CheckpointMeta best_meta;  // best test accuracy, earliest epoch on ties
    std::vector<std::vector<float>> final_state;
    std::vector<std::vector<float>> final_velocity;
    std::vector<std::vector<float>> best_state;
    std::vector<std::vector<float>> best_velocity;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

inline std::vector<std::vector<float>> snapshot_state(Model<float>& model) {
    std::vector<std::vector<float>> snap;
    for (auto* t : model.state_tensors()) snap.push_back(t->values);
    return snap;
}

inline void restore_state(Model<float>& model, const std::vector<std::vector<float>>& snap) {
    auto state = model.state_tensors();
    if (state.size() != snap.size()) throw std::logic_error("restore_state: layout mismatch");
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state[i]->values.size() != snap[i].size()) {
            throw std::logic_error("restore_state: size mismatch");
        }
        state[i]->values = snap[i];
    }
}

// ---------------------------------------------------------------------------
// One pass over seeded batches: moderate ops per sample, the intensive op
// per batch (Mixup, CutMix) or per sample (PolicyAug), soft-CE loss,
// backward, SGD step. Returns the mean training loss over the epoch's
// augmented batches. ManifoldMixup draws (layer, lambda, permutation) per
// batch and blends activations through the model's mix hook.
// ---------------------------------------------------------------------------
template <typename T>
inline double train_epoch(Model<T>& model, const Dataset& dataset, const AugPipeline& pipeline,
                          double lr, SgdOptimizer<T>& optim, RngStream epoch_rng,
                          int batch_size = 128) {
    if (!(lr >= 0.0)) throw std::invalid_argument("train_epoch: lr must be >= 0");
    const auto batches = epoch_batches(dataset, batch_size, epoch_rng);
    const bool manifold = pipeline.intensive.kind == IntensiveKind::ManifoldMixup;
    RngStream drop_rng = epoch_rng.fork(rng_tag::dropout);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
        std::vector<Sample> batch = apply_pipeline_batch(dataset, batches[bi], pipeline,
                                                         epoch_rng, static_cast<int>(bi));
        Tensor<T> input = make_batch_tensor<T>(batch);
        std::vector<LabelDist> labels = batch_labels(batch);

        model.zero_grad();
        Tensor<T> logits;
        if (manifold) {
            RngStream mix_rng =
                epoch_rng.fork(rng_tag::batch_mix).fork(static_cast<std::uint64_t>(bi));
            const double lambda = beta_sample(pipeline.intensive.gamma, mix_rng);
            const std::vector<int> perm =
                random_permutation(static_cast<int>(batch.size()), mix_rng);
            const auto& eligible = pipeline.intensive.eligible_layers.empty()
                                       ? model.spec().eligible_mix_layers
                                       : pipeline.intensive.eligible_layers;
            MixHook hook;
            hook.layer = eligible[mix_rng.next_below(static_cast<std::uint32_t>(eligible.size()))];
            hook.lambda = static_cast<float>(lambda);
            hook.perm = perm;
            logits = model.forward(input, Mode::train, &hook, &drop_rng);
            for (std::size_t i = 0; i < labels.size(); ++i) {
                labels[i] = mix_labels(hook.lambda, batch[i].label,
                                       batch[static_cast<std::size_t>(perm[i])].label);
            }
        } else {
            logits = model.forward(input, Mode::train, nullptr, &drop_rng);
        }

        double loss = 0.0;
        try {
            loss = soft_ce_loss(logits, labels);
        } catch (const NumericError& e) {
            throw TrainingAbort(lr, static_cast<int>(bi), e.what());
        }
        if (!std::isfinite(loss)) {
            throw TrainingAbort(lr, static_cast<int>(bi), "non-finite training loss");
        }
        loss_sum += loss * static_cast<double>(batch.size());
        seen += batch.size();

        Tensor<T> dlogits = soft_ce_grad(logits, labels);
        model.backward(dlogits);
        optim.step(model, lr);
    }
    return loss_sum / static_cast<double>(seen);
}

namespace detail {

// Full per-epoch measurement: clean risk, augmented risk under the epoch's
// pipeline (fresh draw on a measurement-only rng path), and test metrics.
inline void measure_epoch(Model<float>& model, const Dataset& train, const Dataset& test,
                          const AugPipeline& pipeline, RngStream measure_rng, int batch_size,
                          EpochRecord& record) {
    record.risk_clean = empirical_risk(model, train);
    if (pipeline.intensive.kind == IntensiveKind::None && !pipeline.moderate.enabled) {
        record.risk_aug = record.risk_clean;
    } else {
        record.risk_aug = empirical_risk(model, train, pipeline, measure_rng, batch_size);
    }
    const EvalResult ev = evaluate(model, test);
    record.test_loss = ev.loss;
    record.test_acc = ev.top1_accuracy;
}

}  // namespace detail

// stage2_provider maps refinement epoch m (1-based) to the pipeline used
// for that epoch.
inline RunResult run_two_stage(const StageConfig& config, const ModelSpec& model_spec,
                               const Dataset& train, const Dataset& test,
                               const std::function<AugPipeline(int)>& stage2_provider,
                               const EpochCallback& on_epoch = {}) {
    config.validate();
    const int n_epochs = config.epochs_augment;
    const int m_epochs = config.epochs_refine;

    RngStream root(config.seed);
    RngStream init_rng = root.fork(rng_tag::model_init);
    Model<float> model(model_spec, init_rng);
    SgdOptimizer<float> optim(config.optim);
    optim.attach(model);

    RunResult result;
    double best_acc = -1.0;

    auto record_epoch = [&](int epoch, const std::string& stage, double lr,
                            const AugPipeline& pipeline, double train_seconds) {
        EpochRecord record;
        record.epoch = epoch;
        record.stage = stage;
        record.lr = lr;
        record.intensity_scale = pipeline.intensity_scale;
        const bool boundary = epoch == 0 || epoch == n_epochs || epoch == n_epochs + m_epochs;
        const auto t0 = std::chrono::steady_clock::now();
        if (boundary || epoch % config.eval_every == 0 || result.records.empty()) {
            detail::measure_epoch(model, train, test, pipeline,
                                  root.fork(rng_tag::measure).fork(static_cast<std::uint64_t>(epoch)),
                                  config.batch_size, record);
        } else {
            const EpochRecord& prev = result.records.back();
            record.risk_aug = prev.risk_aug;
            record.risk_clean = prev.risk_clean;
            record.test_loss = prev.test_loss;
            record.test_acc = prev.test_acc;
        }
        const auto t1 = std::chrono::steady_clock::now();
        record.wall_seconds =
            train_seconds + std::chrono::duration<double>(t1 - t0).count();
        result.records.push_back(record);

        if (record.test_acc > best_acc) {
            best_acc = record.test_acc;
            result.best_state = snapshot_state(model);
            result.best_velocity = optim.velocity();
            result.best_meta = CheckpointMeta{config.seed, epoch, stage, record.test_loss,
                                              record.test_acc};
        }
        if (on_epoch) on_epoch(record);
        return record;
    };

    // epoch 0: untrained baseline, measured under the upcoming pipeline
    const AugPipeline baseline_pipeline =
        n_epochs > 0 ? config.stage1_pipeline : stage2_provider(1);
    record_epoch(0, "augment", lr_at(config.stage1_schedule, 0), baseline_pipeline, 0.0);

    for (int epoch = 1; epoch <= n_epochs; ++epoch) {
        const double lr = lr_at(config.stage1_schedule, epoch - 1);
        const auto t0 = std::chrono::steady_clock::now();
        RngStream epoch_rng = root.fork(rng_tag::epoch).fork(static_cast<std::uint64_t>(epoch));
        train_epoch(model, train, config.stage1_pipeline, lr, optim, epoch_rng,
                    config.batch_size);
        const auto t1 = std::chrono::steady_clock::now();
        record_epoch(epoch, "augment", lr, config.stage1_pipeline,
                     std::chrono::duration<double>(t1 - t0).count());
    }

    const double refine_lr = config.refinement_lr();
    for (int m = 1; m <= m_epochs; ++m) {
        const int epoch = n_epochs + m;
        const AugPipeline pipeline = stage2_provider(m);
        const auto t0 = std::chrono::steady_clock::now();
        RngStream epoch_rng = root.fork(rng_tag::epoch).fork(static_cast<std::uint64_t>(epoch));
        train_epoch(model, train, pipeline, refine_lr, optim, epoch_rng, config.batch_size);
        const auto t1 = std::chrono::steady_clock::now();
        record_epoch(epoch, "refine", refine_lr, pipeline,
                     std::chrono::duration<double>(t1 - t0).count());
    }

    result.final_state = snapshot_state(model);
    for (const auto& v : optim.velocity()) result.final_velocity.push_back(v);
    const EpochRecord& last = result.records.back();
    result.final_meta = CheckpointMeta{config.seed, n_epochs + m_epochs, last.stage,
                                       last.test_loss, last.test_acc};
    return result;
}

// Stage 2 drops the intensive op entirely; moderate augmentation stays.
inline RunResult refined_training(const StageConfig& config, const ModelSpec& model_spec,
                                  const Dataset& train, const Dataset& test,
                                  const EpochCallback& on_epoch = {}) {
    return run_two_stage(config, model_spec, train, test,
                         [&](int) { return config.stage2_pipeline; }, on_epoch);
}

enum class WeakenDecay { linear };

// Gradual variant: refinement epoch m (1-based) runs the stage-1 pipeline
// weakened to scale 1 - m/M, reaching scale 0 (moderate only) at epoch M.
inline RunResult gradual_refined_training(const StageConfig& config, const ModelSpec& model_spec,
                                          const Dataset& train, const Dataset& test,
                                          WeakenDecay decay = WeakenDecay::linear,
                                          const EpochCallback& on_epoch = {}) {
    (void)decay;
    if (config.epochs_refine < 1) {
        throw std::invalid_argument("gradual_refined_training: need M >= 1");
    }
    const int m_total = config.epochs_refine;
    return run_two_stage(
        config, model_spec, train, test,
        [&config, m_total](int m) {
            const double scale = 1.0 - static_cast<double>(m) / m_total;
            return weaken_intensity(config.stage1_pipeline, scale);
        },
        on_epoch);
}

}  // namespace auglab
