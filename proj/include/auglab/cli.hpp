#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "auglab/cifar_io.hpp"
#include "auglab/config.hpp"
#include "auglab/metrics.hpp"
#include "auglab/nn/checkpoint.hpp"
#include "auglab/nn/gradcheck.hpp"
#include "auglab/stats.hpp"
#include "auglab/synthetic.hpp"
#include "auglab/train/trainer.hpp"
#include "auglab/version.hpp"

namespace auglab {

// Stable exit-code contract.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int selfcheck_failed = 1;
inline constexpr int config_error = 2;
inline constexpr int training_abort = 3;
inline constexpr int checkpoint_error = 4;
}  // namespace exit_code

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Dataset resolution.
// ---------------------------------------------------------------------------
inline std::string resolve_data_root(const RunConfig& cfg, const std::string& cli_root) {
    if (!cli_root.empty()) return cli_root;
    if (!cfg.dataset.root.empty()) return cfg.dataset.root;
    if (const char* env = std::getenv("DATA_ROOT")) return env;
    return "";
}

inline std::pair<Dataset, Dataset> build_datasets(const RunConfig& cfg,
                                                  const std::string& cli_data_root) {
    if (cfg.dataset.kind == DatasetConfig::Kind::synthetic) {
        return generate_synthetic(cfg.dataset.synthetic, cfg.dataset.synthetic_seed);
    }
    std::string root = resolve_data_root(cfg, cli_data_root);
    if (root.empty()) {
        throw ConfigError("cifar10 dataset needs a root directory "
                          "(dataset.root, --data-root or DATA_ROOT)");
    }
    if (fs::exists(fs::path(root) / "cifar-10-batches-bin")) {
        root = (fs::path(root) / "cifar-10-batches-bin").string();
    }
    Dataset train;
    train.num_classes = cfg.model.num_classes;
    train.name = "cifar10-train";
    for (int i = 1; i <= 5; ++i) {
        const std::string path = (fs::path(root) / ("data_batch_" + std::to_string(i) + ".bin")).string();
        if (!fs::exists(path)) throw ConfigError("missing dataset file: " + path);
        Dataset part = load_cifar_binary(path, cfg.model.num_classes);
        for (auto& s : part.samples) train.samples.push_back(std::move(s));
    }
    const std::string test_path = (fs::path(root) / "test_batch.bin").string();
    if (!fs::exists(test_path)) throw ConfigError("missing dataset file: " + test_path);
    Dataset test = load_cifar_binary(test_path, cfg.model.num_classes);
    test.name = "cifar10-test";
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Manifest: everything needed to reproduce a run.
// ---------------------------------------------------------------------------
inline nlohmann::json build_manifest(const RunConfig& cfg, const ConfigMap& map,
                                     std::uint64_t seed, double total_wall_seconds) {
    nlohmann::json j;
    j["auglab_version"] = kVersion;
    nlohmann::json raw;
    for (const auto& [key, entry] : map.entries()) raw[key] = entry.value;
    j["config"] = raw;
    j["seed"] = seed;
    j["method"] = cfg.stage.stage1_pipeline.describe();
    j["gradual"] = cfg.gradual;
    j["epochs_augment"] = cfg.stage.epochs_augment;
    j["epochs_refine"] = cfg.stage.epochs_refine;
    j["stage1_schedule"] = cfg.stage.stage1_schedule.describe();
    j["refinement_lr"] = cfg.stage.refinement_lr();
    j["batch_size"] = cfg.stage.batch_size;
    j["model"] = model_spec_to_json(cfg.model);
    j["notes"] = {
        "batch-norm running statistics keep updating during refinement epochs",
        "input normalization constants are the per-channel statistics of the training split",
        "step milestones are indexed from epoch 0 and do not shift in fixed-budget sweeps",
        "refinement keeps moderate augmentation and carries optimizer momentum buffers over",
    };
    j["record_timing"] = cfg.record_timing;
    if (cfg.record_timing) j["total_wall_seconds"] = total_wall_seconds;
    return j;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------
struct TrainOptions {
    std::string config_path;
    std::string out_dir = "runs/out";
    std::string data_root;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

inline int cmd_train(const TrainOptions& opts) {
    ConfigMap map;
    RunConfig cfg;
    try {
        map = ConfigMap::from_file(opts.config_path);
        for (const auto& o : opts.overrides) map.apply_override(o);
        cfg = run_config_from_map(map);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << opts.config_path << ": " << e.what() << "\n";
        return exit_code::config_error;
    }
    if (opts.seed) cfg.seeds = {*opts.seed};

    Dataset train, test;
    try {
        auto pair = build_datasets(cfg, opts.data_root);
        train = std::move(pair.first);
        test = std::move(pair.second);
        auto stats = channel_stats(train);
        cfg.model.norm_mean = stats.first;
        cfg.model.norm_std = stats.second;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code::config_error;
    }

    try {
        for (std::uint64_t seed : cfg.seeds) {
            const fs::path run_dir = cfg.seeds.size() == 1
                                         ? fs::path(opts.out_dir)
                                         : fs::path(opts.out_dir) / ("seed_" + std::to_string(seed));
            fs::create_directories(run_dir);

            StageConfig stage = cfg.stage;
            stage.seed = seed;
            EpochCallback progress;
            if (!opts.quiet) {
                const int total = stage.epochs_augment + stage.epochs_refine;
                progress = [seed, total](const EpochRecord& r) {
                    std::cout << "[seed " << seed << "] epoch " << r.epoch << "/" << total
                              << " stage=" << r.stage << " lr=" << r.lr
                              << " risk_aug=" << r.risk_aug << " risk_clean=" << r.risk_clean
                              << " test_acc=" << r.test_acc << "\n";
                };
            }

            RunResult result =
                cfg.gradual
                    ? gradual_refined_training(stage, cfg.model, train, test,
                                               WeakenDecay::linear, progress)
                    : refined_training(stage, cfg.model, train, test, progress);

            double total_wall = 0.0;
            for (auto& r : result.records) total_wall += r.wall_seconds;
            if (!cfg.record_timing) {
                for (auto& r : result.records) r.wall_seconds = 0.0;
            }

            export_records(result.records, (run_dir / "metrics.csv").string(),
                           RecordFormat::csv);
            export_records(result.records, (run_dir / "metrics.jsonl").string(),
                           RecordFormat::jsonl);
            write_text_file((run_dir / "manifest.json").string(),
                            build_manifest(cfg, map, seed, total_wall).dump(2) + "\n");

            RngStream dummy(0);
            Model<float> model(cfg.model, dummy);
            SgdOptimizer<float> optim(stage.optim);

            restore_state(model, result.final_state);
            optim.attach(model);
            optim.velocity() = result.final_velocity;
            save_checkpoint((run_dir / "final.ckpt").string(), model, optim, result.final_meta);

            restore_state(model, result.best_state);
            optim.velocity() = result.best_velocity;
            save_checkpoint((run_dir / "best.ckpt").string(), model, optim, result.best_meta);
        }
    } catch (const TrainingAbort& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return exit_code::training_abort;
    } catch (const NumericError& e) {
        // divergence detected by a measurement pass rather than mid-batch
        std::cerr << "training aborted: " << e.what() << "\n";
        return exit_code::training_abort;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code::config_error;
    }
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------
inline int cmd_evaluate(const std::string& checkpoint_path, const std::string& config_path,
                        const std::string& data_root,
                        const std::vector<std::string>& overrides) {
    LoadedCheckpoint loaded;
    try {
        loaded = load_checkpoint(checkpoint_path);
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return exit_code::checkpoint_error;
    }

    Dataset test;
    try {
        ConfigMap map = ConfigMap::from_file(config_path);
        for (const auto& o : overrides) map.apply_override(o);
        RunConfig cfg = run_config_from_map(map);
        auto pair = build_datasets(cfg, data_root);
        test = std::move(pair.second);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code::config_error;
    }

    const EvalResult result = evaluate(*loaded.model, test);
    std::cout << "checkpoint=" << checkpoint_path << " epochs_done=" << loaded.meta.epochs_done
              << " stage=" << loaded.meta.stage << "\n";
    std::cout << "loss=" << format_double(result.loss)
              << " top1=" << format_double(result.top1_accuracy) << "\n";
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// preview
// ---------------------------------------------------------------------------
inline std::string format_label(const LabelDist& label) {
    std::string out = "[";
    for (std::size_t i = 0; i < label.probs.size(); ++i) {
        if (i) out += ",";
        out += format_double(label.probs[i]);
    }
    return out + "]";
}

inline int cmd_preview(const std::string& config_path, int count, const std::string& out_dir,
                       const std::string& data_root, const std::vector<std::string>& overrides,
                       std::optional<std::uint64_t> seed_opt) {
    RunConfig cfg;
    Dataset train;
    try {
        ConfigMap map = ConfigMap::from_file(config_path);
        for (const auto& o : overrides) map.apply_override(o);
        cfg = run_config_from_map(map);
        auto pair = build_datasets(cfg, data_root);
        train = std::move(pair.first);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code::config_error;
    }
    if (count < 0) {
        std::cerr << "config error: count must be >= 0\n";
        return exit_code::config_error;
    }

    try {
        fs::create_directories(out_dir);
        if (count == 0) return exit_code::ok;

        const std::uint64_t seed = seed_opt ? *seed_opt : cfg.seeds.front();
        // same stream layout as training epoch 1, so the preview shows what
        // the first epoch would feed the model
        RngStream epoch_rng = RngStream(seed).fork(rng_tag::epoch).fork(1);
        std::vector<int> indices;
        const int batch_size = std::max(2, count);
        for (int i = 0; i < batch_size; ++i) {
            indices.push_back(i % static_cast<int>(train.size()));
        }
        AppliedMixInfo info;
        std::vector<std::vector<std::string>> op_logs;
        std::vector<Sample> batch =
            apply_pipeline_batch(train, indices, cfg.stage.stage1_pipeline, epoch_rng, 0, &info,
                                 &op_logs);

        std::ostringstream sidecar;
        sidecar << "# preview pipeline=" << cfg.stage.stage1_pipeline.describe()
                << " seed=" << seed << " count=" << count << "\n";
        if (cfg.stage.stage1_pipeline.intensive.kind == IntensiveKind::ManifoldMixup) {
            sidecar << "# manifold mixup blends hidden activations during training; "
                       "images show moderate ops only\n";
        }
        for (int i = 0; i < count; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "img_%03d.ppm", i);
            write_ppm(batch[static_cast<std::size_t>(i)].image, (fs::path(out_dir) / name).string());
            sidecar << name << " ops=[";
            const auto& ops = op_logs[static_cast<std::size_t>(i)];
            for (std::size_t k = 0; k < ops.size(); ++k) {
                if (k) sidecar << ";";
                sidecar << ops[k];
            }
            sidecar << "]";
            if (info.applied) {
                sidecar << " mix=" << intensive_kind_name(info.kind)
                        << " lambda=" << format_double(info.lambda)
                        << " partner=" << info.partner[static_cast<std::size_t>(i)];
                if (info.kind == IntensiveKind::CutMix) {
                    sidecar << " mask=[" << info.mask.x0 << "," << info.mask.y0 << ","
                            << info.mask.x1 << "," << info.mask.y1 << "]";
                }
            }
            sidecar << " label=" << format_label(batch[static_cast<std::size_t>(i)].label) << "\n";
        }
        write_text_file((fs::path(out_dir) / "preview.txt").string(), sidecar.str());
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return exit_code::config_error;
    }
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------
inline int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    std::vector<std::string> missing;
    std::vector<RunSeries> runs;
    std::vector<std::pair<std::string, std::vector<EpochRecord>>> curves;
    for (const std::string& dir : run_dirs) {
        const fs::path metrics_path = fs::path(dir) / "metrics.csv";
        const fs::path manifest_path = fs::path(dir) / "manifest.json";
        if (!fs::exists(metrics_path)) {
            missing.push_back(dir);
            continue;
        }
        std::string method = fs::path(dir).filename().string();
        if (fs::exists(manifest_path)) {
            try {
                std::ifstream in(manifest_path);
                nlohmann::json manifest = nlohmann::json::parse(in);
                method = manifest.at("method").get<std::string>() + "/seed" +
                         std::to_string(manifest.at("seed").get<std::uint64_t>());
            } catch (const std::exception&) {
                // keep directory name when the manifest is unreadable
            }
        }
        try {
            RunSeries series;
            series.method = method;
            series.records = load_records_csv(metrics_path.string());
            curves.emplace_back(fs::path(dir).filename().string(), series.records);
            runs.push_back(std::move(series));
        } catch (const FormatError& e) {
            std::cerr << "error: " << e.what() << "\n";
            missing.push_back(dir);
        }
    }
    if (!missing.empty()) {
        std::cerr << "missing or unreadable metrics in:\n";
        for (const auto& d : missing) std::cerr << "  " << d << "\n";
        return exit_code::config_error;
    }

    try {
        const GapReport report = gap_report(runs);
        fs::create_directories(out_dir);
        const std::string text = gap_report_text(report);
        write_text_file((fs::path(out_dir) / "report.txt").string(), text);
        write_text_file((fs::path(out_dir) / "report.csv").string(), gap_report_csv(report));
        for (const auto& [name, records] : curves) {
            std::ostringstream curve;
            curve << "epoch,stage,risk_aug,risk_clean,test_loss,test_acc,intensity_scale\n";
            for (const EpochRecord& r : records) {
                curve << r.epoch << ',' << r.stage << ',' << format_double(r.risk_aug) << ','
                      << format_double(r.risk_clean) << ',' << format_double(r.test_loss) << ','
                      << format_double(r.test_acc) << ',' << format_double(r.intensity_scale)
                      << "\n";
            }
            write_text_file((fs::path(out_dir) / ("curve_" + name + ".csv")).string(),
                            curve.str());
        }
        std::cout << text;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code::config_error;
    }
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// selfcheck
// ---------------------------------------------------------------------------
inline int cmd_selfcheck(bool inject_gradient_bug = false) {
    int failures = 0;
    auto run_check = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
        if (!ok) failures += 1;
    };

    {
        const GradCheckResult r =
            run_gradient_check(20, 0xA5, 1e-3, inject_gradient_bug ? 0.05 : 0.0);
        run_check("gradient_check", r.max_rel_error < 1e-3);
    }
    {
        RngStream rng(11);
        std::vector<double> samples;
        for (int i = 0; i < 10000; ++i) samples.push_back(rng.beta_symmetric(1.0));
        run_check("beta_uniform_ks", ks_statistic_uniform(samples) < ks_critical_001(10000));
    }
    {
        bool ok = true;
        for (double g : {0.2, 0.5, 1.0}) {
            RngStream rng(12);
            std::vector<double> samples;
            for (int i = 0; i < 10000; ++i) samples.push_back(rng.beta_symmetric(g));
            const Moments m = sample_moments(samples);
            const double ref_var = 1.0 / (4.0 * (2.0 * g + 1.0));
            ok = ok && std::fabs(m.mean - 0.5) < 0.02 &&
                 std::fabs(m.variance - ref_var) / ref_var < 0.15;
        }
        run_check("beta_moments", ok);
    }
    {
        RngStream rng(13);
        bool ok = true;
        for (int i = 0; i < 1000 && ok; ++i) {
            auto [mask, coeff] = cutmix_masks(32, 32, rng);
            ok = coeff.lambda >= 0.0 && coeff.lambda <= 1.0 &&
                 static_cast<double>(mask.area()) == (1.0 - coeff.lambda) * 32.0 * 32.0;
        }
        run_check("cutmix_lambda_identity", ok);
    }
    {
        RngStream rng(14);
        std::vector<Sample> batch;
        for (int i = 0; i < 6; ++i) {
            Sample s;
            s.image = Image(3, 8, 8);
            for (float& v : s.image.pixels) v = rng.next_float();
            s.label = one_hot(i % 3, 3);
            batch.push_back(std::move(s));
        }
        std::vector<int> perm = {3, 4, 5, 0, 1, 2};
        const float lam = 0.3f;
        const auto mixed = mixup_batch_with(batch, lam, perm);
        bool ok = true;
        for (std::size_t i = 0; i < batch.size() && ok; ++i) {
            for (std::size_t p = 0; p < batch[i].image.pixels.size() && ok; ++p) {
                const float expect = lam * batch[i].image.pixels[p] +
                                     (1.0f - lam) * batch[perm[i]].image.pixels[p];
                ok = mixed[i].image.pixels[p] == expect;
            }
        }
        run_check("mixup_exactness", ok);
    }
    {
        RngStream rng(15);
        Image img(3, 16, 16);
        for (float& v : img.pixels) v = rng.next_float();
        auto close = [](const Image& a, const Image& b) {
            for (std::size_t i = 0; i < a.pixels.size(); ++i) {
                if (std::fabs(a.pixels[i] - b.pixels[i]) > 1.0f / 255.0f) return false;
            }
            return true;
        };
        const Image twice = apply_policy_op_at(apply_policy_op_at(img, PolicyOpKind::Invert, 0),
                                               PolicyOpKind::Invert, 0);
        const Image rot0 = apply_policy_op_at(img, PolicyOpKind::Rotate, 0.0);
        const Image post8 = apply_policy_op_at(img, PolicyOpKind::Posterize, 8.0);
        run_check("policy_identities", close(twice, img) && close(rot0, img) && close(post8, img));
    }
    {
        SyntheticSpec spec;
        spec.num_classes = 2;
        spec.per_class_train = 8;
        spec.per_class_test = 4;
        spec.height = 8;
        spec.width = 8;
        auto [train, test] = generate_synthetic(spec, 21);
        ModelSpec model_spec;
        model_spec.kind = ModelKind::mlp;
        model_spec.widths = {6};
        model_spec.num_classes = 2;
        model_spec.in_channels = 3;
        model_spec.in_height = 8;
        model_spec.in_width = 8;
        model_spec.eligible_mix_layers = {0};
        StageConfig stage;
        stage.epochs_augment = 2;
        stage.epochs_refine = 1;
        stage.batch_size = 8;
        stage.seed = 5;
        stage.stage1_schedule = LrSchedule::constant(0.05);
        stage.stage1_pipeline.moderate.pad_crop_padding = 1;
        stage.stage1_pipeline.intensive.kind = IntensiveKind::Mixup;
        stage.stage2_pipeline = moderate_only(stage.stage1_pipeline);
        auto run = [&]() {
            const RunResult r = refined_training(stage, model_spec, train, test);
            std::string rows;
            for (const auto& rec : r.records) {
                EpochRecord copy = rec;
                copy.wall_seconds = 0.0;
                rows += record_csv_row(copy) + "\n";
            }
            return rows;
        };
        run_check("determinism", run() == run());
    }

    return failures == 0 ? exit_code::ok : exit_code::selfcheck_failed;
}

}  // namespace auglab
