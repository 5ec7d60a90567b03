#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "auglab/augment/pipeline.hpp"
#include "auglab/errors.hpp"
#include "auglab/nn/model.hpp"
#include "auglab/synthetic.hpp"
#include "auglab/train/trainer.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// Run configuration: a flat "key = value" file with dotted keys, '#'
// comments and space-separated lists. docs/FORMATS.md documents every key.
// ---------------------------------------------------------------------------

struct ConfigEntry {
    std::string value;
    int line = 0;
    mutable bool consumed = false;
};

class ConfigMap {
public:
    static ConfigMap from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        ConfigMap map;
        map.source_ = path;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            line_no += 1;
            map.parse_line(line, line_no);
        }
        return map;
    }

    // "key=value" from the command line; overrides the file.
    void apply_override(const std::string& text) {
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override must be key=value, got '" + text + "'");
        }
        std::string key = trim(text.substr(0, eq));
        std::string value = trim(text.substr(eq + 1));
        if (key.empty()) throw ConfigError("override with empty key: '" + text + "'");
        entries_[key] = ConfigEntry{value, 0, false};
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.consumed = true;
        return it->second.value;
    }

    std::string require_string(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) throw ConfigError("missing required key", 0, key);
        it->second.consumed = true;
        return it->second.value;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.consumed = true;
        return parse_double(it->second.value, it->second.line, key);
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.consumed = true;
        return parse_int(it->second.value, it->second.line, key);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.consumed = true;
        const std::string& v = it->second.value;
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("expected a boolean (true/false), got '" + v + "'", it->second.line, key);
    }

    std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.consumed = true;
        std::istringstream ss(it->second.value);
        std::vector<int> out;
        std::string token;
        while (ss >> token) {
            out.push_back(static_cast<int>(parse_int(token, it->second.line, key)));
        }
        return out;
    }

    std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                            std::vector<std::uint64_t> fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        it->second.consumed = true;
        std::istringstream ss(it->second.value);
        std::vector<std::uint64_t> out;
        std::string token;
        while (ss >> token) {
            out.push_back(
                static_cast<std::uint64_t>(parse_int(token, it->second.line, key)));
        }
        return out;
    }

    // Call after extraction: any unconsumed key is a typo or unknown option.
    void reject_unknown() const {
        for (const auto& [key, entry] : entries_) {
            if (!entry.consumed) throw ConfigError("unknown key '" + key + "'", entry.line, key);
        }
    }

    const std::map<std::string, ConfigEntry>& entries() const { return entries_; }
    const std::string& source() const { return source_; }

private:
    void parse_line(std::string line, int line_no) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) return;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected 'key = value'", line_no);
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", line_no);
        entries_[key] = ConfigEntry{value, line_no, false};
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static double parse_double(const std::string& v, int line, const std::string& key) {
        try {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument("trailing characters");
            return d;
        } catch (const std::exception&) {
            throw ConfigError("expected a number, got '" + v + "'", line, key);
        }
    }

    static long long parse_int(const std::string& v, int line, const std::string& key) {
        try {
            std::size_t used = 0;
            const long long n = std::stoll(v, &used);
            if (used != v.size()) throw std::invalid_argument("trailing characters");
            return n;
        } catch (const std::exception&) {
            throw ConfigError("expected an integer, got '" + v + "'", line, key);
        }
    }

    std::map<std::string, ConfigEntry> entries_;
    std::string source_;
};

// ---------------------------------------------------------------------------
// Typed run configuration.
// ---------------------------------------------------------------------------

struct DatasetConfig {
    enum class Kind { synthetic, cifar10 };
    Kind kind = Kind::synthetic;
    SyntheticSpec synthetic;
    std::uint64_t synthetic_seed = 1;
    std::string root;  // cifar10 directory; may be filled from --data-root / DATA_ROOT
};

struct RunConfig {
    DatasetConfig dataset;
    ModelSpec model;
    StageConfig stage;
    std::vector<std::uint64_t> seeds = {1};
    bool gradual = false;
    bool record_timing = false;
    std::string policy_file;
};

inline RunConfig run_config_from_map(const ConfigMap& map) {
    RunConfig cfg;

    const std::string ds_kind = map.get_string("dataset.kind", "synthetic");
    if (ds_kind == "synthetic") {
        cfg.dataset.kind = DatasetConfig::Kind::synthetic;
    } else if (ds_kind == "cifar10") {
        cfg.dataset.kind = DatasetConfig::Kind::cifar10;
    } else {
        throw ConfigError("dataset.kind must be 'synthetic' or 'cifar10', got '" + ds_kind + "'",
                          0, "dataset.kind");
    }
    cfg.dataset.synthetic.num_classes = static_cast<int>(map.get_int("dataset.num_classes", 4));
    cfg.dataset.synthetic.per_class_train =
        static_cast<int>(map.get_int("dataset.per_class_train", 500));
    cfg.dataset.synthetic.per_class_test =
        static_cast<int>(map.get_int("dataset.per_class_test", 100));
    cfg.dataset.synthetic.height = static_cast<int>(map.get_int("dataset.height", 16));
    cfg.dataset.synthetic.width = static_cast<int>(map.get_int("dataset.width", 16));
    cfg.dataset.synthetic_seed =
        static_cast<std::uint64_t>(map.get_int("dataset.seed", 1));
    cfg.dataset.root = map.get_string("dataset.root", "");

    const std::string model_kind = map.get_string("model.kind", "convnet");
    if (model_kind == "convnet") cfg.model.kind = ModelKind::convnet;
    else if (model_kind == "mlp") cfg.model.kind = ModelKind::mlp;
    else throw ConfigError("model.kind must be 'convnet' or 'mlp'", 0, "model.kind");
    cfg.model.widths = map.get_int_list("model.widths", {8, 16});
    cfg.model.eligible_mix_layers = map.get_int_list("model.eligible_mix_layers", {0, 1});
    cfg.model.drop_rate = map.get_double("model.drop_rate", 0.0);
    if (cfg.dataset.kind == DatasetConfig::Kind::synthetic) {
        cfg.model.num_classes = cfg.dataset.synthetic.num_classes;
        cfg.model.in_channels = 3;
        cfg.model.in_height = cfg.dataset.synthetic.height;
        cfg.model.in_width = cfg.dataset.synthetic.width;
    } else {
        cfg.model.num_classes = static_cast<int>(map.get_int("dataset.num_classes", 10));
        cfg.model.in_channels = 3;
        cfg.model.in_height = 32;
        cfg.model.in_width = 32;
    }

    cfg.stage.epochs_augment = static_cast<int>(map.get_int("train.epochs_augment", 40));
    cfg.stage.epochs_refine = static_cast<int>(map.get_int("train.epochs_refine", 10));
    cfg.stage.batch_size = static_cast<int>(map.get_int("train.batch_size", 128));
    cfg.stage.eval_every = static_cast<int>(map.get_int("train.eval_every", 1));
    cfg.seeds = map.get_u64_list("train.seeds", {1});
    if (cfg.seeds.empty()) throw ConfigError("train.seeds must list at least one seed", 0, "train.seeds");
    cfg.gradual = map.get_bool("train.gradual", false);

    const std::string lr_kind = map.get_string("train.lr.kind", "step");
    const double lr_base = map.get_double("train.lr.base", 0.1);
    if (lr_kind == "constant") {
        cfg.stage.stage1_schedule = LrSchedule::constant(lr_base);
    } else if (lr_kind == "step") {
        cfg.stage.stage1_schedule = LrSchedule::step(
            lr_base, map.get_int_list("train.lr.milestones", {15, 30}),
            map.get_double("train.lr.factor", 0.1));
    } else if (lr_kind == "cosine") {
        cfg.stage.stage1_schedule = LrSchedule::cosine(
            lr_base, map.get_double("train.lr.min", 0.0),
            static_cast<int>(map.get_int("train.lr.total", cfg.stage.epochs_augment)));
    } else {
        throw ConfigError("train.lr.kind must be constant, step or cosine", 0, "train.lr.kind");
    }

    const std::string refine_rule = map.get_string("train.refine_lr.rule", "continue_final");
    if (refine_rule == "continue_final") {
        cfg.stage.refine_lr.kind = RefineLrRule::Kind::continue_final;
    } else if (refine_rule == "fixed") {
        cfg.stage.refine_lr.kind = RefineLrRule::Kind::fixed;
        cfg.stage.refine_lr.value = map.get_double("train.refine_lr.value", -1.0);
    } else {
        throw ConfigError("train.refine_lr.rule must be continue_final or fixed", 0,
                          "train.refine_lr.rule");
    }

    cfg.stage.optim.momentum = map.get_double("optim.momentum", 0.9);
    cfg.stage.optim.weight_decay = map.get_double("optim.weight_decay", 1e-4);

    AugPipeline pipeline;
    pipeline.moderate.flip_probability = map.get_double("augment.flip_probability", 0.5);
    pipeline.moderate.pad_crop_padding = static_cast<int>(map.get_int("augment.pad_crop", 2));
    if (pipeline.moderate.flip_probability < 0.0 || pipeline.moderate.flip_probability > 1.0) {
        throw ConfigError("augment.flip_probability must be in [0,1]", 0,
                          "augment.flip_probability");
    }
    if (pipeline.moderate.pad_crop_padding < 0) {
        throw ConfigError("augment.pad_crop must be >= 0", 0, "augment.pad_crop");
    }

    const std::string intensive = map.get_string("augment.intensive", "mixup");
    if (intensive == "none") {
        pipeline.intensive.kind = IntensiveKind::None;
        pipeline.intensity_scale = 0.0;
    } else if (intensive == "mixup") {
        pipeline.intensive.kind = IntensiveKind::Mixup;
    } else if (intensive == "manifold_mixup") {
        pipeline.intensive.kind = IntensiveKind::ManifoldMixup;
    } else if (intensive == "cutmix") {
        pipeline.intensive.kind = IntensiveKind::CutMix;
    } else if (intensive == "policy") {
        pipeline.intensive.kind = IntensiveKind::PolicyAug;
    } else {
        throw ConfigError("augment.intensive must be one of none, mixup, manifold_mixup, "
                          "cutmix, policy",
                          0, "augment.intensive");
    }
    pipeline.intensive.gamma = map.get_double("augment.gamma", 1.0);
    if (!(pipeline.intensive.gamma > 0.0)) {
        throw ConfigError("augment.gamma must be > 0", 0, "augment.gamma");
    }
    pipeline.intensive.apply_probability =
        map.get_double("augment.apply_probability",
                       pipeline.intensive.kind == IntensiveKind::CutMix ? 0.5 : 1.0);
    if (pipeline.intensive.apply_probability < 0.0 ||
        pipeline.intensive.apply_probability > 1.0) {
        throw ConfigError("augment.apply_probability must be in [0,1]", 0,
                          "augment.apply_probability");
    }
    pipeline.intensive.cutout_size = static_cast<int>(map.get_int("augment.cutout", 0));
    cfg.policy_file = map.get_string("augment.policy_file", "");
    if (pipeline.intensive.kind == IntensiveKind::PolicyAug) {
        if (cfg.policy_file.empty()) {
            throw ConfigError("augment.policy_file is required for policy augmentation", 0,
                              "augment.policy_file");
        }
        PolicyFile pf = load_policy_file(cfg.policy_file);
        pipeline.intensive.policy = pf.policy;
        pipeline.intensive.magnitude_table = pf.table;
    }

    cfg.stage.stage1_pipeline = pipeline;
    cfg.stage.stage2_pipeline = moderate_only(pipeline);
    cfg.record_timing = map.get_bool("output.record_timing", false);

    map.reject_unknown();

    try {
        cfg.stage.validate();
        cfg.model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

}  // namespace auglab
