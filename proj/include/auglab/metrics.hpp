#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "auglab/augment/pipeline.hpp"
#include "auglab/dataset.hpp"
#include "auglab/errors.hpp"
#include "auglab/nn/loss.hpp"
#include "auglab/nn/model.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// Per-epoch measurements: the rows behind loss-curve plots and the clean /
// augmented risk-gap tables.
// ---------------------------------------------------------------------------
struct EpochRecord {
    int epoch = 0;
    std::string stage = "augment";  // "augment" or "refine"
    double lr = 0.0;
    double risk_aug = 0.0;    // mean soft CE over one freshly drawn augmented epoch
    double risk_clean = 0.0;  // mean hard CE over the clean training set
    double test_loss = 0.0;
    double test_acc = 0.0;
    double intensity_scale = 1.0;
    double wall_seconds = 0.0;
};

// Measurable distribution-gap proxy between augmented and clean risk.
inline double gap(const EpochRecord& record) {
    return std::fabs(record.risk_aug - record.risk_clean);
}

struct EvalResult {
    double loss = 0.0;
    double top1_accuracy = 0.0;
};

namespace detail {

// Shared evaluation pass: eval-mode forward in fixed chunks, double
// accumulation. Loss is soft CE against the dataset labels (hard CE when
// labels are one-hot); accuracy counts argmax matches with ties resolved to
// the lowest class index.
template <typename T>
inline EvalResult eval_pass(Model<T>& model, const Dataset& dataset, int chunk = 256) {
    if (dataset.samples.empty()) throw std::invalid_argument("eval_pass: empty dataset");
    double loss_sum = 0.0;
    std::size_t correct = 0;
    const std::size_t n = dataset.size();
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(chunk)) {
        const std::size_t stop = std::min(n, start + static_cast<std::size_t>(chunk));
        std::vector<Sample> batch(dataset.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                  dataset.samples.begin() + static_cast<std::ptrdiff_t>(stop));
        Tensor<T> input = make_batch_tensor<T>(batch);
        Tensor<T> logits = model.forward(input, Mode::eval);
        const auto labels = batch_labels(batch);
        loss_sum += soft_ce_loss(logits, labels) * static_cast<double>(batch.size());
        const int classes = logits.dim(1);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const T* z = logits.values.data() + b * static_cast<std::size_t>(classes);
            int best = 0;
            for (int c = 1; c < classes; ++c) {
                if (z[c] > z[best]) best = c;
            }
            if (best == batch[b].label.argmax()) correct += 1;
        }
    }
    EvalResult out;
    out.loss = loss_sum / static_cast<double>(n);
    out.top1_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    return out;
}

}  // namespace detail

template <typename T>
inline EvalResult evaluate(Model<T>& model, const Dataset& dataset) {
    return detail::eval_pass(model, dataset);
}

// Clean empirical risk: mean hard-label CE over the unaugmented training
// set. Shares the evaluation path, so it equals evaluate().loss exactly.
template <typename T>
inline double empirical_risk(Model<T>& model, const Dataset& dataset) {
    return detail::eval_pass(model, dataset).loss;
}

// Augmented empirical risk: one freshly drawn augmented epoch under the
// given pipeline (a single-epoch Monte Carlo estimate), eval-mode forward,
// double accumulation. ManifoldMixup pipelines mix activations through the
// model's hook at a layer drawn per batch.
template <typename T>
inline double empirical_risk(Model<T>& model, const Dataset& dataset, const AugPipeline& pipeline,
                             RngStream rng, int batch_size = 128) {
    if (dataset.samples.empty()) throw std::invalid_argument("empirical_risk: empty dataset");
    double loss_sum = 0.0;
    const std::size_t n = dataset.size();
    std::vector<int> indices;
    int batch_index = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(n, start + static_cast<std::size_t>(batch_size));
        indices.clear();
        for (std::size_t i = start; i < stop; ++i) indices.push_back(static_cast<int>(i));

        std::vector<Sample> batch =
            apply_pipeline_batch(dataset, indices, pipeline, rng, batch_index);
        Tensor<T> input = make_batch_tensor<T>(batch);
        std::vector<LabelDist> labels = batch_labels(batch);

        Tensor<T> logits;
        if (pipeline.intensive.kind == IntensiveKind::ManifoldMixup) {
            RngStream mix_rng =
                rng.fork(rng_tag::batch_mix).fork(static_cast<std::uint64_t>(batch_index));
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
            logits = model.forward(input, Mode::eval, &hook);
            const float lam = hook.lambda;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                labels[i] = mix_labels(lam, batch[i].label,
                                       batch[static_cast<std::size_t>(perm[i])].label);
            }
        } else {
            logits = model.forward(input, Mode::eval);
        }
        loss_sum += soft_ce_loss(logits, labels) * static_cast<double>(batch.size());
        batch_index += 1;
    }
    return loss_sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Record export / import. CSV column order is part of the file contract:
//   epoch,stage,lr,risk_aug,risk_clean,test_loss,test_acc,intensity_scale,wall_seconds
// Floats are printed shortest-round-trip, so importing recovers the exact
// stored values.
// ---------------------------------------------------------------------------

inline const char* kRecordCsvHeader =
    "epoch,stage,lr,risk_aug,risk_clean,test_loss,test_acc,intensity_scale,wall_seconds";

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw NumericError("format_double failed");
    return std::string(buf, ptr);
}

enum class RecordFormat { csv, jsonl };

inline std::string record_csv_row(const EpochRecord& r) {
    std::string out = std::to_string(r.epoch);
    out += ',';
    out += r.stage;
    for (double v : {r.lr, r.risk_aug, r.risk_clean, r.test_loss, r.test_acc, r.intensity_scale,
                     r.wall_seconds}) {
        out += ',';
        out += format_double(v);
    }
    return out;
}

inline nlohmann::json record_to_json(const EpochRecord& r) {
    return nlohmann::json{{"epoch", r.epoch},
                          {"stage", r.stage},
                          {"lr", r.lr},
                          {"risk_aug", r.risk_aug},
                          {"risk_clean", r.risk_clean},
                          {"test_loss", r.test_loss},
                          {"test_acc", r.test_acc},
                          {"intensity_scale", r.intensity_scale},
                          {"wall_seconds", r.wall_seconds}};
}

inline void export_records(const std::vector<EpochRecord>& records, const std::string& path,
                           RecordFormat format) {
    if (records.empty()) throw std::invalid_argument("export_records: no records");
    for (const EpochRecord& r : records) {
        for (double v : {r.lr, r.risk_aug, r.risk_clean, r.test_loss, r.test_acc,
                         r.intensity_scale, r.wall_seconds}) {
            if (!std::isfinite(v)) throw NumericError("export_records: non-finite value");
        }
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    if (format == RecordFormat::csv) {
        out << kRecordCsvHeader << '\n';
        for (const EpochRecord& r : records) out << record_csv_row(r) << '\n';
    } else {
        for (const EpochRecord& r : records) out << record_to_json(r).dump() << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<EpochRecord> load_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open metrics file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty metrics file");
    if (line != kRecordCsvHeader) throw FormatError(path + ": unexpected CSV header");
    std::vector<EpochRecord> records;
    int line_no = 1;
    while (std::getline(in, line)) {
        line_no += 1;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 9) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected 9 columns");
        }
        EpochRecord r;
        r.epoch = std::stoi(cells[0]);
        r.stage = cells[1];
        auto num = [&](int i) { return std::stod(cells[static_cast<std::size_t>(i)]); };
        r.lr = num(2);
        r.risk_aug = num(3);
        r.risk_clean = num(4);
        r.test_loss = num(5);
        r.test_acc = num(6);
        r.intensity_scale = num(7);
        r.wall_seconds = num(8);
        records.push_back(r);
    }
    return records;
}

// ---------------------------------------------------------------------------
// Gap report: per method, (risk_aug, risk_clean) at the end of the
// augmentation stage and at the end of refinement. Values are stored
// unscaled; formatting multiplies by 1000 for display.
// ---------------------------------------------------------------------------
struct GapReportRow {
    std::string method;
    double aug_risk_aug = 0.0;
    double aug_risk_clean = 0.0;
    bool has_refinement = false;
    double refine_risk_aug = 0.0;
    double refine_risk_clean = 0.0;
};

struct GapReport {
    std::vector<GapReportRow> rows;
};

struct RunSeries {
    std::string method;
    std::vector<EpochRecord> records;
};

inline GapReport gap_report(const std::vector<RunSeries>& runs) {
    GapReport report;
    for (const RunSeries& run : runs) {
        const EpochRecord* last_aug = nullptr;
        const EpochRecord* last_refine = nullptr;
        for (const EpochRecord& r : run.records) {
            if (r.stage == "augment" && r.epoch > 0) last_aug = &r;
            if (r.stage == "refine") last_refine = &r;
        }
        if (!last_aug) {
            throw std::invalid_argument("gap_report: run '" + run.method +
                                        "' has no augmentation epochs");
        }
        GapReportRow row;
        row.method = run.method;
        row.aug_risk_aug = last_aug->risk_aug;
        row.aug_risk_clean = last_aug->risk_clean;
        if (last_refine) {
            row.has_refinement = true;
            row.refine_risk_aug = last_refine->risk_aug;
            row.refine_risk_clean = last_refine->risk_clean;
        }
        report.rows.push_back(row);
    }
    std::sort(report.rows.begin(), report.rows.end(),
              [](const GapReportRow& a, const GapReportRow& b) { return a.method < b.method; });
    return report;
}

inline std::string format_milli(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v * 1000.0);
    return std::string(buf);
}

// Plain-text table, risks shown at x10^-3 scale.
inline std::string gap_report_text(const GapReport& report) {
    std::ostringstream out;
    out << "method | aug:risk_aug | aug:risk_clean | refine:risk_aug | refine:risk_clean"
        << "  (cross-entropy x 1e-3)\n";
    for (const GapReportRow& row : report.rows) {
        out << row.method << " | " << format_milli(row.aug_risk_aug) << " | "
            << format_milli(row.aug_risk_clean) << " | ";
        if (row.has_refinement) {
            out << format_milli(row.refine_risk_aug) << " | "
                << format_milli(row.refine_risk_clean);
        } else {
            out << "- | -";
        }
        out << '\n';
    }
    return out.str();
}

inline std::string gap_report_csv(const GapReport& report) {
    std::string out = "method,aug_risk_aug,aug_risk_clean,refine_risk_aug,refine_risk_clean\n";
    for (const GapReportRow& row : report.rows) {
        out += row.method + ',' + format_milli(row.aug_risk_aug) + ',' +
               format_milli(row.aug_risk_clean) + ',';
        if (row.has_refinement) {
            out += format_milli(row.refine_risk_aug) + ',' + format_milli(row.refine_risk_clean);
        } else {
            out += ",";
        }
        out += '\n';
    }
    return out;
}

}  // namespace auglab
