#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "auglab/metrics.hpp"
#include "auglab/synthetic.hpp"

using namespace auglab;
namespace fs = std::filesystem;

namespace {

ModelSpec zero_logit_model_spec(int classes, int channels, int side) {
    ModelSpec spec;
    spec.kind = ModelKind::mlp;
    spec.widths = {};
    spec.num_classes = classes;
    spec.in_channels = channels;
    spec.in_height = side;
    spec.in_width = side;
    spec.norm_mean.assign(static_cast<std::size_t>(channels), 0.0f);
    spec.norm_std.assign(static_cast<std::size_t>(channels), 1.0f);
    spec.eligible_mix_layers = {0};
    return spec;
}

std::vector<EpochRecord> sample_records() {
    std::vector<EpochRecord> records;
    for (int e = 0; e < 3; ++e) {
        EpochRecord r;
        r.epoch = e;
        r.stage = e < 2 ? "augment" : "refine";
        r.lr = 0.1 / (e + 1);
        r.risk_aug = 1.356 / (e + 1);
        r.risk_clean = 0.098 / (e + 1);
        r.test_loss = 0.5 + 0.01 * e;
        r.test_acc = 0.7 + 0.05 * e;
        r.intensity_scale = e < 2 ? 1.0 : 0.0;
        r.wall_seconds = 0.0;
        records.push_back(r);
    }
    return records;
}

}  // namespace

TEST_CASE("gap basics") {
    EpochRecord r;
    r.risk_aug = 0.25;
    r.risk_clean = 0.25;
    CHECK(gap(r) == 0.0);

    // the published mixup row, at raw scale: 1356 and 98 (x 1e-3)
    r.risk_aug = 1.356;
    r.risk_clean = 0.098;
    CHECK(gap(r) == doctest::Approx(1.258).epsilon(1e-12));

    EpochRecord swapped = r;
    std::swap(swapped.risk_aug, swapped.risk_clean);
    CHECK(gap(r) == gap(swapped));
}

TEST_CASE("a memorizing model drives the clean risk to zero") {
    const ModelSpec spec = zero_logit_model_spec(3, 1, 2);
    RngStream init(90);
    Model<float> model(spec, init);
    auto refs = model.params();
    for (float& v : refs[0].tensor->values) v = 0.0f;
    const float proto[3] = {0.2f, 0.5f, 0.8f};
    for (int c = 0; c < 3; ++c) {
        refs[0].tensor->values[static_cast<std::size_t>(c) * 4] = 600.0f * proto[c];
        refs[1].tensor->values[static_cast<std::size_t>(c)] = -300.0f * proto[c] * proto[c];
    }
    Dataset ds;
    ds.num_classes = 3;
    for (int c = 0; c < 3; ++c) {
        Sample s;
        s.image = Image(1, 2, 2, proto[c]);
        s.label = one_hot(c, 3);
        ds.samples.push_back(std::move(s));
    }
    CHECK(empirical_risk(model, ds) < 1e-6);
}

TEST_CASE("uniform logits give risk log C under any pipeline") {
    const ModelSpec spec = zero_logit_model_spec(4, 3, 8);
    RngStream init(91);
    Model<float> model(spec, init);
    for (auto ref : model.params()) {
        for (float& v : ref.tensor->values) v = 0.0f;
    }

    SyntheticSpec dspec;
    dspec.num_classes = 4;
    dspec.per_class_train = 4;
    dspec.per_class_test = 2;
    dspec.height = 8;
    dspec.width = 8;
    auto [train, test] = generate_synthetic(dspec, 92);
    (void)test;

    CHECK(empirical_risk(model, train) == doctest::Approx(std::log(4.0)).epsilon(1e-9));

    AugPipeline mixup;
    mixup.moderate.pad_crop_padding = 1;
    mixup.intensive.kind = IntensiveKind::Mixup;
    const double augmented =
        empirical_risk(model, train, mixup, RngStream(93).fork(rng_tag::measure), 8);
    // mixed labels are stored as float32, so their sums carry ~1e-7 noise
    CHECK(augmented == doctest::Approx(std::log(4.0)).epsilon(1e-6));
}

TEST_CASE("identity-pipeline risk shares the evaluation path exactly") {
    SyntheticSpec dspec;
    dspec.num_classes = 3;
    dspec.per_class_train = 5;
    dspec.per_class_test = 2;
    dspec.height = 8;
    dspec.width = 8;
    auto [train, test] = generate_synthetic(dspec, 94);
    (void)test;

    ModelSpec spec = zero_logit_model_spec(3, 3, 8);
    spec.widths = {5};
    spec.eligible_mix_layers = {0, 1};
    RngStream init(95);
    Model<float> model(spec, init);

    CHECK(empirical_risk(model, train) == evaluate(model, train).loss);
}

TEST_CASE("clean risk has no rng dependence") {
    SyntheticSpec dspec;
    dspec.num_classes = 2;
    dspec.per_class_train = 4;
    dspec.per_class_test = 2;
    dspec.height = 8;
    dspec.width = 8;
    auto [train, test] = generate_synthetic(dspec, 96);
    (void)test;
    ModelSpec spec = zero_logit_model_spec(2, 3, 8);
    RngStream init(97);
    Model<float> model(spec, init);
    CHECK(empirical_risk(model, train) == empirical_risk(model, train));
}

TEST_CASE("csv export: shape and lossless round trip") {
    const auto records = sample_records();
    const fs::path dir = fs::temp_directory_path() / "auglab_metrics_tests";
    fs::create_directories(dir);
    const fs::path csv = dir / "metrics.csv";
    export_records(records, csv.string(), RecordFormat::csv);

    std::ifstream in(csv);
    std::string line;
    int lines = 0;
    std::getline(in, line);
    CHECK(line == std::string(kRecordCsvHeader));
    lines += 1;
    while (std::getline(in, line)) {
        if (!line.empty()) lines += 1;
    }
    CHECK(lines == 4);  // header + 3 rows

    const auto back = load_records_csv(csv.string());
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].epoch == records[i].epoch);
        CHECK(back[i].stage == records[i].stage);
        CHECK(back[i].lr == records[i].lr);  // shortest round-trip printing is exact
        CHECK(back[i].risk_aug == records[i].risk_aug);
        CHECK(back[i].risk_clean == records[i].risk_clean);
        CHECK(back[i].test_loss == records[i].test_loss);
        CHECK(back[i].test_acc == records[i].test_acc);
        CHECK(back[i].intensity_scale == records[i].intensity_scale);
    }
}

TEST_CASE("jsonl export: one line per record") {
    const auto records = sample_records();
    const fs::path dir = fs::temp_directory_path() / "auglab_metrics_tests";
    fs::create_directories(dir);
    const fs::path jsonl = dir / "metrics.jsonl";
    export_records(records, jsonl.string(), RecordFormat::jsonl);
    std::ifstream in(jsonl);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("epoch").get<int>() == lines);
        lines += 1;
    }
    CHECK(lines == 3);
}

TEST_CASE("export rejects bad inputs") {
    std::vector<EpochRecord> empty;
    CHECK_THROWS_AS(export_records(empty, "anywhere.csv", RecordFormat::csv),
                    std::invalid_argument);

    auto records = sample_records();
    CHECK_THROWS_AS(
        export_records(records, "/nonexistent_dir_xyz/metrics.csv", RecordFormat::csv), IoError);

    records[0].risk_aug = std::numeric_limits<double>::infinity();
    const fs::path dir = fs::temp_directory_path() / "auglab_metrics_tests";
    fs::create_directories(dir);
    CHECK_THROWS_AS(export_records(records, (dir / "bad.csv").string(), RecordFormat::csv),
                    NumericError);
}

TEST_CASE("gap report: rows, ordering, absent refinement") {
    RunSeries mixup;
    mixup.method = "mixup";
    mixup.records = sample_records();

    RunSeries cutmix;
    cutmix.method = "cutmix";
    cutmix.records = sample_records();
    cutmix.records.pop_back();  // no refinement rows
    for (auto& r : cutmix.records) r.stage = "augment";

    const GapReport report = gap_report({mixup, cutmix});
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].method == "cutmix");  // sorted by method name
    CHECK(report.rows[1].method == "mixup");
    CHECK_FALSE(report.rows[0].has_refinement);
    CHECK(report.rows[1].has_refinement);
    CHECK(report.rows[1].aug_risk_aug == mixup.records[1].risk_aug);
    CHECK(report.rows[1].refine_risk_clean == mixup.records[2].risk_clean);

    const std::string text = gap_report_text(report);
    CHECK(text.find("mixup") != std::string::npos);
    CHECK(text.find("678") != std::string::npos);  // 0.678 shown at x1e-3 scale

    RunSeries no_aug;
    no_aug.method = "broken";
    EpochRecord only_baseline;
    only_baseline.epoch = 0;
    no_aug.records = {only_baseline};
    CHECK_THROWS_AS(gap_report({no_aug}), std::invalid_argument);
}

TEST_CASE("format_milli shows the x 1e-3 presentation scale") {
    CHECK(format_milli(1.356) == "1356");
    CHECK(format_milli(0.098) == "98");
    CHECK(format_milli(0.0033) == "3.3");
}
