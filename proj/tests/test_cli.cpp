#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "auglab/cli.hpp"

using namespace auglab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "auglab_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string minimal_config_text(const std::string& intensive = "mixup") {
    return "dataset.kind = synthetic\n"
           "dataset.num_classes = 2\n"
           "dataset.per_class_train = 8\n"
           "dataset.per_class_test = 4\n"
           "dataset.height = 8\n"
           "dataset.width = 8\n"
           "dataset.seed = 3\n"
           "model.kind = mlp\n"
           "model.widths = 6\n"
           "model.eligible_mix_layers = 0 1\n"
           "train.epochs_augment = 2\n"
           "train.epochs_refine = 1\n"
           "train.batch_size = 8\n"
           "train.seeds = 5\n"
           "train.lr.kind = constant\n"
           "train.lr.base = 0.05\n"
           "augment.flip_probability = 0.5\n"
           "augment.pad_crop = 1\n"
           "augment.intensive = " + intensive + "\n"
           "augment.gamma = 1.0\n";
}

fs::path write_config(const fs::path& dir, const std::string& text,
                      const std::string& name = "run.cfg") {
    const fs::path path = dir / name;
    std::ofstream out(path);
    out << text;
    return path;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char ch : text) {
        if (ch == '\n') n += 1;
    }
    return n;
}

}  // namespace

TEST_CASE("cmd_train writes a self-contained run directory") {
    const fs::path dir = fresh_dir("train_minimal");
    const fs::path cfg = write_config(dir, minimal_config_text());

    TrainOptions opts;
    opts.config_path = cfg.string();
    opts.out_dir = (dir / "out").string();
    opts.quiet = true;
    REQUIRE(cmd_train(opts) == exit_code::ok);

    CHECK(fs::exists(dir / "out" / "metrics.csv"));
    CHECK(fs::exists(dir / "out" / "metrics.jsonl"));
    CHECK(fs::exists(dir / "out" / "manifest.json"));
    CHECK(fs::exists(dir / "out" / "final.ckpt"));
    CHECK(fs::exists(dir / "out" / "best.ckpt"));

    const auto records = load_records_csv((dir / "out" / "metrics.csv").string());
    CHECK(records.size() == 4);  // baseline + N + M
    CHECK(records.front().epoch == 0);
    CHECK(records.back().stage == "refine");
    for (const auto& r : records) CHECK(r.wall_seconds == 0.0);  // timing off by default
}

// Determinism oracle: identical config and seed must produce byte-identical
// metrics files.
TEST_CASE("cmd_train is byte-deterministic across reruns") {
    const fs::path dir = fresh_dir("train_determinism");
    const fs::path cfg = write_config(dir, minimal_config_text());

    TrainOptions a;
    a.config_path = cfg.string();
    a.out_dir = (dir / "a").string();
    a.quiet = true;
    TrainOptions b = a;
    b.out_dir = (dir / "b").string();

    REQUIRE(cmd_train(a) == exit_code::ok);
    REQUIRE(cmd_train(b) == exit_code::ok);
    CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));
    CHECK(slurp(dir / "a" / "metrics.jsonl") == slurp(dir / "b" / "metrics.jsonl"));
    CHECK(slurp(dir / "a" / "final.ckpt") == slurp(dir / "b" / "final.ckpt"));
}

TEST_CASE("cmd_train multi-seed sweep writes one subdirectory per seed") {
    const fs::path dir = fresh_dir("train_sweep");
    const fs::path cfg = write_config(dir, minimal_config_text());

    TrainOptions opts;
    opts.config_path = cfg.string();
    opts.out_dir = (dir / "out").string();
    opts.overrides = {"train.seeds = 1 2 3"};
    opts.quiet = true;
    REQUIRE(cmd_train(opts) == exit_code::ok);

    for (int s = 1; s <= 3; ++s) {
        const fs::path sub = dir / "out" / ("seed_" + std::to_string(s));
        CAPTURE(sub.string());
        CHECK(fs::exists(sub / "metrics.csv"));
        CHECK(fs::exists(sub / "manifest.json"));
        CHECK(fs::exists(sub / "final.ckpt"));
        CHECK(fs::exists(sub / "best.ckpt"));
    }
    // seeds differ, so their metrics must differ
    CHECK(slurp(dir / "out" / "seed_1" / "metrics.csv") !=
          slurp(dir / "out" / "seed_2" / "metrics.csv"));
}

TEST_CASE("invalid configs exit with code 2 and name the offending line") {
    const fs::path dir = fresh_dir("train_invalid");

    const fs::path unknown = write_config(dir, minimal_config_text() + "trian.typo = 4\n");
    TrainOptions opts;
    opts.config_path = unknown.string();
    opts.out_dir = (dir / "out").string();
    opts.quiet = true;
    CHECK(cmd_train(opts) == exit_code::config_error);

    const fs::path bad_value =
        write_config(dir, minimal_config_text() + "train.batch_size = banana\n", "bad.cfg");
    opts.config_path = bad_value.string();
    CHECK(cmd_train(opts) == exit_code::config_error);

    // parse errors carry the line number
    try {
        ConfigMap map = ConfigMap::from_file(bad_value.string());
        (void)run_config_from_map(map);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 21") != std::string::npos);
    }

    opts.config_path = (dir / "missing.cfg").string();
    CHECK(cmd_train(opts) == exit_code::config_error);
}

TEST_CASE("a diverging run exits with the training-abort code") {
    const fs::path dir = fresh_dir("train_abort");
    std::string text = minimal_config_text("none");
    const fs::path cfg = write_config(dir, text);

    TrainOptions opts;
    opts.config_path = cfg.string();
    opts.out_dir = (dir / "out").string();
    opts.overrides = {"train.lr.kind=constant", "train.lr.base=1e18"};
    opts.quiet = true;
    CHECK(cmd_train(opts) == exit_code::training_abort);
}

TEST_CASE("overrides change the effective config") {
    const fs::path dir = fresh_dir("train_override");
    const fs::path cfg = write_config(dir, minimal_config_text());

    TrainOptions opts;
    opts.config_path = cfg.string();
    opts.out_dir = (dir / "out").string();
    opts.overrides = {"train.epochs_augment=1", "train.epochs_refine=0"};
    opts.quiet = true;
    REQUIRE(cmd_train(opts) == exit_code::ok);
    const auto records = load_records_csv((dir / "out" / "metrics.csv").string());
    CHECK(records.size() == 2);  // baseline + 1 epoch
}

TEST_CASE("cmd_evaluate matches the final epoch record exactly") {
    const fs::path dir = fresh_dir("evaluate_crosscheck");
    const fs::path cfg = write_config(dir, minimal_config_text());

    TrainOptions opts;
    opts.config_path = cfg.string();
    opts.out_dir = (dir / "out").string();
    opts.quiet = true;
    REQUIRE(cmd_train(opts) == exit_code::ok);

    const auto records = load_records_csv((dir / "out" / "metrics.csv").string());
    const EpochRecord& last = records.back();

    LoadedCheckpoint loaded = load_checkpoint((dir / "out" / "final.ckpt").string());
    ConfigMap map = ConfigMap::from_file(cfg.string());
    RunConfig run_cfg = run_config_from_map(map);
    auto [train, test] = build_datasets(run_cfg, "");
    (void)train;
    const EvalResult r = evaluate(*loaded.model, test);
    CHECK(r.loss == last.test_loss);
    CHECK(r.top1_accuracy == last.test_acc);

    // the command-level wrapper agrees and exits 0
    CHECK(cmd_evaluate((dir / "out" / "final.ckpt").string(), cfg.string(), "", {}) ==
          exit_code::ok);
}

TEST_CASE("cmd_evaluate exit codes for broken inputs") {
    const fs::path dir = fresh_dir("evaluate_errors");
    const fs::path cfg = write_config(dir, minimal_config_text());

    const fs::path garbage = dir / "garbage.ckpt";
    {
        std::ofstream out(garbage, std::ios::binary);
        out << "not a checkpoint";
    }
    CHECK(cmd_evaluate(garbage.string(), cfg.string(), "", {}) == exit_code::checkpoint_error);

    // valid checkpoint, unavailable dataset
    TrainOptions opts;
    opts.config_path = cfg.string();
    opts.out_dir = (dir / "out").string();
    opts.quiet = true;
    REQUIRE(cmd_train(opts) == exit_code::ok);
    const fs::path ckpt = dir / "out" / "final.ckpt";
    const fs::path cifar_cfg = write_config(
        dir, "dataset.kind = cifar10\ndataset.root = /nonexistent/cifar\n", "cifar.cfg");
    CHECK(cmd_evaluate(ckpt.string(), cifar_cfg.string(), "", {}) == exit_code::config_error);
}

TEST_CASE("cmd_preview writes images and a sidecar with consistent mix data") {
    const fs::path dir = fresh_dir("preview_mixup");
    const fs::path cfg = write_config(dir, minimal_config_text());

    // count 0: directory created, nothing written
    const fs::path empty_out = dir / "empty";
    REQUIRE(cmd_preview(cfg.string(), 0, empty_out.string(), "", {}, std::nullopt) ==
            exit_code::ok);
    CHECK(fs::exists(empty_out));
    CHECK(fs::is_empty(empty_out));

    const fs::path out = dir / "preview";
    REQUIRE(cmd_preview(cfg.string(), 6, out.string(), "", {}, 42) == exit_code::ok);
    for (int i = 0; i < 6; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%03d.ppm", i);
        CHECK(fs::exists(out / name));
    }

    // sidecar label weights sum to one
    std::ifstream sidecar(out / "preview.txt");
    std::string line;
    int label_lines = 0;
    while (std::getline(sidecar, line)) {
        const std::size_t pos = line.find("label=[");
        if (pos == std::string::npos) continue;
        const std::size_t end = line.find(']', pos);
        std::string cells = line.substr(pos + 7, end - pos - 7);
        for (char& ch : cells) {
            if (ch == ',') ch = ' ';
        }
        std::istringstream ss(cells);
        double total = 0.0, v = 0.0;
        while (ss >> v) total += v;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
        label_lines += 1;
    }
    CHECK(label_lines == 6);
}

TEST_CASE("cutmix preview sidecar lambda agrees with the mask bounds") {
    const fs::path dir = fresh_dir("preview_cutmix");
    std::string text = minimal_config_text("cutmix");
    text += "augment.apply_probability = 1.0\n";
    const fs::path cfg = write_config(dir, text);

    const fs::path out = dir / "preview";
    // seed chosen so the per-batch coin lands on "apply"
    REQUIRE(cmd_preview(cfg.string(), 4, out.string(), "", {}, 7) == exit_code::ok);

    std::ifstream sidecar(out / "preview.txt");
    std::string line;
    int checked = 0;
    while (std::getline(sidecar, line)) {
        const std::size_t mask_pos = line.find("mask=[");
        if (mask_pos == std::string::npos) continue;
        const std::size_t lambda_pos = line.find("lambda=");
        REQUIRE(lambda_pos != std::string::npos);
        const double lambda = std::stod(line.substr(lambda_pos + 7));
        int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
        REQUIRE(std::sscanf(line.c_str() + mask_pos, "mask=[%d,%d,%d,%d]", &x0, &y0, &x1, &y1) ==
                4);
        const double area = static_cast<double>(x1 - x0) * (y1 - y0);
        CHECK(lambda == doctest::Approx(1.0 - area / (8.0 * 8.0)).epsilon(1e-12));
        checked += 1;
    }
    CHECK(checked == 4);
}

TEST_CASE("cmd_report tabulates runs and emits curve files") {
    const fs::path dir = fresh_dir("report");
    const fs::path cfg = write_config(dir, minimal_config_text());

    TrainOptions opts;
    opts.config_path = cfg.string();
    opts.out_dir = (dir / "run").string();
    opts.quiet = true;
    REQUIRE(cmd_train(opts) == exit_code::ok);

    const fs::path report_dir = dir / "report_out";
    REQUIRE(cmd_report({(dir / "run").string()}, report_dir.string()) == exit_code::ok);
    CHECK(fs::exists(report_dir / "report.txt"));
    CHECK(fs::exists(report_dir / "report.csv"));
    CHECK(fs::exists(report_dir / "curve_run.csv"));

    const std::string report_csv = slurp(report_dir / "report.csv");
    CHECK(count_lines(report_csv) == 2);  // header + one row

    // cells match the source metrics at the x 1e-3 presentation scale
    const auto records = load_records_csv((dir / "run" / "metrics.csv").string());
    const EpochRecord* last_aug = nullptr;
    for (const auto& r : records) {
        if (r.stage == "augment" && r.epoch > 0) last_aug = &r;
    }
    REQUIRE(last_aug != nullptr);
    CHECK(report_csv.find(format_milli(last_aug->risk_aug)) != std::string::npos);
    CHECK(report_csv.find(format_milli(last_aug->risk_clean)) != std::string::npos);

    // curve rows equal the record count
    const std::string curve = slurp(report_dir / "curve_run.csv");
    CHECK(count_lines(curve) == static_cast<int>(records.size()) + 1);

    // missing run directory is a config error that names the offender
    CHECK(cmd_report({(dir / "nope").string()}, report_dir.string()) == exit_code::config_error);
}

TEST_CASE("selfcheck passes on a pristine build and lists each check once") {
    std::ostringstream captured;
    std::streambuf* old = std::cout.rdbuf(captured.rdbuf());
    const int code = cmd_selfcheck(false);
    std::cout.rdbuf(old);

    CHECK(code == exit_code::ok);
    const std::string out = captured.str();
    for (const char* name : {"gradient_check", "beta_uniform_ks", "beta_moments",
                             "cutmix_lambda_identity", "mixup_exactness", "policy_identities",
                             "determinism"}) {
        CAPTURE(name);
        std::size_t first = out.find(name);
        REQUIRE(first != std::string::npos);
        CHECK(out.find(name, first + 1) == std::string::npos);
        CHECK(out.find(std::string("PASS ") + name) != std::string::npos);
    }
}

// Mutation oracle: an injected backward-pass bug must fail the gradient
// check and flip the exit code.
TEST_CASE("selfcheck fails when a gradient bug is injected") {
    std::ostringstream captured;
    std::streambuf* old = std::cout.rdbuf(captured.rdbuf());
    const int code = cmd_selfcheck(true);
    std::cout.rdbuf(old);

    CHECK(code == exit_code::selfcheck_failed);
    CHECK(captured.str().find("FAIL gradient_check") != std::string::npos);
}
