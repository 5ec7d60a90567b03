#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "auglab/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"auglab: data-augmentation training laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string data_root;
    std::vector<std::string> overrides;
    std::uint64_t seed_value = 0;
    bool quiet = false;

    auto add_common = [&](CLI::App* cmd, bool need_config) {
        auto* c = cmd->add_option("--config", config_path, "run config file");
        if (need_config) c->required();
        cmd->add_option("--data-root", data_root, "dataset root directory")
            ->envname("DATA_ROOT");
        cmd->add_option("--override", overrides, "config override key=value (repeatable)");
    };

    CLI::App* train = app.add_subcommand("train", "run two-stage training per seed");
    add_common(train, true);
    train->add_option("--out", out_dir, "output directory")->default_val("runs/out");
    auto* train_seed = train->add_option("--seed", seed_value, "single seed override");
    train->add_flag("--quiet", quiet, "suppress per-epoch progress lines");

    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the test set");
    std::string checkpoint_path;
    evaluate->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();
    add_common(evaluate, true);

    CLI::App* preview = app.add_subcommand("preview", "write augmented samples as PPM files");
    int count = 8;
    add_common(preview, true);
    preview->add_option("--count", count, "number of images to write")->default_val(8);
    preview->add_option("--out", out_dir, "output directory")->default_val("preview");
    auto* preview_seed = preview->add_option("--seed", seed_value, "rng seed");

    CLI::App* report = app.add_subcommand("report", "tabulate risk gaps from run directories");
    std::vector<std::string> run_dirs;
    report->add_option("dirs", run_dirs, "run directories with metrics.csv")->required();
    report->add_option("--out", out_dir, "output directory")->default_val("report");

    CLI::App* selfcheck = app.add_subcommand("selfcheck", "run the fast verification suite");
    bool inject_bug = false;
    selfcheck->add_flag("--inject-gradient-bug", inject_bug,
                        "test fixture: perturb one analytic gradient so the check must fail");

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) {
        auglab::TrainOptions opts;
        opts.config_path = config_path;
        opts.out_dir = out_dir;
        opts.data_root = data_root;
        opts.overrides = overrides;
        opts.quiet = quiet;
        if (train_seed->count() > 0) opts.seed = seed_value;
        return auglab::cmd_train(opts);
    }
    if (evaluate->parsed()) {
        return auglab::cmd_evaluate(checkpoint_path, config_path, data_root, overrides);
    }
    if (preview->parsed()) {
        std::optional<std::uint64_t> seed;
        if (preview_seed->count() > 0) seed = seed_value;
        return auglab::cmd_preview(config_path, count, out_dir, data_root, overrides, seed);
    }
    if (report->parsed()) {
        return auglab::cmd_report(run_dirs, out_dir);
    }
    if (selfcheck->parsed()) {
        return auglab::cmd_selfcheck(inject_bug);
    }
    return auglab::exit_code::config_error;
}
