// Command-line front end for the slogan-generation pipeline.
//
// Subcommands: prepare-data, make-fixture, train, generate, evaluate,
// ablate, judge, report. Configuration resolves in layers: built-in
// defaults, then --config FILE, then repeated --set key=value, then the
// --seed / --out shorthands. Every run echoes its fully-resolved config
// next to its outputs.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slogen/slogen.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::int64_t seed = -1;
    std::string out_dir;
};

void add_global_options(CLI::App* cmd, GlobalArgs& g) {
    cmd->add_option("--config", g.config_path, "run config file (key=value lines)");
    cmd->add_option("--set", g.sets, "override a single config key (key=value), repeatable")
        ->take_all();
    cmd->add_option("--seed", g.seed, "master seed; sets seeds.split/init/train to N, N+1, N+2");
    cmd->add_option("--out", g.out_dir, "output directory (overrides out.dir)");
}

slogen::RunConfig resolve_config(const GlobalArgs& g) {
    slogen::RunConfig cfg;
    if (!g.config_path.empty()) slogen::apply_config_file(cfg, g.config_path);
    for (const std::string& kv : g.sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) {
            slogen::fail(slogen::ErrorCategory::config, "--set expects key=value, got '" + kv + "'");
        }
        slogen::apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (g.seed >= 0) {
        auto s = static_cast<std::uint64_t>(g.seed);
        cfg.seeds.split = s;
        cfg.seeds.init = s + 1;
        cfg.seeds.train = s + 2;
    }
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale slogan generation: data prep, training with embedding noise, "
                 "generation, evaluation, and ablation"};
    app.require_subcommand(1);

    GlobalArgs g;

    std::string input_path;
    int fixture_n = 0;
    auto* prepare = app.add_subcommand("prepare-data", "parse, clean, split, and build the vocabulary");
    add_global_options(prepare, g);
    prepare->add_option("--input", input_path, "records file (one record per line)");
    prepare->add_option("--fixture", fixture_n, "generate a synthetic fixture of N records instead");

    int make_n = 0;
    std::string make_output;
    auto* makefix = app.add_subcommand("make-fixture", "write a synthetic records file");
    add_global_options(makefix, g);
    makefix->add_option("--n", make_n, "number of records")->required();
    makefix->add_option("--output", make_output, "destination path")->required();

    auto* train = app.add_subcommand("train", "train a model on the prepared split");
    add_global_options(train, g);

    auto* generate = app.add_subcommand("generate", "greedy-decode slogans for the test split");
    add_global_options(generate, g);

    auto* evaluate = app.add_subcommand("evaluate", "score generations against descriptions and references");
    add_global_options(evaluate, g);

    auto* ablate = app.add_subcommand("ablate", "sweep noise levels with replicated runs");
    add_global_options(ablate, g);

    std::string judgments_path, focal_label;
    auto* judge = app.add_subcommand("judge", "aggregate pairwise preference judgments");
    add_global_options(judge, g);
    judge->add_option("--judgments", judgments_path, "judgments file")->required();
    judge->add_option("--focal", focal_label, "system whose win rate is reported")->required();

    std::vector<std::string> report_inputs;
    auto* report = app.add_subcommand("report", "combine report CSVs into one comparison table");
    add_global_options(report, g);
    report->add_option("inputs", report_inputs, "report CSV files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        slogen::RunConfig cfg = resolve_config(g);

        if (prepare->parsed()) {
            if (!input_path.empty()) cfg.data.records = input_path;
            if (fixture_n > 0) cfg.data.fixture_n = fixture_n;
            slogen::cmd_prepare_data(cfg);
            std::cout << "prepared data in " << cfg.out_dir << "\n";
        } else if (makefix->parsed()) {
            slogen::cmd_make_fixture(cfg, make_n, make_output);
            std::cout << "wrote " << make_n << " fixture records to " << make_output << "\n";
        } else if (train->parsed()) {
            slogen::TrainResult result = slogen::cmd_train(cfg);
            std::cout << "trained " << result.steps << " steps; final epoch loss "
                      << result.epoch_loss.back() << "\n";
        } else if (generate->parsed()) {
            slogen::cmd_generate(cfg);
            std::cout << "wrote " << slogen::paths::generations(cfg.out_dir) << "\n";
        } else if (evaluate->parsed()) {
            slogen::cmd_evaluate(cfg);
            std::ifstream in(slogen::paths::report_text(cfg.out_dir));
            std::cout << in.rdbuf();
        } else if (ablate->parsed()) {
            slogen::cmd_ablate(cfg);
            std::ifstream in(slogen::paths::ablation_text(cfg.out_dir));
            std::cout << in.rdbuf();
        } else if (judge->parsed()) {
            slogen::cmd_judge(cfg, judgments_path, focal_label);
            std::ifstream in(slogen::paths::preferences_text(cfg.out_dir));
            std::cout << in.rdbuf();
        } else if (report->parsed()) {
            slogen::cmd_report(cfg, report_inputs);
            std::ifstream in(slogen::paths::report_text(cfg.out_dir));
            std::cout << in.rdbuf();
        }
    } catch (const slogen::Error& e) {
        std::cerr << "error:" << slogen::to_string(e.category()) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error:internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
