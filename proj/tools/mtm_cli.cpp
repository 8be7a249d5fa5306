#include "mtm/config.hpp"
#include "mtm/errors.hpp"
#include "mtm/workflow.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"mtm: masked trajectory modelling on a synthetic world"};
    app.require_subcommand(0, 1);
    app.set_help_all_flag("--help-all", "Show help for every command");

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::string task;
    std::string mode;
    std::string preset;
    bool quiet = false;
    bool print_config = false;

    app.add_flag("--print-default-config", print_config, "Print a config with every key at its default and exit");

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Config file (key = value lines)")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Override the config's seed");
        sub->add_option("--out", out_dir, "Artifact directory");
        sub->add_flag("--quiet", quiet, "No progress output");
    };

    const auto describe = [](const std::string& c) -> std::string {
        if (c == "world-gen") return "Build the synthetic world and holiday calendar";
        if (c == "simulate") return "Simulate raw GPS traces for every agent";
        if (c == "ingest") return "Check-ins, monthly trajectories, filtering and the 70/15/15 split";
        if (c == "tokenize") return "Train the WordPiece vocabulary and mask the pre-training corpus";
        if (c == "pretrain") return "Masked-token pre-training of the encoder";
        if (c == "adapt") return "Adapt to a downstream task (finetune, fewshot, zeroshot, random-init, baseline)";
        if (c == "evaluate") return "Recompute metrics from labels and predictions";
        if (c == "export-map") return "Write GeoJSON choropleths for region tasks";
        return "Collect every report into summary.csv and summary.txt";
    };

    for (const auto& c : mtm::command_names()) {
        CLI::App* sub = app.add_subcommand(c, describe(c));
        add_common(sub);
        if (c == "adapt" || c == "evaluate" || c == "export-map") {
            sub->add_option("--task", task, "Task name, or 'all' for the config's task list")->required();
            sub->add_option("--mode", mode, "finetune | fewshot | zeroshot | random-init | baseline");
            sub->add_option("--preset", preset, "Baseline size: small | medium | large");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (print_config) {
        std::cout << mtm::default_config_text();
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    CLI::App* sub = app.get_subcommands().front();

    try {
        mtm::RunSettings s;
        if (!config_path.empty()) {
            s.config = mtm::Config::load(config_path);
        }
        if (sub->count("--seed") > 0) {
            s.seed = seed;
        }
        s.out_dir = out_dir;
        s.task = task;
        s.mode = mode;
        s.preset = preset;
        if (!quiet) {
            s.log = [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };
        }
        mtm::run_command(command, s);
    } catch (const mtm::Error& e) {
        std::fprintf(stderr, "mtm %s: %s\n", command.c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mtm %s: unexpected failure: %s\n", command.c_str(), e.what());
        return 1;
    }
    return 0;
}
