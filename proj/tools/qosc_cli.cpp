#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qosc/experiment.hpp"

#ifndef QOSC_CODE_VERSION
#define QOSC_CODE_VERSION "untracked"
#endif

int main(int argc, char** argv) {
    CLI::App app{"Stochastic oscillator experiment runner"};
    app.require_subcommand(1);

    std::string run_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    bool no_plots = false;

    auto* run = app.add_subcommand("run", "Execute a config; write CSV, plots, manifest");
    run->add_option("config", run_path, "INI config file")->required();
    auto* seed_opt = run->add_option("--seed", seed, "Override the noise seed");
    auto* threads_opt =
        run->add_option("--threads", threads, "Worker count")->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "Output directory (default: the config's output dir)");
    run->add_flag("--no-plots", no_plots, "Skip SVG plots");

    std::string validate_path;
    auto* validate =
        app.add_subcommand("validate", "Check a config and print the resolved run");
    validate->add_option("config", validate_path, "INI config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) {
            std::cout << qosc::describe_config(qosc::load_config(validate_path));
            return 0;
        }
        qosc::RunOptions options = qosc::options_from_environment();
        options.code_version = QOSC_CODE_VERSION;
        options.no_plots = no_plots;
        options.out_dir = out_dir;
        if (seed_opt->count() > 0) {
            options.seed = seed;
            options.has_seed = true;
        }
        if (threads_opt->count() > 0) options.threads = threads;
        for (const auto& path : qosc::run_experiment(qosc::load_config(run_path), options))
            std::cout << path << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
