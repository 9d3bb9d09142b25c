#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "softbot/experiment.hpp"
#include "softbot/plot.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Evolve and inspect voxel soft robots under innovation-protection treatments"};
    app.require_subcommand(1);

    std::string spec_path;
    auto* run = app.add_subcommand("run", "Run every (cell, seed) pair of an experiment spec");
    run->add_option("spec", spec_path, "Experiment spec file")->required();

    std::string run_dir;
    int generation = 0;
    std::string replay_out;
    auto* replay = app.add_subcommand("replay", "Re-simulate the best individual of a generation");
    replay->add_option("rundir", run_dir, "Run directory holding run.json")->required();
    replay->add_option("--gen", generation, "Generation to replay")->required();
    replay->add_option("--out", replay_out, "Output directory")->required();

    std::vector<std::string> plot_dirs;
    std::string plot_out;
    auto* plot = app.add_subcommand("plot", "Write fitness and morphology plots (SVG and CSV)");
    plot->add_option("rundirs", plot_dirs, "Run directories")->required();
    plot->add_option("--out", plot_out, "Output directory")->required();

    std::vector<std::string> analyze_dirs;
    auto* analyze = app.add_subcommand("analyze", "Print summary statistics for runs");
    analyze->add_option("rundirs", analyze_dirs, "Run directories")->required();

    CLI11_PARSE(app, argc, argv);

    auto paths = [](const std::vector<std::string>& v) {
        return std::vector<std::filesystem::path>(v.begin(), v.end());
    };
    if (*run) {
        return softbot::cmd_run(spec_path, std::cout, std::cerr);
    }
    if (*replay) {
        return softbot::cmd_replay(run_dir, generation, replay_out, std::cout, std::cerr);
    }
    if (*plot) {
        return softbot::cmd_plot(paths(plot_dirs), plot_out, std::cout, std::cerr);
    }
    return softbot::cmd_analyze(paths(analyze_dirs), std::cout, std::cerr);
}
