#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "softbot/evo_config.hpp"
#include "softbot/runlog.hpp"

namespace softbot {

/// Environment variable that replaces the spec's output directory.
inline constexpr const char* kOutputDirEnv = "SOFTBOT_OUTPUT_DIR";

struct ExperimentCell {
    std::string label;  // directory name of the cell
    Treatment treatment;
    Resolution resolution;
};

/// A batch of runs: every cell is run with every seed.
///
/// Text format, one `key = value` per line, `#` starts a comment:
///
///     name = protection
///     seeds = 1-10            # or 1,2,5
///     generations = 300
///     parallelism = 4         # concurrent runs
///     eval_threads = 1        # concurrent simulations inside a run
///     output = runs/protection
///     checkpoint_every = 25
///     sim.timestep = 0.0008   # any SimConfig field
///     frequency.min_hz = 5
///
///     [cell]
///     treatment = morph       # none | morph | ctrl
///     resolution = 5          # or 5x5x5
///     change_threshold = 0.0
///     label = morph-5         # optional
struct ExperimentSpec {
    std::string name = "experiment";
    std::vector<ExperimentCell> cells;
    std::vector<std::uint64_t> seeds;
    int generations = 300;
    int mu = 25;
    int lambda = 25;
    double morph_mutation_prob = 0.5;
    SimConfig sim;
    FrequencyRange frequency;
    std::filesystem::path output = "runs";
    int parallelism = 1;
    int eval_threads = 1;
    int checkpoint_every = 25;

    EvoConfig config_for(const ExperimentCell& cell, std::uint64_t seed) const;
    /// Run directory relative to `output`: "<cell label>/seed-<seed>".
    static std::string run_name(const ExperimentCell& cell, std::uint64_t seed);
};

/// Invalid spec text. what() reads "<source>:<line>: <message>".
class SpecError : public std::runtime_error {
public:
    SpecError(const std::string& source, int line, const std::string& message);
    int line() const { return line_; }

private:
    int line_;
};

ExperimentSpec parse_experiment_spec(std::string_view text, const std::string& source = "<spec>");
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct RunOptions {
    /// Stop every run after this generation, leaving its checkpoint. Test hook.
    std::optional<int> halt_after;
    std::ostream* progress = nullptr;
};

struct ExperimentOutcome {
    std::size_t completed = 0;  // finished in this invocation
    std::size_t skipped = 0;    // already complete in the manifest
    std::size_t failed = 0;
    std::size_t halted = 0;
};

/// Runs every (cell, seed) pair not yet complete, resuming from checkpoints.
/// Writes <output>/manifest.json and one run directory per pair.
ExperimentOutcome run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});

/// Generations at 0, 1, 5, 10, 25, 50 and 100 percent of the run.
std::vector<int> snapshot_generations(int generations);

struct ReplayResult {
    int generation = 0;
    std::uint64_t id = 0;
    double logged = 0.0;
    double replayed = 0.0;

    bool matches() const;  // bit-exact
};

/// Re-simulates the best individual of `generation`. When `out_dir` is not
/// empty, writes best-gen<N>.voxels.txt and trajectory-gen<N>.csv there.
ReplayResult replay_best(const RunLog& log, int generation, const std::filesystem::path& out_dir = {});

/// Per-run summary rows followed by per-treatment medians and pairwise
/// rank-sum p-values on final best fitness.
std::string analyze_table(const std::vector<RunLog>& logs);

// Subcommand entry points; return the process exit status.
int cmd_run(const std::filesystem::path& spec_path, std::ostream& out, std::ostream& err);
int cmd_replay(const std::filesystem::path& run_dir, int generation, const std::filesystem::path& out_dir,
               std::ostream& out, std::ostream& err);
int cmd_analyze(const std::vector<std::filesystem::path>& run_dirs, std::ostream& out, std::ostream& err);

}  // namespace softbot
