#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "softbot/evo_config.hpp"
#include "softbot/runlog.hpp"

namespace softbot {

/// A robot: paired genomes, their expressed phenotype and bookkeeping.
struct Individual {
    CppnGenome morph_genome;
    CppnGenome ctrl_genome;
    VoxelGrid grid;
    ControllerMap controller;
    MorphologyId morphology;
    int morph_age = 0;
    int ctrl_age = 0;
    std::optional<double> fitness;  // set once, after evaluation
    std::uint64_t id = 0;
    std::optional<std::uint64_t> parent_id;
    int birth_gen = 0;
    MutationKind mutation = MutationKind::Init;

    double fit() const { return fitness.value_or(0.0); }
};

/// Genomes plus expressed phenotype, ready for evaluation.
Individual express(CppnGenome morph, CppnGenome ctrl, const EvoConfig& config);

/// Memoizing fitness evaluator. simulate() is pure, so robots with identical
/// phenotypes share one simulation.
class FitnessEvaluator {
public:
    explicit FitnessEvaluator(const EvoConfig& config) : config_(config) {}

    /// Fills in `fitness` for every unevaluated individual, running up to
    /// config.threads simulations concurrently. Results do not depend on the
    /// thread count or completion order.
    void evaluate(std::span<Individual*> batch);
    void evaluate(Individual& one);

    std::uint64_t simulations() const { return simulations_; }
    std::uint64_t cache_hits() const { return hits_; }

private:
    struct Entry {
        VoxelGrid grid;
        ControllerMap controller;
        double fitness;
    };

    const EvoConfig& config_;
    std::unordered_map<std::uint64_t, std::vector<Entry>> cache_;
    std::uint64_t simulations_ = 0;
    std::uint64_t hits_ = 0;
};

/// Fitness of a phenotype: simulated distance in voxels, 0 for empty or
/// diverged bodies.
double phenotype_fitness(const VoxelGrid& grid, const ControllerMap& controller, const SimConfig& sim);

/// mu random individuals, all ages 0, evaluated. Empty bodies are re-sampled
/// up to 100 times and then admitted with fitness 0.
std::vector<Individual> init_population(const EvoConfig& config, Rng& rng, FitnessEvaluator& evaluator,
                                        std::uint64_t first_id = 0);

/// True when a morphological mutation from `before` to `after` changed
/// strictly more than `threshold` of the lattice, which resets morph_age.
bool is_gross_change(const VoxelGrid& before, const VoxelGrid& after, double threshold);

/// Mutates exactly one of the parent's genomes and applies the age rules.
/// The child is returned unevaluated.
Individual make_child(const Individual& parent, const EvoConfig& config, Rng& rng, std::uint64_t id, int generation);

Individual spawn_child(const Individual& parent, const EvoConfig& config, Rng& rng, FitnessEvaluator& evaluator,
                       std::uint64_t id, int generation);

/// Pareto domination on (fitness, age) for the protection treatments, plain
/// fitness comparison without protection.
bool dominates(const Individual& a, const Individual& b, const Treatment& treatment);

/// Selection objectives as plain numbers, for analysis and tests.
struct Objectives {
    double fitness = 0.0;
    int age = 0;
};
bool dominates(const Objectives& a, const Objectives& b, TreatmentKind kind);

/// Indices (ascending) of the mu survivors of a 2*mu pool: Pareto layers are
/// admitted whole until the cut layer, which is truncated by fitness
/// (descending), then age (ascending, protection treatments only), then a
/// random key drawn per pool member.
std::vector<std::size_t> select_survivor_indices(std::span<const Objectives> pool, std::size_t mu, TreatmentKind kind,
                                                 Rng& rng);

Objectives objectives(const Individual& ind, const Treatment& treatment);

/// Survivors with ages incremented by one.
std::vector<Individual> select_survivors(std::span<const Individual> pool, std::size_t mu, const Treatment& treatment,
                                         Rng& rng);

struct EvolveHooks {
    /// Called once per generation with the full pool (parents then children)
    /// and the survivor flags, before ages are incremented.
    std::function<void(int generation, std::span<const Individual> pool, std::span<const bool> survived)> on_generation;
};

struct CheckpointOptions {
    std::filesystem::path path;  // empty disables checkpoints
    int every = 50;
    /// Stop (as if interrupted) once this generation is complete. Test hook.
    std::optional<int> halt_after;
};

/// Runs the evolutionary loop. Resumes from `checkpoint.path` when that file
/// exists. Returns the complete run log; when halted early the returned log is
/// partial and the checkpoint holds the state.
RunLog evolve(const EvoConfig& config, const EvolveHooks& hooks = {}, const CheckpointOptions& checkpoint = {});

/// Per-run random streams. Initial populations depend only on the seed and the
/// resolution, so treatments sharing a seed start from the same population.
Rng init_stream(const EvoConfig& config);
Rng child_stream(const EvoConfig& config, int generation, std::size_t slot);
Rng selection_stream(const EvoConfig& config, int generation);

}  // namespace softbot
