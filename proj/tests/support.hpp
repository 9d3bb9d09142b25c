#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "softbot/cppn.hpp"
#include "softbot/phenotype.hpp"
#include "softbot/rng.hpp"
#include "softbot/runlog.hpp"

namespace softbot::test {

/// Genome with the five inputs and two outputs of `kind` and no edges.
inline CppnGenome bare_genome(GenomeKind kind, ActivationKind out_act = ActivationKind::Sigmoid) {
    CppnGenome g;
    g.kind = kind;
    int id = 0;
    for (auto label : kAllInputs) {
        g.nodes.push_back(CppnNode::make_input(id++, label));
    }
    for (auto label : required_outputs(kind)) {
        g.nodes.push_back(CppnNode::make_output(id++, label, out_act));
    }
    g.next_id = id;
    return g;
}

inline int input_id(InputLabel label) { return static_cast<int>(label); }
inline constexpr int kOut0 = 5;
inline constexpr int kOut1 = 6;

/// Genome grown by `steps` structural mutations, usually with hidden nodes.
inline CppnGenome grown_genome(GenomeKind kind, Rng& rng, int steps) {
    MutationRates rates;
    rates.perturb_weight = 0.1;
    rates.change_activation = 0.1;
    rates.add_edge = 0.35;
    rates.remove_edge = 0.05;
    rates.add_node = 0.35;
    rates.remove_node = 0.05;
    CppnGenome g = random_minimal(kind, rng);
    for (int i = 0; i < steps; ++i) {
        g = mutate(g, rng, rates);
    }
    return g;
}

inline VoxelGrid random_grid(Resolution res, Rng& rng, double fill = 0.5) {
    VoxelGrid g(res);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (rng.uniform() < fill) {
            g.set(i, rng.bernoulli(0.5) ? Material::Muscle : Material::Passive);
        }
    }
    return g;
}

inline MorphologyId mid(std::uint64_t v) { return MorphologyId{v}; }

inline PoolEntry entry(std::uint64_t id, std::optional<std::uint64_t> parent, int birth, std::uint64_t morph,
                       double fitness, bool survived, MutationKind kind, int morph_age = 1) {
    PoolEntry e;
    e.id = id;
    e.parent_id = parent;
    e.birth_gen = birth;
    e.morphology = mid(morph);
    e.fitness = fitness;
    e.morph_age = morph_age;
    e.ctrl_age = 1;
    e.survived = survived;
    e.mutation = kind;
    return e;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("softbot-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace softbot::test
