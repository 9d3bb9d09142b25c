#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "softbot/cppn.hpp"
#include "softbot/phenotype.hpp"
#include "softbot/physics.hpp"

namespace softbot {

enum class TreatmentKind { NoProtection, MorphProtection, CtrlProtection };

std::string_view to_string(TreatmentKind kind);
std::optional<TreatmentKind> parse_treatment(std::string_view name);

/// Selection treatment. `change_threshold` is the fraction of voxels a
/// morphological mutation must change (strictly more than) to reset
/// morphological age; it is applied in every treatment so ages stay
/// comparable, but only MorphProtection selects on it.
struct Treatment {
    TreatmentKind kind = TreatmentKind::NoProtection;
    double change_threshold = 0.0;

    static Treatment none() { return {TreatmentKind::NoProtection, 0.0}; }
    static Treatment morph(double threshold = 0.0) { return {TreatmentKind::MorphProtection, threshold}; }
    static Treatment ctrl() { return {TreatmentKind::CtrlProtection, 0.0}; }

    /// e.g. "morph", "morph@0.2", "none", "ctrl"
    std::string label() const;

    friend bool operator==(const Treatment&, const Treatment&) = default;
};

struct EvoConfig {
    int mu = 25;
    int lambda = 25;
    int generations = 5000;
    double morph_mutation_prob = 0.5;
    Resolution resolution = Resolution::cube(5);
    std::uint64_t seed = 1;
    Treatment treatment;
    SimConfig sim;
    FrequencyRange frequency;
    MutationRates mutation;
    int threads = 1;  // concurrent fitness evaluations within a generation

    /// Throws std::invalid_argument on inconsistent settings.
    void check() const;
};

}  // namespace softbot
