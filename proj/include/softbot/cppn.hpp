#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "softbot/rng.hpp"

namespace softbot {

enum class ActivationKind { Sigmoid, Sine, Abs, NegAbs, Square, NegSquare, Sqrt, NegSqrt };

inline constexpr std::array<ActivationKind, 8> kAllActivations = {
    ActivationKind::Sigmoid, ActivationKind::Sine,   ActivationKind::Abs,
    ActivationKind::NegAbs,  ActivationKind::Square, ActivationKind::NegSquare,
    ActivationKind::Sqrt,    ActivationKind::NegSqrt};

/// Applies an activation. Sqrt is extended to negative inputs as sign(u)*sqrt(|u|).
double activate(ActivationKind kind, double u);

std::string_view to_string(ActivationKind kind);
std::optional<ActivationKind> parse_activation(std::string_view name);

enum class NodeKind { Input, Hidden, Output };
enum class InputLabel { X, Y, Z, R, Bias };
enum class OutputLabel { Presence, Material, Phase, Frequency };
enum class GenomeKind { Morphology, Controller };

inline constexpr std::array<InputLabel, 5> kAllInputs = {InputLabel::X, InputLabel::Y, InputLabel::Z,
                                                         InputLabel::R, InputLabel::Bias};

std::string_view to_string(NodeKind kind);
std::string_view to_string(InputLabel label);
std::string_view to_string(OutputLabel label);
std::string_view to_string(GenomeKind kind);

/// The ordered output labels a genome of `kind` must expose.
std::array<OutputLabel, 2> required_outputs(GenomeKind kind);

struct CppnNode {
    int id = 0;
    NodeKind kind = NodeKind::Hidden;
    std::optional<ActivationKind> activation;  // Hidden and Output only
    std::optional<InputLabel> input;           // Input only
    std::optional<OutputLabel> output;         // Output only

    static CppnNode make_input(int id, InputLabel label);
    static CppnNode make_hidden(int id, ActivationKind act);
    static CppnNode make_output(int id, OutputLabel label, ActivationKind act);

    friend bool operator==(const CppnNode&, const CppnNode&) = default;
};

struct CppnEdge {
    int source = 0;
    int target = 0;
    double weight = 0.0;

    friend bool operator==(const CppnEdge&, const CppnEdge&) = default;
};

/// Acyclic network mapping voxel coordinates to two outputs.
///
/// Plain value type: nothing here enforces the structural invariants, that is
/// what validate() is for. Every producer in this library (random_minimal,
/// mutate, from_text) returns validated genomes.
struct CppnGenome {
    GenomeKind kind = GenomeKind::Morphology;
    std::vector<CppnNode> nodes;
    std::vector<CppnEdge> edges;
    int next_id = 0;  // ids are never reused, even after node removal

    const CppnNode* find(int id) const;
    std::size_t hidden_count() const;

    friend bool operator==(const CppnGenome&, const CppnGenome&) = default;
};

/// Thrown when evaluating or deserializing a structurally invalid genome.
class GenomeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Coords {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double r = 0.0;
};

inline constexpr double kDefaultWeightLimit = 3.0;

/// Returns every violated invariant; an empty list means the genome is valid.
std::vector<std::string> validate(const CppnGenome& genome, double weight_limit = kDefaultWeightLimit);

/// Topologically ordered evaluation plan for a validated genome.
class CompiledCppn {
public:
    explicit CompiledCppn(const CppnGenome& genome);

    /// Squashed outputs in required_outputs() order, each in (-1, 1).
    std::array<double, 2> operator()(const Coords& c) const;
    /// Output-node activations before the final tanh.
    std::array<double, 2> raw(const Coords& c) const;

private:
    struct Step {
        ActivationKind activation;
        std::uint32_t first_in;
        std::uint32_t in_count;
    };
    struct Incoming {
        std::uint32_t source_slot;
        double weight;
    };

    std::size_t input_count_ = 0;
    std::array<InputLabel, 5> input_labels_{};
    std::vector<Step> steps_;  // slots input_count_.. in topological order
    std::vector<Incoming> incoming_;
    std::array<std::uint32_t, 2> output_slots_{};
};

std::vector<double> evaluate(const CppnGenome& genome, const Coords& coords);
std::vector<double> evaluate_raw(const CppnGenome& genome, const Coords& coords);

/// Genome with the five inputs and the two required outputs, each output wired
/// to a random non-empty subset of inputs.
CppnGenome random_minimal(GenomeKind kind, Rng& rng);

enum class MutationOp { PerturbWeight, ChangeActivation, AddEdge, RemoveEdge, AddNode, RemoveNode };

std::string_view to_string(MutationOp op);

struct MutationRates {
    double perturb_weight = 0.40;
    double change_activation = 0.15;
    double add_edge = 0.15;
    double remove_edge = 0.10;
    double add_node = 0.10;
    double remove_node = 0.10;
    double weight_sigma = 0.5;
    double weight_limit = kDefaultWeightLimit;

    MutationOp draw(Rng& rng) const;
};

/// Applies exactly `op`, or returns nullopt when it cannot apply to `genome`.
std::optional<CppnGenome> apply_mutation(const CppnGenome& genome, MutationOp op, Rng& rng,
                                         const MutationRates& rates = {});

struct MutationOutcome {
    CppnGenome genome;
    MutationOp applied;
};

using OpSampler = std::function<MutationOp(Rng&)>;

/// One mutation operator applied to a copy of `genome`. Inapplicable draws are
/// resampled; after 10 failed resamples a weight perturbation is used.
/// `sampler` overrides the operator draw (tests use it to force operators).
MutationOutcome mutate_traced(const CppnGenome& genome, Rng& rng, const MutationRates& rates = {},
                              const OpSampler& sampler = {});

inline CppnGenome mutate(const CppnGenome& genome, Rng& rng, const MutationRates& rates = {}) {
    return mutate_traced(genome, rng, rates).genome;
}

/// Line-oriented text form; doubles are written with round-trip precision.
std::string to_text(const CppnGenome& genome);
CppnGenome from_text(std::string_view text);

}  // namespace softbot
