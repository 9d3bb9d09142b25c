#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "softbot/evo_config.hpp"

namespace softbot {

enum class MutationKind { Init, Morphology, Controller };

std::string_view to_string(MutationKind kind);
std::optional<MutationKind> parse_mutation_kind(std::string_view name);

/// One pool member as seen at selection time of a generation.
struct PoolEntry {
    std::uint64_t id = 0;
    std::optional<std::uint64_t> parent_id;
    int birth_gen = 0;
    MorphologyId morphology;
    double fitness = 0.0;
    int morph_age = 0;
    int ctrl_age = 0;
    bool survived = false;
    MutationKind mutation = MutationKind::Init;

    friend bool operator==(const PoolEntry&, const PoolEntry&) = default;
};

struct GenerationRecord {
    int generation = 0;
    std::vector<PoolEntry> pool;  // parents first, then children in slot order

    friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

struct GenomePair {
    std::string morphology;  // to_text(CppnGenome)
    std::string controller;

    friend bool operator==(const GenomePair&, const GenomePair&) = default;
};

struct RunLog {
    EvoConfig config;
    std::vector<GenerationRecord> generations;
    /// Genomes of every individual that was the best of some generation.
    std::map<std::uint64_t, GenomePair> best_genomes;
    double wall_seconds = 0.0;

    std::uint64_t seed() const { return config.seed; }
};

/// Best pool member of a record: highest fitness, earliest in pool order.
const PoolEntry& best_of(const GenerationRecord& record);

/// Checks the structural invariants of a log (contiguous generations, pool
/// sizes, survivor counts). Returns the violations found.
std::vector<std::string> check_log(const RunLog& log);

// Serialization. A run directory holds run.json (config echo, seed, best
// genomes, wall-clock metadata) and generations.csv (one row per pool member
// per generation).

std::string generations_csv(const RunLog& log);
std::vector<GenerationRecord> parse_generations_csv(std::string_view text);

std::string config_to_json(const EvoConfig& config);
EvoConfig config_from_json(std::string_view text);

std::string run_json(const RunLog& log);

/// Writes `contents` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

void save_run(const RunLog& log, const std::filesystem::path& dir);
RunLog load_run(const std::filesystem::path& dir);

}  // namespace softbot
