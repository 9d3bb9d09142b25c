#include "softbot/runlog.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace softbot {

using nlohmann::json;

std::string_view to_string(TreatmentKind kind) {
    switch (kind) {
    case TreatmentKind::NoProtection: return "none";
    case TreatmentKind::MorphProtection: return "morph";
    case TreatmentKind::CtrlProtection: return "ctrl";
    }
    return "?";
}

std::optional<TreatmentKind> parse_treatment(std::string_view name) {
    for (auto k : {TreatmentKind::NoProtection, TreatmentKind::MorphProtection, TreatmentKind::CtrlProtection}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

std::string Treatment::label() const {
    std::string out(to_string(kind));
    if (change_threshold != 0.0) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "@%g", change_threshold);
        out += buf;
    }
    return out;
}

void EvoConfig::check() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw std::invalid_argument(std::string("evolution config: ") + what);
        }
    };
    require(mu > 0, "mu must be positive");
    require(lambda == mu, "lambda must equal mu (one child per parent)");
    require(generations >= 0, "generations must be non-negative");
    require(morph_mutation_prob >= 0.0 && morph_mutation_prob <= 1.0, "morph_mutation_prob must lie in [0, 1]");
    require(resolution.nx > 0 && resolution.ny > 0 && resolution.nz > 0, "resolution must be positive");
    require(treatment.change_threshold >= 0.0 && treatment.change_threshold <= 1.0,
            "change_threshold must lie in [0, 1]");
    require(frequency.min_hz > 0.0 && frequency.max_hz >= frequency.min_hz, "frequency range invalid");
    require(threads >= 1, "threads must be at least 1");
    sim.check();
}

std::string_view to_string(MutationKind kind) {
    switch (kind) {
    case MutationKind::Init: return "init";
    case MutationKind::Morphology: return "morph";
    case MutationKind::Controller: return "ctrl";
    }
    return "?";
}

std::optional<MutationKind> parse_mutation_kind(std::string_view name) {
    for (auto k : {MutationKind::Init, MutationKind::Morphology, MutationKind::Controller}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

const PoolEntry& best_of(const GenerationRecord& record) {
    if (record.pool.empty()) {
        throw std::invalid_argument("best_of: empty generation record");
    }
    const PoolEntry* best = &record.pool.front();
    for (const auto& e : record.pool) {
        if (e.fitness > best->fitness) {
            best = &e;
        }
    }
    return *best;
}

std::vector<std::string> check_log(const RunLog& log) {
    std::vector<std::string> problems;
    const auto mu = static_cast<std::size_t>(log.config.mu);
    for (std::size_t g = 0; g < log.generations.size(); ++g) {
        const auto& rec = log.generations[g];
        const std::string where = "generation " + std::to_string(rec.generation);
        if (rec.generation != static_cast<int>(g)) {
            problems.push_back(where + ": index not contiguous");
        }
        const std::size_t expected = g == 0 ? mu : 2 * mu;
        if (rec.pool.size() != expected) {
            problems.push_back(where + ": pool size " + std::to_string(rec.pool.size()));
        }
        const auto survivors = static_cast<std::size_t>(
            std::count_if(rec.pool.begin(), rec.pool.end(), [](const PoolEntry& e) { return e.survived; }));
        if (survivors != mu) {
            problems.push_back(where + ": " + std::to_string(survivors) + " survivors");
        }
    }
    return problems;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

constexpr std::string_view kCsvHeader =
    "generation,id,parent_id,birth_gen,morphology_id,fitness,morph_age,ctrl_age,survived,mutation";

}  // namespace

std::string generations_csv(const RunLog& log) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& rec : log.generations) {
        for (const auto& e : rec.pool) {
            out += std::to_string(rec.generation);
            out += ',';
            out += std::to_string(e.id);
            out += ',';
            out += e.parent_id ? std::to_string(*e.parent_id) : std::string();
            out += ',';
            out += std::to_string(e.birth_gen);
            out += ',';
            out += e.morphology.hex();
            out += ',';
            out += format_double(e.fitness);
            out += ',';
            out += std::to_string(e.morph_age);
            out += ',';
            out += std::to_string(e.ctrl_age);
            out += ',';
            out += e.survived ? '1' : '0';
            out += ',';
            out += to_string(e.mutation);
            out += '\n';
        }
    }
    return out;
}

std::vector<GenerationRecord> parse_generations_csv(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    std::vector<GenerationRecord> records;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error("generations.csv line " + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (lineno == 1) {
            if (line != kCsvHeader) {
                fail("unexpected header");
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            f.push_back(cell);
        }
        if (f.size() == 9 && !line.empty() && line.back() == ',') {
            f.emplace_back();
        }
        if (f.size() != 10) {
            fail("expected 10 fields");
        }
        PoolEntry e;
        try {
            const int gen = std::stoi(f[0]);
            e.id = std::stoull(f[1]);
            if (!f[2].empty()) {
                e.parent_id = std::stoull(f[2]);
            }
            e.birth_gen = std::stoi(f[3]);
            auto id = MorphologyId::parse(f[4]);
            if (!id) {
                fail("bad morphology id");
            }
            e.morphology = *id;
            e.fitness = std::strtod(f[5].c_str(), nullptr);
            e.morph_age = std::stoi(f[6]);
            e.ctrl_age = std::stoi(f[7]);
            e.survived = f[8] == "1";
            auto kind = parse_mutation_kind(f[9]);
            if (!kind) {
                fail("bad mutation kind");
            }
            e.mutation = *kind;
            if (records.empty() || records.back().generation != gen) {
                records.push_back({gen, {}});
            }
            records.back().pool.push_back(e);
        } catch (const std::logic_error&) {
            fail("malformed number");
        }
    }
    return records;
}

namespace {

json config_json(const EvoConfig& c) {
    const SimConfig& s = c.sim;
    const MutationRates& m = c.mutation;
    return json{
        {"mu", c.mu},
        {"lambda", c.lambda},
        {"generations", c.generations},
        {"morph_mutation_prob", c.morph_mutation_prob},
        {"resolution", {c.resolution.nx, c.resolution.ny, c.resolution.nz}},
        {"seed", c.seed},
        {"treatment", {{"kind", to_string(c.treatment.kind)}, {"change_threshold", c.treatment.change_threshold}}},
        {"frequency", {{"min_hz", c.frequency.min_hz}, {"max_hz", c.frequency.max_hz}}},
        {"mutation",
         {{"perturb_weight", m.perturb_weight},
          {"change_activation", m.change_activation},
          {"add_edge", m.add_edge},
          {"remove_edge", m.remove_edge},
          {"add_node", m.add_node},
          {"remove_node", m.remove_node},
          {"weight_sigma", m.weight_sigma},
          {"weight_limit", m.weight_limit}}},
        {"sim",
         {{"voxel_edge", s.voxel_edge},
          {"voxel_mass", s.voxel_mass},
          {"stiffness_axial", s.stiffness_axial},
          {"stiffness_shear", s.stiffness_shear},
          {"damping_ratio", s.damping_ratio},
          {"gravity", s.gravity},
          {"friction_static", s.friction_static},
          {"friction_kinetic", s.friction_kinetic},
          {"ground_penalty_stiffness", s.ground_penalty_stiffness},
          {"ground_damping_ratio", s.ground_damping_ratio},
          {"stick_velocity", s.stick_velocity},
          {"timestep", s.timestep},
          {"cycles", s.cycles},
          {"amplitude", s.amplitude},
          {"settle_time", s.settle_time},
          {"ground", s.ground}}},
        {"threads", c.threads},
    };
}

EvoConfig config_from(const json& j) {
    EvoConfig c;
    c.mu = j.at("mu").get<int>();
    c.lambda = j.at("lambda").get<int>();
    c.generations = j.at("generations").get<int>();
    c.morph_mutation_prob = j.at("morph_mutation_prob").get<double>();
    const auto& r = j.at("resolution");
    c.resolution = {r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>()};
    c.seed = j.at("seed").get<std::uint64_t>();
    auto kind = parse_treatment(j.at("treatment").at("kind").get<std::string>());
    if (!kind) {
        throw std::runtime_error("config: unknown treatment");
    }
    c.treatment = {*kind, j.at("treatment").at("change_threshold").get<double>()};
    c.frequency = {j.at("frequency").at("min_hz").get<double>(), j.at("frequency").at("max_hz").get<double>()};
    const auto& m = j.at("mutation");
    c.mutation.perturb_weight = m.at("perturb_weight").get<double>();
    c.mutation.change_activation = m.at("change_activation").get<double>();
    c.mutation.add_edge = m.at("add_edge").get<double>();
    c.mutation.remove_edge = m.at("remove_edge").get<double>();
    c.mutation.add_node = m.at("add_node").get<double>();
    c.mutation.remove_node = m.at("remove_node").get<double>();
    c.mutation.weight_sigma = m.at("weight_sigma").get<double>();
    c.mutation.weight_limit = m.at("weight_limit").get<double>();
    const auto& s = j.at("sim");
    c.sim.voxel_edge = s.at("voxel_edge").get<double>();
    c.sim.voxel_mass = s.at("voxel_mass").get<double>();
    c.sim.stiffness_axial = s.at("stiffness_axial").get<double>();
    c.sim.stiffness_shear = s.at("stiffness_shear").get<double>();
    c.sim.damping_ratio = s.at("damping_ratio").get<double>();
    c.sim.gravity = s.at("gravity").get<double>();
    c.sim.friction_static = s.at("friction_static").get<double>();
    c.sim.friction_kinetic = s.at("friction_kinetic").get<double>();
    c.sim.ground_penalty_stiffness = s.at("ground_penalty_stiffness").get<double>();
    c.sim.ground_damping_ratio = s.at("ground_damping_ratio").get<double>();
    c.sim.stick_velocity = s.at("stick_velocity").get<double>();
    c.sim.timestep = s.at("timestep").get<double>();
    c.sim.cycles = s.at("cycles").get<int>();
    c.sim.amplitude = s.at("amplitude").get<double>();
    c.sim.settle_time = s.at("settle_time").get<double>();
    c.sim.ground = s.at("ground").get<bool>();
    c.threads = j.value("threads", 1);
    return c;
}

}  // namespace

std::string config_to_json(const EvoConfig& config) {
    return config_json(config).dump(2);
}

EvoConfig config_from_json(std::string_view text) {
    return config_from(json::parse(text));
}

std::string run_json(const RunLog& log) {
    json best = json::array();
    for (const auto& [id, g] : log.best_genomes) {
        best.push_back({{"id", id}, {"morphology", g.morphology}, {"controller", g.controller}});
    }
    json j{
        {"format", "softbot-runlog"},
        {"version", 1},
        {"seed", log.config.seed},
        {"treatment", log.config.treatment.label()},
        {"generations_recorded", log.generations.size()},
        {"config", config_json(log.config)},
        {"best_individuals", best},
        {"metadata", {{"wall_seconds", log.wall_seconds}}},
    };
    return j.dump(2) + "\n";
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("cannot rename onto " + path.string());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void save_run(const RunLog& log, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "generations.csv", generations_csv(log));
    write_file_atomic(dir / "run.json", run_json(log));
}

RunLog load_run(const std::filesystem::path& dir) {
    const json j = json::parse(read_file(dir / "run.json"));
    if (j.at("format") != "softbot-runlog" || j.at("version") != 1) {
        throw std::runtime_error(dir.string() + ": not a version 1 run log");
    }
    RunLog log;
    log.config = config_from(j.at("config"));
    for (const auto& b : j.at("best_individuals")) {
        log.best_genomes[b.at("id").get<std::uint64_t>()] = {b.at("morphology").get<std::string>(),
                                                            b.at("controller").get<std::string>()};
    }
    log.wall_seconds = j.at("metadata").value("wall_seconds", 0.0);
    log.generations = parse_generations_csv(read_file(dir / "generations.csv"));
    if (log.generations.size() != j.at("generations_recorded").get<std::size_t>()) {
        throw std::runtime_error(dir.string() + ": generations.csv does not match run.json");
    }
    return log;
}

}  // namespace softbot
