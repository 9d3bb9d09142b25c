#include "softbot/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "softbot/analytics.hpp"
#include "softbot/evolution.hpp"

namespace softbot {

using nlohmann::json;

SpecError::SpecError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + message), line_(line) {}

EvoConfig ExperimentSpec::config_for(const ExperimentCell& cell, std::uint64_t seed) const {
    EvoConfig c;
    c.mu = mu;
    c.lambda = lambda;
    c.generations = generations;
    c.morph_mutation_prob = morph_mutation_prob;
    c.resolution = cell.resolution;
    c.seed = seed;
    c.treatment = cell.treatment;
    c.sim = sim;
    c.frequency = frequency;
    c.threads = eval_threads;
    return c;
}

std::string ExperimentSpec::run_name(const ExperimentCell& cell, std::uint64_t seed) {
    return cell.label + "/seed-" + std::to_string(seed);
}

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return value;
}

std::optional<std::vector<std::uint64_t>> parse_seeds(std::string_view s) {
    std::vector<std::uint64_t> seeds;
    while (!s.empty()) {
        const auto comma = s.find(',');
        const std::string_view item = trim(s.substr(0, comma));
        s = comma == std::string_view::npos ? std::string_view{} : s.substr(comma + 1);
        const auto dash = item.find('-');
        if (dash == std::string_view::npos) {
            auto v = parse_number<std::uint64_t>(item);
            if (!v) {
                return std::nullopt;
            }
            seeds.push_back(*v);
        } else {
            auto lo = parse_number<std::uint64_t>(trim(item.substr(0, dash)));
            auto hi = parse_number<std::uint64_t>(trim(item.substr(dash + 1)));
            if (!lo || !hi || *lo > *hi || *hi - *lo > 100000) {
                return std::nullopt;
            }
            for (auto v = *lo; v <= *hi; ++v) {
                seeds.push_back(v);
            }
        }
    }
    return seeds;
}

std::optional<Resolution> parse_resolution(std::string_view s) {
    if (auto n = parse_number<int>(s)) {
        return Resolution::cube(*n);
    }
    int dims[3];
    for (int i = 0; i < 3; ++i) {
        const auto x = s.find('x');
        if ((i < 2) == (x == std::string_view::npos)) {
            return std::nullopt;
        }
        auto v = parse_number<int>(s.substr(0, x));
        if (!v) {
            return std::nullopt;
        }
        dims[i] = *v;
        s = x == std::string_view::npos ? std::string_view{} : s.substr(x + 1);
    }
    return Resolution{dims[0], dims[1], dims[2]};
}

std::map<std::string, std::function<void(SimConfig&, double)>, std::less<>> sim_setters() {
    return {
        {"voxel_edge", [](SimConfig& c, double v) { c.voxel_edge = v; }},
        {"voxel_mass", [](SimConfig& c, double v) { c.voxel_mass = v; }},
        {"stiffness_axial", [](SimConfig& c, double v) { c.stiffness_axial = v; }},
        {"stiffness_shear", [](SimConfig& c, double v) { c.stiffness_shear = v; }},
        {"damping_ratio", [](SimConfig& c, double v) { c.damping_ratio = v; }},
        {"gravity", [](SimConfig& c, double v) { c.gravity = v; }},
        {"friction_static", [](SimConfig& c, double v) { c.friction_static = v; }},
        {"friction_kinetic", [](SimConfig& c, double v) { c.friction_kinetic = v; }},
        {"ground_penalty_stiffness", [](SimConfig& c, double v) { c.ground_penalty_stiffness = v; }},
        {"ground_damping_ratio", [](SimConfig& c, double v) { c.ground_damping_ratio = v; }},
        {"stick_velocity", [](SimConfig& c, double v) { c.stick_velocity = v; }},
        {"timestep", [](SimConfig& c, double v) { c.timestep = v; }},
        {"amplitude", [](SimConfig& c, double v) { c.amplitude = v; }},
        {"settle_time", [](SimConfig& c, double v) { c.settle_time = v; }},
    };
}

}  // namespace

ExperimentSpec parse_experiment_spec(std::string_view text, const std::string& source) {
    ExperimentSpec spec;
    spec.parallelism = std::max(1u, std::thread::hardware_concurrency());
    const auto setters = sim_setters();
    bool have_seeds = false;
    ExperimentCell* cell = nullptr;
    std::vector<int> cell_lines;
    std::vector<bool> cell_has_treatment;
    int line_no = 0;

    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        auto fail = [&](const std::string& msg) { throw SpecError(source, line_no, msg); };
        if (line.front() == '[') {
            if (line != "[cell]") {
                fail("unknown section '" + std::string(line) + "'");
            }
            spec.cells.push_back({});
            cell = &spec.cells.back();
            cell_lines.push_back(line_no);
            cell_has_treatment.push_back(false);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            fail("expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (value.empty()) {
            fail("missing value for '" + key + "'");
        }
        auto number = [&](auto probe) {
            auto v = parse_number<decltype(probe)>(value);
            if (!v) {
                fail("invalid number '" + std::string(value) + "' for '" + key + "'");
            }
            return *v;
        };
        auto positive = [&](int v) {
            if (v < 1) {
                fail("'" + key + "' must be at least 1");
            }
            return v;
        };

        if (cell) {
            if (key == "treatment") {
                auto kind = parse_treatment(value);
                if (!kind) {
                    fail("unknown treatment '" + std::string(value) + "' (expected none, morph or ctrl)");
                }
                cell->treatment.kind = *kind;
                cell_has_treatment.back() = true;
            } else if (key == "resolution") {
                auto r = parse_resolution(value);
                if (!r || r->nx < 1 || r->ny < 1 || r->nz < 1) {
                    fail("invalid resolution '" + std::string(value) + "'");
                }
                cell->resolution = *r;
            } else if (key == "change_threshold") {
                const double t = number(0.0);
                if (!(t >= 0.0 && t <= 1.0)) {
                    fail("change_threshold must lie in [0, 1]");
                }
                cell->treatment.change_threshold = t;
            } else if (key == "label") {
                if (value.find_first_of("/\\") != std::string_view::npos || value == "." || value == "..") {
                    fail("label must be a plain directory name");
                }
                cell->label = std::string(value);
            } else {
                fail("unknown cell key '" + key + "'");
            }
            continue;
        }

        if (key == "name") {
            spec.name = std::string(value);
        } else if (key == "seeds") {
            auto s = parse_seeds(value);
            if (!s || s->empty()) {
                fail("invalid seed list '" + std::string(value) + "'");
            }
            spec.seeds = *s;
            have_seeds = true;
        } else if (key == "generations") {
            spec.generations = number(0);
            if (spec.generations < 0) {
                fail("generations must be non-negative");
            }
        } else if (key == "mu") {
            spec.mu = positive(number(0));
        } else if (key == "lambda") {
            spec.lambda = positive(number(0));
        } else if (key == "morph_mutation_prob") {
            spec.morph_mutation_prob = number(0.0);
        } else if (key == "parallelism") {
            spec.parallelism = positive(number(0));
        } else if (key == "eval_threads") {
            spec.eval_threads = positive(number(0));
        } else if (key == "checkpoint_every") {
            spec.checkpoint_every = positive(number(0));
        } else if (key == "output") {
            spec.output = std::string(value);
        } else if (key == "frequency.min_hz") {
            spec.frequency.min_hz = number(0.0);
        } else if (key == "frequency.max_hz") {
            spec.frequency.max_hz = number(0.0);
        } else if (key.starts_with("sim.")) {
            const std::string field = key.substr(4);
            if (field == "cycles") {
                spec.sim.cycles = number(0);
            } else if (field == "ground") {
                if (value != "true" && value != "false") {
                    fail("sim.ground must be true or false");
                }
                spec.sim.ground = value == "true";
            } else if (auto it = setters.find(field); it != setters.end()) {
                it->second(spec.sim, number(0.0));
            } else {
                fail("unknown simulation parameter '" + field + "'");
            }
        } else {
            fail("unknown key '" + key + "'");
        }
    }

    if (!have_seeds) {
        throw SpecError(source, line_no, "no seeds given");
    }
    if (spec.cells.empty()) {
        throw SpecError(source, line_no, "no [cell] sections");
    }
    for (std::size_t i = 0; i < spec.cells.size(); ++i) {
        auto& c = spec.cells[i];
        if (!cell_has_treatment[i]) {
            throw SpecError(source, cell_lines[i], "cell has no treatment");
        }
        if (c.label.empty()) {
            const Resolution r = c.resolution;
            c.label = c.treatment.label() + "_" + std::to_string(r.nx) + "x" + std::to_string(r.ny) + "x" +
                      std::to_string(r.nz);
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (spec.cells[j].label == c.label) {
                throw SpecError(source, cell_lines[i], "duplicate cell label '" + c.label + "'");
            }
        }
    }
    return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
    return parse_experiment_spec(read_file(path), path.string());
}

namespace {

class Manifest {
public:
    Manifest(std::filesystem::path path, const std::string& experiment) : path_(std::move(path)) {
        if (std::filesystem::exists(path_)) {
            data_ = json::parse(read_file(path_));
        } else {
            data_ = {{"format", "softbot-manifest"}, {"version", 1}, {"runs", json::object()}};
        }
        data_["experiment"] = experiment;
    }

    bool complete(const std::string& run) const {
        const auto& runs = data_.at("runs");
        return runs.contains(run) && runs.at(run).at("status") == "complete";
    }

    void record(const std::string& run, json entry) {
        std::lock_guard lock(mutex_);
        data_["runs"][run] = std::move(entry);
        flush_locked();
    }

    void flush() {
        std::lock_guard lock(mutex_);
        flush_locked();
    }

private:
    void flush_locked() { write_file_atomic(path_, data_.dump(2) + "\n"); }

    std::filesystem::path path_;
    json data_;
    std::mutex mutex_;
};

}  // namespace

ExperimentOutcome run_experiment(const ExperimentSpec& spec_in, const RunOptions& options) {
    ExperimentSpec spec = spec_in;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
        spec.output = env;
    }
    for (const auto& cell : spec.cells) {
        spec.config_for(cell, spec.seeds.front()).check();
    }
    std::filesystem::create_directories(spec.output);
    Manifest manifest(spec.output / "manifest.json", spec.name);
    manifest.flush();

    struct Pending {
        const ExperimentCell* cell;
        std::uint64_t seed;
        std::string name;
    };
    ExperimentOutcome outcome;
    std::vector<Pending> pending;
    for (const auto& cell : spec.cells) {
        for (auto seed : spec.seeds) {
            std::string name = ExperimentSpec::run_name(cell, seed);
            if (manifest.complete(name) && std::filesystem::exists(spec.output / name / "run.json")) {
                ++outcome.skipped;
            } else {
                pending.push_back({&cell, seed, std::move(name)});
            }
        }
    }

    std::mutex outcome_mutex;
    auto execute = [&](const Pending& p) {
        const auto dir = spec.output / p.name;
        const EvoConfig config = spec.config_for(*p.cell, p.seed);
        CheckpointOptions ckpt{dir / "checkpoint.json", spec.checkpoint_every, options.halt_after};
        try {
            std::filesystem::create_directories(dir);
            RunLog log = evolve(config, {}, ckpt);
            if (options.halt_after && *options.halt_after < config.generations) {
                std::lock_guard lock(outcome_mutex);
                ++outcome.halted;
                return;
            }
            save_run(log, dir);
            const RunSummary summary = summarize(log);
            write_file_atomic(dir / "summary.json", summary_json(summary));
            std::filesystem::remove(ckpt.path);
            manifest.record(p.name, {{"status", "complete"},
                                     {"cell", p.cell->label},
                                     {"seed", p.seed},
                                     {"final_best", summary.final_best}});
            std::lock_guard lock(outcome_mutex);
            ++outcome.completed;
            if (options.progress) {
                *options.progress << "completed " << p.name << " final best " << summary.final_best << "\n";
            }
        } catch (const std::exception& e) {
            manifest.record(p.name,
                            {{"status", "failed"}, {"cell", p.cell->label}, {"seed", p.seed}, {"error", e.what()}});
            std::lock_guard lock(outcome_mutex);
            ++outcome.failed;
            if (options.progress) {
                *options.progress << "failed " << p.name << ": " << e.what() << "\n";
            }
        }
    };

    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, spec.parallelism)), pending.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < pending.size(); k = next++) {
            execute(pending[k]);
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }
    return outcome;
}

std::vector<int> snapshot_generations(int generations) {
    std::vector<int> out;
    for (int pct : {0, 1, 5, 10, 25, 50, 100}) {
        const int g = static_cast<int>(std::lround(generations * pct / 100.0));
        if (out.empty() || out.back() != g) {
            out.push_back(g);
        }
    }
    return out;
}

bool ReplayResult::matches() const {
    return std::bit_cast<std::uint64_t>(logged) == std::bit_cast<std::uint64_t>(replayed);
}

ReplayResult replay_best(const RunLog& log, int generation, const std::filesystem::path& out_dir) {
    auto rec = std::find_if(log.generations.begin(), log.generations.end(),
                            [&](const GenerationRecord& r) { return r.generation == generation; });
    if (rec == log.generations.end()) {
        throw std::out_of_range("replay: generation " + std::to_string(generation) + " is not in the log");
    }
    const PoolEntry& best = best_of(*rec);
    auto genomes = log.best_genomes.find(best.id);
    if (genomes == log.best_genomes.end()) {
        throw std::runtime_error("replay: no stored genomes for individual " + std::to_string(best.id));
    }
    const Individual ind =
        express(from_text(genomes->second.morphology), from_text(genomes->second.controller), log.config);

    ReplayResult result{generation, best.id, best.fitness, 0.0};
    std::ostringstream trajectory;
    if (ind.grid.empty_body()) {
        result.replayed = 0.0;
    } else {
        const FitnessResult r = simulate(ind.grid, ind.controller, log.config.sim, {&trajectory, 25, false});
        result.replayed = r.diverged ? 0.0 : r.distance_voxels;
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const std::string suffix = "gen" + std::to_string(generation);
        write_file_atomic(out_dir / ("best-" + suffix + ".voxels.txt"), to_text(ind.grid));
        write_file_atomic(out_dir / ("trajectory-" + suffix + ".csv"), trajectory.str());
    }
    return result;
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

std::string analyze_table(const std::vector<RunLog>& logs) {
    std::ostringstream out;
    out << "treatment        seed   gens   final_best  overtakes  unique_best  age0_slope   age0_p\n";
    std::map<std::string, std::vector<double>> finals;
    std::map<std::string, std::vector<double>> overtakes;
    std::map<std::string, std::vector<double>> uniques;
    for (const auto& log : logs) {
        const RunSummary s = summarize(log);
        char row[256];
        std::snprintf(row, sizeof row, "%-16s %4llu %6d %12.4f %10zu %12zu", s.treatment.c_str(),
                      static_cast<unsigned long long>(s.seed), s.generations, s.final_best, s.overtakes,
                      s.unique_best_morphologies);
        out << row;
        if (s.age_zero) {
            out << fmt(" %11.3g", s.age_zero->slope) << fmt(" %8.3g", s.age_zero->p_slope);
        } else {
            out << "           -        -";
        }
        out << "\n";
        finals[s.treatment].push_back(s.final_best);
        overtakes[s.treatment].push_back(static_cast<double>(s.overtakes));
        uniques[s.treatment].push_back(static_cast<double>(s.unique_best_morphologies));
    }
    out << "\ntreatment        runs  median_final  median_overtakes  median_unique\n";
    for (const auto& [t, f] : finals) {
        char row[256];
        std::snprintf(row, sizeof row, "%-16s %4zu %13.4f %17.1f %14.1f\n", t.c_str(), f.size(), median(f),
                      median(overtakes[t]), median(uniques[t]));
        out << row;
    }
    if (finals.size() > 1) {
        out << "\nrank-sum on final best fitness\n";
        for (auto a = finals.begin(); a != finals.end(); ++a) {
            for (auto b = std::next(a); b != finals.end(); ++b) {
                const RankSumResult r = wilcoxon_rank_sum(a->second, b->second);
                out << a->first << " vs " << b->first << ": W = " << fmt("%g", r.statistic)
                    << ", p = " << fmt("%.4g", r.p_two_sided) << (r.exact ? " (exact)" : " (normal)") << "\n";
            }
        }
    }
    return out.str();
}

int cmd_run(const std::filesystem::path& spec_path, std::ostream& out, std::ostream& err) {
    ExperimentSpec spec;
    try {
        spec = load_experiment_spec(spec_path);
    } catch (const SpecError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: cannot read spec " << spec_path << ": " << e.what() << "\n";
        return 2;
    }
    try {
        const ExperimentOutcome o = run_experiment(spec, {std::nullopt, &out});
        out << "runs completed " << o.completed << ", skipped " << o.skipped << ", failed " << o.failed << "\n";
        return o.failed ? 1 : 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_replay(const std::filesystem::path& run_dir, int generation, const std::filesystem::path& out_dir,
               std::ostream& out, std::ostream& err) {
    try {
        const RunLog log = load_run(run_dir);
        const ReplayResult r = replay_best(log, generation, out_dir);
        out << "generation " << r.generation << " best id " << r.id << ": logged " << fmt("%.17g", r.logged)
            << ", replayed " << fmt("%.17g", r.replayed) << "\n";
        if (!r.matches()) {
            err << "error: replayed fitness differs from the log; the simulation is not deterministic here\n";
            return 3;
        }
        out << "fitness matches bit-exactly; wrote " << out_dir.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_analyze(const std::vector<std::filesystem::path>& run_dirs, std::ostream& out, std::ostream& err) {
    std::vector<RunLog> logs;
    try {
        for (const auto& dir : run_dirs) {
            logs.push_back(load_run(dir));
        }
        out << analyze_table(logs);
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace softbot
