#include "softbot/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <numeric>
#include <thread>

#include <json.hpp>

namespace softbot {

using nlohmann::json;

namespace {

enum StreamPurpose : std::uint64_t { kInitStream = 1, kChildStream = 2, kSelectStream = 3 };

std::uint64_t resolution_tag(Resolution r) {
    return (static_cast<std::uint64_t>(r.nx) << 40) ^ (static_cast<std::uint64_t>(r.ny) << 20) ^
           static_cast<std::uint64_t>(r.nz);
}

std::uint64_t treatment_tag(const EvoConfig& c) {
    return mix64(static_cast<std::uint64_t>(c.treatment.kind) ^
                 mix64(std::bit_cast<std::uint64_t>(c.treatment.change_threshold)) ^
                 mix64(resolution_tag(c.resolution)));
}

std::uint64_t phenotype_key(const VoxelGrid& grid, const ControllerMap& controller) {
    std::uint64_t h = morphology_id(grid).digest;
    h = mix64(h ^ std::bit_cast<std::uint64_t>(controller.global_frequency));
    for (std::size_t i = 0; i < controller.phase.size(); ++i) {
        if (controller.phase[i]) {
            h = mix64(h ^ (std::bit_cast<std::uint64_t>(*controller.phase[i]) + i));
        }
    }
    return h;
}

}  // namespace

Rng init_stream(const EvoConfig& config) {
    return Rng::stream(config.seed, {kInitStream, resolution_tag(config.resolution)});
}

Rng child_stream(const EvoConfig& config, int generation, std::size_t slot) {
    return Rng::stream(config.seed,
                       {kChildStream, treatment_tag(config), static_cast<std::uint64_t>(generation), slot});
}

Rng selection_stream(const EvoConfig& config, int generation) {
    return Rng::stream(config.seed, {kSelectStream, treatment_tag(config), static_cast<std::uint64_t>(generation)});
}

Individual express(CppnGenome morph, CppnGenome ctrl, const EvoConfig& config) {
    Individual ind;
    ind.grid = express_morphology(morph, config.resolution);
    ind.controller = express_controller(ctrl, ind.grid, config.frequency);
    ind.morphology = morphology_id(ind.grid);
    ind.morph_genome = std::move(morph);
    ind.ctrl_genome = std::move(ctrl);
    return ind;
}

double phenotype_fitness(const VoxelGrid& grid, const ControllerMap& controller, const SimConfig& sim) {
    if (grid.empty_body()) {
        return 0.0;
    }
    const FitnessResult r = simulate(grid, controller, sim);
    return r.diverged ? 0.0 : r.distance_voxels;
}

void FitnessEvaluator::evaluate(Individual& one) {
    Individual* p = &one;
    evaluate(std::span<Individual*>(&p, 1));
}

void FitnessEvaluator::evaluate(std::span<Individual*> batch) {
    struct Job {
        const Individual* source;
        std::uint64_t key;
        double fitness = 0.0;
    };
    std::vector<Job> jobs;
    std::vector<std::pair<Individual*, std::size_t>> pending;  // individual, job index

    auto lookup = [this](std::uint64_t key, const Individual& ind) -> const Entry* {
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            return nullptr;
        }
        for (const auto& e : it->second) {
            if (e.grid == ind.grid && e.controller == ind.controller) {
                return &e;
            }
        }
        return nullptr;
    };

    for (Individual* ind : batch) {
        if (ind->fitness) {
            continue;
        }
        const std::uint64_t key = phenotype_key(ind->grid, ind->controller);
        if (const Entry* e = lookup(key, *ind)) {
            ind->fitness = e->fitness;
            ++hits_;
            continue;
        }
        auto same = std::find_if(jobs.begin(), jobs.end(), [&](const Job& j) {
            return j.key == key && j.source->grid == ind->grid && j.source->controller == ind->controller;
        });
        if (same != jobs.end()) {
            pending.emplace_back(ind, static_cast<std::size_t>(same - jobs.begin()));
            ++hits_;
            continue;
        }
        pending.emplace_back(ind, jobs.size());
        jobs.push_back({ind, key});
    }

    const SimConfig sim = config_.sim;
    const auto worker_count = std::min<std::size_t>(static_cast<std::size_t>(config_.threads), jobs.size());
    if (worker_count <= 1) {
        for (auto& j : jobs) {
            j.fitness = phenotype_fitness(j.source->grid, j.source->controller, sim);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        {
            std::vector<std::jthread> workers;
            for (std::size_t w = 0; w < worker_count; ++w) {
                workers.emplace_back([&] {
                    for (std::size_t k = next++; k < jobs.size(); k = next++) {
                        try {
                            jobs[k].fitness = phenotype_fitness(jobs[k].source->grid, jobs[k].source->controller, sim);
                        } catch (...) {
                            std::lock_guard lock(error_mutex);
                            if (!error) {
                                error = std::current_exception();
                            }
                        }
                    }
                });
            }
        }
        if (error) {
            std::rethrow_exception(error);
        }
    }
    simulations_ += jobs.size();

    for (const auto& j : jobs) {
        cache_[j.key].push_back({j.source->grid, j.source->controller, j.fitness});
    }
    for (auto& [ind, k] : pending) {
        ind->fitness = jobs[k].fitness;
    }
}

std::vector<Individual> init_population(const EvoConfig& config, Rng& rng, FitnessEvaluator& evaluator,
                                        std::uint64_t first_id) {
    constexpr int kMaxAttempts = 100;
    std::vector<Individual> pop;
    pop.reserve(static_cast<std::size_t>(config.mu));
    for (int i = 0; i < config.mu; ++i) {
        CppnGenome morph = random_minimal(GenomeKind::Morphology, rng);
        for (int attempt = 1; attempt < kMaxAttempts; ++attempt) {
            if (!express_morphology(morph, config.resolution).empty_body()) {
                break;
            }
            morph = random_minimal(GenomeKind::Morphology, rng);
        }
        CppnGenome ctrl = random_minimal(GenomeKind::Controller, rng);
        Individual ind = express(std::move(morph), std::move(ctrl), config);
        ind.id = first_id + static_cast<std::uint64_t>(i);
        ind.birth_gen = 0;
        ind.mutation = MutationKind::Init;
        pop.push_back(std::move(ind));
    }
    std::vector<Individual*> batch;
    for (auto& ind : pop) {
        batch.push_back(&ind);
    }
    evaluator.evaluate(batch);
    return pop;
}

bool is_gross_change(const VoxelGrid& before, const VoxelGrid& after, double threshold) {
    return morphological_distance(before, after) > threshold;
}

Individual make_child(const Individual& parent, const EvoConfig& config, Rng& rng, std::uint64_t id,
                      int generation) {
    const bool morph = rng.bernoulli(config.morph_mutation_prob);
    Individual child;
    if (morph) {
        child = express(mutate(parent.morph_genome, rng, config.mutation), parent.ctrl_genome, config);
    } else {
        child.morph_genome = parent.morph_genome;
        child.ctrl_genome = mutate(parent.ctrl_genome, rng, config.mutation);
        child.grid = parent.grid;
        child.morphology = parent.morphology;
        child.controller = express_controller(child.ctrl_genome, child.grid, config.frequency);
    }
    child.id = id;
    child.parent_id = parent.id;
    child.birth_gen = generation;
    child.mutation = morph ? MutationKind::Morphology : MutationKind::Controller;
    child.morph_age = parent.morph_age;
    child.ctrl_age = parent.ctrl_age;
    if (morph && is_gross_change(parent.grid, child.grid, config.treatment.change_threshold)) {
        child.morph_age = 0;
    }
    if (!morph) {
        child.ctrl_age = 0;
    }
    return child;
}

Individual spawn_child(const Individual& parent, const EvoConfig& config, Rng& rng, FitnessEvaluator& evaluator,
                       std::uint64_t id, int generation) {
    Individual child = make_child(parent, config, rng, id, generation);
    evaluator.evaluate(child);
    return child;
}

bool dominates(const Objectives& a, const Objectives& b, TreatmentKind kind) {
    if (kind == TreatmentKind::NoProtection) {
        return a.fitness > b.fitness;
    }
    return a.fitness >= b.fitness && a.age <= b.age && (a.fitness > b.fitness || a.age < b.age);
}

Objectives objectives(const Individual& ind, const Treatment& treatment) {
    const int age = treatment.kind == TreatmentKind::CtrlProtection ? ind.ctrl_age : ind.morph_age;
    return {ind.fit(), age};
}

bool dominates(const Individual& a, const Individual& b, const Treatment& treatment) {
    return dominates(objectives(a, treatment), objectives(b, treatment), treatment.kind);
}

std::vector<std::size_t> select_survivor_indices(std::span<const Objectives> pool, std::size_t mu, TreatmentKind kind,
                                                 Rng& rng) {
    const std::size_t n = pool.size();
    if (n != 2 * mu) {
        throw std::invalid_argument("select_survivors: pool size " + std::to_string(n) + " is not 2*mu");
    }
    std::vector<double> key(n);
    for (auto& k : key) {
        k = rng.uniform();
    }

    // Fast non-dominated sort: domination counts plus dominated-by lists.
    std::vector<std::size_t> count(n, 0);
    std::vector<std::vector<std::size_t>> dominated(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && dominates(pool[i], pool[j], kind)) {
                dominated[i].push_back(j);
                ++count[j];
            }
        }
    }
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < n; ++i) {
        if (count[i] == 0) {
            front.push_back(i);
        }
    }

    const bool use_age = kind != TreatmentKind::NoProtection;
    std::vector<std::size_t> chosen;
    while (chosen.size() < mu && !front.empty()) {
        if (chosen.size() + front.size() <= mu) {
            chosen.insert(chosen.end(), front.begin(), front.end());
        } else {
            std::sort(front.begin(), front.end(), [&](std::size_t a, std::size_t b) {
                if (pool[a].fitness != pool[b].fitness) {
                    return pool[a].fitness > pool[b].fitness;
                }
                if (use_age && pool[a].age != pool[b].age) {
                    return pool[a].age < pool[b].age;
                }
                return key[a] < key[b];
            });
            front.resize(mu - chosen.size());
            chosen.insert(chosen.end(), front.begin(), front.end());
            break;
        }
        std::vector<std::size_t> next;
        for (auto i : front) {
            for (auto j : dominated[i]) {
                if (--count[j] == 0) {
                    next.push_back(j);
                }
            }
        }
        std::sort(next.begin(), next.end());
        front = std::move(next);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::vector<Individual> select_survivors(std::span<const Individual> pool, std::size_t mu, const Treatment& treatment,
                                         Rng& rng) {
    std::vector<Objectives> obj;
    obj.reserve(pool.size());
    for (const auto& ind : pool) {
        obj.push_back(objectives(ind, treatment));
    }
    std::vector<Individual> out;
    for (auto i : select_survivor_indices(obj, mu, treatment.kind, rng)) {
        Individual s = pool[i];
        ++s.morph_age;
        ++s.ctrl_age;
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

PoolEntry entry_of(const Individual& ind, bool survived) {
    PoolEntry e;
    e.id = ind.id;
    e.parent_id = ind.parent_id;
    e.birth_gen = ind.birth_gen;
    e.morphology = ind.morphology;
    e.fitness = ind.fit();
    e.morph_age = ind.morph_age;
    e.ctrl_age = ind.ctrl_age;
    e.survived = survived;
    e.mutation = ind.mutation;
    return e;
}

void remember_best(RunLog& log, std::span<const Individual> pool) {
    const PoolEntry& best = best_of(log.generations.back());
    if (log.best_genomes.contains(best.id)) {
        return;
    }
    for (const auto& ind : pool) {
        if (ind.id == best.id) {
            log.best_genomes[best.id] = {to_text(ind.morph_genome), to_text(ind.ctrl_genome)};
            return;
        }
    }
}

std::string comparable_config(const EvoConfig& c) {
    EvoConfig copy = c;
    copy.threads = 1;
    return config_to_json(copy);
}

json individual_json(const Individual& ind) {
    return json{{"id", ind.id},
                {"parent_id", ind.parent_id ? json(*ind.parent_id) : json(nullptr)},
                {"birth_gen", ind.birth_gen},
                {"morph_age", ind.morph_age},
                {"ctrl_age", ind.ctrl_age},
                {"fitness", ind.fit()},
                {"mutation", to_string(ind.mutation)},
                {"morphology", to_text(ind.morph_genome)},
                {"controller", to_text(ind.ctrl_genome)}};
}

Individual individual_from(const json& j, const EvoConfig& config) {
    Individual ind = express(from_text(j.at("morphology").get<std::string>()),
                             from_text(j.at("controller").get<std::string>()), config);
    ind.id = j.at("id").get<std::uint64_t>();
    if (!j.at("parent_id").is_null()) {
        ind.parent_id = j.at("parent_id").get<std::uint64_t>();
    }
    ind.birth_gen = j.at("birth_gen").get<int>();
    ind.morph_age = j.at("morph_age").get<int>();
    ind.ctrl_age = j.at("ctrl_age").get<int>();
    ind.fitness = j.at("fitness").get<double>();
    ind.mutation = parse_mutation_kind(j.at("mutation").get<std::string>()).value();
    return ind;
}

struct RunState {
    std::vector<Individual> population;
    std::uint64_t next_id = 0;
    int next_generation = 0;
};

void write_checkpoint(const std::filesystem::path& path, const RunLog& log, const RunState& state) {
    json pop = json::array();
    for (const auto& ind : state.population) {
        pop.push_back(individual_json(ind));
    }
    json best = json::array();
    for (const auto& [id, g] : log.best_genomes) {
        best.push_back({{"id", id}, {"morphology", g.morphology}, {"controller", g.controller}});
    }
    json j{{"format", "softbot-checkpoint"},
           {"version", 1},
           {"config", json::parse(comparable_config(log.config))},
           {"next_generation", state.next_generation},
           {"next_id", state.next_id},
           {"population", pop},
           {"best_individuals", best},
           {"generations_csv", generations_csv(log)}};
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    write_file_atomic(path, j.dump());
}

RunState read_checkpoint(const std::filesystem::path& path, RunLog& log) {
    const json j = json::parse(read_file(path));
    if (j.at("format") != "softbot-checkpoint" || j.at("version") != 1) {
        throw std::runtime_error(path.string() + ": not a version 1 checkpoint");
    }
    if (j.at("config").dump() != json::parse(comparable_config(log.config)).dump()) {
        throw std::runtime_error(path.string() + ": checkpoint belongs to a different configuration");
    }
    RunState state;
    state.next_generation = j.at("next_generation").get<int>();
    state.next_id = j.at("next_id").get<std::uint64_t>();
    for (const auto& p : j.at("population")) {
        state.population.push_back(individual_from(p, log.config));
    }
    for (const auto& b : j.at("best_individuals")) {
        log.best_genomes[b.at("id").get<std::uint64_t>()] = {b.at("morphology").get<std::string>(),
                                                            b.at("controller").get<std::string>()};
    }
    log.generations = parse_generations_csv(j.at("generations_csv").get<std::string>());
    return state;
}

}  // namespace

RunLog evolve(const EvoConfig& config, const EvolveHooks& hooks, const CheckpointOptions& checkpoint) {
    config.check();
    const auto started = std::chrono::steady_clock::now();
    const auto mu = static_cast<std::size_t>(config.mu);
    RunLog log;
    log.config = config;
    FitnessEvaluator evaluator(config);
    RunState state;

    const bool checkpointing = !checkpoint.path.empty();
    if (checkpointing && std::filesystem::exists(checkpoint.path)) {
        state = read_checkpoint(checkpoint.path, log);
    } else {
        Rng rng = init_stream(config);
        state.population = init_population(config, rng, evaluator, 0);
        state.next_id = mu;
        GenerationRecord rec{0, {}};
        for (const auto& ind : state.population) {
            rec.pool.push_back(entry_of(ind, true));
        }
        log.generations.push_back(std::move(rec));
        remember_best(log, state.population);
        if (hooks.on_generation) {
            const std::unique_ptr<bool[]> survived(new bool[mu]);
            std::fill_n(survived.get(), mu, true);
            hooks.on_generation(0, state.population, std::span<const bool>(survived.get(), mu));
        }
        state.next_generation = 1;
    }

    for (int g = state.next_generation; g <= config.generations; ++g) {
        std::vector<Individual> pool = state.population;
        pool.reserve(2 * mu);
        for (std::size_t i = 0; i < mu; ++i) {
            Rng rng = child_stream(config, g, i);
            pool.push_back(make_child(state.population[i], config, rng, state.next_id++, g));
        }
        std::vector<Individual*> batch;
        for (std::size_t i = mu; i < pool.size(); ++i) {
            batch.push_back(&pool[i]);
        }
        evaluator.evaluate(batch);

        std::vector<Objectives> obj;
        for (const auto& ind : pool) {
            obj.push_back(objectives(ind, config.treatment));
        }
        Rng select_rng = selection_stream(config, g);
        const auto chosen = select_survivor_indices(obj, mu, config.treatment.kind, select_rng);
        const std::unique_ptr<bool[]> survived(new bool[pool.size()]());
        for (auto i : chosen) {
            survived[i] = true;
        }

        GenerationRecord rec{g, {}};
        for (std::size_t i = 0; i < pool.size(); ++i) {
            rec.pool.push_back(entry_of(pool[i], survived[i]));
        }
        log.generations.push_back(std::move(rec));
        remember_best(log, pool);
        if (hooks.on_generation) {
            hooks.on_generation(g, pool, std::span<const bool>(survived.get(), pool.size()));
        }

        std::vector<Individual> next;
        next.reserve(mu);
        for (auto i : chosen) {
            Individual s = std::move(pool[i]);
            ++s.morph_age;
            ++s.ctrl_age;
            next.push_back(std::move(s));
        }
        state.population = std::move(next);
        state.next_generation = g + 1;

        const bool halt = checkpoint.halt_after && *checkpoint.halt_after == g;
        if (checkpointing && (halt || (checkpoint.every > 0 && g % checkpoint.every == 0))) {
            write_checkpoint(checkpoint.path, log, state);
        }
        if (halt) {
            break;
        }
    }
    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return log;
}

}  // namespace softbot
