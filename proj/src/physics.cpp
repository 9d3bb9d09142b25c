#include "softbot/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>

namespace softbot {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Corner c of a voxel sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
constexpr std::array<std::array<int, 2>, 12> kEdges = {{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // along x
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // along y
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // along z
}};
constexpr std::array<std::array<int, 2>, 12> kFaceDiagonals = {{
    {0, 3}, {1, 2}, {4, 7}, {5, 6},  // z faces
    {0, 5}, {1, 4}, {2, 7}, {3, 6},  // y faces
    {0, 6}, {2, 4}, {1, 7}, {3, 5},  // x faces
}};
constexpr std::array<std::array<int, 2>, 4> kBodyDiagonals = {{{0, 7}, {1, 6}, {2, 5}, {3, 4}}};

double sq(double v) { return v * v; }

}  // namespace

void SimConfig::check() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw SimConfigError(std::string("sim config: ") + what);
        }
    };
    require(voxel_edge > 0.0, "voxel_edge must be positive");
    require(voxel_mass > 0.0, "voxel_mass must be positive");
    require(stiffness_axial > 0.0 && stiffness_shear >= 0.0, "stiffness must be positive");
    require(damping_ratio >= 0.0 && ground_damping_ratio >= 0.0, "damping ratios must be non-negative");
    require(gravity >= 0.0, "gravity must be non-negative");
    require(friction_static >= friction_kinetic && friction_kinetic >= 0.0,
            "friction needs static >= kinetic >= 0");
    require(ground_penalty_stiffness > 0.0, "ground_penalty_stiffness must be positive");
    require(timestep > 0.0, "timestep must be positive");
    require(cycles > 0, "cycles must be positive");
    require(amplitude >= 0.0 && amplitude < 0.5, "amplitude must lie in [0, 0.5)");
    require(settle_time >= 0.0, "settle_time must be non-negative");
    require(stick_velocity >= 0.0, "stick_velocity must be non-negative");
}

double SimModel::total_mass() const {
    return std::accumulate(mass.begin(), mass.end(), 0.0);
}

std::size_t SimModel::count(SpringKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(springs.begin(), springs.end(), [kind](const Spring& s) { return s.kind == kind; }));
}

double omega_max(const SimModel& model, const SimConfig& config) {
    std::vector<double> row(model.node_count(), 0.0);
    for (const auto& s : model.springs) {
        row[s.a] += s.stiffness;
        row[s.b] += s.stiffness;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        const double k = row[i] + (config.ground ? config.ground_penalty_stiffness : 0.0);
        worst = std::max(worst, 2.0 * k / model.mass[i]);
    }
    return std::sqrt(worst);
}

void check_stability(const SimModel& model, const SimConfig& config) {
    const double zeta = config.damping_ratio;
    const double limit = 2.0 * (std::sqrt(1.0 + zeta * zeta) - zeta) / omega_max(model, config);
    if (!(config.timestep < limit)) {
        throw SimConfigError("sim config: timestep " + std::to_string(config.timestep) +
                             " s exceeds stability limit " + std::to_string(limit) + " s");
    }
}

SimModel build_model(const VoxelGrid& grid, const SimConfig& config) {
    config.check();
    if (grid.empty_body()) {
        throw EmptyBody();
    }
    const Resolution res = grid.resolution();
    const double h = config.voxel_edge;

    int zmin = res.nz;
    for (int z = 0; z < res.nz && zmin == res.nz; ++z) {
        for (int y = 0; y < res.ny && zmin == res.nz; ++y) {
            for (int x = 0; x < res.nx; ++x) {
                if (grid.at(x, y, z) != Material::Empty) {
                    zmin = z;
                    break;
                }
            }
        }
    }

    SimModel model;
    std::unordered_map<std::size_t, std::uint32_t> node_of_corner;
    auto corner_node = [&](int x, int y, int z) {
        const std::size_t key = (static_cast<std::size_t>(z) * (res.ny + 1) + y) * (res.nx + 1) + x;
        auto [it, inserted] = node_of_corner.try_emplace(key, static_cast<std::uint32_t>(model.position.size()));
        if (inserted) {
            model.position.push_back({x * h, y * h, (z - zmin) * h});
            model.mass.push_back(0.0);
        }
        return it->second;
    };

    for (int z = 0; z < res.nz; ++z) {
        for (int y = 0; y < res.ny; ++y) {
            for (int x = 0; x < res.nx; ++x) {
                const Material m = grid.at(x, y, z);
                if (m == Material::Empty) {
                    continue;
                }
                ModelVoxel v;
                v.cell = grid.index(x, y, z);
                v.material = m;
                for (int c = 0; c < 8; ++c) {
                    v.corners[static_cast<std::size_t>(c)] = corner_node(x + (c & 1), y + ((c >> 1) & 1), z + ((c >> 2) & 1));
                }
                model.voxels.push_back(v);
            }
        }
    }

    const double corner_mass = config.voxel_mass / 8.0;
    std::unordered_map<std::uint64_t, std::uint32_t> spring_of_pair;
    auto add = [&](std::uint32_t voxel, std::uint32_t a, std::uint32_t b, double rest, double k, SpringKind kind) {
        if (a > b) {
            std::swap(a, b);
        }
        const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | b;
        auto [it, inserted] = spring_of_pair.try_emplace(key, static_cast<std::uint32_t>(model.springs.size()));
        if (inserted) {
            Spring s;
            s.a = a;
            s.b = b;
            s.rest = rest;
            s.kind = kind;
            model.springs.push_back(s);
        }
        Spring& s = model.springs[it->second];
        s.stiffness += k;
        s.owners[s.owner_count++] = voxel;
    };
    for (std::uint32_t vi = 0; vi < model.voxels.size(); ++vi) {
        const auto& c = model.voxels[vi].corners;
        for (auto corner : c) {
            model.mass[corner] += corner_mass;
        }
        for (const auto& e : kEdges) {
            add(vi, c[e[0]], c[e[1]], h, config.stiffness_axial, SpringKind::Axial);
        }
        for (const auto& e : kFaceDiagonals) {
            add(vi, c[e[0]], c[e[1]], h * std::numbers::sqrt2, config.stiffness_shear, SpringKind::Shear);
        }
        for (const auto& e : kBodyDiagonals) {
            add(vi, c[e[0]], c[e[1]], h * std::numbers::sqrt3, config.stiffness_shear, SpringKind::BodyDiagonal);
        }
    }
    for (auto& s : model.springs) {
        const double reduced = model.mass[s.a] * model.mass[s.b] / (model.mass[s.a] + model.mass[s.b]);
        s.damping = 2.0 * config.damping_ratio * std::sqrt(s.stiffness * reduced);
    }
    check_stability(model, config);
    return model;
}

void apply_controller(SimModel& model, const ControllerMap& controller) {
    model.frequency = controller.global_frequency;
    for (auto& v : model.voxels) {
        v.phase = 0.0;
        if (v.material == Material::Muscle && v.cell < controller.phase.size() && controller.phase[v.cell]) {
            v.phase = *controller.phase[v.cell];
        }
    }
    for (auto& s : model.springs) {
        double c = 0.0;
        double sn = 0.0;
        for (std::uint8_t k = 0; k < s.owner_count; ++k) {
            const auto& v = model.voxels[s.owners[k]];
            if (v.material == Material::Muscle) {
                c += std::cos(v.phase);
                sn += std::sin(v.phase);
            }
        }
        s.act_cos = c / s.owner_count;
        s.act_sin = sn / s.owner_count;
    }
}

double actuation_scale(double t, double phase, double frequency, double amplitude) {
    return 1.0 + amplitude * std::sin(kTwoPi * frequency * t + phase);
}

double shared_spring_scale(std::span<const double> owner_scales) {
    if (owner_scales.empty()) {
        return 1.0;
    }
    return std::accumulate(owner_scales.begin(), owner_scales.end(), 0.0) / static_cast<double>(owner_scales.size());
}

double rest_length(const Spring& s, const SimModel& model, const SimConfig& config, double t) {
    if (t < config.settle_time) {
        return s.rest;
    }
    const double w = kTwoPi * model.frequency * (t - config.settle_time);
    return s.rest * (1.0 + config.amplitude * (std::sin(w) * s.act_cos + std::cos(w) * s.act_sin));
}

Energy energy_audit(const SimModel& model, const SimState& state, const SimConfig& config) {
    Energy e;
    for (std::size_t i = 0; i < model.node_count(); ++i) {
        const Vec3& v = state.velocity[i];
        const Vec3& p = state.position[i];
        e.kinetic += 0.5 * model.mass[i] * (v.x * v.x + v.y * v.y + v.z * v.z);
        e.potential += model.mass[i] * config.gravity * p.z;
        if (config.ground && p.z < 0.0) {
            e.elastic += 0.5 * config.ground_penalty_stiffness * p.z * p.z;
        }
    }
    for (const auto& s : model.springs) {
        const Vec3& a = state.position[s.a];
        const Vec3& b = state.position[s.b];
        const double len = std::sqrt(sq(b.x - a.x) + sq(b.y - a.y) + sq(b.z - a.z));
        e.elastic += 0.5 * s.stiffness * sq(len - rest_length(s, model, config, state.time));
    }
    return e;
}

Vec3 center_of_mass(const SimModel& model, const SimState& state) {
    Vec3 c;
    double total = 0.0;
    for (std::size_t i = 0; i < model.node_count(); ++i) {
        const double m = model.mass[i];
        c.x += m * state.position[i].x;
        c.y += m * state.position[i].y;
        c.z += m * state.position[i].z;
        total += m;
    }
    c.x /= total;
    c.y /= total;
    c.z /= total;
    return c;
}

Simulator::Simulator(SimModel model, SimConfig config) : model_(std::move(model)), config_(config) {
    config_.check();
    check_stability(model_, config_);
    state_.position = model_.position;
    state_.velocity.assign(model_.node_count(), Vec3{});
    force_.assign(model_.node_count(), Vec3{});
    ground_damping_.resize(model_.node_count());
    for (std::size_t i = 0; i < model_.node_count(); ++i) {
        ground_damping_[i] =
            2.0 * config_.ground_damping_ratio * std::sqrt(config_.ground_penalty_stiffness * model_.mass[i]);
    }
    hot_.reserve(model_.springs.size());
    for (const Spring& s : model_.springs) {
        hot_.push_back({s.a, s.b, s.rest, s.stiffness, s.damping, s.act_cos, s.act_sin});
    }
    divergence_limit_ = 1e6 * config_.voxel_edge;
}

void Simulator::step() {
    const double dt = config_.timestep;
    const double t = state_.time;
    auto& pos = state_.position;
    auto& vel = state_.velocity;
    const std::size_t n = model_.node_count();

    for (std::size_t i = 0; i < n; ++i) {
        force_[i] = {0.0, 0.0, -model_.mass[i] * config_.gravity};
    }

    double ws = 0.0;
    double wc = 0.0;
    const bool actuated = t >= config_.settle_time && config_.amplitude > 0.0;
    if (actuated) {
        const double w = kTwoPi * model_.frequency * (t - config_.settle_time);
        ws = config_.amplitude * std::sin(w);
        wc = config_.amplitude * std::cos(w);
    }

    for (const HotSpring& s : hot_) {
        const Vec3& pa = pos[s.a];
        const Vec3& pb = pos[s.b];
        const double dx = pb.x - pa.x;
        const double dy = pb.y - pa.y;
        const double dz = pb.z - pa.z;
        const double len = std::sqrt(dx * dx + dy * dy + dz * dz);
        if (!(len > 0.0)) {
            continue;
        }
        const double inv = 1.0 / len;
        const double ux = dx * inv;
        const double uy = dy * inv;
        const double uz = dz * inv;
        const double rest = actuated ? s.rest * (1.0 + ws * s.act_cos + wc * s.act_sin) : s.rest;
        const Vec3& va = vel[s.a];
        const Vec3& vb = vel[s.b];
        const double closing = (vb.x - va.x) * ux + (vb.y - va.y) * uy + (vb.z - va.z) * uz;
        const double f = s.stiffness * (len - rest) + s.damping * closing;
        force_[s.a].x += f * ux;
        force_[s.a].y += f * uy;
        force_[s.a].z += f * uz;
        force_[s.b].x -= f * ux;
        force_[s.b].y -= f * uy;
        force_[s.b].z -= f * uz;
    }

    for (std::size_t i = 0; i < n; ++i) {
        const double m = model_.mass[i];
        Vec3& v = vel[i];
        Vec3& p = pos[i];
        Vec3 f = force_[i];
        double normal = 0.0;
        if (config_.ground && p.z < 0.0) {
            normal = std::max(0.0, -config_.ground_penalty_stiffness * p.z - ground_damping_[i] * v.z);
            f.z += normal;
        }
        const double vt_before = std::sqrt(v.x * v.x + v.y * v.y);
        v.x += f.x / m * dt;
        v.y += f.y / m * dt;
        v.z += f.z / m * dt;
        if (normal > 0.0) {
            // Coulomb friction as a velocity-level impulse that never reverses
            // the tangential motion.
            const double speed = std::sqrt(v.x * v.x + v.y * v.y);
            const double static_cap = config_.friction_static * normal * dt / m;
            if (vt_before < config_.stick_velocity && speed <= static_cap) {
                v.x = 0.0;
                v.y = 0.0;
            } else if (speed > 0.0) {
                const double reduced = std::max(0.0, speed - config_.friction_kinetic * normal * dt / m);
                const double scale = reduced / speed;
                v.x *= scale;
                v.y *= scale;
            }
        }
        p.x += v.x * dt;
        p.y += v.y * dt;
        p.z += v.z * dt;
    }

    ++steps_;
    state_.time = static_cast<double>(steps_) * dt;
    check_divergence();
}

void Simulator::check_divergence() {
    for (const Vec3& p : state_.position) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
            std::fabs(p.x) > divergence_limit_ || std::fabs(p.y) > divergence_limit_ ||
            std::fabs(p.z) > divergence_limit_) {
            diverged_ = true;
            return;
        }
    }
}

bool Simulator::run_until(double t) {
    const auto target = static_cast<std::uint64_t>(std::llround(t / config_.timestep));
    while (steps_ < target && !diverged_) {
        step();
    }
    return !diverged_;
}

double sim_duration(const SimConfig& config, double frequency) {
    return config.settle_time + static_cast<double>(config.cycles) / frequency;
}

namespace {

void write_frame(std::ostream& out, std::uint64_t frame, const Simulator& sim, bool nodes) {
    const Vec3 com = sim.center_of_mass();
    char buf[160];
    std::snprintf(buf, sizeof buf, "%llu,%.9g,-1,%.9g,%.9g,%.9g\n", static_cast<unsigned long long>(frame),
                  sim.state().time, com.x, com.y, com.z);
    out << buf;
    if (!nodes) {
        return;
    }
    for (std::size_t i = 0; i < sim.state().position.size(); ++i) {
        const Vec3& p = sim.state().position[i];
        std::snprintf(buf, sizeof buf, "%llu,%.9g,%zu,%.9g,%.9g,%.9g\n", static_cast<unsigned long long>(frame),
                      sim.state().time, i, p.x, p.y, p.z);
        out << buf;
    }
}

}  // namespace

FitnessResult simulate_model(SimModel model, const SimConfig& config, const TrajectoryOptions& traj) {
    if (!(model.frequency > 0.0)) {
        throw SimConfigError("sim: controller frequency must be positive");
    }
    const double duration = sim_duration(config, model.frequency);
    Simulator sim(std::move(model), config);
    const auto settle_steps = static_cast<std::uint64_t>(std::llround(config.settle_time / config.timestep));
    const auto total_steps = static_cast<std::uint64_t>(std::llround(duration / config.timestep));

    std::uint64_t frame = 0;
    auto maybe_frame = [&] {
        if (traj.out != nullptr && traj.every > 0 && sim.steps() % traj.every == 0) {
            write_frame(*traj.out, frame++, sim, traj.nodes);
        }
    };
    if (traj.out != nullptr) {
        *traj.out << "frame,time,node_id,x,y,z\n";
    }
    maybe_frame();

    Vec3 start = sim.center_of_mass();
    while (sim.steps() < total_steps && !sim.diverged()) {
        sim.step();
        if (sim.steps() == settle_steps) {
            start = sim.center_of_mass();
        }
        maybe_frame();
    }
    FitnessResult result;
    result.sim_time = sim.state().time;
    if (sim.diverged()) {
        result.diverged = true;
        return result;
    }
    const Vec3 end = sim.center_of_mass();
    result.distance_voxels = std::hypot(end.x - start.x, end.y - start.y) / config.voxel_edge;
    return result;
}

FitnessResult simulate(const VoxelGrid& grid, const ControllerMap& controller, const SimConfig& config,
                       const TrajectoryOptions& traj) {
    if (grid.empty_body()) {
        return FitnessResult{};
    }
    SimModel model = build_model(grid, config);
    apply_controller(model, controller);
    return simulate_model(std::move(model), config, traj);
}

}  // namespace softbot
