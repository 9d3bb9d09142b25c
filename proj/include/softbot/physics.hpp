#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "softbot/phenotype.hpp"

namespace softbot {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

class SimConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class EmptyBody : public std::invalid_argument {
public:
    EmptyBody() : std::invalid_argument("grid has no filled voxels") {}
};

/// Mass-spring voxel engine parameters (SI units).
///
/// Defaults describe a soft rubber-like 1 cm voxel: a lone voxel compresses by
/// about 5% under ten times its own weight.
struct SimConfig {
    double voxel_edge = 0.01;
    double voxel_mass = 0.001;
    double stiffness_axial = 30.0;
    double stiffness_shear = 15.0;  // face and body diagonals
    double damping_ratio = 0.1;
    double gravity = 9.81;
    double friction_static = 1.0;
    double friction_kinetic = 0.8;
    double ground_penalty_stiffness = 100.0;
    double ground_damping_ratio = 0.5;
    double stick_velocity = 1e-4;  // m/s, below this a contact node may stick
    double timestep = 8e-4;
    int cycles = 20;
    double amplitude = 0.14;
    double settle_time = 0.1;
    bool ground = true;

    /// Throws SimConfigError on out-of-range parameters (not the stability gate,
    /// which depends on the model and is checked by build_model / Simulator).
    void check() const;
};

enum class SpringKind : std::uint8_t { Axial, Shear, BodyDiagonal };

struct Spring {
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double rest = 0.0;
    double stiffness = 0.0;
    double damping = 0.0;
    SpringKind kind = SpringKind::Axial;
    std::array<std::uint32_t, 4> owners{};  // indices into SimModel::voxels
    std::uint8_t owner_count = 0;
    // Mean over owners of cos(phase) and sin(phase) (zero for Passive owners);
    // the mean actuation scale is then 1 + A*(sin(wt)*act_cos + cos(wt)*act_sin).
    double act_cos = 0.0;
    double act_sin = 0.0;
};

struct ModelVoxel {
    std::size_t cell = 0;  // index into the source grid
    Material material = Material::Passive;
    double phase = 0.0;
    std::array<std::uint32_t, 8> corners{};
};

/// Corner-lattice mass-spring model of a voxel body.
struct SimModel {
    std::vector<Vec3> position;
    std::vector<double> mass;
    std::vector<Spring> springs;
    std::vector<ModelVoxel> voxels;
    double frequency = 0.0;  // global actuation clock, Hz

    std::size_t node_count() const { return position.size(); }
    double total_mass() const;
    std::size_t count(SpringKind kind) const;
};

/// Builds the model with lowest nodes resting at height 0. Throws EmptyBody on
/// an all-Empty grid and SimConfigError when the timestep fails the stability
/// gate.
SimModel build_model(const VoxelGrid& grid, const SimConfig& config);

/// Writes phases and the clock frequency into the model.
void apply_controller(SimModel& model, const ControllerMap& controller);

/// Upper bound on the model's highest angular eigenfrequency (row-sum bound).
double omega_max(const SimModel& model, const SimConfig& config);

/// Throws SimConfigError if `config.timestep` is not stable for `model`.
void check_stability(const SimModel& model, const SimConfig& config);

/// Linear length scale 1 + amplitude * sin(2*pi*frequency*t + phase).
double actuation_scale(double t, double phase, double frequency, double amplitude);

/// Mean of owner scale factors, the rest-length multiplier of a shared spring.
double shared_spring_scale(std::span<const double> owner_scales);

struct SimState {
    std::vector<Vec3> position;
    std::vector<Vec3> velocity;
    double time = 0.0;
};

struct Energy {
    double kinetic = 0.0;
    double elastic = 0.0;    // springs plus ground penalty
    double potential = 0.0;  // gravitational, relative to height 0

    double total() const { return kinetic + elastic + potential; }
};

/// Rest length of spring `s` at simulation time `t`. Actuation is off before
/// `config.settle_time`.
double rest_length(const Spring& s, const SimModel& model, const SimConfig& config, double t);

Energy energy_audit(const SimModel& model, const SimState& state, const SimConfig& config);

Vec3 center_of_mass(const SimModel& model, const SimState& state);

/// Semi-implicit Euler integrator over a model.
class Simulator {
public:
    Simulator(SimModel model, SimConfig config);

    void step();
    /// Advances until `t`; returns false as soon as the state diverges.
    bool run_until(double t);

    const SimState& state() const { return state_; }
    const SimModel& model() const { return model_; }
    const SimConfig& config() const { return config_; }
    bool diverged() const { return diverged_; }
    Vec3 center_of_mass() const { return softbot::center_of_mass(model_, state_); }
    Energy energy() const { return energy_audit(model_, state_, config_); }
    std::uint64_t steps() const { return steps_; }

private:
    void check_divergence();

    // Compact copy of the per-step spring data.
    struct HotSpring {
        std::uint32_t a;
        std::uint32_t b;
        double rest;
        double stiffness;
        double damping;
        double act_cos;
        double act_sin;
    };

    SimModel model_;
    SimConfig config_;
    SimState state_;
    std::vector<Vec3> force_;
    std::vector<HotSpring> hot_;
    std::vector<double> ground_damping_;
    std::uint64_t steps_ = 0;
    double divergence_limit_ = 0.0;
    bool diverged_ = false;
};

struct FitnessResult {
    double distance_voxels = 0.0;
    double sim_time = 0.0;
    bool diverged = false;

    friend bool operator==(const FitnessResult&, const FitnessResult&) = default;
};

struct TrajectoryOptions {
    std::ostream* out = nullptr;
    std::uint64_t every = 100;  // steps between frames
    bool nodes = true;          // node rows in addition to the COM row (node_id -1)
};

/// Total simulated duration: settle time plus `cycles` periods of the clock.
double sim_duration(const SimConfig& config, double frequency);

FitnessResult simulate_model(SimModel model, const SimConfig& config, const TrajectoryOptions& traj = {});

FitnessResult simulate(const VoxelGrid& grid, const ControllerMap& controller, const SimConfig& config,
                       const TrajectoryOptions& traj = {});

}  // namespace softbot
