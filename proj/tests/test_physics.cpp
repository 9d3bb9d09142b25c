#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "softbot/physics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace softbot;
using test::conservative_config;
using test::uniform_controller;
using test::unit_oscillator;

namespace {

VoxelGrid block(Resolution res, Material m) { return VoxelGrid(res, m); }

// Corner-set oracle: counts of nodes and unique springs per kind.
struct LatticeCounts {
    std::size_t nodes, axial, shear, body;
};

LatticeCounts enumerate_lattice(const VoxelGrid& g) {
    using P = std::array<int, 3>;
    std::set<P> corners;
    std::set<std::pair<P, P>> axial, shear, body;
    const Resolution r = g.resolution();
    for (int z = 0; z < r.nz; ++z) {
        for (int y = 0; y < r.ny; ++y) {
            for (int x = 0; x < r.nx; ++x) {
                if (g.at(x, y, z) == Material::Empty) {
                    continue;
                }
                std::vector<P> c;
                for (int dz = 0; dz < 2; ++dz) {
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            c.push_back({x + dx, y + dy, z + dz});
                        }
                    }
                }
                corners.insert(c.begin(), c.end());
                for (std::size_t i = 0; i < 8; ++i) {
                    for (std::size_t j = i + 1; j < 8; ++j) {
                        int diff = 0;
                        for (int k = 0; k < 3; ++k) {
                            diff += c[i][k] != c[j][k];
                        }
                        auto key = std::minmax(c[i], c[j]);
                        (diff == 1 ? axial : diff == 2 ? shear : body).insert(key);
                    }
                }
            }
        }
    }
    return {corners.size(), axial.size(), shear.size(), body.size()};
}

double min_height(const Simulator& sim) {
    double h = HUGE_VAL;
    for (const auto& p : sim.state().position) {
        h = std::min(h, p.z);
    }
    return h;
}

}  // namespace

TEST(BuildModel, SingleVoxelCounts) {
    const SimModel m = build_model(block({1, 1, 1}, Material::Passive), {});
    EXPECT_EQ(m.node_count(), 8u);
    EXPECT_EQ(m.count(SpringKind::Axial), 12u);
    EXPECT_EQ(m.count(SpringKind::Shear), 12u);
    EXPECT_EQ(m.count(SpringKind::BodyDiagonal), 4u);
    EXPECT_DOUBLE_EQ(m.total_mass(), 0.001);
}

TEST(BuildModel, BarSharesAFace) {
    const SimModel m = build_model(block({1, 1, 2}, Material::Muscle), {});
    EXPECT_EQ(m.node_count(), 12u);
    EXPECT_EQ(m.count(SpringKind::Axial), 20u);
    EXPECT_EQ(m.count(SpringKind::Shear), 22u);
    EXPECT_EQ(m.count(SpringKind::BodyDiagonal), 8u);
}

TEST(BuildModel, RandomGridsMatchCornerEnumeration) {
    Rng rng(41);
    const SimConfig config;
    for (int i = 0; i < 60; ++i) {
        VoxelGrid g = keep_largest_component(test::random_grid(Resolution::cube(5), rng, rng.uniform(0.3, 0.9)));
        if (g.empty_body()) {
            continue;
        }
        const SimModel m = build_model(g, config);
        const LatticeCounts oracle = enumerate_lattice(g);
        EXPECT_EQ(m.node_count(), oracle.nodes);
        EXPECT_EQ(m.count(SpringKind::Axial), oracle.axial);
        EXPECT_EQ(m.count(SpringKind::Shear), oracle.shear);
        EXPECT_EQ(m.count(SpringKind::BodyDiagonal), oracle.body);
        EXPECT_NEAR(m.total_mass(), config.voxel_mass * static_cast<double>(g.filled()), 1e-15);
        for (const auto& s : m.springs) {
            ASSERT_LT(s.a, m.node_count());
            ASSERT_LT(s.b, m.node_count());
            ASSERT_GE(s.owner_count, 1);
        }
    }
}

TEST(BuildModel, LowestNodesRestOnTheGround) {
    VoxelGrid g(Resolution::cube(3));
    g.set(1, 1, 2, Material::Passive);
    g.set(1, 1, 1, Material::Passive);
    const SimModel m = build_model(g, {});
    double lo = HUGE_VAL;
    for (const auto& p : m.position) {
        lo = std::min(lo, p.z);
    }
    EXPECT_EQ(lo, 0.0);
}

TEST(BuildModel, EmptyGridThrows) { EXPECT_THROW(build_model(VoxelGrid(Resolution::cube(3)), {}), EmptyBody); }

TEST(BuildModel, StabilityGateRejectsLargeTimestep) {
    SimConfig c;
    c.timestep = 0.01;
    EXPECT_THROW(build_model(block(Resolution::cube(2), Material::Passive), c), SimConfigError);
    c.timestep = 8e-4;
    EXPECT_NO_THROW(build_model(block(Resolution::cube(5), Material::Muscle), c));
}

TEST(SimConfigCheck, RejectsOutOfRangeValues) {
    SimConfig c;
    c.amplitude = 0.6;
    EXPECT_THROW(c.check(), SimConfigError);
    c = {};
    c.timestep = 0.0;
    EXPECT_THROW(c.check(), SimConfigError);
    c = {};
    c.friction_kinetic = 2.0;
    EXPECT_THROW(c.check(), SimConfigError);
}

TEST(Actuation, PeakScaleMatchesVolumeChange) {
    const double f = 2.0;
    const double s = actuation_scale(1.0 / (4.0 * f), 0.0, f, 0.14);
    EXPECT_NEAR(s, 1.14, 1e-12);
    EXPECT_NEAR(s * s * s, 1.481544, 1e-6);
    EXPECT_EQ(actuation_scale(0.0, 0.0, f, 0.14), 1.0);
    EXPECT_NEAR(actuation_scale(0.0, std::numbers::pi / 2, f, 0.14), 1.14, 1e-12);
}

TEST(Actuation, SharedSpringUsesMeanOfOwners) {
    const double scales[] = {1.14, 1.0};
    EXPECT_DOUBLE_EQ(shared_spring_scale(scales), 1.07);
}

TEST(Actuation, RestLengthFollowsOwnerMean) {
    VoxelGrid g({2, 1, 1});
    g.set(0, 0, 0, Material::Muscle);
    g.set(1, 0, 0, Material::Passive);
    SimConfig c;
    SimModel m = build_model(g, c);
    apply_controller(m, uniform_controller(g, 5.0));
    const double t = c.settle_time + 1.0 / (4.0 * 5.0);
    int shared = 0;
    for (const auto& s : m.springs) {
        const double ratio = rest_length(s, m, c, t) / s.rest;
        if (s.owner_count == 2) {
            ++shared;
            EXPECT_NEAR(ratio, 1.07, 1e-12);
        } else if (m.voxels[s.owners[0]].material == Material::Muscle) {
            EXPECT_NEAR(ratio, 1.14, 1e-12);
        } else {
            EXPECT_DOUBLE_EQ(ratio, 1.0);
        }
        EXPECT_EQ(rest_length(s, m, c, 0.0), s.rest);
    }
    EXPECT_EQ(shared, 4 + 2);  // shared face: 4 edges and 2 face diagonals
}

TEST(Simulate, DurationIsSettlePlusCycles) {
    SimConfig c;
    EXPECT_DOUBLE_EQ(sim_duration(c, 10.0), c.settle_time + 2.0);
    const VoxelGrid g = block({1, 1, 1}, Material::Muscle);
    const FitnessResult r = simulate(g, uniform_controller(g, 10.0), c);
    EXPECT_NEAR(r.sim_time, c.settle_time + 2.0, c.timestep);
}

TEST(Simulate, AllPassiveBodyDoesNotMove) {
    Rng rng(5);
    for (int i = 0; i < 3; ++i) {
        VoxelGrid g = keep_largest_component(test::random_grid(Resolution::cube(4), rng, 0.7));
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (g[k] != Material::Empty) {
                g.set(k, Material::Passive);
            }
        }
        const FitnessResult r = simulate(g, uniform_controller(g, 10.0), {});
        EXPECT_FALSE(r.diverged);
        EXPECT_LT(r.distance_voxels, 0.1);
    }
}

TEST(Simulate, MirrorSymmetricRobotHasNoLateralDrift) {
    Rng rng(6);
    for (int i = 0; i < 4; ++i) {
        const auto [g, c] = test::mirror_symmetric_robot(rng);
        EXPECT_LT(test::lateral_drift_voxels(g, c, {}), 0.1);
    }
}

TEST(Simulate, IsBitIdenticalAcrossCalls) {
    Rng rng(7);
    const VoxelGrid g = keep_largest_component(test::random_grid(Resolution::cube(5), rng, 0.6));
    ControllerMap c = express_controller(random_minimal(GenomeKind::Controller, rng), g);
    const FitnessResult a = simulate(g, c, {});
    const FitnessResult b = simulate(g, c, {});
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.distance_voxels), std::bit_cast<std::uint64_t>(b.distance_voxels));
    EXPECT_EQ(a.sim_time, b.sim_time);
}

TEST(Simulate, TrajectoryDoesNotChangeTheResult) {
    Rng rng(8);
    const VoxelGrid g = keep_largest_component(test::random_grid(Resolution::cube(4), rng, 0.7));
    const ControllerMap c = express_controller(random_minimal(GenomeKind::Controller, rng), g);
    std::ostringstream out;
    const FitnessResult a = simulate(g, c, {}, {&out, 50, false});
    const FitnessResult b = simulate(g, c, {});
    EXPECT_EQ(a.distance_voxels, b.distance_voxels);
    const std::string csv = out.str();
    EXPECT_TRUE(csv.starts_with("frame,time,node_id,x,y,z\n"));
    EXPECT_NE(csv.find(",-1,"), std::string::npos);
}

TEST(Simulate, EmptyBodyScoresZero) {
    const VoxelGrid g(Resolution::cube(5));
    const FitnessResult r = simulate(g, uniform_controller(g, 5.0), {});
    EXPECT_EQ(r.distance_voxels, 0.0);
    EXPECT_EQ(r.sim_time, 0.0);
    EXPECT_FALSE(r.diverged);
}

TEST(Simulate, DivergedRunScoresZero) {
    const VoxelGrid g = block({1, 1, 1}, Material::Muscle);
    SimModel m = build_model(g, {});
    apply_controller(m, uniform_controller(g, 5.0));
    for (auto& p : m.position) {
        p.x += 1e5;  // beyond 1e6 voxel edges
    }
    const FitnessResult r = simulate_model(m, {});
    EXPECT_TRUE(r.diverged);
    EXPECT_EQ(r.distance_voxels, 0.0);
}

TEST(Simulate, ZeroFrequencyIsAConfigError) {
    const VoxelGrid g = block({1, 1, 1}, Material::Muscle);
    EXPECT_THROW(simulate(g, uniform_controller(g, 0.0), {}), SimConfigError);
}

TEST(Simulate, HorizontalTranslationLeavesDistanceUnchanged) {
    const VoxelGrid g = block({3, 2, 2}, Material::Muscle);
    ControllerMap c = uniform_controller(g, 12.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        c.phase[i] = 0.7 * static_cast<double>(i % 3);
    }
    SimModel m = build_model(g, {});
    apply_controller(m, c);
    SimModel moved = m;
    for (auto& p : moved.position) {
        p.x += 0.25;
        p.y -= 0.125;
    }
    const FitnessResult a = simulate_model(m, {});
    const FitnessResult b = simulate_model(moved, {});
    EXPECT_GT(a.distance_voxels, 0.0);
    // Shifted coordinates round differently; contact makes the error grow.
    EXPECT_NEAR(a.distance_voxels, b.distance_voxels, 1e-6 * a.distance_voxels);
}

TEST(Energy, UnitOscillatorDriftBelowOnePercentOverHundredPeriods) {
    Simulator sim(unit_oscillator(0.2), conservative_config(1e-3));
    EXPECT_NEAR(sim.energy().total(), 0.5 * 0.2 * 0.2, 1e-15);
    EXPECT_LT(test::oscillator_energy_drift(1e-3), 0.01);
}

TEST(Energy, OscillatorPeriodMatchesClosedForm) {
    const SimConfig c = conservative_config(1e-4);
    Simulator sim(unit_oscillator(0.1), c);
    const double period = 2.0 * std::numbers::pi / std::sqrt(2.0);
    sim.run_until(period);
    EXPECT_NEAR(sim.state().position[1].x - sim.state().position[0].x, 1.1, 1e-3);
    sim.run_until(1.5 * period);
    EXPECT_NEAR(sim.state().position[1].x - sim.state().position[0].x, 0.9, 1e-3);
}

TEST(Energy, FreeFallConservesKineticPlusPotential) {
    SimConfig c;
    c.ground = false;
    const SimModel m = build_model(block({1, 1, 1}, Material::Passive), c);
    Simulator sim(m, c);
    const Energy e0 = sim.energy();
    sim.run_until(1.0);
    const Energy e1 = sim.energy();
    const double exchanged = e1.kinetic;
    ASSERT_GT(exchanged, 0.0);
    EXPECT_LT(std::abs((e1.kinetic + e1.potential) - (e0.kinetic + e0.potential)) / exchanged, 0.01);
}

TEST(Energy, SettledBodyIsAtRest) {
    const VoxelGrid g = block({3, 3, 2}, Material::Passive);
    SimConfig c;
    c.settle_time = 2.0;
    SimModel m = build_model(g, c);
    apply_controller(m, uniform_controller(g, 5.0));
    Simulator sim(m, c);
    sim.run_until(c.settle_time);
    EXPECT_LT(sim.energy().kinetic, 1e-6);
}

TEST(Ground, PenetrationStaysWithinPenaltyCompliance) {
    Rng rng(9);
    const SimConfig c;
    for (int i = 0; i < 3; ++i) {
        const VoxelGrid g = keep_largest_component(test::random_grid(Resolution::cube(5), rng, 0.7));
        const ControllerMap ctrl = express_controller(random_minimal(GenomeKind::Controller, rng), g);
        SimModel m = build_model(g, c);
        apply_controller(m, ctrl);
        const double bound = -2.0 * m.total_mass() * c.gravity / c.ground_penalty_stiffness;
        Simulator sim(m, c);
        const double end = sim_duration(c, ctrl.global_frequency);
        while (sim.state().time < end && !sim.diverged()) {
            sim.step();
            if (sim.steps() % 25 == 0) {
                ASSERT_GE(min_height(sim), bound);
            }
        }
    }
}
