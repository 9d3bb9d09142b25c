#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <numbers>
#include <set>
#include <unordered_set>

#include "softbot/phenotype.hpp"
#include "support.hpp"

using namespace softbot;
using softbot::test::bare_genome;
using softbot::test::input_id;
using softbot::test::kOut0;
using softbot::test::kOut1;

namespace {

// Breadth-first flood fill with an explicit coordinate set.
VoxelGrid flood_fill_oracle(const VoxelGrid& g) {
    const Resolution r = g.resolution();
    std::set<std::size_t> seen;
    std::vector<std::size_t> best;
    for (int z = 0; z < r.nz; ++z) {
        for (int y = 0; y < r.ny; ++y) {
            for (int x = 0; x < r.nx; ++x) {
                if (g.at(x, y, z) == Material::Empty || seen.contains(g.index(x, y, z))) {
                    continue;
                }
                std::vector<std::size_t> comp;
                std::deque<std::array<int, 3>> queue{{x, y, z}};
                seen.insert(g.index(x, y, z));
                while (!queue.empty()) {
                    auto [cx, cy, cz] = queue.front();
                    queue.pop_front();
                    comp.push_back(g.index(cx, cy, cz));
                    for (auto [dx, dy, dz] : {std::array{1, 0, 0}, std::array{-1, 0, 0}, std::array{0, 1, 0},
                                              std::array{0, -1, 0}, std::array{0, 0, 1}, std::array{0, 0, -1}}) {
                        const int nx = cx + dx, ny = cy + dy, nz = cz + dz;
                        if (nx < 0 || ny < 0 || nz < 0 || nx >= r.nx || ny >= r.ny || nz >= r.nz) {
                            continue;
                        }
                        if (g.at(nx, ny, nz) != Material::Empty && seen.insert(g.index(nx, ny, nz)).second) {
                            queue.push_back({nx, ny, nz});
                        }
                    }
                }
                if (comp.size() > best.size()) {
                    best = comp;
                }
            }
        }
    }
    VoxelGrid out(r);
    for (auto i : best) {
        out.set(i, g[i]);
    }
    return out;
}

VoxelGrid prefilter(const CppnGenome& genome, Resolution res) {
    VoxelGrid g(res);
    for (int z = 0; z < res.nz; ++z) {
        for (int y = 0; y < res.ny; ++y) {
            for (int x = 0; x < res.nx; ++x) {
                const auto out = evaluate(genome, normalized_coords(res, x, y, z));
                if (out[0] > 0.0) {
                    g.set(x, y, z, out[1] > 0.0 ? Material::Muscle : Material::Passive);
                }
            }
        }
    }
    return g;
}

// presence = Sine(w*x + b), material = Sigmoid(bias) > 0 (all Muscle).
CppnGenome slab_genome(double w, double b) {
    CppnGenome g = bare_genome(GenomeKind::Morphology, ActivationKind::Sine);
    g.nodes[kOut1].activation = ActivationKind::Sigmoid;
    g.edges = {{input_id(InputLabel::X), kOut0, w}, {input_id(InputLabel::Bias), kOut0, b},
               {input_id(InputLabel::Bias), kOut1, 1.0}};
    return g;
}

}  // namespace

TEST(NormalizedCoords, SpanUnitCube) {
    const Resolution r = Resolution::cube(5);
    const Coords lo = normalized_coords(r, 0, 0, 0);
    const Coords mid = normalized_coords(r, 2, 2, 2);
    const Coords hi = normalized_coords(r, 4, 4, 4);
    EXPECT_EQ(lo.x, -1.0);
    EXPECT_EQ(mid.x, 0.0);
    EXPECT_EQ(mid.r, 0.0);
    EXPECT_EQ(hi.z, 1.0);
    EXPECT_DOUBLE_EQ(hi.r, std::sqrt(3.0));
}

TEST(ExpressMorphology, ConstantPositivePresenceFillsGrid) {
    CppnGenome g = bare_genome(GenomeKind::Morphology, ActivationKind::Sigmoid);
    g.edges = {{input_id(InputLabel::Bias), kOut0, 2.0}};
    const VoxelGrid grid = express_morphology(g, Resolution::cube(5));
    EXPECT_EQ(grid.filled(), 125u);
    // Material output is sigmoid(0) = 0.5 > 0: all muscle.
    EXPECT_EQ(grid.count(Material::Muscle), 125u);
}

TEST(ExpressMorphology, MaterialThresholdGivesPassive) {
    CppnGenome g = bare_genome(GenomeKind::Morphology, ActivationKind::Sigmoid);
    g.nodes[kOut1].activation = ActivationKind::NegAbs;
    g.edges = {{input_id(InputLabel::Bias), kOut0, 2.0}, {input_id(InputLabel::Bias), kOut1, 1.0}};
    const VoxelGrid grid = express_morphology(g, Resolution::cube(5));
    EXPECT_EQ(grid.count(Material::Passive), 125u);
}

TEST(ExpressMorphology, KeepsOnlyTheLargerSlab) {
    // sin(3x - 0.2) over x in {-1, -.5, 0, .5, 1}: + - - + +
    const CppnGenome g = slab_genome(3.0, -0.2);
    const Resolution res = Resolution::cube(5);
    const VoxelGrid raw = prefilter(g, res);
    ASSERT_EQ(component_count(raw), 2u);
    const VoxelGrid grid = express_morphology(g, res);
    EXPECT_EQ(grid, flood_fill_oracle(raw));
    EXPECT_EQ(grid.filled(), 50u);
    EXPECT_EQ(grid.at(0, 0, 0), Material::Empty);
    EXPECT_EQ(grid.at(3, 3, 1), Material::Muscle);
    EXPECT_EQ(grid.at(4, 0, 4), Material::Muscle);
}

TEST(ExpressMorphology, EqualComponentsKeepTheFirstInIndexOrder) {
    // sin(2 x^2 - 1) over x in {-1, -.5, 0, .5, 1}: + - - - +  (two slabs of 25)
    CppnGenome g = bare_genome(GenomeKind::Morphology, ActivationKind::Sine);
    g.nodes[kOut1].activation = ActivationKind::Sigmoid;
    g.nodes.push_back(CppnNode::make_hidden(7, ActivationKind::Square));
    g.next_id = 8;
    g.edges = {{input_id(InputLabel::X), 7, 1.0}, {7, kOut0, 2.0}, {input_id(InputLabel::Bias), kOut0, -1.0},
               {input_id(InputLabel::Bias), kOut1, 1.0}};
    ASSERT_EQ(component_count(prefilter(g, Resolution::cube(5))), 2u);
    const VoxelGrid grid = express_morphology(g, Resolution::cube(5));
    EXPECT_EQ(grid.filled(), 25u);
    EXPECT_EQ(grid.at(0, 2, 2), Material::Muscle);
    EXPECT_EQ(grid.at(4, 2, 2), Material::Empty);
}

TEST(ExpressMorphology, RandomGenomesMatchFloodFillOracle) {
    Rng rng(17);
    for (int i = 0; i < 300; ++i) {
        const CppnGenome g = test::grown_genome(GenomeKind::Morphology, rng, 6);
        const Resolution res = i % 3 ? Resolution::cube(5) : Resolution{4, 6, 3};
        const VoxelGrid grid = express_morphology(g, res);
        ASSERT_EQ(grid, flood_fill_oracle(prefilter(g, res)));
        ASSERT_LE(component_count(grid), 1u);
        ASSERT_EQ(grid.count(Material::Empty) + grid.count(Material::Passive) + grid.count(Material::Muscle),
                  res.cells());
    }
}

TEST(ExpressMorphology, AbsOnXGivesMirrorSymmetry) {
    Rng rng(23);
    int checked = 0;
    for (int i = 0; i < 200 && checked < 20; ++i) {
        CppnGenome g = bare_genome(GenomeKind::Morphology, kAllActivations[rng.index(8)]);
        g.nodes[kOut1].activation = kAllActivations[rng.index(8)];
        g.nodes.push_back(CppnNode::make_hidden(7, ActivationKind::Abs));
        g.next_id = 8;
        g.edges = {{input_id(InputLabel::X), 7, rng.uniform(-3, 3)},
                   {7, kOut0, rng.uniform(-3, 3)},
                   {7, kOut1, rng.uniform(-3, 3)},
                   {input_id(InputLabel::Z), kOut0, rng.uniform(-3, 3)},
                   {input_id(InputLabel::R), kOut1, rng.uniform(-3, 3)},
                   {input_id(InputLabel::Bias), kOut0, rng.uniform(-3, 3)}};
        const Resolution res = Resolution::cube(5);
        const VoxelGrid raw = prefilter(g, res);
        if (component_count(raw) != 1) {
            continue;  // the component filter may pick one of two mirrored halves
        }
        ++checked;
        const VoxelGrid grid = express_morphology(g, res);
        for (int z = 0; z < 5; ++z) {
            for (int y = 0; y < 5; ++y) {
                for (int x = 0; x < 5; ++x) {
                    ASSERT_EQ(grid.at(x, y, z), grid.at(4 - x, y, z));
                }
            }
        }
    }
    EXPECT_GE(checked, 10);
}

TEST(ExpressMorphology, RejectsControllerGenome) {
    Rng rng(1);
    EXPECT_THROW(express_morphology(random_minimal(GenomeKind::Controller, rng), Resolution::cube(5)), GenomeError);
}

TEST(ExpressController, ConstantZeroFrequencyGivesMidpoint) {
    CppnGenome g = bare_genome(GenomeKind::Controller, ActivationKind::Sine);
    g.edges = {{input_id(InputLabel::X), kOut0, 1.0}, {input_id(InputLabel::Bias), kOut1, 0.0}};
    Rng rng(2);
    const FrequencyRange range{2.0, 6.0};
    for (int i = 0; i < 5; ++i) {
        const VoxelGrid grid = test::random_grid(Resolution::cube(5), rng);
        EXPECT_EQ(express_controller(g, grid, range).global_frequency, 4.0);
    }
}

TEST(ExpressController, PhasesOnMusclesOnly) {
    Rng rng(3);
    const VoxelGrid grid = test::random_grid(Resolution::cube(5), rng);
    const ControllerMap map = express_controller(random_minimal(GenomeKind::Controller, rng), grid);
    ASSERT_EQ(map.phase.size(), grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_EQ(map.phase[i].has_value(), grid[i] == Material::Muscle);
        if (map.phase[i]) {
            EXPECT_LE(std::abs(*map.phase[i]), std::numbers::pi);
        }
    }
}

TEST(ExpressController, SingleMuscleUsesItsOwnFrequency) {
    Rng rng(4);
    const CppnGenome g = test::grown_genome(GenomeKind::Controller, rng, 5);
    VoxelGrid grid(Resolution::cube(5));
    grid.set(1, 3, 2, Material::Muscle);
    const FrequencyRange range;
    const auto out = evaluate(g, normalized_coords(grid.resolution(), 1, 3, 2));
    const ControllerMap map = express_controller(g, grid, range);
    EXPECT_EQ(map.global_frequency, map_frequency(out[1], range));
    EXPECT_EQ(*map.phase[grid.index(1, 3, 2)], std::numbers::pi * out[0]);
}

TEST(ExpressController, EmptyGridUsesMinimumFrequency) {
    Rng rng(5);
    const FrequencyRange range{1.5, 9.0};
    const ControllerMap map =
        express_controller(random_minimal(GenomeKind::Controller, rng), VoxelGrid(Resolution::cube(3)), range);
    EXPECT_EQ(map.global_frequency, 1.5);
}

TEST(ExpressController, FrequencyMatchesPerCellOracle) {
    Rng rng(6);
    const FrequencyRange range;
    for (int i = 0; i < 10; ++i) {
        const CppnGenome g = test::grown_genome(GenomeKind::Controller, rng, 8);
        const VoxelGrid grid = test::random_grid(Resolution::cube(5), rng, 0.4);
        double sum = 0.0;
        int n = 0;
        for (std::size_t c = 0; c < grid.size(); ++c) {
            if (grid[c] == Material::Empty) {
                continue;
            }
            const int x = static_cast<int>(c % 5), y = static_cast<int>(c / 5 % 5), z = static_cast<int>(c / 25);
            const double v = evaluate(g, normalized_coords(grid.resolution(), x, y, z))[1];
            sum += range.min_hz + (v + 1.0) / 2.0 * (range.max_hz - range.min_hz);
            ++n;
        }
        EXPECT_NEAR(express_controller(g, grid, range).global_frequency, sum / n, 1e-12);
    }
}

TEST(MapFrequency, EndpointsAndMidpoint) {
    const FrequencyRange r{5.0, 25.0};
    EXPECT_EQ(map_frequency(-1.0, r), 5.0);
    EXPECT_EQ(map_frequency(0.0, r), 15.0);
    EXPECT_EQ(map_frequency(1.0, r), 25.0);
}

TEST(MorphologicalDistance, IdenticalGridsAreZero) {
    Rng rng(7);
    const VoxelGrid a = test::random_grid(Resolution::cube(5), rng);
    EXPECT_EQ(morphological_distance(a, a), 0.0);
}

TEST(MorphologicalDistance, TwentyFiveOfOneTwentyFiveIsExactlyPointTwo) {
    VoxelGrid a(Resolution::cube(5), Material::Passive);
    VoxelGrid b = a;
    for (int i = 0; i < 25; ++i) {
        b.set(static_cast<std::size_t>(i * 5), i % 2 ? Material::Muscle : Material::Empty);
    }
    EXPECT_EQ(changed_cells(a, b), 25u);
    EXPECT_EQ(morphological_distance(a, b), 0.2);
}

TEST(MorphologicalDistance, MatchesElementWiseCount) {
    Rng rng(8);
    for (int i = 0; i < 500; ++i) {
        const VoxelGrid a = test::random_grid(Resolution::cube(5), rng, rng.uniform());
        const VoxelGrid b = test::random_grid(Resolution::cube(5), rng, rng.uniform());
        int diff = 0;
        for (std::size_t k = 0; k < 125; ++k) {
            diff += a.cells()[k] != b.cells()[k];
        }
        ASSERT_EQ(morphological_distance(a, b), diff / 125.0);
    }
}

TEST(MorphologicalDistance, IsAMetric) {
    Rng rng(9);
    for (int i = 0; i < 300; ++i) {
        const VoxelGrid a = test::random_grid(Resolution::cube(4), rng);
        const VoxelGrid b = test::random_grid(Resolution::cube(4), rng);
        const VoxelGrid c = test::random_grid(Resolution::cube(4), rng);
        EXPECT_EQ(morphological_distance(a, b), morphological_distance(b, a));
        EXPECT_LE(changed_cells(a, c), changed_cells(a, b) + changed_cells(b, c));
        EXPECT_EQ(morphological_distance(a, b) == 0.0, a == b);
    }
}

TEST(MorphologicalDistance, ResolutionMismatchThrows) {
    EXPECT_THROW(morphological_distance(VoxelGrid(Resolution::cube(5)), VoxelGrid(Resolution::cube(4))),
                 ResolutionMismatch);
}

TEST(MorphologyIdTest, EqualGridsEqualIdsAndFlipChangesId) {
    Rng rng(10);
    const VoxelGrid a = test::random_grid(Resolution::cube(5), rng);
    const VoxelGrid copy = a;
    EXPECT_EQ(morphology_id(a), morphology_id(copy));
    VoxelGrid flipped = a;
    flipped.set(17, a[17] == Material::Muscle ? Material::Passive : Material::Muscle);
    EXPECT_NE(morphology_id(a), morphology_id(flipped));
}

TEST(MorphologyIdTest, NoCollisionsAmongTenThousandGrids) {
    Rng rng(11);
    std::set<std::vector<Material>> grids;
    std::unordered_set<std::uint64_t> ids;
    for (int i = 0; i < 10000; ++i) {
        const VoxelGrid g = test::random_grid(Resolution::cube(5), rng, rng.uniform());
        if (grids.insert(g.cells()).second) {
            ASSERT_TRUE(ids.insert(morphology_id(g).digest).second);
        }
    }
}

TEST(MorphologyIdTest, HexRoundTrips) {
    const MorphologyId id{0x0123456789abcdefULL};
    EXPECT_EQ(id.hex(), "0123456789abcdef");
    EXPECT_EQ(MorphologyId::parse(id.hex()), id);
    EXPECT_FALSE(MorphologyId::parse("xyz"));
}

TEST(MorphologyIdTest, ResolutionIsPartOfTheId) {
    EXPECT_NE(morphology_id(VoxelGrid({2, 3, 1})), morphology_id(VoxelGrid({3, 2, 1})));
}

TEST(GridText, RoundTrips) {
    Rng rng(12);
    const VoxelGrid g = test::random_grid({3, 4, 2}, rng);
    const std::string text = to_text(g);
    EXPECT_TRUE(text.starts_with("3 4 2\n"));
    EXPECT_EQ(grid_from_text(text), g);
}
