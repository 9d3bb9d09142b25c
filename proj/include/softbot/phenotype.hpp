#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "softbot/cppn.hpp"

namespace softbot {

enum class Material : std::uint8_t { Empty = 0, Passive = 1, Muscle = 2 };

char to_char(Material m);

struct Resolution {
    int nx = 5;
    int ny = 5;
    int nz = 5;

    std::size_t cells() const { return static_cast<std::size_t>(nx) * ny * nz; }
    static Resolution cube(int n) { return {n, n, n}; }

    friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// Dense voxel body plan. Cell (x, y, z) lives at index (z * ny + y) * nx + x;
/// z is the vertical axis.
class VoxelGrid {
public:
    VoxelGrid() = default;
    explicit VoxelGrid(Resolution res, Material fill = Material::Empty);

    Resolution resolution() const { return res_; }
    std::size_t size() const { return cells_.size(); }

    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * res_.ny + y) * res_.nx + x;
    }
    Material at(int x, int y, int z) const { return cells_[index(x, y, z)]; }
    Material operator[](std::size_t i) const { return cells_[i]; }
    void set(int x, int y, int z, Material m) { cells_[index(x, y, z)] = m; }
    void set(std::size_t i, Material m) { cells_[i] = m; }

    std::size_t count(Material m) const;
    std::size_t filled() const { return size() - count(Material::Empty); }
    bool empty_body() const { return filled() == 0; }

    const std::vector<Material>& cells() const { return cells_; }

    friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

private:
    Resolution res_{};
    std::vector<Material> cells_;
};

/// Per-muscle-cell phase offsets (radians) plus the shared clock frequency.
struct ControllerMap {
    std::vector<std::optional<double>> phase;  // set exactly on Muscle cells
    double global_frequency = 0.0;

    friend bool operator==(const ControllerMap&, const ControllerMap&) = default;
};

struct FrequencyRange {
    double min_hz = 5.0;
    double max_hz = 25.0;
};

struct MorphologyId {
    std::uint64_t digest = 0;

    std::string hex() const;
    static std::optional<MorphologyId> parse(std::string_view hex);

    friend auto operator<=>(const MorphologyId&, const MorphologyId&) = default;
};

/// Lattice coordinates mapped linearly to [-1, 1] per axis, r the radius of
/// the normalized point.
Coords normalized_coords(Resolution res, int x, int y, int z);

/// Keeps only the largest face-connected component of non-Empty cells. Among
/// equally large components the one met first in index order wins.
VoxelGrid keep_largest_component(const VoxelGrid& grid);

/// Number of face-connected components of non-Empty cells.
std::size_t component_count(const VoxelGrid& grid);

VoxelGrid express_morphology(const CppnGenome& genome, Resolution res);

ControllerMap express_controller(const CppnGenome& genome, const VoxelGrid& grid, FrequencyRange range = {});

/// Maps a squashed frequency output in (-1, 1) affinely onto the range.
double map_frequency(double v, FrequencyRange range);

class ResolutionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Fraction of lattice positions whose material differs.
double morphological_distance(const VoxelGrid& a, const VoxelGrid& b);

/// Number of lattice positions whose material differs.
std::size_t changed_cells(const VoxelGrid& a, const VoxelGrid& b);

MorphologyId morphology_id(const VoxelGrid& grid);

/// Text export: "nx ny nz" header, then for each z layer ny lines of nx
/// characters ('.', 'P', 'M').
std::string to_text(const VoxelGrid& grid);
VoxelGrid grid_from_text(std::string_view text);

}  // namespace softbot
