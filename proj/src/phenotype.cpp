#include "softbot/phenotype.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace softbot {

char to_char(Material m) {
    switch (m) {
    case Material::Empty: return '.';
    case Material::Passive: return 'P';
    case Material::Muscle: return 'M';
    }
    return '?';
}

VoxelGrid::VoxelGrid(Resolution res, Material fill) : res_(res) {
    if (res.nx <= 0 || res.ny <= 0 || res.nz <= 0) {
        throw std::invalid_argument("grid resolution must be positive");
    }
    cells_.assign(res.cells(), fill);
}

std::size_t VoxelGrid::count(Material m) const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), m));
}

std::string MorphologyId::hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

std::optional<MorphologyId> MorphologyId::parse(std::string_view hex) {
    if (hex.size() != 16) {
        return std::nullopt;
    }
    std::uint64_t v = 0;
    for (char c : hex) {
        v <<= 4;
        if (c >= '0' && c <= '9') {
            v |= static_cast<std::uint64_t>(c - '0');
        } else if (c >= 'a' && c <= 'f') {
            v |= static_cast<std::uint64_t>(c - 'a' + 10);
        } else {
            return std::nullopt;
        }
    }
    return MorphologyId{v};
}

namespace {

double axis_coord(int i, int n) {
    return n > 1 ? -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
}

// Labels each non-Empty cell with a component index (or -1) and returns the
// component sizes in discovery order.
std::vector<std::size_t> label_components(const VoxelGrid& grid, std::vector<int>& label) {
    const Resolution res = grid.resolution();
    label.assign(grid.size(), -1);
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < grid.size(); ++start) {
        if (grid[start] == Material::Empty || label[start] >= 0) {
            continue;
        }
        const int comp = static_cast<int>(sizes.size());
        std::size_t size = 0;
        stack.push_back(start);
        label[start] = comp;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            ++size;
            const int x = static_cast<int>(i % res.nx);
            const int y = static_cast<int>((i / res.nx) % res.ny);
            const int z = static_cast<int>(i / (static_cast<std::size_t>(res.nx) * res.ny));
            const int nb[6][3] = {{x - 1, y, z}, {x + 1, y, z}, {x, y - 1, z},
                                  {x, y + 1, z}, {x, y, z - 1}, {x, y, z + 1}};
            for (const auto& n : nb) {
                if (n[0] < 0 || n[1] < 0 || n[2] < 0 || n[0] >= res.nx || n[1] >= res.ny || n[2] >= res.nz) {
                    continue;
                }
                const std::size_t j = grid.index(n[0], n[1], n[2]);
                if (grid[j] != Material::Empty && label[j] < 0) {
                    label[j] = comp;
                    stack.push_back(j);
                }
            }
        }
        sizes.push_back(size);
    }
    return sizes;
}

}  // namespace

Coords normalized_coords(Resolution res, int x, int y, int z) {
    Coords c;
    c.x = axis_coord(x, res.nx);
    c.y = axis_coord(y, res.ny);
    c.z = axis_coord(z, res.nz);
    c.r = std::sqrt(c.x * c.x + c.y * c.y + c.z * c.z);
    return c;
}

VoxelGrid keep_largest_component(const VoxelGrid& grid) {
    std::vector<int> label;
    const auto sizes = label_components(grid, label);
    if (sizes.size() <= 1) {
        return grid;
    }
    int best = 0;
    for (std::size_t c = 1; c < sizes.size(); ++c) {
        if (sizes[c] > sizes[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(c);
        }
    }
    VoxelGrid out = grid;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (label[i] != best) {
            out.set(i, Material::Empty);
        }
    }
    return out;
}

std::size_t component_count(const VoxelGrid& grid) {
    std::vector<int> label;
    return label_components(grid, label).size();
}

VoxelGrid express_morphology(const CppnGenome& genome, Resolution res) {
    if (genome.kind != GenomeKind::Morphology) {
        throw GenomeError("express_morphology needs a morphology genome");
    }
    const CompiledCppn net(genome);
    VoxelGrid grid(res);
    for (int z = 0; z < res.nz; ++z) {
        for (int y = 0; y < res.ny; ++y) {
            for (int x = 0; x < res.nx; ++x) {
                const auto out = net(normalized_coords(res, x, y, z));
                if (out[0] > 0.0) {
                    grid.set(x, y, z, out[1] > 0.0 ? Material::Muscle : Material::Passive);
                }
            }
        }
    }
    return keep_largest_component(grid);
}

double map_frequency(double v, FrequencyRange range) {
    return range.min_hz + 0.5 * (v + 1.0) * (range.max_hz - range.min_hz);
}

ControllerMap express_controller(const CppnGenome& genome, const VoxelGrid& grid, FrequencyRange range) {
    if (genome.kind != GenomeKind::Controller) {
        throw GenomeError("express_controller needs a controller genome");
    }
    const CompiledCppn net(genome);
    const Resolution res = grid.resolution();
    ControllerMap map;
    map.phase.assign(grid.size(), std::nullopt);
    double sum = 0.0;
    std::size_t n = 0;
    for (int z = 0; z < res.nz; ++z) {
        for (int y = 0; y < res.ny; ++y) {
            for (int x = 0; x < res.nx; ++x) {
                const std::size_t i = grid.index(x, y, z);
                if (grid[i] == Material::Empty) {
                    continue;
                }
                const auto out = net(normalized_coords(res, x, y, z));
                if (grid[i] == Material::Muscle) {
                    map.phase[i] = std::numbers::pi * out[0];
                }
                sum += map_frequency(out[1], range);
                ++n;
            }
        }
    }
    map.global_frequency = n > 0 ? sum / static_cast<double>(n) : range.min_hz;
    return map;
}

std::size_t changed_cells(const VoxelGrid& a, const VoxelGrid& b) {
    if (!(a.resolution() == b.resolution())) {
        throw ResolutionMismatch("morphological distance between grids of different resolution");
    }
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += a[i] != b[i] ? 1 : 0;
    }
    return diff;
}

double morphological_distance(const VoxelGrid& a, const VoxelGrid& b) {
    const std::size_t diff = changed_cells(a, b);
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

MorphologyId morphology_id(const VoxelGrid& grid) {
    // FNV-1a over the resolution and cells, finished with a 64-bit mixer.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t byte) {
        h ^= byte;
        h *= 0x100000001b3ULL;
    };
    const Resolution r = grid.resolution();
    for (int v : {r.nx, r.ny, r.nz}) {
        for (int s = 0; s < 32; s += 8) {
            feed((static_cast<std::uint32_t>(v) >> s) & 0xffu);
        }
    }
    for (Material m : grid.cells()) {
        feed(static_cast<std::uint64_t>(m));
    }
    return MorphologyId{mix64(h)};
}

std::string to_text(const VoxelGrid& grid) {
    const Resolution r = grid.resolution();
    std::string out = std::to_string(r.nx) + ' ' + std::to_string(r.ny) + ' ' + std::to_string(r.nz) + '\n';
    for (int z = 0; z < r.nz; ++z) {
        for (int y = 0; y < r.ny; ++y) {
            for (int x = 0; x < r.nx; ++x) {
                out += to_char(grid.at(x, y, z));
            }
            out += '\n';
        }
    }
    return out;
}

VoxelGrid grid_from_text(std::string_view text) {
    std::istringstream is{std::string(text)};
    Resolution r;
    if (!(is >> r.nx >> r.ny >> r.nz) || r.nx <= 0 || r.ny <= 0 || r.nz <= 0) {
        throw std::invalid_argument("voxel text: bad header");
    }
    VoxelGrid grid(r);
    std::string row;
    for (int z = 0; z < r.nz; ++z) {
        for (int y = 0; y < r.ny; ++y) {
            if (!(is >> row) || row.size() != static_cast<std::size_t>(r.nx)) {
                throw std::invalid_argument("voxel text: bad row");
            }
            for (int x = 0; x < r.nx; ++x) {
                switch (row[static_cast<std::size_t>(x)]) {
                case '.': break;
                case 'P': grid.set(x, y, z, Material::Passive); break;
                case 'M': grid.set(x, y, z, Material::Muscle); break;
                default: throw std::invalid_argument("voxel text: bad cell character");
                }
            }
        }
    }
    return grid;
}

}  // namespace softbot
