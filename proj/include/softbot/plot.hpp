#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "softbot/rng.hpp"
#include "softbot/runlog.hpp"

namespace softbot {

class PlotError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BandRow {
    std::string treatment;
    int generation = 0;
    std::size_t runs = 0;
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

inline constexpr double kBandLevel = 0.95;
inline constexpr std::size_t kBandResamples = 2000;

/// Random stream for the bootstrap band of one generation.
Rng band_rng(int generation);

/// Mean best-so-far fitness per treatment and generation with a bootstrap
/// interval across runs. A treatment's band stops at its shortest run. Throws
/// PlotError for logs of different resolutions.
std::vector<BandRow> fitness_bands(const std::vector<RunLog>& logs);

std::string bands_csv(const std::vector<BandRow>& rows);
std::string bands_svg(const std::vector<BandRow>& rows);

/// Every pool member of one run as (generation, fitness), coloured by
/// morphology id. Rejected individuals are drawn hollow.
std::string morphology_trace_csv(const RunLog& log);
std::string morphology_trace_svg(const RunLog& log);

/// Deterministic colour for a morphology id, "#rrggbb".
std::string morphology_color(MorphologyId id);

/// Writes fitness.csv/.svg plus morphology-<treatment>-seed<N>.csv/.svg per
/// log. Returns the files written.
std::vector<std::filesystem::path> write_plots(const std::vector<RunLog>& logs, const std::filesystem::path& out_dir);

int cmd_plot(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out_dir,
             std::ostream& out, std::ostream& err);

}  // namespace softbot
