#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "softbot/rng.hpp"
#include "softbot/runlog.hpp"

namespace softbot {

/// A child morphology born worse than its parent whose lineage later beats
/// the parent lineage.
struct OvertakeEvent {
    MorphologyId parent_morphology;
    MorphologyId child_morphology;
    int child_birth_gen = 0;
    int overtake_gen = 0;

    friend bool operator==(const OvertakeEvent&, const OvertakeEvent&) = default;
};

/// Candidates are children born by morphological mutation with a morphology id
/// different from their parent's, fitness strictly below the parent's, and
/// that survived their birth generation. A candidate fires at the first later
/// generation g where the best fitness carried by the child's id over
/// generations [birth, g] strictly exceeds the best fitness carried by the
/// parent's id over [0, g]. Each (parent id, child id) pair is reported once,
/// from its earliest firing candidate in log order.
std::vector<OvertakeEvent> detect_overtakes(const RunLog& log);

/// Distinct morphology ids that held the strictly highest fitness seen so far,
/// scanning pool members in log order.
std::size_t count_unique_best_morphologies(const RunLog& log);

/// Best fitness per generation and its running maximum.
std::vector<double> best_per_generation(const RunLog& log);
std::vector<double> best_so_far(const RunLog& log);
double final_best(const RunLog& log);

/// Best-so-far fitness at the generation nearest to `fraction` of the run.
double best_so_far_at(const RunLog& log, double fraction);

struct RankSumResult {
    double statistic = 0.0;  // rank sum of sample_a, midranks for ties
    double p_two_sided = 1.0;
    bool exact = false;
};

/// Wilcoxon rank-sum test. Exact enumeration when the combined size is at
/// most 20, otherwise the normal approximation with tie and continuity
/// corrections.
RankSumResult wilcoxon_rank_sum(std::span<const double> sample_a, std::span<const double> sample_b);

inline constexpr std::size_t kExactRankSumLimit = 20;

/// Percentile bootstrap interval of the mean. Each resample draws n indices
/// with rng.index(n); interval ends are linear-interpolated quantiles of the
/// sorted resample means.
std::pair<double, double> bootstrap_ci(std::span<const double> values, double level, std::size_t resamples,
                                       Rng& rng);

/// Linear-interpolation quantile of sorted data, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Regression {
    double slope = 0.0;
    double intercept = 0.0;
    double p_slope = 1.0;
    std::size_t points = 0;
};

/// Ordinary least squares with a two-sided t test on the slope. Throws
/// InsufficientData for fewer than 3 points or a single distinct x.
Regression linear_regression(std::span<const double> x, std::span<const double> y);

/// (birth generation, fitness) of every individual with morph_age 0 when born.
std::vector<std::pair<double, double>> age_zero_points(const RunLog& log);

Regression age_zero_regression(const RunLog& log);
/// Pooled over several runs.
Regression age_zero_regression(std::span<const RunLog> logs);

struct RunSummary {
    std::uint64_t seed = 0;
    std::string treatment;
    int generations = 0;
    double final_best = 0.0;
    std::size_t overtakes = 0;
    std::size_t unique_best_morphologies = 0;
    std::optional<Regression> age_zero;
};

RunSummary summarize(const RunLog& log);
std::string summary_json(const RunSummary& summary);

}  // namespace softbot
