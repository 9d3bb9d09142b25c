#include "softbot/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

namespace softbot {

namespace {

// Per-generation best fitness of each morphology id.
using MorphTrace = std::vector<std::pair<int, double>>;  // (generation, best), ascending

std::map<MorphologyId, MorphTrace> morph_traces(const RunLog& log) {
    std::map<MorphologyId, MorphTrace> traces;
    for (const auto& rec : log.generations) {
        for (const auto& e : rec.pool) {
            auto& t = traces[e.morphology];
            if (t.empty() || t.back().first != rec.generation) {
                t.emplace_back(rec.generation, e.fitness);
            } else {
                t.back().second = std::max(t.back().second, e.fitness);
            }
        }
    }
    return traces;
}

}  // namespace

std::vector<OvertakeEvent> detect_overtakes(const RunLog& log) {
    const auto traces = morph_traces(log);
    std::vector<OvertakeEvent> events;
    std::set<std::pair<MorphologyId, MorphologyId>> reported;
    if (log.generations.empty()) {
        return events;
    }
    const int last_gen = log.generations.back().generation;

    for (const auto& rec : log.generations) {
        for (const auto& child : rec.pool) {
            if (child.mutation != MutationKind::Morphology || !child.parent_id || !child.survived ||
                child.birth_gen != rec.generation) {
                continue;
            }
            auto parent = std::find_if(rec.pool.begin(), rec.pool.end(),
                                       [&](const PoolEntry& p) { return p.id == *child.parent_id; });
            if (parent == rec.pool.end() || parent->morphology == child.morphology ||
                !(child.fitness < parent->fitness)) {
                continue;
            }
            const auto pair = std::make_pair(parent->morphology, child.morphology);
            if (reported.contains(pair)) {
                continue;
            }
            const MorphTrace& ct = traces.at(child.morphology);
            const MorphTrace& pt = traces.at(parent->morphology);
            auto ci = std::lower_bound(ct.begin(), ct.end(), std::make_pair(rec.generation, -HUGE_VAL));
            auto pi = pt.begin();
            double child_best = -HUGE_VAL;
            double parent_best = -HUGE_VAL;
            for (int g = rec.generation; g <= last_gen; ++g) {
                for (; ci != ct.end() && ci->first <= g; ++ci) {
                    child_best = std::max(child_best, ci->second);
                }
                for (; pi != pt.end() && pi->first <= g; ++pi) {
                    parent_best = std::max(parent_best, pi->second);
                }
                if (g > rec.generation && child_best > parent_best) {
                    events.push_back({parent->morphology, child.morphology, rec.generation, g});
                    reported.insert(pair);
                    break;
                }
            }
        }
    }
    return events;
}

std::size_t count_unique_best_morphologies(const RunLog& log) {
    std::set<MorphologyId> holders;
    bool any = false;
    double best = 0.0;
    for (const auto& rec : log.generations) {
        for (const auto& e : rec.pool) {
            if (!any || e.fitness > best) {
                any = true;
                best = e.fitness;
                holders.insert(e.morphology);
            }
        }
    }
    return holders.size();
}

std::vector<double> best_per_generation(const RunLog& log) {
    std::vector<double> out;
    out.reserve(log.generations.size());
    for (const auto& rec : log.generations) {
        out.push_back(best_of(rec).fitness);
    }
    return out;
}

std::vector<double> best_so_far(const RunLog& log) {
    std::vector<double> out = best_per_generation(log);
    for (std::size_t i = 1; i < out.size(); ++i) {
        out[i] = std::max(out[i], out[i - 1]);
    }
    return out;
}

double final_best(const RunLog& log) {
    const auto b = best_so_far(log);
    return b.empty() ? 0.0 : b.back();
}

double best_so_far_at(const RunLog& log, double fraction) {
    const auto b = best_so_far(log);
    if (b.empty()) {
        return 0.0;
    }
    const double f = std::clamp(fraction, 0.0, 1.0);
    const auto idx = static_cast<std::size_t>(std::llround(f * static_cast<double>(b.size() - 1)));
    return b[idx];
}

RankSumResult wilcoxon_rank_sum(std::span<const double> sample_a, std::span<const double> sample_b) {
    if (sample_a.empty() || sample_b.empty()) {
        throw std::invalid_argument("wilcoxon_rank_sum: samples must be non-empty");
    }
    const std::size_t na = sample_a.size();
    const std::size_t n = na + sample_b.size();
    std::vector<std::pair<double, std::size_t>> all;
    all.reserve(n);
    for (std::size_t i = 0; i < na; ++i) {
        all.emplace_back(sample_a[i], i);
    }
    for (std::size_t i = 0; i < sample_b.size(); ++i) {
        all.emplace_back(sample_b[i], na + i);
    }
    std::sort(all.begin(), all.end());

    // Doubled midranks are integers: first + last position, 1-based.
    std::vector<long long> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && all[j + 1].first == all[i].first) {
            ++j;
        }
        const auto r2 = static_cast<long long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) {
            rank2[all[k].second] = r2;
        }
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long long obs2 = 0;
    for (std::size_t i = 0; i < na; ++i) {
        obs2 += rank2[i];
    }
    const long long expected2 = static_cast<long long>(na * (n + 1));

    RankSumResult result;
    result.statistic = static_cast<double>(obs2) / 2.0;
    const long long dev = std::llabs(obs2 - expected2);

    if (n <= kExactRankSumLimit) {
        // Distribution of doubled rank sums over all size-na subsets.
        const long long max_sum = std::accumulate(rank2.begin(), rank2.end(), 0LL);
        std::vector<std::vector<double>> ways(na + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
        ways[0][0] = 1.0;
        for (std::size_t item = 0; item < n; ++item) {
            const auto r = static_cast<std::size_t>(rank2[item]);
            for (std::size_t k = std::min(na, item + 1); k >= 1; --k) {
                for (std::size_t s = static_cast<std::size_t>(max_sum); s >= r; --s) {
                    ways[k][s] += ways[k - 1][s - r];
                }
            }
        }
        double extreme = 0.0;
        double total = 0.0;
        for (std::size_t s = 0; s < ways[na].size(); ++s) {
            total += ways[na][s];
            if (std::llabs(static_cast<long long>(s) - expected2) >= dev) {
                extreme += ways[na][s];
            }
        }
        result.exact = true;
        result.p_two_sided = std::min(1.0, extreme / total);
        return result;
    }

    const double dn = static_cast<double>(n);
    const double dna = static_cast<double>(na);
    const double dnb = static_cast<double>(n - na);
    const double variance = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (variance <= 0.0) {
        result.p_two_sided = 1.0;
        return result;
    }
    const double z = std::max(0.0, static_cast<double>(dev) / 2.0 - 0.5) / std::sqrt(variance);
    const double p = std::erfc(z / std::sqrt(2.0));
    result.p_two_sided = std::clamp(p, std::numeric_limits<double>::min(), 1.0);
    return result;
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) {
        throw std::invalid_argument("quantile_sorted: empty data");
    }
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::pair<double, double> bootstrap_ci(std::span<const double> values, double level, std::size_t resamples,
                                       Rng& rng) {
    if (values.empty()) {
        throw std::invalid_argument("bootstrap_ci: values must be non-empty");
    }
    if (!(level > 0.0 && level < 1.0) || resamples == 0) {
        throw std::invalid_argument("bootstrap_ci: level must be in (0, 1) and resamples positive");
    }
    const std::size_t n = values.size();
    std::vector<double> means(resamples);
    for (auto& m : means) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += values[rng.index(n)];
        }
        m = sum / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const double tail = (1.0 - level) / 2.0;
    return {quantile_sorted(means, tail), quantile_sorted(means, 1.0 - tail)};
}

Regression linear_regression(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("linear_regression: x and y differ in length");
    }
    const std::size_t n = x.size();
    if (n < 3) {
        throw InsufficientData("linear_regression: need at least 3 points, got " + std::to_string(n));
    }
    const double dn = static_cast<double>(n);
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / dn;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / dn;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) {
        throw InsufficientData("linear_regression: all points share one x value");
    }
    Regression r;
    r.points = n;
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
        r.slope = 0.0;
        r.intercept = y[0];
        r.p_slope = 1.0;
        return r;
    }
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (r.intercept + r.slope * x[i]);
        sse += e * e;
    }
    const double se = std::sqrt(sse / (dn - 2.0) / sxx);
    if (se == 0.0) {
        r.p_slope = r.slope == 0.0 ? 1.0 : 0.0;
        return r;
    }
    const double t = std::abs(r.slope / se);
    const boost::math::students_t dist(dn - 2.0);
    r.p_slope = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
    return r;
}

std::vector<std::pair<double, double>> age_zero_points(const RunLog& log) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& rec : log.generations) {
        for (const auto& e : rec.pool) {
            if (e.birth_gen == rec.generation && e.morph_age == 0) {
                pts.emplace_back(static_cast<double>(e.birth_gen), e.fitness);
            }
        }
    }
    return pts;
}

namespace {

Regression regress(const std::vector<std::pair<double, double>>& pts) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& [gx, fy] : pts) {
        x.push_back(gx);
        y.push_back(fy);
    }
    return linear_regression(x, y);
}

}  // namespace

Regression age_zero_regression(const RunLog& log) { return regress(age_zero_points(log)); }

Regression age_zero_regression(std::span<const RunLog> logs) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& log : logs) {
        const auto p = age_zero_points(log);
        pts.insert(pts.end(), p.begin(), p.end());
    }
    return regress(pts);
}

RunSummary summarize(const RunLog& log) {
    RunSummary s;
    s.seed = log.seed();
    s.treatment = log.config.treatment.label();
    s.generations = log.generations.empty() ? 0 : log.generations.back().generation;
    s.final_best = final_best(log);
    s.overtakes = detect_overtakes(log).size();
    s.unique_best_morphologies = count_unique_best_morphologies(log);
    try {
        s.age_zero = age_zero_regression(log);
    } catch (const InsufficientData&) {
    }
    return s;
}

std::string summary_json(const RunSummary& s) {
    nlohmann::ordered_json j;
    j["seed"] = s.seed;
    j["treatment"] = s.treatment;
    j["generations"] = s.generations;
    j["final_best_fitness"] = s.final_best;
    j["overtakes"] = s.overtakes;
    j["unique_best_morphologies"] = s.unique_best_morphologies;
    if (s.age_zero) {
        j["age_zero_regression"] = {{"slope", s.age_zero->slope},
                                    {"intercept", s.age_zero->intercept},
                                    {"p_slope", s.age_zero->p_slope},
                                    {"points", s.age_zero->points}};
    } else {
        j["age_zero_regression"] = nullptr;
    }
    return j.dump(2) + "\n";
}

}  // namespace softbot
