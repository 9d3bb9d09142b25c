#include "softbot/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "softbot/analytics.hpp"

namespace softbot {

namespace {

constexpr std::uint64_t kBandSeed = 0x62616e64;  // "band"

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Frame {
    double x_max;
    double y_min;
    double y_max;

    double px(double x) const { return kLeft + (x_max > 0 ? x / x_max : 0.0) * (kWidth - kLeft - kRight); }
    double py(double y) const {
        const double span = y_max > y_min ? y_max - y_min : 1.0;
        return kHeight - kBottom - (y - y_min) / span * (kHeight - kTop - kBottom);
    }
};

void svg_open(std::ostringstream& s, const std::string& title) {
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
      << "\" viewBox=\"0 0 " << num(kWidth) << " " << num(kHeight) << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"16\">" << xml_escape(title) << "</text>\n";
}

void svg_axes(std::ostringstream& s, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
    const double x0 = kLeft;
    const double x1 = kWidth - kRight;
    const double y0 = kHeight - kBottom;
    const double y1 = kTop;
    s << "<g stroke=\"black\" stroke-width=\"1\">\n";
    s << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y0)
      << "\"/>\n";
    s << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(y1)
      << "\"/>\n";
    s << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 5; ++i) {
        const double gx = f.x_max * i / 5.0;
        const double gy = f.y_min + (f.y_max - f.y_min) * i / 5.0;
        s << "<text x=\"" << num(f.px(gx)) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">"
          << num(gx) << "</text>\n";
        s << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(f.py(gy) + 4) << "\" text-anchor=\"end\">" << num(gy)
          << "</text>\n";
    }
    s << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 18) << "\" text-anchor=\"middle\">"
      << xml_escape(xlabel) << "</text>\n";
    s << "<text transform=\"translate(18 " << num((y0 + y1) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << xml_escape(ylabel) << "</text>\n</g>\n";
}

}  // namespace

Rng band_rng(int generation) { return Rng::stream(kBandSeed, {static_cast<std::uint64_t>(generation)}); }

std::vector<BandRow> fitness_bands(const std::vector<RunLog>& logs) {
    if (logs.empty()) {
        throw PlotError("plot: no run logs given");
    }
    for (const auto& log : logs) {
        if (!(log.config.resolution == logs.front().config.resolution)) {
            throw PlotError("plot: run logs of different resolutions cannot share a comparison");
        }
    }
    std::map<std::string, std::vector<std::vector<double>>> curves;
    for (const auto& log : logs) {
        curves[log.config.treatment.label()].push_back(best_so_far(log));
    }
    std::vector<BandRow> rows;
    for (const auto& [treatment, runs] : curves) {
        std::size_t length = runs.front().size();
        for (const auto& r : runs) {
            length = std::min(length, r.size());
        }
        for (std::size_t g = 0; g < length; ++g) {
            std::vector<double> values;
            for (const auto& r : runs) {
                values.push_back(r[g]);
            }
            double sum = 0.0;
            for (double v : values) {
                sum += v;
            }
            Rng rng = band_rng(static_cast<int>(g));
            const auto [lo, hi] = bootstrap_ci(values, kBandLevel, kBandResamples, rng);
            rows.push_back({treatment, static_cast<int>(g), values.size(), sum / static_cast<double>(values.size()),
                            lo, hi});
        }
    }
    return rows;
}

std::string bands_csv(const std::vector<BandRow>& rows) {
    std::string out = "treatment,generation,runs,mean,ci_lo,ci_hi\n";
    for (const auto& r : rows) {
        out += r.treatment + "," + std::to_string(r.generation) + "," + std::to_string(r.runs) + "," + g17(r.mean) +
               "," + g17(r.lo) + "," + g17(r.hi) + "\n";
    }
    return out;
}

std::string bands_svg(const std::vector<BandRow>& rows) {
    Frame f{1.0, 0.0, 1.0};
    for (const auto& r : rows) {
        f.x_max = std::max(f.x_max, static_cast<double>(r.generation));
        f.y_max = std::max(f.y_max, r.hi);
        f.y_min = std::min(f.y_min, r.lo);
    }
    std::map<std::string, std::vector<const BandRow*>> by_treatment;
    for (const auto& r : rows) {
        by_treatment[r.treatment].push_back(&r);
    }
    std::ostringstream s;
    svg_open(s, "Best fitness so far (mean, 95% bootstrap CI)");
    svg_axes(s, f, "generation", "distance (voxels)");
    std::size_t k = 0;
    for (const auto& [treatment, pts] : by_treatment) {
        const char* color = kPalette[k % std::size(kPalette)];
        s << "<g class=\"band\" data-treatment=\"" << xml_escape(treatment) << "\">\n";
        s << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
        for (const auto* p : pts) {
            s << num(f.px(p->generation)) << "," << num(f.py(p->hi)) << " ";
        }
        for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
            s << num(f.px((*it)->generation)) << "," << num(f.py((*it)->lo)) << " ";
        }
        s << "\"/>\n<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto* p : pts) {
            s << num(f.px(p->generation)) << "," << num(f.py(p->mean)) << " ";
        }
        s << "\"/>\n</g>\n";
        const double ly = kTop + 20.0 * static_cast<double>(k);
        s << "<rect x=\"" << num(kWidth - kRight + 15) << "\" y=\"" << num(ly) << "\" width=\"14\" height=\"10\" fill=\""
          << color << "\"/>\n";
        s << "<text x=\"" << num(kWidth - kRight + 35) << "\" y=\"" << num(ly + 9)
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(treatment) << "</text>\n";
        ++k;
    }
    s << "</svg>\n";
    return s.str();
}

std::string morphology_color(MorphologyId id) {
    const std::uint64_t h = mix64(id.digest);
    // Keep channels away from white so dots stay visible.
    auto channel = [&](int shift) { return static_cast<unsigned>((h >> shift) & 0xff) * 200 / 255; };
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", channel(0), channel(8), channel(16));
    return buf;
}

std::string morphology_trace_csv(const RunLog& log) {
    std::string out = "generation,id,morphology_id,fitness,survived,color\n";
    for (const auto& rec : log.generations) {
        for (const auto& e : rec.pool) {
            out += std::to_string(rec.generation) + "," + std::to_string(e.id) + "," + e.morphology.hex() + "," +
                   g17(e.fitness) + "," + (e.survived ? "1" : "0") + "," + morphology_color(e.morphology) + "\n";
        }
    }
    return out;
}

std::string morphology_trace_svg(const RunLog& log) {
    Frame f{1.0, 0.0, 1.0};
    for (const auto& rec : log.generations) {
        f.x_max = std::max(f.x_max, static_cast<double>(rec.generation));
        for (const auto& e : rec.pool) {
            f.y_max = std::max(f.y_max, e.fitness);
            f.y_min = std::min(f.y_min, e.fitness);
        }
    }
    std::ostringstream s;
    svg_open(s, "Fitness by morphology: " + log.config.treatment.label() + ", seed " + std::to_string(log.seed()));
    svg_axes(s, f, "generation", "distance (voxels)");
    s << "<g stroke-width=\"1\">\n";
    for (const auto& rec : log.generations) {
        for (const auto& e : rec.pool) {
            const std::string c = morphology_color(e.morphology);
            s << "<circle cx=\"" << num(f.px(rec.generation)) << "\" cy=\"" << num(f.py(e.fitness)) << "\" r=\"2\"";
            if (e.survived) {
                s << " fill=\"" << c << "\" stroke=\"none\"/>\n";
            } else {
                s << " fill=\"none\" stroke=\"" << c << "\"/>\n";
            }
        }
    }
    s << "</g>\n</svg>\n";
    return s.str();
}

std::vector<std::filesystem::path> write_plots(const std::vector<RunLog>& logs, const std::filesystem::path& out_dir) {
    const auto rows = fitness_bands(logs);
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& name, const std::string& contents) {
        write_file_atomic(out_dir / name, contents);
        written.push_back(out_dir / name);
    };
    emit("fitness.csv", bands_csv(rows));
    emit("fitness.svg", bands_svg(rows));
    for (const auto& log : logs) {
        std::string stem = "morphology-" + log.config.treatment.label() + "-seed" + std::to_string(log.seed());
        std::replace(stem.begin(), stem.end(), '@', '_');
        emit(stem + ".csv", morphology_trace_csv(log));
        emit(stem + ".svg", morphology_trace_svg(log));
    }
    return written;
}

int cmd_plot(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out_dir,
             std::ostream& out, std::ostream& err) {
    try {
        std::vector<RunLog> logs;
        for (const auto& dir : run_dirs) {
            logs.push_back(load_run(dir));
        }
        for (const auto& p : write_plots(logs, out_dir)) {
            out << "wrote " << p.string() << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace softbot
