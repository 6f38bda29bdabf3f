#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tk/common.hpp"
#include "tk/stats.hpp"

// CSV and SVG writers for paths, histograms and event tables, plus a reader
// for histogram round-trips. Numbers are written with max_digits10 precision
// so re-ingestion reproduces values exactly. Header comment lines (#) carry
// the resolved run configuration.

namespace tk {

inline std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

struct CsvWriter {
    std::ostringstream out;

    void comment(const std::string& line) { out << "# " << line << "\n"; }
    void raw(const std::string& s) { out << s; }

    void write_file(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw error("cannot open output file: " + path);
        f << out.str();
    }
    std::string str() const { return out.str(); }
};

// Path CSV: `t,x1,...,xd` (CTMC) or `t,x1,...,xd,L` (CLA).
inline void write_path_csv(CsvWriter& w, const SampledPath& path, bool with_local_time) {
    w.out << "t";
    for (int i = 1; i <= path.dim; ++i) w.out << ",x" << i;
    if (with_local_time) w.out << ",L";
    w.out << "\n";
    for (std::size_t i = 0; i < path.size(); ++i) {
        w.out << fmt_short(path.times[i]);
        const auto x = path.state(i);
        for (int k = 0; k < path.dim; ++k) w.out << ',' << fmt_short(x[k]);
        if (with_local_time) w.out << ',' << fmt_short(path.local_time[i]);
        w.out << "\n";
    }
}

// 1D histogram CSV: `bin_lo,bin_hi,mass,density`; density integrates to 1.
inline void write_histogram_csv(CsvWriter& w, const WeightedHistogram& h) {
    if (h.dims != 1) throw error("write_histogram_csv expects a 1D histogram");
    w.out << "bin_lo,bin_hi,mass,density\n";
    const double width = h.ax.width();
    for (int i = 0; i < h.ax.bins; ++i) {
        const double dens = h.total_time > 0.0 ? h.mass[i] / (h.total_time * width) : 0.0;
        w.out << fmt_full(h.ax.edge(i)) << ',' << fmt_full(h.ax.edge(i + 1)) << ','
              << fmt_full(h.mass[i]) << ',' << fmt_full(dens) << "\n";
    }
}

// 2D histogram CSV: mass matrix, one row per x-bin, columns are y-bins.
inline void write_histogram2d_csv(CsvWriter& w, const WeightedHistogram& h) {
    if (h.dims != 2) throw error("write_histogram2d_csv expects a 2D histogram");
    for (int i = 0; i < h.ax.bins; ++i) {
        for (int j = 0; j < h.ay.bins; ++j) {
            if (j) w.out << ',';
            w.out << fmt_full(h.mass[static_cast<std::size_t>(i) * h.ay.bins + j]);
        }
        w.out << "\n";
    }
}

// Event-time CSV from an ensemble: per-trajectory rows in index order.
inline void write_events_csv(CsvWriter& w, const std::vector<double>& times,
                             int horizon_exceeded) {
    w.out << "trajectory,event_time,status\n";
    for (std::size_t i = 0; i < times.size(); ++i)
        w.out << i << ',' << fmt_full(times[i]) << ",ok\n";
    for (int i = 0; i < horizon_exceeded; ++i)
        w.out << times.size() + i << ",,horizon_exceeded\n";
}

// Reads back a 1D histogram CSV produced by write_histogram_csv (comment and
// header lines skipped). Exact round-trip of edges and masses.
inline WeightedHistogram read_histogram_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<double> lo, hi, mass;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("bin_lo", 0) == 0) continue;
        std::istringstream ls(line);
        std::string cell;
        double v[4];
        for (int i = 0; i < 4; ++i) {
            if (!std::getline(ls, cell, ',')) throw error("histogram CSV: short row");
            v[i] = std::stod(cell);
        }
        lo.push_back(v[0]);
        hi.push_back(v[1]);
        mass.push_back(v[2]);
    }
    if (lo.empty()) throw error("histogram CSV: no data rows");
    WeightedHistogram h = WeightedHistogram::make1d(lo.front(), hi.back(), static_cast<int>(lo.size()));
    double tot = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        h.mass[i] = mass[i];
        tot += mass[i];
    }
    h.total_time = tot;
    return h;
}

// ----------------------------------------------------------------------------
// Minimal SVG rendering: fixed 800x600 canvas, bar charts for 1D histograms,
// grayscale heatmaps for 2D, labelled polylines for trajectories. Enough to
// eyeball the stationary-distribution and trajectory figures.
// ----------------------------------------------------------------------------

namespace detail {

constexpr int kSvgW = 800;
constexpr int kSvgH = 600;
constexpr int kMargin = 60;

inline std::string svg_open() {
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSvgW << "\" height=\"" << kSvgH
      << "\" viewBox=\"0 0 " << kSvgW << " " << kSvgH << "\">\n"
      << "<rect width=\"" << kSvgW << "\" height=\"" << kSvgH << "\" fill=\"white\"/>\n";
    return s.str();
}

inline std::string svg_text(double x, double y, const std::string& t, int size = 14) {
    std::ostringstream s;
    s << "<text x=\"" << fmt_short(x) << "\" y=\"" << fmt_short(y) << "\" font-size=\"" << size
      << "\" font-family=\"sans-serif\">" << t << "</text>\n";
    return s.str();
}

}  // namespace detail

inline std::string svg_histogram1d(const WeightedHistogram& h, const std::string& xlabel,
                                   const std::string& title) {
    using namespace detail;
    std::ostringstream s;
    s << svg_open();
    const auto dens = h.normalized();
    double peak = 0.0;
    for (double v : dens) peak = std::max(peak, v);
    if (peak <= 0.0) peak = 1.0;
    const double px = kSvgW - 2 * kMargin, py = kSvgH - 2 * kMargin;
    for (int i = 0; i < h.ax.bins; ++i) {
        const double bw = px / h.ax.bins;
        const double bh = dens[i] / peak * py;
        s << "<rect x=\"" << fmt_short(kMargin + i * bw) << "\" y=\""
          << fmt_short(kSvgH - kMargin - bh) << "\" width=\"" << fmt_short(bw * 0.95)
          << "\" height=\"" << fmt_short(bh) << "\" fill=\"#4477aa\"/>\n";
    }
    s << svg_text(kMargin, kMargin - 20, title, 16);
    s << svg_text(kSvgW / 2.0 - 30, kSvgH - 15, xlabel);
    s << svg_text(5, kSvgH - kMargin, fmt_short(h.ax.lo), 12);
    s << svg_text(kSvgW - kMargin, kSvgH - kMargin + 25, fmt_short(h.ax.hi), 12);
    s << "</svg>\n";
    return s.str();
}

inline std::string svg_histogram2d(const WeightedHistogram& h, const std::string& xlabel,
                                   const std::string& ylabel, const std::string& title) {
    using namespace detail;
    std::ostringstream s;
    s << svg_open();
    double peak = 0.0;
    for (double v : h.mass) peak = std::max(peak, v);
    if (peak <= 0.0) peak = 1.0;
    const double px = kSvgW - 2 * kMargin, py = kSvgH - 2 * kMargin;
    const double cw = px / h.ax.bins, ch = py / h.ay.bins;
    for (int i = 0; i < h.ax.bins; ++i) {
        for (int j = 0; j < h.ay.bins; ++j) {
            const double m = h.mass[static_cast<std::size_t>(i) * h.ay.bins + j];
            if (m <= 0.0) continue;
            const int gray = 255 - static_cast<int>(m / peak * 255.0);  // linear map
            s << "<rect x=\"" << fmt_short(kMargin + i * cw) << "\" y=\""
              << fmt_short(kSvgH - kMargin - (j + 1) * ch) << "\" width=\"" << fmt_short(cw)
              << "\" height=\"" << fmt_short(ch) << "\" fill=\"rgb(" << gray << ',' << gray << ','
              << gray << ")\"/>\n";
        }
    }
    s << svg_text(kMargin, kMargin - 20, title, 16);
    s << svg_text(kSvgW / 2.0 - 30, kSvgH - 15, xlabel);
    s << svg_text(10, kSvgH / 2.0, ylabel);
    s << "</svg>\n";
    return s.str();
}

// Trajectory plot: one labelled polyline per species.
inline std::string svg_trajectory(const SampledPath& path, const std::string& title) {
    using namespace detail;
    static const char* palette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44",
                                    "#66ccee", "#aa3377", "#bbbbbb", "#222222"};
    std::ostringstream s;
    s << svg_open();
    if (path.size() < 2) {
        s << svg_text(kMargin, kSvgH / 2.0, "(path too short)");
        s << "</svg>\n";
        return s.str();
    }
    double ymax = 1e-12;
    for (double v : path.states) ymax = std::max(ymax, v);
    const double t0 = path.times.front(), t1 = path.times.back();
    const double px = kSvgW - 2 * kMargin, py = kSvgH - 2 * kMargin;
    for (int k = 0; k < path.dim; ++k) {
        s << "<polyline fill=\"none\" stroke=\"" << palette[k % 8]
          << "\" stroke-width=\"1\" points=\"";
        for (std::size_t i = 0; i < path.size(); ++i) {
            const double x = kMargin + (path.times[i] - t0) / (t1 - t0) * px;
            const double y = kSvgH - kMargin - path.state(i)[k] / ymax * py;
            s << fmt_short(x) << ',' << fmt_short(y) << ' ';
        }
        s << "\"/>\n";
        s << svg_text(kSvgW - kMargin + 5, kMargin + 18.0 * k + 12, "x" + std::to_string(k + 1),
                      12);
    }
    s << svg_text(kMargin, kMargin - 20, title, 16);
    s << svg_text(kSvgW / 2.0 - 10, kSvgH - 15, "t");
    s << svg_text(5, kMargin, fmt_short(ymax), 12);
    s << "</svg>\n";
    return s.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw error("cannot open output file: " + path);
    f << content;
}

}  // namespace tk
