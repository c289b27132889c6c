#ifndef UQGAZE_SVG_CHART_HPP
#define UQGAZE_SVG_CHART_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace uqgaze {

struct ChartSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

struct ChartOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    /// Draw circle markers instead of connecting the points.
    bool markers_only = false;
};

namespace detail {

inline std::string svg_num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s = buf;
    if (s == "-0.00") s = "0.00";
    return s;
}

inline std::string tick_label(double v)
{
    if (std::abs(v) < 1e-12) v = 0.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string xml_escape(const std::string& s)
{
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

/// 1, 2 or 5 times a power of ten, giving roughly `target` intervals.
inline double nice_step(double range, int target)
{
    const double raw = range / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    return (norm < 1.5 ? 1.0 : norm < 3.0 ? 2.0 : norm < 7.0 ? 5.0 : 10.0) * mag;
}

struct Axis {
    double lo, hi, step;
};

inline Axis nice_axis(double lo, double hi)
{
    if (!(hi > lo)) {
        const double pad = std::max(std::abs(lo) * 0.1, 0.5);
        lo -= pad;
        hi += pad;
    }
    const double step = nice_step(hi - lo, 5);
    return {std::floor(lo / step) * step, std::ceil(hi / step) * step, step};
}

inline constexpr std::array<const char*, 16> kPalette = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd",
};

} // namespace detail

/// Standalone 800x500 SVG: one polyline (or marker group) per series, a legend
/// and numeric ticks on both axes. Output depends only on the inputs.
inline std::string render_svg_chart(std::span<const ChartSeries> series, const ChartOptions& options = {})
{
    if (series.empty()) fail(ErrorCode::EmptyChart, "chart needs at least one series");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const ChartSeries& s : series) {
        if (s.points.size() < 2) fail(ErrorCode::EmptyChart, "series `" + s.name + "` needs at least two points");
        for (auto [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y))
                fail(ErrorCode::EmptyChart, "series `" + s.name + "` has a non-finite point");
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    const detail::Axis ax = detail::nice_axis(xmin, xmax);
    const detail::Axis ay = detail::nice_axis(ymin, ymax);

    constexpr double width = 800, height = 500;
    constexpr double left = 70, right = 190, top = 40, bottom = 60;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    auto px = [&](double x) { return left + (x - ax.lo) / (ax.hi - ax.lo) * plot_w; };
    auto py = [&](double y) { return top + plot_h - (y - ay.lo) / (ay.hi - ay.lo) * plot_h; };
    using detail::svg_num;

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\" "
           "font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
    if (!options.title.empty())
        svg << "<text x=\"" << svg_num(left + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
            << detail::xml_escape(options.title) << "</text>\n";

    svg << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n"
        << "<rect x=\"" << svg_num(left) << "\" y=\"" << svg_num(top) << "\" width=\"" << svg_num(plot_w)
        << "\" height=\"" << svg_num(plot_h) << "\"/>\n</g>\n";

    svg << "<g class=\"ticks\">\n";
    const int nx = static_cast<int>(std::lround((ax.hi - ax.lo) / ax.step));
    for (int i = 0; i <= nx; ++i) {
        const double v = ax.lo + i * ax.step, x = px(v);
        svg << "<line x1=\"" << svg_num(x) << "\" y1=\"" << svg_num(top + plot_h) << "\" x2=\"" << svg_num(x)
            << "\" y2=\"" << svg_num(top + plot_h + 5) << "\" stroke=\"black\"/>"
            << "<text x=\"" << svg_num(x) << "\" y=\"" << svg_num(top + plot_h + 18) << "\" text-anchor=\"middle\">"
            << detail::tick_label(v) << "</text>\n";
    }
    const int ny = static_cast<int>(std::lround((ay.hi - ay.lo) / ay.step));
    for (int i = 0; i <= ny; ++i) {
        const double v = ay.lo + i * ay.step, y = py(v);
        svg << "<line x1=\"" << svg_num(left - 5) << "\" y1=\"" << svg_num(y) << "\" x2=\"" << svg_num(left)
            << "\" y2=\"" << svg_num(y) << "\" stroke=\"black\"/>"
            << "<text x=\"" << svg_num(left - 8) << "\" y=\"" << svg_num(y + 4) << "\" text-anchor=\"end\">"
            << detail::tick_label(v) << "</text>\n";
    }
    svg << "</g>\n";
    if (!options.x_label.empty())
        svg << "<text x=\"" << svg_num(left + plot_w / 2) << "\" y=\"" << svg_num(height - 15)
            << "\" text-anchor=\"middle\">" << detail::xml_escape(options.x_label) << "</text>\n";
    if (!options.y_label.empty())
        svg << "<text x=\"18\" y=\"" << svg_num(top + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
            << svg_num(top + plot_h / 2) << ")\">" << detail::xml_escape(options.y_label) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = detail::kPalette[i % detail::kPalette.size()];
        if (options.markers_only) {
            svg << "<g class=\"series\" fill=\"" << color << "\" fill-opacity=\"0.5\">\n";
            for (auto [x, y] : series[i].points)
                svg << "<circle cx=\"" << svg_num(px(x)) << "\" cy=\"" << svg_num(py(y)) << "\" r=\"2\"/>\n";
            svg << "</g>\n";
        } else {
            svg << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t p = 0; p < series[i].points.size(); ++p)
                svg << (p ? " " : "") << svg_num(px(series[i].points[p].first)) << ','
                    << svg_num(py(series[i].points[p].second));
            svg << "\"/>\n";
        }
    }

    svg << "<g class=\"legend\">\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double y = top + 10 + 18.0 * static_cast<double>(i);
        const char* color = detail::kPalette[i % detail::kPalette.size()];
        svg << "<g class=\"legend-entry\"><rect x=\"" << svg_num(width - right + 15) << "\" y=\"" << svg_num(y - 8)
            << "\" width=\"12\" height=\"10\" fill=\"" << color << "\"/><text x=\"" << svg_num(width - right + 32)
            << "\" y=\"" << svg_num(y + 1) << "\">" << detail::xml_escape(series[i].name) << "</text></g>\n";
    }
    svg << "</g>\n</svg>\n";
    return svg.str();
}

inline void emit_svg_chart(std::span<const ChartSeries> series, const ChartOptions& options,
                           const std::filesystem::path& path)
{
    const std::string text = render_svg_chart(series, options);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot write chart " + path.string());
    out << text;
}

} // namespace uqgaze

#endif
