#pragma once

// Minimal static SVG emission: scatter plots, curves and boxplots rendered
// from already-computed data. No plotting dependency; the CSVs next to these
// files are the canonical output.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace labeltrust {

struct SvgSeries {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<std::pair<double, double>> points;
    bool draw_line = false;
};

namespace detail {

struct AxisRange {
    double lo = 0.0, hi = 1.0;
    double map(double v, double pixel_lo, double pixel_hi) const {
        const double t = (v - lo) / (hi - lo);
        return pixel_lo + t * (pixel_hi - pixel_lo);
    }
};

inline AxisRange fit_range(double lo, double hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

inline void axes(std::ostringstream& svg, const AxisRange& xr, const AxisRange& yr,
                 const std::string& x_label, const std::string& y_label, int w, int h,
                 int margin) {
    svg << "<rect x='" << margin << "' y='" << margin << "' width='" << (w - 2 * margin)
        << "' height='" << (h - 2 * margin) << "' fill='none' stroke='#444'/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xr.lo + (xr.hi - xr.lo) * k / 4.0;
        const double yv = yr.lo + (yr.hi - yr.lo) * k / 4.0;
        const double xp = xr.map(xv, margin, w - margin);
        const double yp = yr.map(yv, h - margin, margin);
        svg << "<text x='" << xp << "' y='" << (h - margin + 16)
            << "' font-size='10' text-anchor='middle'>" << fmt(xv) << "</text>\n";
        svg << "<text x='" << (margin - 6) << "' y='" << (yp + 3)
            << "' font-size='10' text-anchor='end'>" << fmt(yv) << "</text>\n";
    }
    svg << "<text x='" << (w / 2) << "' y='" << (h - 6)
        << "' font-size='12' text-anchor='middle'>" << x_label << "</text>\n";
    svg << "<text x='12' y='" << (h / 2) << "' font-size='12' text-anchor='middle' "
        << "transform='rotate(-90 12 " << (h / 2) << ")'>" << y_label << "</text>\n";
}

}  // namespace detail

/// Scatter/curve plot. Series with draw_line render as polylines (plus
/// points); an optional y=x guide helps the paired-comparison plots.
inline std::string svg_scatter(const std::vector<SvgSeries>& series, const std::string& x_label,
                               const std::string& y_label, bool diagonal = false, int w = 480,
                               int h = 360) {
    const int margin = 48;
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    if (!std::isfinite(x_lo)) { x_lo = 0; x_hi = 1; y_lo = 0; y_hi = 1; }
    if (diagonal) {
        const double lo = std::min(x_lo, y_lo), hi = std::max(x_hi, y_hi);
        x_lo = y_lo = lo;
        x_hi = y_hi = hi;
    }
    const auto xr = detail::fit_range(x_lo, x_hi);
    const auto yr = detail::fit_range(y_lo, y_hi);

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    detail::axes(svg, xr, yr, x_label, y_label, w, h, margin);
    if (diagonal) {
        svg << "<line x1='" << xr.map(xr.lo, margin, w - margin) << "' y1='"
            << yr.map(xr.lo, h - margin, margin) << "' x2='" << xr.map(xr.hi, margin, w - margin)
            << "' y2='" << yr.map(xr.hi, h - margin, margin)
            << "' stroke='#999' stroke-dasharray='4 3'/>\n";
    }
    int legend_y = margin + 14;
    for (const auto& s : series) {
        if (s.draw_line && s.points.size() > 1) {
            svg << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
            for (const auto& [x, y] : s.points)
                svg << xr.map(x, margin, w - margin) << "," << yr.map(y, h - margin, margin) << " ";
            svg << "'/>\n";
        }
        for (const auto& [x, y] : s.points)
            svg << "<circle cx='" << xr.map(x, margin, w - margin) << "' cy='"
                << yr.map(y, h - margin, margin) << "' r='2.5' fill='" << s.color
                << "' fill-opacity='0.75'/>\n";
        if (!s.label.empty()) {
            svg << "<circle cx='" << (w - margin - 120) << "' cy='" << (legend_y - 4)
                << "' r='3' fill='" << s.color << "'/>\n";
            svg << "<text x='" << (w - margin - 110) << "' y='" << legend_y
                << "' font-size='11'>" << s.label << "</text>\n";
            legend_y += 14;
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

struct SvgBox {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<double> values;
};

/// Box-and-whisker summary per group (median, quartiles, min/max whiskers,
/// individual points overlaid).
inline std::string svg_boxplot(const std::vector<SvgBox>& boxes, const std::string& y_label,
                               int w = 560, int h = 360) {
    const int margin = 48;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& b : boxes)
        for (double v : b.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!std::isfinite(lo)) { lo = 0; hi = 1; }
    const auto yr = detail::fit_range(lo, hi);

    auto quantile = [](std::vector<double> v, double q) {
        std::sort(v.begin(), v.end());
        const double pos = q * (v.size() - 1);
        const std::size_t idx = static_cast<std::size_t>(pos);
        if (idx + 1 >= v.size()) return v.back();
        const double t = pos - idx;
        return v[idx] * (1 - t) + v[idx + 1] * t;
    };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    svg << "<rect x='" << margin << "' y='" << margin << "' width='" << (w - 2 * margin)
        << "' height='" << (h - 2 * margin) << "' fill='none' stroke='#444'/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double yv = yr.lo + (yr.hi - yr.lo) * k / 4.0;
        const double yp = yr.map(yv, h - margin, margin);
        svg << "<text x='" << (margin - 6) << "' y='" << (yp + 3)
            << "' font-size='10' text-anchor='end'>" << detail::fmt(yv) << "</text>\n";
    }
    svg << "<text x='12' y='" << (h / 2) << "' font-size='12' text-anchor='middle' "
        << "transform='rotate(-90 12 " << (h / 2) << ")'>" << y_label << "</text>\n";

    const double slot = static_cast<double>(w - 2 * margin) / std::max<std::size_t>(1, boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto& b = boxes[i];
        if (b.values.empty()) continue;
        const double cx = margin + slot * (i + 0.5);
        const double box_w = std::min(40.0, slot * 0.5);
        const double q1 = quantile(b.values, 0.25);
        const double q2 = quantile(b.values, 0.5);
        const double q3 = quantile(b.values, 0.75);
        const double v_lo = *std::min_element(b.values.begin(), b.values.end());
        const double v_hi = *std::max_element(b.values.begin(), b.values.end());
        auto ym = [&](double v) { return yr.map(v, h - margin, margin); };
        svg << "<line x1='" << cx << "' y1='" << ym(v_lo) << "' x2='" << cx << "' y2='"
            << ym(v_hi) << "' stroke='#555'/>\n";
        svg << "<rect x='" << (cx - box_w / 2) << "' y='" << ym(q3) << "' width='" << box_w
            << "' height='" << (ym(q1) - ym(q3)) << "' fill='" << b.color
            << "' fill-opacity='0.5' stroke='#333'/>\n";
        svg << "<line x1='" << (cx - box_w / 2) << "' y1='" << ym(q2) << "' x2='"
            << (cx + box_w / 2) << "' y2='" << ym(q2) << "' stroke='#000' stroke-width='1.5'/>\n";
        for (double v : b.values)
            svg << "<circle cx='" << (cx + box_w * 0.6) << "' cy='" << ym(v)
                << "' r='2' fill='#333' fill-opacity='0.5'/>\n";
        svg << "<text x='" << cx << "' y='" << (h - margin + 16)
            << "' font-size='10' text-anchor='middle'>" << b.label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace labeltrust
