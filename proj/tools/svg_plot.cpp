#include "svg_plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace dtmnav::cli {

namespace {

constexpr double kWidth = 720.0;
constexpr double kPanelHeight = 300.0;
constexpr double kTitleHeight = 40.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 150.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 50.0;

std::string num(double v, int precision = 2) {
    if (std::abs(v) < 0.5 * std::pow(10.0, -precision)) v = 0.0;
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
    return std::string(buf, ptr);
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
};

/// Tick spacing from the 1-2-5 sequence giving about five intervals.
double tick_step(double span) {
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0}) {
        if (m * mag >= raw) return m * mag;
    }
    return 10.0 * mag;
}

Range nice(Range r, bool include_zero) {
    if (!(r.lo <= r.hi)) r = {0.0, 1.0};
    if (include_zero) r.lo = std::min(r.lo, 0.0);
    if (r.hi - r.lo < 1e-12) {
        r.lo -= 0.5;
        r.hi += 0.5;
    }
    const double step = tick_step(r.hi - r.lo);
    return {std::floor(r.lo / step) * step, std::ceil(r.hi / step) * step};
}

int decimals_for(double step) { return std::max(0, static_cast<int>(std::ceil(-std::log10(step) - 1e-9))); }

void render_panel(std::string& out, const Panel& p, double y0) {
    Range xr, yr;
    for (const Series& s : p.series) {
        for (double v : s.x) xr.add(v);
        for (double v : s.y) yr.add(v);
    }
    xr = nice(xr, false);
    yr = nice(yr, !p.equal_axes);

    const double pw = kWidth - kLeft - kRight;
    const double ph = kPanelHeight - kTop - kBottom;
    if (p.equal_axes) {
        // widen the tighter range so one unit has the same length on both axes
        const double sx = (xr.hi - xr.lo) / pw;
        const double sy = (yr.hi - yr.lo) / ph;
        if (sx > sy) {
            const double c = 0.5 * (yr.lo + yr.hi);
            yr = {c - 0.5 * sx * ph, c + 0.5 * sx * ph};
        } else {
            const double c = 0.5 * (xr.lo + xr.hi);
            xr = {c - 0.5 * sy * pw, c + 0.5 * sy * pw};
        }
    }
    auto X = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto Y = [&](double v) { return y0 + kTop + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

    out += "<g>\n";
    out += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(y0 + 18) +
           "\" text-anchor=\"middle\" font-size=\"14\">" + escape(p.title) + "</text>\n";
    out += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(y0 + kTop) + "\" width=\"" + num(pw) + "\" height=\"" +
           num(ph) + "\" fill=\"none\" stroke=\"#000000\"/>\n";

    const double xs = tick_step(xr.hi - xr.lo);
    for (double v = std::ceil(xr.lo / xs) * xs; v <= xr.hi + 1e-9 * xs; v += xs) {
        out += "<line x1=\"" + num(X(v)) + "\" y1=\"" + num(y0 + kTop + ph) + "\" x2=\"" + num(X(v)) + "\" y2=\"" +
               num(y0 + kTop) + "\" stroke=\"#dddddd\"/>\n";
        out += "<text x=\"" + num(X(v)) + "\" y=\"" + num(y0 + kTop + ph + 16) +
               "\" text-anchor=\"middle\" font-size=\"11\">" + num(v, decimals_for(xs)) + "</text>\n";
    }
    const double ys = tick_step(yr.hi - yr.lo);
    for (double v = std::ceil(yr.lo / ys) * ys; v <= yr.hi + 1e-9 * ys; v += ys) {
        out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(Y(v)) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" +
               num(Y(v)) + "\" stroke=\"#dddddd\"/>\n";
        out += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(Y(v) + 4) +
               "\" text-anchor=\"end\" font-size=\"11\">" + num(v, decimals_for(ys)) + "</text>\n";
    }
    out += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(y0 + kPanelHeight - 10) +
           "\" text-anchor=\"middle\" font-size=\"12\">" + escape(p.x_label) + "</text>\n";
    out += "<text x=\"" + num(18) + "\" y=\"" + num(y0 + kTop + ph / 2) + "\" text-anchor=\"middle\" font-size=\"12\"" +
           " transform=\"rotate(-90 " + num(18) + " " + num(y0 + kTop + ph / 2) + ")\">" + escape(p.y_label) +
           "</text>\n";

    for (std::size_t i = 0; i < p.series.size(); ++i) {
        const Series& s = p.series[i];
        std::string points;
        for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
            if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
            if (!points.empty()) points += ' ';
            points += num(X(s.x[k])) + "," + num(Y(s.y[k]));
        }
        const std::string dash = s.dashed ? " stroke-dasharray=\"6,4\"" : "";
        out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"" + dash + " points=\"" +
               points + "\"/>\n";
        const double ly = y0 + kTop + 14 + 18 * static_cast<double>(i);
        const double lx = kLeft + pw + 12;
        out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 24) + "\" y2=\"" + num(ly) +
               "\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"" + dash + "/>\n";
        out += "<text x=\"" + num(lx + 30) + "\" y=\"" + num(ly + 4) + "\" font-size=\"11\">" + escape(s.label) +
               "</text>\n";
    }
    out += "</g>\n";
}

}  // namespace

std::string render_svg(const std::string& title, const std::vector<Panel>& panels) {
    const double height = kTitleHeight + kPanelHeight * static_cast<double>(panels.size());
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth, 0) + "\" height=\"" + num(height, 0) +
           "\" viewBox=\"0 0 " + num(kWidth, 0) + " " + num(height, 0) + "\" font-family=\"sans-serif\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    out += "<text x=\"" + num(kWidth / 2) + "\" y=\"26\" text-anchor=\"middle\" font-size=\"16\">" + escape(title) +
           "</text>\n";
    for (std::size_t i = 0; i < panels.size(); ++i) {
        render_panel(out, panels[i], kTitleHeight + kPanelHeight * static_cast<double>(i));
    }
    out += "</svg>\n";
    return out;
}

}  // namespace dtmnav::cli
