#include "epg/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "epg/bytes.hpp"
#include "epg/error.hpp"

namespace epg::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
constexpr double kLeft = 64, kRight = 150, kTop = 36, kBottom = 48;

std::string escape(const std::string& s)
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

std::string num(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

struct Axis {
    double lo, hi;
    bool log;
    double px_lo, px_hi;

    double map(double v) const
    {
        const double a = log ? std::log10(lo) : lo;
        const double b = log ? std::log10(hi) : hi;
        const double u = log ? std::log10(v) : v;
        return px_lo + (u - a) / (b - a) * (px_hi - px_lo);
    }
};

std::pair<double, double> padded(double lo, double hi)
{
    if (!(lo < hi)) {
        const double d = lo == 0 ? 1.0 : std::abs(lo) * 0.1;
        return {lo - d, hi + d};
    }
    return {lo, hi};
}

std::vector<double> ticks(const Axis& ax)
{
    std::vector<double> out;
    if (ax.log) {
        for (double p = std::floor(std::log10(ax.lo)); p <= std::ceil(std::log10(ax.hi)); ++p) {
            const double v = std::pow(10.0, p);
            if (v >= ax.lo && v <= ax.hi) out.push_back(v);
        }
        if (out.size() < 2) out = {ax.lo, ax.hi};
        return out;
    }
    const double span = ax.hi - ax.lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) {
            step = m * mag;
            break;
        }
    for (double v = std::ceil(ax.lo / step) * step; v <= ax.hi + 1e-9 * span; v += step) out.push_back(v);
    return out;
}

}  // namespace

std::string render(const LinePlot& plot)
{
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
    for (const auto& s : plot.series) {
        if (s.x.size() != s.y.size()) throw DimensionError("svg series '" + s.name + "' has mismatched x and y");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (plot.log_x && s.x[i] <= 0) continue;
            xlo = std::min(xlo, s.x[i]);
            xhi = std::max(xhi, s.x[i]);
            ylo = std::min(ylo, s.y[i]);
            yhi = std::max(yhi, s.y[i]);
        }
    }
    if (!std::isfinite(xlo)) xlo = plot.log_x ? 1 : 0, xhi = plot.log_x ? 10 : 1, ylo = 0, yhi = 1;
    if (plot.y_range) std::tie(ylo, yhi) = *plot.y_range;
    std::tie(xlo, xhi) = padded(xlo, xhi);
    std::tie(ylo, yhi) = padded(ylo, yhi);
    if (plot.log_x && xlo <= 0) xlo = xhi / 10;

    const double w = plot.width, h = plot.height;
    const Axis ax{xlo, xhi, plot.log_x, kLeft, w - kRight};
    const Axis ay{ylo, yhi, false, h - kBottom, kTop};

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
       << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(plot.title)
       << "</text>\n";

    for (const auto& [a, b] : plot.spans) {
        const double x0 = ax.map(std::max(a, xlo)), x1 = ax.map(std::min(b, xhi));
        if (x1 <= x0) continue;
        os << "<rect class=\"span\" x=\"" << num(x0) << "\" y=\"" << kTop << "\" width=\"" << num(x1 - x0)
           << "\" height=\"" << num(h - kBottom - kTop) << "\" fill=\"#ffd54f\" fill-opacity=\"0.35\"/>\n";
    }

    os << "<g stroke=\"#999\" stroke-width=\"0.5\">\n";
    for (double t : ticks(ax)) {
        os << "<line x1=\"" << num(ax.map(t)) << "\" y1=\"" << h - kBottom << "\" x2=\"" << num(ax.map(t))
           << "\" y2=\"" << h - kBottom + 4 << "\"/>";
        os << "<text stroke=\"none\" fill=\"#333\" x=\"" << num(ax.map(t)) << "\" y=\"" << h - kBottom + 16
           << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
    }
    for (double t : ticks(ay)) {
        os << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << num(ay.map(t)) << "\" x2=\"" << kLeft << "\" y2=\""
           << num(ay.map(t)) << "\"/>";
        os << "<text stroke=\"none\" fill=\"#333\" x=\"" << kLeft - 6 << "\" y=\"" << num(ay.map(t) + 4)
           << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
    }
    os << "</g>\n";
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << w - kLeft - kRight << "\" height=\""
       << h - kTop - kBottom << "\" fill=\"none\" stroke=\"#333\"/>\n";
    os << "<text x=\"" << (kLeft + w - kRight) / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">"
       << escape(plot.x_label) << "</text>\n";
    os << "<text transform=\"translate(16," << (kTop + h - kBottom) / 2
       << ") rotate(-90)\" text-anchor=\"middle\">" << escape(plot.y_label) << "</text>\n";

    auto polyline = [&](const Series& s, const std::string& color, double width, auto&& keep) {
        std::string pts;
        auto flush = [&] {
            if (pts.empty()) return;
            os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << '"'
               << (s.dashed ? " stroke-dasharray=\"5,4\"" : "") << " points=\"" << pts << "\"/>\n";
            pts.clear();
        };
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const bool ok = std::isfinite(s.x[i]) && std::isfinite(s.y[i]) && (!plot.log_x || s.x[i] > 0) &&
                            keep(s.x[i]);
            if (!ok) {
                flush();
                continue;
            }
            const double y = std::clamp(s.y[i], ylo, yhi);
            pts += num(ax.map(s.x[i])) + "," + num(ay.map(y)) + " ";
        }
        flush();
    };

    for (std::size_t k = 0; k < plot.series.size(); ++k) {
        const auto& s = plot.series[k];
        const std::string color = s.color.empty() ? kPalette[k % std::size(kPalette)] : s.color;
        polyline(s, color, 1.2, [](double) { return true; });
        os << "<line x1=\"" << w - kRight + 12 << "\" y1=\"" << kTop + 14 * k + 6 << "\" x2=\"" << w - kRight + 32
           << "\" y2=\"" << kTop + 14 * k + 6 << "\" stroke=\"" << color << "\" stroke-width=\"2\""
           << (s.dashed ? " stroke-dasharray=\"5,4\"" : "") << "/>";
        os << "<text x=\"" << w - kRight + 36 << "\" y=\"" << kTop + 14 * k + 10 << "\">" << escape(s.name)
           << "</text>\n";
    }
    if (plot.highlight && !plot.series.empty()) {
        const auto inside = [&](double x) {
            return std::any_of(plot.spans.begin(), plot.spans.end(),
                               [&](const auto& sp) { return x >= sp.first && x <= sp.second; });
        };
        polyline(plot.series.front(), "#e65100", 2.2, inside);
    }
    os << "</svg>\n";
    return os.str();
}

void write(const LinePlot& plot, const std::string& path) { write_text(path, render(plot)); }

}  // namespace epg::svg
