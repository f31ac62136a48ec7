#include "probcal/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace probcal::svg {

namespace {

constexpr double kPanelW = 320.0, kPanelH = 260.0;
constexpr double kMarginL = 56.0, kMarginR = 14.0, kMarginT = 40.0, kMarginB = 44.0;

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

double tx(double x, bool log_x, double x0, double x1, double px0, double px1) {
    if (log_x) {
        x = std::log10(x);
        x0 = std::log10(x0);
        x1 = std::log10(x1);
    }
    if (x1 == x0) return (px0 + px1) / 2.0;
    return px0 + (x - x0) / (x1 - x0) * (px1 - px0);
}

}  // namespace

void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Panel>& panels, bool log_x) {
    if (panels.empty()) throw std::invalid_argument("write_line_plot: no panels");

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& p : panels) {
        for (const auto& s : p.series) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                const double half = i < s.band.size() ? s.band[i] : 0.0;
                ymin = std::min(ymin, s.y[i] - half);
                ymax = std::max(ymax, s.y[i] + half);
            }
        }
    }
    if (!std::isfinite(xmin)) {  // no data at all: still a valid file
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (ymin == ymax) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double ypad = 0.06 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double width = kPanelW * static_cast<double>(panels.size());
    const double height = kPanelH;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write SVG: " + path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << width / 2 << "\" y=\"16\" text-anchor=\"middle\" font-size=\"13\" "
        << "font-family=\"sans-serif\">" << title << "</text>\n";

    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
        const auto& panel = panels[pi];
        const double ox = kPanelW * static_cast<double>(pi);
        const double px0 = ox + kMarginL, px1 = ox + kPanelW - kMarginR;
        const double py0 = kPanelH - kMarginB, py1 = kMarginT;

        out << "<rect x=\"" << px0 << "\" y=\"" << py1 << "\" width=\"" << px1 - px0
            << "\" height=\"" << py0 - py1 << "\" fill=\"none\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"" << py1 - 6
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
            << panel.title << "</text>\n";
        out << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"" << kPanelH - 8
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << x_label
            << "</text>\n";
        if (pi == 0) {
            out << "<text x=\"14\" y=\"" << (py0 + py1) / 2
                << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\" "
                << "transform=\"rotate(-90 14 " << (py0 + py1) / 2 << ")\">" << y_label
                << "</text>\n";
        }

        // y ticks at min, 0 (if inside), max
        for (double yt : {ymin + ypad, 0.0, ymax - ypad}) {
            if (yt < ymin || yt > ymax) continue;
            const double py = py0 + (yt - ymin) / (ymax - ymin) * (py1 - py0);
            out << "<line x1=\"" << px0 << "\" y1=\"" << py << "\" x2=\"" << px1 << "\" y2=\""
                << py << "\" stroke=\"#ddd\"/>\n"
                << "<text x=\"" << px0 - 4 << "\" y=\"" << py + 3
                << "\" text-anchor=\"end\" font-size=\"9\" font-family=\"sans-serif\">" << fmt(yt)
                << "</text>\n";
        }

        for (const auto& s : panel.series) {
            if (s.x.empty()) continue;
            auto px = [&](double x) { return tx(x, log_x, xmin, xmax, px0, px1); };
            auto py = [&](double y) { return py0 + (y - ymin) / (ymax - ymin) * (py1 - py0); };
            if (!s.band.empty()) {
                out << "<polygon fill=\"" << s.color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
                for (std::size_t i = 0; i < s.x.size(); ++i)
                    out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i] + s.band[i])) << ' ';
                for (std::size_t i = s.x.size(); i-- > 0;)
                    out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i] - s.band[i])) << ' ';
                out << "\"/>\n";
            }
            out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
            out << "\"/>\n";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                out << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i]))
                    << "\" r=\"2\" fill=\"" << s.color << "\"/>\n";
        }

        // x tick labels at the data points of the first series
        if (!panel.series.empty()) {
            for (double xv : panel.series.front().x) {
                const double px = tx(xv, log_x, xmin, xmax, px0, px1);
                out << "<text x=\"" << px << "\" y=\"" << py0 + 14
                    << "\" text-anchor=\"middle\" font-size=\"9\" font-family=\"sans-serif\">"
                    << fmt(xv) << "</text>\n";
            }
        }
    }

    // legend from the first panel
    double lx = kMarginL + 6.0;
    for (const auto& s : panels.front().series) {
        out << "<rect x=\"" << lx << "\" y=\"24\" width=\"10\" height=\"3\" fill=\"" << s.color
            << "\"/>\n"
            << "<text x=\"" << lx + 13 << "\" y=\"29\" font-size=\"9\" font-family=\"sans-serif\">"
            << s.name << "</text>\n";
        lx += 13.0 + 6.5 * static_cast<double>(s.name.size()) + 10.0;
    }

    out << "</svg>\n";
}

}  // namespace probcal::svg
