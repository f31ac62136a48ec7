#pragma once

#include <string>
#include <vector>

namespace probcal::svg {

struct Series {
    std::string name;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> band;  // optional 1-sigma half widths, same length as y
};

struct Panel {
    std::string title;
    std::vector<Series> series;
};

// Static multi-panel line plot with shaded bands; panels share the y range.
void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Panel>& panels, bool log_x);

}  // namespace probcal::svg
