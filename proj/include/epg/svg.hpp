#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace epg::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::string color;  // empty picks from the default palette
    bool dashed = false;
};

// A plain line chart. `spans` are x-intervals drawn as shaded bands behind
// the data, `highlight` re-strokes the first series inside those intervals.
struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    std::optional<std::pair<double, double>> y_range;
    bool log_x = false;
    std::vector<std::pair<double, double>> spans;
    bool highlight = false;
    int width = 720;
    int height = 360;
};

std::string render(const LinePlot& plot);
void write(const LinePlot& plot, const std::string& path);

}  // namespace epg::svg
