#pragma once

#include <string>
#include <vector>

namespace dtmnav::cli {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#000000";
    bool dashed = false;
};

struct Panel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    /// Equal scale on both axes (top-view plots).
    bool equal_axes = false;
};

/// Panels stacked vertically in one SVG document. Output depends only on
/// the input values.
std::string render_svg(const std::string& title, const std::vector<Panel>& panels);

}  // namespace dtmnav::cli
