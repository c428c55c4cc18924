#pragma once

#include <string>
#include <utility>
#include <vector>

namespace msgcoop {

// Minimal SVG line chart: one polyline per series over categorical x labels.
// Returns false (after a stderr warning upstream) when the file cannot be
// written; never throws.
bool write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::vector<std::string>& x_labels,
                         const std::vector<std::pair<std::string, std::vector<double>>>& series);

}  // namespace msgcoop
