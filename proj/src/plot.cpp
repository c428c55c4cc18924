#include "msgcoop/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace msgcoop {

namespace {

const char* series_color(std::size_t index) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  return colors[index % 5];
}

std::string format_number(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.4g", v);
  return buffer;
}

}  // namespace

bool write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::vector<std::string>& x_labels,
                         const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  if (x_labels.empty() || series.empty()) return false;
  std::ofstream out(path);
  if (!out) return false;

  const double width = 640, height = 400;
  const double left = 60, right = 600, top = 50, bottom = 340;

  double lo = series[0].second[0], hi = lo;
  for (const auto& [name, values] : series) {
    for (const double v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi - lo < 1e-9) {
    hi += 1.0;
    lo -= 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const auto x_of = [&](std::size_t i) {
    if (x_labels.size() == 1) return (left + right) / 2.0;
    return left + (right - left) * static_cast<double>(i) /
                      static_cast<double>(x_labels.size() - 1);
  };
  const auto y_of = [&](double v) { return bottom - (bottom - top) * (v - lo) / (hi - lo); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
      << "font-family=\"sans-serif\">" << title << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\""
      << bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";

  for (int tick = 0; tick <= 4; ++tick) {
    const double v = lo + (hi - lo) * tick / 4.0;
    const double y = y_of(v);
    out << "<line x1=\"" << left - 4 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\"" << y
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
        << format_number(v) << "</text>\n";
  }
  for (std::size_t i = 0; i < x_labels.size(); ++i) {
    const double x = x_of(i);
    out << "<line x1=\"" << x << "\" y1=\"" << bottom << "\" x2=\"" << x << "\" y2=\""
        << bottom + 4 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << x << "\" y=\"" << bottom + 18
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << x_labels[i]
        << "</text>\n";
  }

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& [name, values] = series[s];
    out << "<polyline fill=\"none\" stroke=\"" << series_color(s) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < values.size() && i < x_labels.size(); ++i) {
      out << x_of(i) << "," << y_of(values[i]) << " ";
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < values.size() && i < x_labels.size(); ++i) {
      out << "<circle cx=\"" << x_of(i) << "\" cy=\"" << y_of(values[i]) << "\" r=\"3\" fill=\""
          << series_color(s) << "\"/>\n";
    }
    const double ly = top + 16.0 * static_cast<double>(s);
    out << "<line x1=\"" << right - 120 << "\" y1=\"" << ly << "\" x2=\"" << right - 100
        << "\" y2=\"" << ly << "\" stroke=\"" << series_color(s) << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << right - 94 << "\" y=\"" << ly + 4
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << name << "</text>\n";
  }
  out << "</svg>\n";
  return static_cast<bool>(out);
}

}  // namespace msgcoop
