#include "dualforge/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dualforge/format.hpp"

namespace dualforge {

namespace {

constexpr double kFloor = 1e-16;

const char* const kPalette[] = {"#c0392b", "#27ae60", "#2980b9", "#8e44ad",
                                "#d35400", "#16a085", "#7f8c8d", "#2c3e50"};

std::string svg_num(double v) {
  // Two decimals are plenty for pixel coordinates and keep the output stable.
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string render_semilogy(const std::vector<PlotSeries>& series, const std::string& x_label,
                            const std::string& y_label, int width, int height) {
  if (series.empty()) throw std::invalid_argument("render_semilogy: no series");

  double x_min = 0.0, x_max = 1.0, ly_min = 0.0, ly_max = 1.0;
  bool first = true, clamped = false;
  for (const PlotSeries& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("render_semilogy: ragged series");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double y = s.y[i];
      if (y <= kFloor) {
        if (y <= 0.0) clamped = true;
        y = kFloor;
      }
      const double ly = std::log10(y);
      if (first) {
        x_min = x_max = s.x[i];
        ly_min = ly_max = ly;
        first = false;
      } else {
        x_min = std::min(x_min, s.x[i]);
        x_max = std::max(x_max, s.x[i]);
        ly_min = std::min(ly_min, ly);
        ly_max = std::max(ly_max, ly);
      }
    }
  }
  if (first) throw std::invalid_argument("render_semilogy: empty series");
  if (x_max == x_min) x_max = x_min + 1.0;
  if (ly_max == ly_min) ly_max = ly_min + 1.0;

  const double ml = 64, mr = 16, mt = 20, mb = 46;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double y) {
    double v = y <= kFloor ? kFloor : y;
    return mt + (ly_max - std::log10(v)) / (ly_max - ly_min) * ph;
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  // decade gridlines and y tick labels
  for (int e = static_cast<int>(std::ceil(ly_min)); e <= static_cast<int>(std::floor(ly_max));
       ++e) {
    const double yy = py(std::pow(10.0, e));
    out << "<line x1=\"" << svg_num(ml) << "\" y1=\"" << svg_num(yy) << "\" x2=\""
        << svg_num(ml + pw) << "\" y2=\"" << svg_num(yy)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << svg_num(ml - 6) << "\" y=\"" << svg_num(yy + 4)
        << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">1e" << e
        << "</text>\n";
  }
  // x ticks: five evenly spaced
  for (int k = 0; k <= 4; ++k) {
    const double xv = x_min + (x_max - x_min) * k / 4.0;
    out << "<text x=\"" << svg_num(px(xv)) << "\" y=\"" << svg_num(mt + ph + 16)
        << "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">"
        << fmt_double(xv) << "</text>\n";
  }
  out << "<rect x=\"" << svg_num(ml) << "\" y=\"" << svg_num(mt) << "\" width=\""
      << svg_num(pw) << "\" height=\"" << svg_num(ph)
      << "\" fill=\"none\" stroke=\"#333333\"/>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (i) out << ' ';
      out << svg_num(px(series[s].x[i])) << ',' << svg_num(py(series[s].y[i]));
    }
    out << "\"/>\n";
    out << "<text x=\"" << svg_num(ml + 8) << "\" y=\"" << svg_num(mt + 14 + 14 * s)
        << "\" font-size=\"11\" fill=\"" << color << "\" font-family=\"sans-serif\">"
        << series[s].label << "</text>\n";
  }

  out << "<text x=\"" << svg_num(ml + pw / 2) << "\" y=\"" << svg_num(height - 10)
      << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">" << x_label
      << "</text>\n";
  out << "<text x=\"14\" y=\"" << svg_num(mt + ph / 2)
      << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\" transform=\"rotate(-90 14 "
      << svg_num(mt + ph / 2) << ")\">" << y_label << "</text>\n";
  if (clamped)
    out << "<text x=\"" << svg_num(ml) << "\" y=\"" << svg_num(height - 10)
        << "\" font-size=\"10\" fill=\"#777777\" font-family=\"sans-serif\">nonpositive values clamped to 1e-16</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace dualforge
