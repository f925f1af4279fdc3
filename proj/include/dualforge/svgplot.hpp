#ifndef DUALFORGE_SVGPLOT_HPP
#define DUALFORGE_SVGPLOT_HPP

#include <string>
#include <vector>

namespace dualforge {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Semi-log-y line chart, byte-deterministic for identical inputs. Values
// y <= 0 are clamped to the 1e-16 plot floor and flagged in a footnote.
std::string render_semilogy(const std::vector<PlotSeries>& series,
                            const std::string& x_label, const std::string& y_label,
                            int width = 760, int height = 480);

}  // namespace dualforge

#endif  // DUALFORGE_SVGPLOT_HPP
