#pragma once

#include <string>
#include <vector>

#include "tpolab/types.hpp"

namespace tpolab {

struct LineSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band_lo;  // optional CI band (same length as x)
  std::vector<double> band_hi;
};

/// Hand-rolled line chart: axes, one polyline per series, optional shaded
/// bands, axis ranges covering the data with a 5% margin.
std::string svg_line_chart(const std::vector<LineSeries>& series,
                           const std::string& title,
                           const std::string& x_label,
                           const std::string& y_label);

/// Stacked bars, one bar per group, segments per label; heights in [0,1].
std::string svg_stacked_bars(const std::vector<std::string>& group_labels,
                             const std::vector<std::string>& segment_labels,
                             const Matrix& fractions,  // groups x segments
                             const std::string& title);

}  // namespace tpolab
