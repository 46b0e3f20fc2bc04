#include "tpolab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tpolab {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

constexpr double kWidth = 800, kHeight = 500;
constexpr double kLeft = 70, kRight = 30, kTop = 50, kBottom = 60;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Scale {
  double lo, hi, pix_lo, pix_hi;
  double operator()(double v) const {
    if (hi == lo) return 0.5 * (pix_lo + pix_hi);
    return pix_lo + (v - lo) / (hi - lo) * (pix_hi - pix_lo);
  }
};

void draw_axes(std::ostringstream& out, const Scale& sx, const Scale& sy,
               const std::string& title, const std::string& x_label,
               const std::string& y_label) {
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom
      << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << kHeight - kBottom
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = sx.lo + (sx.hi - sx.lo) * i / 5.0;
    const double yv = sy.lo + (sy.hi - sy.lo) * i / 5.0;
    out << "<text x=\"" << sx(xv) << "\" y=\"" << kHeight - kBottom + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(xv)
        << "</text>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy(yv) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(yv)
        << "</text>\n";
  }
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" font-size=\"15\" "
      << "text-anchor=\"middle\">" << title << "</text>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 16
      << "\" font-size=\"12\" text-anchor=\"middle\">" << x_label
      << "</text>\n";
  out << "<text x=\"20\" y=\"" << kHeight / 2
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 "
      << "20 " << kHeight / 2 << ")\">" << y_label << "</text>\n";
}

}  // namespace

std::string svg_line_chart(const std::vector<LineSeries>& series,
                           const std::string& title,
                           const std::string& x_label,
                           const std::string& y_label) {
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const LineSeries& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double ylo = s.band_lo.size() == s.x.size() ? s.band_lo[i] : s.y[i];
      const double yhi = s.band_hi.size() == s.x.size() ? s.band_hi[i] : s.y[i];
      if (first) {
        x_min = x_max = s.x[i];
        y_min = ylo;
        y_max = yhi;
        first = false;
      }
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min({y_min, ylo, s.y[i]});
      y_max = std::max({y_max, yhi, s.y[i]});
    }
  }
  // 5% margin on both axes.
  const double xm = 0.05 * (x_max - x_min), ym = 0.05 * (y_max - y_min);
  Scale sx{x_min - xm, x_max + xm, kLeft, kWidth - kRight};
  Scale sy{y_min - ym, y_max + ym, kHeight - kBottom, kTop};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  draw_axes(out, sx, sy, title, x_label, y_label);

  for (std::size_t k = 0; k < series.size(); ++k) {
    const LineSeries& s = series[k];
    const char* color = kPalette[k % kPaletteSize];
    if (s.band_lo.size() == s.x.size() && s.band_hi.size() == s.x.size()) {
      out << "<path d=\"M";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        out << (i ? " L" : "") << fmt(sx(s.x[i])) << " "
            << fmt(sy(s.band_hi[i]));
      }
      for (std::size_t i = s.x.size(); i-- > 0;) {
        out << " L" << fmt(sx(s.x[i])) << " " << fmt(sy(s.band_lo[i]));
      }
      out << " Z\" fill=\"" << color << "\" fill-opacity=\"0.15\" "
          << "stroke=\"none\"/>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << fmt(sx(s.x[i])) << "," << fmt(sy(s.y[i])) << " ";
    }
    out << "\"/>\n";
    out << "<text x=\"" << kWidth - kRight - 8 << "\" y=\""
        << kTop + 16 * (k + 1) << "\" font-size=\"12\" text-anchor=\"end\" "
        << "fill=\"" << color << "\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_stacked_bars(const std::vector<std::string>& group_labels,
                             const std::vector<std::string>& segment_labels,
                             const Matrix& fractions,
                             const std::string& title) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" font-size=\"15\" "
      << "text-anchor=\"middle\">" << title << "</text>\n";

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const Eigen::Index groups = fractions.rows();
  const Eigen::Index segs = fractions.cols();
  const double bar_w = plot_w / std::max<double>(1.0, 1.5 * groups + 0.5);

  for (Eigen::Index g = 0; g < groups; ++g) {
    const double x = kLeft + plot_w * (g + 0.5) / groups - bar_w / 2;
    double y = kHeight - kBottom;
    for (Eigen::Index c = 0; c < segs; ++c) {
      const double h = plot_h * fractions(g, c);
      y -= h;
      out << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\""
          << fmt(bar_w) << "\" height=\"" << fmt(h) << "\" fill=\""
          << kPalette[c % kPaletteSize] << "\"/>\n";
    }
    out << "<text x=\"" << fmt(x + bar_w / 2) << "\" y=\""
        << kHeight - kBottom + 18 << "\" font-size=\"11\" "
        << "text-anchor=\"middle\">"
        << (g < static_cast<Eigen::Index>(group_labels.size())
                ? group_labels[static_cast<std::size_t>(g)]
                : std::to_string(g))
        << "</text>\n";
  }
  for (Eigen::Index c = 0; c < segs; ++c) {
    out << "<rect x=\"" << kWidth - kRight - 130 << "\" y=\""
        << kTop + 18 * c << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[c % kPaletteSize] << "\"/>\n";
    out << "<text x=\"" << kWidth - kRight - 112 << "\" y=\""
        << kTop + 18 * c + 10 << "\" font-size=\"12\">"
        << (c < static_cast<Eigen::Index>(segment_labels.size())
                ? segment_labels[static_cast<std::size_t>(c)]
                : std::to_string(c))
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace tpolab
