#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace sied::plot {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

struct Range {
  double lo = 0.0;
  double hi = 1.0;

  double map(double v, double out_lo, double out_hi) const {
    const double span = hi - lo;
    const double s = span != 0.0 ? (v - lo) / span : 0.5;
    return out_lo + s * (out_hi - out_lo);
  }
};

Range pad(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    return {0.0, 1.0};
  }
  if (lo == hi) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double margin = 0.05 * (hi - lo);
  return {lo - margin, hi + margin};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

void axes(std::ofstream& out, const std::string& title,
          const std::string& x_label, const std::string& y_label,
          const Range& xr, const Range& yr) {
  out << "<rect x='" << kLeft << "' y='" << kTop << "' width='"
      << kWidth - kLeft - kRight << "' height='" << kHeight - kTop - kBottom
      << "' fill='none' stroke='#444'/>\n";
  out << "<text x='" << kWidth / 2 << "' y='22' text-anchor='middle' "
      << "font-size='15'>" << title << "</text>\n";
  out << "<text x='" << kWidth / 2 << "' y='" << kHeight - 12
      << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";
  out << "<text x='16' y='" << kHeight / 2
      << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 "
      << kHeight / 2 << ")'>" << y_label << "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 5.0;
    const double px = xr.map(fx, kLeft, kWidth - kRight);
    out << "<line x1='" << px << "' y1='" << kHeight - kBottom << "' x2='"
        << px << "' y2='" << kHeight - kBottom + 5 << "' stroke='#444'/>\n";
    out << "<text x='" << px << "' y='" << kHeight - kBottom + 20
        << "' text-anchor='middle' font-size='11'>" << fmt(fx) << "</text>\n";
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    const double py = yr.map(fy, kHeight - kBottom, kTop);
    out << "<line x1='" << kLeft - 5 << "' y1='" << py << "' x2='" << kLeft
        << "' y2='" << py << "' stroke='#444'/>\n";
    out << "<text x='" << kLeft - 8 << "' y='" << py + 4
        << "' text-anchor='end' font-size='11'>" << fmt(fy) << "</text>\n";
  }
}

std::ofstream open_svg(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write plot '" + path + "'");
  }
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth
      << "' height='" << kHeight << "' font-family='sans-serif'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n";
  return out;
}

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const Series& s : series) {
    for (double v : s.x) {
      xlo = std::min(xlo, v);
      xhi = std::max(xhi, v);
    }
    for (double v : s.y) {
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  }
  const Range xr = pad(xlo, xhi);
  const Range yr = pad(ylo, yhi);

  std::ofstream out = open_svg(path);
  axes(out, title, x_label, y_label, xr, yr);
  for (const Series& s : series) {
    out << "<polyline fill='none' stroke='" << s.color
        << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << xr.map(s.x[i], kLeft, kWidth - kRight) << ','
          << yr.map(s.y[i], kHeight - kBottom, kTop) << ' ';
    }
    out << "'/>\n";
  }
  double ly = kTop + 14.0;
  for (const Series& s : series) {
    out << "<line x1='" << kWidth - kRight - 150 << "' y1='" << ly - 4
        << "' x2='" << kWidth - kRight - 125 << "' y2='" << ly - 4
        << "' stroke='" << s.color << "' stroke-width='2'/>\n";
    out << "<text x='" << kWidth - kRight - 120 << "' y='" << ly
        << "' font-size='11'>" << s.label << "</text>\n";
    ly += 16.0;
  }
  out << "</svg>\n";
}

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::string& y_label,
                     const std::vector<std::pair<std::string, double>>& bars) {
  double yhi = 0.0;
  for (const auto& [label, v] : bars) yhi = std::max(yhi, v);
  const Range yr = pad(0.0, yhi);
  const Range xr{0.0, static_cast<double>(bars.size())};

  std::ofstream out = open_svg(path);
  axes(out, title, "", y_label, xr, yr);
  const double slot = (kWidth - kLeft - kRight) / bars.size();
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double x0 = kLeft + slot * i + 0.2 * slot;
    const double y0 = yr.map(bars[i].second, kHeight - kBottom, kTop);
    out << "<rect x='" << x0 << "' y='" << y0 << "' width='" << 0.6 * slot
        << "' height='" << (kHeight - kBottom) - y0
        << "' fill='#5b8fd9' stroke='#2c4f80'/>\n";
    out << "<text x='" << x0 + 0.3 * slot << "' y='" << kHeight - kBottom + 20
        << "' text-anchor='middle' font-size='12'>" << bars[i].first
        << "</text>\n";
    out << "<text x='" << x0 + 0.3 * slot << "' y='" << y0 - 5
        << "' text-anchor='middle' font-size='11'>" << fmt(bars[i].second)
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace sied::plot
