#include "spotter/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "spotter/common.hpp"

namespace spotter::svg {

namespace {

constexpr double kWidth = 640, kHeight = 480, kPad = 48;

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo < hi)) {
      lo -= 1.0;
      hi += 1.0;
    }
  }
  double map(double v, double out_lo, double out_hi) const {
    return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo);
  }
};

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                               "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

void write_scatter(const std::filesystem::path& path,
                   const std::vector<ScatterPoint>& points,
                   const std::string& title) {
  Range rx, ry;
  for (const auto& p : points) {
    rx.add(p.x);
    ry.add(p.y);
  }
  rx.finish();
  ry.finish();

  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth
      << "' height='" << kHeight << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << kWidth / 2 << "' y='20' text-anchor='middle' "
      << "font-family='sans-serif' font-size='14'>" << title << "</text>\n";
  // gray first so highlighted points stay visible
  for (bool highlight : {false, true}) {
    for (const auto& p : points) {
      if (p.highlight != highlight) continue;
      out << "<circle cx='" << rx.map(p.x, kPad, kWidth - kPad) << "' cy='"
          << ry.map(p.y, kHeight - kPad, kPad) << "' r='2' fill='"
          << (p.highlight ? "#d62728" : "#9aa0a6") << "' fill-opacity='0.7'/>\n";
    }
  }
  out << "</svg>\n";
}

void write_line_plot(const std::filesystem::path& path,
                     const std::vector<Series>& series,
                     const std::string& x_label, const std::string& y_label,
                     const std::string& title) {
  Range rx, ry;
  for (const auto& s : series) {
    for (double v : s.x) rx.add(v);
    for (double v : s.y) ry.add(v);
  }
  rx.finish();
  ry.finish();

  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth
      << "' height='" << kHeight << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << kWidth / 2 << "' y='20' text-anchor='middle' "
      << "font-family='sans-serif' font-size='14'>" << title << "</text>\n"
      << "<line x1='" << kPad << "' y1='" << kHeight - kPad << "' x2='"
      << kWidth - kPad << "' y2='" << kHeight - kPad
      << "' stroke='black'/>\n"
      << "<line x1='" << kPad << "' y1='" << kHeight - kPad << "' x2='" << kPad
      << "' y2='" << kPad << "' stroke='black'/>\n"
      << "<text x='" << kWidth / 2 << "' y='" << kHeight - 10
      << "' text-anchor='middle' font-family='sans-serif' font-size='12'>"
      << x_label << "</text>\n"
      << "<text x='14' y='" << kHeight / 2
      << "' text-anchor='middle' font-family='sans-serif' font-size='12' "
      << "transform='rotate(-90 14 " << kHeight / 2 << ")'>" << y_label
      << "</text>\n";
  // axis extremes
  out << "<text x='" << kPad << "' y='" << kHeight - kPad + 16
      << "' font-family='sans-serif' font-size='10'>" << rx.lo << "</text>\n"
      << "<text x='" << kWidth - kPad << "' y='" << kHeight - kPad + 16
      << "' text-anchor='end' font-family='sans-serif' font-size='10'>"
      << rx.hi << "</text>\n"
      << "<text x='" << kPad - 4 << "' y='" << kHeight - kPad
      << "' text-anchor='end' font-family='sans-serif' font-size='10'>"
      << ry.lo << "</text>\n"
      << "<text x='" << kPad - 4 << "' y='" << kPad
      << "' text-anchor='end' font-family='sans-serif' font-size='10'>"
      << ry.hi << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kSeriesColors[si % 8];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << rx.map(s.x[i], kPad, kWidth - kPad) << ","
          << ry.map(s.y[i], kHeight - kPad, kPad) << " ";
    }
    out << "'/>\n";
    out << "<text x='" << kWidth - kPad + 4 << "' y='" << kPad + 16 * si
        << "' font-family='sans-serif' font-size='10' fill='" << color << "'>"
        << s.label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace spotter::svg
