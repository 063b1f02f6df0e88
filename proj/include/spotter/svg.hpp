#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace spotter::svg {

struct ScatterPoint {
  double x = 0.0, y = 0.0;
  bool highlight = false;  // forget points: red; others: gray
};

void write_scatter(const std::filesystem::path& path,
                   const std::vector<ScatterPoint>& points,
                   const std::string& title);

struct Series {
  std::string label;
  std::vector<double> x, y;
};

void write_line_plot(const std::filesystem::path& path,
                     const std::vector<Series>& series,
                     const std::string& x_label, const std::string& y_label,
                     const std::string& title);

}  // namespace spotter::svg
