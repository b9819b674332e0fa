#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>

#include "biasbench/corpus.hpp"
#include "biasbench/matrix.hpp"

namespace biasbench::plot {

struct PlotStyle {
  double width = 800.0;
  double height = 600.0;
  double margin = 40.0;
  double point_radius = 2.5;
  /// Fill colours indexed by class_index().
  std::array<std::string, kNumClasses> colors = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::string title;

  /// Throws ConfigError on non-positive sizes, a margin that leaves no plot
  /// area, or duplicate class colours.
  void validate() const;
};

/// SVG 1.1 scatter plot of the first two coordinate columns, one circle per
/// row, coloured by label, with a class legend in the top-right corner.
/// Output is a pure function of the inputs (3 decimal places throughout).
std::string render_scatter_svg(const Matrix& coords, std::span<const BiasClass> labels, const PlotStyle& style);

void scatter_svg(const Matrix& coords, std::span<const BiasClass> labels, const PlotStyle& style,
                 const std::filesystem::path& out_path);

}  // namespace biasbench::plot
