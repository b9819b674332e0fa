#include "biasbench/plot.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "biasbench/errors.hpp"
#include "biasbench/io.hpp"

namespace biasbench::plot {

namespace {

std::string num(double v) {
  std::string s = format_fixed(v, 3);
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Linear map of [lo, hi] onto [out_lo, out_hi]; a degenerate range maps to the centre.
struct Axis {
  double lo, hi, out_lo, out_hi;
  double operator()(double v) const {
    if (hi == lo) return 0.5 * (out_lo + out_hi);
    return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo);
  }
};

}  // namespace

void PlotStyle::validate() const {
  if (!(width > 0.0 && height > 0.0)) throw ConfigError("plot: width and height must be positive");
  if (!(margin >= 0.0) || 2.0 * (margin + point_radius) >= std::min(width, height))
    throw ConfigError("plot: margin leaves no room for the plot area");
  if (!(point_radius > 0.0)) throw ConfigError("plot: point radius must be positive");
  std::set<std::string> distinct(colors.begin(), colors.end());
  if (distinct.size() != colors.size()) throw ConfigError("plot: class colours must be distinct");
}

std::string render_scatter_svg(const Matrix& coords, std::span<const BiasClass> labels, const PlotStyle& style) {
  style.validate();
  if (coords.rows() == 0) throw DataError("nothing to plot");
  if (coords.cols() < 2) throw DataError("plot: need two coordinate columns");
  if (labels.size() != coords.rows())
    throw DataError("plot: " + std::to_string(coords.rows()) + " points but " + std::to_string(labels.size()) + " labels");

  double xmin = coords(0, 0), xmax = xmin, ymin = coords(0, 1), ymax = ymin;
  for (std::size_t i = 0; i < coords.rows(); ++i) {
    const double x = coords(i, 0), y = coords(i, 1);
    if (!std::isfinite(x) || !std::isfinite(y)) throw DataError("plot: non-finite coordinate in row " + std::to_string(i));
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  // Inset by the radius so every circle stays inside the viewBox.
  const double inset = style.margin + style.point_radius;
  const Axis ax{xmin, xmax, inset, style.width - inset};
  const Axis ay{ymin, ymax, style.height - inset, inset};  // SVG y grows downward

  std::string out;
  out.reserve(coords.rows() * 80 + 1024);
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(style.width) + "\" height=\"" +
         num(style.height) + "\" viewBox=\"0 0 " + num(style.width) + " " + num(style.height) + "\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + num(style.width) + "\" height=\"" + num(style.height) + "\" fill=\"#ffffff\"/>\n";
  if (!style.title.empty())
    out += "<text x=\"" + num(style.width / 2.0) + "\" y=\"" + num(std::max(12.0, style.margin * 0.6)) +
           "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">" + xml_escape(style.title) + "</text>\n";

  out += "<g stroke=\"none\">\n";
  for (std::size_t i = 0; i < coords.rows(); ++i) {
    out += "<circle cx=\"" + num(ax(coords(i, 0))) + "\" cy=\"" + num(ay(coords(i, 1))) + "\" r=\"" +
           num(style.point_radius) + "\" fill=\"" + style.colors[class_index(labels[i])] + "\"/>\n";
  }
  out += "</g>\n";

  // Legend: colour swatches are rects so circles stay one-per-document.
  constexpr double kRow = 16.0;
  constexpr double kSwatch = 10.0;
  constexpr double kBoxWidth = 110.0;
  const double box_x = std::max(0.0, style.width - style.margin - kBoxWidth);
  const double box_y = std::min(style.margin, style.height - kRow * kNumClasses - 8.0);
  out += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect x=\"" + num(box_x) + "\" y=\"" + num(box_y) + "\" width=\"" + num(kBoxWidth) + "\" height=\"" +
         num(kRow * kNumClasses + 8.0) + "\" fill=\"#ffffff\" fill-opacity=\"0.85\" stroke=\"#999999\"/>\n";
  for (BiasClass c : kAllClasses) {
    const double y = box_y + 4.0 + kRow * static_cast<double>(class_index(c));
    out += "<rect x=\"" + num(box_x + 6.0) + "\" y=\"" + num(y + (kRow - kSwatch) / 2.0) + "\" width=\"" + num(kSwatch) +
           "\" height=\"" + num(kSwatch) + "\" fill=\"" + style.colors[class_index(c)] + "\"/>\n";
    out += "<text x=\"" + num(box_x + 22.0) + "\" y=\"" + num(y + kRow - 4.0) + "\">" + std::string(to_string(c)) +
           "</text>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

void scatter_svg(const Matrix& coords, std::span<const BiasClass> labels, const PlotStyle& style,
                 const std::filesystem::path& out_path) {
  write_file(out_path, render_scatter_svg(coords, labels, style));
}

}  // namespace biasbench::plot
