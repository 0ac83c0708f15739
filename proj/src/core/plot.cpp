#include "siddm/plot.hpp"

#include <cmath>
#include <cstdio>

#include "siddm/error.hpp"

namespace siddm {

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string scatter_svg(const Tensor& samples, const MogSpec& spec,
                        const std::string& title, const ScatterStyle& style) {
  if (samples.rank() != 2 || samples.cols() != 2) {
    fail(ErrorKind::Shape, "scatter_svg: samples must be n x 2, got " +
                               shape_string(samples.shape()));
  }
  spec.validate();
  require(style.size_px > 0.0, "scatter_svg: size must be positive");
  const double half_grid = 0.5 * (spec.grid_k - 1) * spec.spacing;
  const double extent =
      style.extent > 0.0 ? style.extent : half_grid + 0.5 * spec.spacing;
  const double margin = 28.0;
  const double plot = style.size_px;
  const double scale = plot / (2.0 * extent);
  auto px = [&](double x) { return margin + (x + extent) * scale; };
  auto py = [&](double y) { return margin + (extent - y) * scale; };
  const double total = plot + 2.0 * margin;

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(total) +
         "\" height=\"" + fixed(total) + "\" viewBox=\"0 0 " + fixed(total) +
         " " + fixed(total) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + fixed(total / 2) +
         "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">" +
         escape_xml(title) + "</text>\n";
  out += "<rect x=\"" + fixed(margin) + "\" y=\"" + fixed(margin) +
         "\" width=\"" + fixed(plot) + "\" height=\"" + fixed(plot) +
         "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";

  out += "<g fill=\"#1f77b4\" fill-opacity=\"" + fixed(style.point_opacity) +
         "\">\n";
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const double x = samples(i, 0);
    const double y = samples(i, 1);
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    if (std::abs(x) > extent || std::abs(y) > extent) continue;
    out += "<circle cx=\"" + fixed(px(x)) + "\" cy=\"" + fixed(py(y)) +
           "\" r=\"" + fixed(style.point_radius) + "\"/>\n";
  }
  out += "</g>\n";

  const double ring = std::max(3.0 * spec.sigma * scale, 2.0);
  out += "<g fill=\"none\" stroke=\"#d62728\" stroke-width=\"1\">\n";
  for (const auto& c : spec.centers()) {
    out += "<circle cx=\"" + fixed(px(c[0])) + "\" cy=\"" + fixed(py(c[1])) +
           "\" r=\"" + fixed(ring) + "\"/>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace siddm
