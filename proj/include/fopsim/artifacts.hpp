#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fopsim/imaging.hpp"

namespace fopsim {

// Binary 16-bit graymap (P5, maxval 65535, big-endian), image row 0 first.
// Values are scaled so the image maximum maps to 65535; the sidecar CSV next
// to it (same stem, .csv) records pitch_um, origin_x_um, origin_y_um and the
// scale needed to recover linear values.
void write_pgm16(const std::string& path, const SceneImage& image);
SceneImage read_pgm16(const std::string& path);
std::string sidecar_path(const std::string& pgm_path);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<PlotSeries> series;
};

// Self-contained SVG line plot.
void write_svg_plot(std::ostream& out, const PlotSpec& spec);
void write_svg_plot(const std::string& path, const PlotSpec& spec);

}  // namespace fopsim
