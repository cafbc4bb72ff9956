#include "fopsim/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "fopsim/csv.hpp"
#include "fopsim/errors.hpp"

namespace fopsim {

std::string sidecar_path(const std::string& pgm_path) {
  const auto dot = pgm_path.rfind('.');
  const auto slash = pgm_path.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return pgm_path + ".csv";
  return pgm_path.substr(0, dot) + ".csv";
}

void write_pgm16(const std::string& path, const SceneImage& image) {
  image.validate();
  const double peak = image.max();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << "P5\n" << image.cols << ' ' << image.rows << "\n65535\n";
  for (double v : image.values) {
    const auto q = static_cast<unsigned>(peak > 0.0 ? std::lround(v / peak * 65535.0) : 0);
    const char bytes[2] = {static_cast<char>((q >> 8) & 0xFF), static_cast<char>(q & 0xFF)};
    out.write(bytes, 2);
  }
  std::ofstream side(sidecar_path(path), std::ios::binary);
  if (!side) throw ConfigError("cannot write " + sidecar_path(path));
  csv::write_header(side, {"pitch_um", "origin_x_um", "origin_y_um", "scale"});
  csv::write_row(side, {csv::format_number(image.pitch), csv::format_number(image.origin_x),
                        csv::format_number(image.origin_y), csv::format_number(peak)});
}

SceneImage read_pgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::string magic;
  int cols = 0, rows = 0, maxval = 0;
  in >> magic >> cols >> rows >> maxval;
  in.get();
  if (magic != "P5" || cols < 1 || rows < 1 || maxval != 65535)
    throw ConfigError(path + " is not a 16-bit binary graymap");

  std::ifstream side_in(sidecar_path(path));
  if (!side_in) throw ConfigError("missing sidecar " + sidecar_path(path));
  const csv::Table meta = csv::read_table(side_in);
  if (meta.rows.size() != 1) throw ConfigError("sidecar must hold exactly one data row");
  const auto& m = meta.rows.front();
  SceneImage img(rows, cols, m[meta.column("pitch_um")], m[meta.column("origin_x_um")],
                 m[meta.column("origin_y_um")]);
  const double scale = m[meta.column("scale")];
  for (double& v : img.values) {
    unsigned char b[2];
    if (!in.read(reinterpret_cast<char*>(b), 2)) throw ConfigError(path + " is truncated");
    v = static_cast<double>((b[0] << 8) | b[1]) / 65535.0 * scale;
  }
  return img;
}

namespace {

constexpr double kW = 720, kH = 460, kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

std::string num(double v) {
  // Two decimals keep the file compact and stable.
  return csv::format_number(std::round(v * 100.0) / 100.0);
}

std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0})
    if (raw <= f * mag) {
      step = f * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
  return t;
}

}  // namespace

void write_svg_plot(std::ostream& out, const PlotSpec& spec) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto ty = [&](double y) { return spec.log_y ? std::log10(std::max(y, 1e-15)) : y; };
  for (const auto& s : spec.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!(x1 > x0)) { x0 -= 1.0; x1 += 1.0; }
  if (!(y1 > y0)) { y0 -= 1.0; y1 += 1.0; }
  if (spec.log_y) {
    y0 = std::floor(y0);
    y1 = std::ceil(y1);
  }
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph; };
  auto py_raw = [&](double v) { return kTop + (1.0 - (v - y0) / (y1 - y0)) * ph; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << esc(spec.title) << "</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double t : nice_ticks(x0, x1)) {
    out << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(px(t)) << "\" y2=\""
        << num(kTop + ph + 5) << "\" stroke=\"black\"/>";
    out << "<text x=\"" << num(px(t)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
        << csv::format_number(t) << "</text>\n";
  }
  std::vector<double> yt;
  if (spec.log_y) {
    const int step = std::max(1, static_cast<int>(std::ceil((y1 - y0) / 8.0)));
    for (double v = y0; v <= y1; v += step) yt.push_back(v);
  } else {
    yt = nice_ticks(y0, y1);
  }
  for (double t : yt) {
    const std::string label = spec.log_y ? "1e" + csv::format_number(t) : csv::format_number(t);
    out << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py_raw(t)) << "\" x2=\"" << num(kLeft + pw)
        << "\" y2=\"" << num(py_raw(t)) << "\" stroke=\"#dddddd\"/>";
    out << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py_raw(t) + 4) << "\" text-anchor=\"end\">" << label
        << "</text>\n";
  }
  out << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kH - 15) << "\" text-anchor=\"middle\">"
      << esc(spec.x_label) << "</text>\n";
  out << "<text transform=\"translate(20," << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << esc(spec.y_label) << "</text>\n";

  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    const char* color = kColors[k % (sizeof(kColors) / sizeof(kColors[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) out << (i ? " " : "") << num(px(s.x[i])) << ',' << num(py(s.y[i]));
    out << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
    out << "<line x1=\"" << num(kLeft + pw + 10) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + pw + 30)
        << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
    out << "<text x=\"" << num(kLeft + pw + 35) << "\" y=\"" << num(ly + 4) << "\">" << esc(s.label) << "</text>\n";
  }
  out << "</svg>\n";
}

void write_svg_plot(const std::string& path, const PlotSpec& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  write_svg_plot(out, spec);
}

}  // namespace fopsim
