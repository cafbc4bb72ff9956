#include "fopsim/imaging.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

#include "fopsim/errors.hpp"
#include "fopsim/parallel.hpp"
#include "fopsim/rng.hpp"

namespace fopsim {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

// FFTW's planner is not re-entrant.
std::mutex g_fftw_mutex;

bool finite(double v) { return std::isfinite(v); }

double lookup_or_zero(const AngularResponse& t, double theta_deg) {
  if (theta_deg < t.theta_deg.front() || theta_deg > t.max_theta()) return 0.0;
  return t.at(theta_deg);
}

// In-medium limit of the angles that reach the sensor.
double max_medium_angle_deg(double medium_index) {
  if (medium_index > 1.0) return std::asin(1.0 / medium_index) / kDeg;
  return 90.0;
}

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

std::size_t fft_size(std::size_t n) {
  // Smallest 2^a 3^b 5^c 7^d not below n.
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t f : {2, 3, 5, 7})
      while (r % f == 0) r /= f;
    if (r == 1) return m;
  }
}

}  // namespace

void OpticalGeometry::validate() const {
  if (!(working_distance > 0.0 && finite(working_distance)))
    throw InvalidDesign("working distance must be positive");
  if (!(medium_index >= 1.0 && finite(medium_index)))
    throw InvalidDesign("medium index must be at least 1");
  if (!(pixel_pitch > 0.0 && finite(pixel_pitch))) throw InvalidDesign("pixel pitch must be positive");
  if (rows < 1 || cols < 1) throw InvalidDesign("pixel counts must be at least 1");
  if (!(pixel_active > 0.0 && pixel_active <= 1.0))
    throw InvalidDesign("pixel active fraction must lie in (0, 1]");
  if (!finite(fiber_dx) || !finite(fiber_dy)) throw InvalidDesign("fiber offset must be finite");
}

SceneImage::SceneImage(int rows_, int cols_, double pitch_, double ox, double oy)
    : pitch(pitch_), origin_x(ox), origin_y(oy), rows(rows_), cols(cols_) {
  if (rows_ < 1 || cols_ < 1) throw DomainError("image dimensions must be positive");
  values.assign(static_cast<std::size_t>(rows_) * cols_, 0.0);
}

double SceneImage::sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

double SceneImage::max() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

void SceneImage::validate() const {
  if (!(pitch > 0.0 && finite(pitch))) throw DomainError("image pitch must be positive");
  if (rows < 1 || cols < 1) throw DomainError("image dimensions must be positive");
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw DomainError("image buffer does not match its dimensions");
  for (double v : values)
    if (!(v >= 0.0 && finite(v))) throw DomainError("image values must be finite and non-negative");
}

AngularResponse psf_angular(const AngularResponse& transmittance) {
  transmittance.validate();
  AngularResponse out = transmittance;
  double peak = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double c = std::cos(out.theta_deg[i] * kDeg);
    out.transmittance[i] = std::max(0.0, transmittance.transmittance[i] * c * c * c);
    peak = std::max(peak, out.transmittance[i]);
  }
  if (!(peak > 0.0)) throw DomainError("degenerate response: transmittance is zero everywhere");
  for (double& v : out.transmittance) v /= peak;
  return out;
}

double fwhm_deg(const AngularResponse& response) {
  response.validate();
  const auto& t = response.transmittance;
  const auto peak_it = std::max_element(t.begin(), t.end());
  if (!(*peak_it > 0.0)) throw DomainError("degenerate response: no peak");
  const double half = 0.5 * *peak_it;
  for (std::size_t i = static_cast<std::size_t>(peak_it - t.begin()) + 1; i < t.size(); ++i) {
    if (t[i] < half) {
      const double f = (t[i - 1] - half) / (t[i - 1] - t[i]);
      const double theta = response.theta_deg[i - 1] + f * (response.theta_deg[i] - response.theta_deg[i - 1]);
      return 2.0 * theta;
    }
  }
  throw DomainError("response never falls to half maximum");
}

double collection_efficiency(const AngularResponse& transmittance) {
  transmittance.validate();
  if (transmittance.size() < 64)
    throw DomainError("collection efficiency needs at least 64 angle samples");
  if (transmittance.max_theta() < 85.0)
    throw DomainError("collection efficiency needs angles up to at least 85 degrees");
  if (transmittance.theta_deg.front() > 1.0)
    throw DomainError("collection efficiency needs angles starting at or below 1 degree");
  const auto& th = transmittance.theta_deg;
  const auto& t = transmittance.transmittance;
  // The first sample extends down to normal incidence.
  double sum = t[0] * (1.0 - std::cos(th[0] * kDeg));
  for (std::size_t i = 1; i < th.size(); ++i) {
    const double a = th[i - 1] * kDeg;
    const double b = th[i] * kDeg;
    sum += 0.5 * (b - a) * (t[i - 1] * std::sin(a) + t[i] * std::sin(b));
  }
  return 0.5 * sum;
}

double collection_efficiency_rect(double theta_c_deg) {
  if (!(theta_c_deg > 0.0 && theta_c_deg <= 90.0))
    throw DomainError("cut-off angle must lie in (0, 90] degrees");
  const double s = std::sin(0.5 * theta_c_deg * kDeg);
  return s * s;
}

AngularResponse rectangular_response(double theta_c_deg, std::size_t points, double level) {
  if (!(theta_c_deg > 0.0 && theta_c_deg <= 90.0))
    throw DomainError("cut-off angle must lie in (0, 90] degrees");
  if (points < 2) throw DomainError("need at least two grid points");
  if (!(level >= 0.0 && level <= 1.0)) throw DomainError("level must lie in [0, 1]");
  AngularResponse out;
  const double step = 90.0 / static_cast<double>(points - 1);
  // The cut-off and a point just above it carry the discontinuity exactly.
  const double after = theta_c_deg * (1.0 + 1e-12);
  for (std::size_t i = 0; i < points; ++i) {
    const double th = std::min(90.0, step * static_cast<double>(i));
    if (th > theta_c_deg && out.theta_deg.back() < after) {
      if (out.theta_deg.back() < theta_c_deg) {
        out.theta_deg.push_back(theta_c_deg);
        out.transmittance.push_back(level);
      }
      if (after < th) {
        out.theta_deg.push_back(after);
        out.transmittance.push_back(0.0);
      }
    }
    out.theta_deg.push_back(th);
    out.transmittance.push_back(th <= theta_c_deg ? level : 0.0);
  }
  out.validate();
  return out;
}

std::optional<double> air_angle_deg(double theta_medium_deg, double medium_index) {
  const double s = medium_index * std::sin(theta_medium_deg * kDeg);
  if (s > 1.0) return std::nullopt;
  return std::asin(s) / kDeg;
}

namespace {

// Radial profile T(theta_air(theta_m)) on a fine in-medium angle grid.
struct RadialProfile {
  std::vector<double> theta_m;  // degrees
  std::vector<double> t;
  std::vector<double> energy;  // cumulative integral of t sin(theta_m)
};

RadialProfile radial_profile(const AngularResponse& transmittance, double medium_index,
                             double step_deg) {
  RadialProfile p;
  const double limit = std::min(max_medium_angle_deg(medium_index), 90.0);
  const auto n = static_cast<std::size_t>(std::ceil(limit / step_deg));
  p.theta_m.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double th = std::min(limit, step_deg * static_cast<double>(i));
    const auto air = air_angle_deg(th, medium_index);
    p.theta_m.push_back(th);
    p.t.push_back(air ? lookup_or_zero(transmittance, std::min(*air, 90.0)) : 0.0);
  }
  p.energy.assign(p.theta_m.size(), 0.0);
  for (std::size_t i = 1; i < p.theta_m.size(); ++i) {
    const double a = p.theta_m[i - 1] * kDeg;
    const double b = p.theta_m[i] * kDeg;
    p.energy[i] = p.energy[i - 1] + 0.5 * (b - a) * (p.t[i - 1] * std::sin(a) + p.t[i] * std::sin(b));
  }
  return p;
}

double interp(const std::vector<double>& x, const std::vector<double>& y, double v) {
  if (v <= x.front()) return y.front();
  if (v >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), v);
  const std::size_t i = static_cast<std::size_t>(it - x.begin());
  const double f = (v - x[i - 1]) / (x[i] - x[i - 1]);
  return y[i - 1] + f * (y[i] - y[i - 1]);
}

}  // namespace

double spatial_fwhm(const AngularResponse& transmittance, const OpticalGeometry& geom) {
  transmittance.validate();
  geom.validate();
  const RadialProfile p = radial_profile(transmittance, geom.medium_index, 1e-3);
  std::vector<double> k(p.theta_m.size());
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double c = std::cos(p.theta_m[i] * kDeg);
    k[i] = p.t[i] * c * c * c;
  }
  const auto peak_it = std::max_element(k.begin(), k.end());
  if (!(*peak_it > 0.0)) throw DomainError("degenerate response: transmittance is zero everywhere");
  const double half = 0.5 * *peak_it;
  for (std::size_t i = static_cast<std::size_t>(peak_it - k.begin()) + 1; i < k.size(); ++i) {
    if (k[i] < half) {
      const double f = (k[i - 1] - half) / (k[i - 1] - k[i]);
      const double th = p.theta_m[i - 1] + f * (p.theta_m[i] - p.theta_m[i - 1]);
      return 2.0 * geom.working_distance * std::tan(th * kDeg);
    }
  }
  throw DomainError("spatial response never falls to half maximum");
}

SceneImage psf_spatial(const AngularResponse& transmittance, const OpticalGeometry& geom,
                       double texel_pitch, double max_radius, double tail) {
  transmittance.validate();
  geom.validate();
  if (!(texel_pitch > 0.0)) throw DomainError("texel pitch must be positive");
  if (!(max_radius > 0.0)) throw DomainError("kernel radius must be positive");
  const double l = geom.working_distance;
  const RadialProfile p = radial_profile(transmittance, geom.medium_index, 2e-3);
  const double total = p.energy.back();

  if (!(total > 0.0)) {
    SceneImage delta(1, 1, texel_pitch, -0.5 * texel_pitch, -0.5 * texel_pitch);
    delta.values[0] = 1.0;
    return delta;
  }

  // Radius that encloses all but `tail` of the energy.
  const auto cut_it = std::lower_bound(p.energy.begin(), p.energy.end(), (1.0 - tail) * total);
  const double cut_deg = p.theta_m[std::min<std::size_t>(cut_it - p.energy.begin(), p.theta_m.size() - 1)];
  double radius = cut_deg >= 90.0 ? max_radius : std::min(max_radius, l * std::tan(cut_deg * kDeg));
  radius = std::max(radius, 0.5 * texel_pitch);

  const int half = static_cast<int>(std::ceil(radius / texel_pitch - 0.5));
  const int size = 2 * half + 1;
  SceneImage kernel(size, size, texel_pitch, -(half + 0.5) * texel_pitch, -(half + 0.5) * texel_pitch);

  auto enclosed = [&](double r) {
    return interp(p.theta_m, p.energy, std::atan(r / l) / kDeg);
  };

  // Each annulus deposits its exact energy on points spread around its mid
  // radius, so narrow kernels stay energy-correct instead of point-sampled.
  // Points are splatted bilinearly to keep the ring lattice from aliasing
  // against the texel grid.
  const double dr = texel_pitch / 8.0;
  const int rings = std::max(1, static_cast<int>(std::ceil(radius / dr)));
  auto splat = [&](double x, double y, double e) {
    const double fx = x / texel_pitch + half;
    const double fy = y / texel_pitch + half;
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const double ax = fx - x0, ay = fy - y0;
    const int xs[2] = {x0, x0 + 1}, ys[2] = {y0, y0 + 1};
    const double wx[2] = {1.0 - ax, ax}, wy[2] = {1.0 - ay, ay};
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i)
        if (xs[i] >= 0 && ys[j] >= 0 && xs[i] < size && ys[j] < size) kernel.at(ys[j], xs[i]) += e * wx[i] * wy[j];
  };
  double inner_energy = 0.0;
  for (int i = 0; i < rings; ++i) {
    const double r0 = i * dr;
    const double r1 = std::min(radius, (i + 1) * dr);
    const double outer_energy = enclosed(r1);
    const double e = outer_energy - inner_energy;
    inner_energy = outer_energy;
    if (!(e > 0.0)) continue;
    const double rm = 0.5 * (r0 + r1);
    const int spokes = 8 * std::max(1, static_cast<int>(std::ceil(2.0 * kPi * rm / dr / 8.0)));
    const double share = e / spokes;
    for (int j = 0; j < spokes; ++j) {
      const double phi = (j + 0.5) * 2.0 * kPi / spokes;
      splat(rm * std::cos(phi), rm * std::sin(phi), share);
    }
  }
  const double s = kernel.sum();
  for (double& v : kernel.values) v /= s;
  return kernel;
}

SceneImage convolve(const SceneImage& scene, const SceneImage& kernel) {
  if (std::abs(scene.pitch - kernel.pitch) > 1e-9 * scene.pitch)
    throw DomainError("scene and kernel pitches differ");
  if (kernel.rows % 2 == 0 || kernel.cols % 2 == 0) throw DomainError("kernel dimensions must be odd");
  const int kh = kernel.rows / 2;
  const int kw = kernel.cols / 2;
  const int out_rows = scene.rows + kernel.rows - 1;
  const int out_cols = scene.cols + kernel.cols - 1;
  SceneImage out(out_rows, out_cols, scene.pitch, scene.origin_x - kw * scene.pitch,
                 scene.origin_y - kh * scene.pitch);

  if (kernel.rows == 1 && kernel.cols == 1) {
    for (std::size_t i = 0; i < scene.values.size(); ++i) out.values[i] = scene.values[i] * kernel.values[0];
    return out;
  }

  const std::size_t nr = fft_size(static_cast<std::size_t>(out_rows));
  const std::size_t nc = fft_size(static_cast<std::size_t>(out_cols));
  const std::size_t nch = nc / 2 + 1;
  double* a = fftw_alloc_real(nr * nc);
  double* b = fftw_alloc_real(nr * nc);
  fftw_complex* fa = fftw_alloc_complex(nr * nch);
  fftw_complex* fb = fftw_alloc_complex(nr * nch);
  fftw_plan pa, pb, inv;
  {
    std::lock_guard lock(g_fftw_mutex);
    const int r = static_cast<int>(nr), c = static_cast<int>(nc);
    pa = fftw_plan_dft_r2c_2d(r, c, a, fa, FFTW_ESTIMATE);
    pb = fftw_plan_dft_r2c_2d(r, c, b, fb, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_2d(r, c, fa, a, FFTW_ESTIMATE);
  }
  std::fill(a, a + nr * nc, 0.0);
  std::fill(b, b + nr * nc, 0.0);
  for (int r = 0; r < scene.rows; ++r)
    for (int c = 0; c < scene.cols; ++c) a[r * nc + c] = scene.at(r, c);
  for (int r = 0; r < kernel.rows; ++r)
    for (int c = 0; c < kernel.cols; ++c) b[r * nc + c] = kernel.at(r, c);
  fftw_execute(pa);
  fftw_execute(pb);
  const double norm = 1.0 / static_cast<double>(nr * nc);
  for (std::size_t i = 0; i < nr * nch; ++i) {
    const double re = fa[i][0] * fb[i][0] - fa[i][1] * fb[i][1];
    const double im = fa[i][0] * fb[i][1] + fa[i][1] * fb[i][0];
    fa[i][0] = re * norm;
    fa[i][1] = im * norm;
  }
  fftw_execute(inv);
  for (int r = 0; r < out_rows; ++r)
    for (int c = 0; c < out_cols; ++c) out.at(r, c) = std::max(0.0, a[r * nc + c]);
  {
    std::lock_guard lock(g_fftw_mutex);
    fftw_destroy_plan(pa);
    fftw_destroy_plan(pb);
    fftw_destroy_plan(inv);
  }
  fftw_free(a);
  fftw_free(b);
  fftw_free(fa);
  fftw_free(fb);
  return out;
}

double disc_rect_area(double cx, double cy, double r, double x0, double y0, double x1, double y1) {
  if (!(r > 0.0) || x1 <= x0 || y1 <= y0) return 0.0;
  // Area of the disc below y = v and left of x = u, disc centred at the origin.
  auto antideriv = [r](double t) {
    const double c = std::clamp(t, -r, r);
    return 0.5 * (c * std::sqrt(std::max(0.0, r * r - c * c)) + r * r * std::asin(c / r));
  };
  auto quadrant = [&](double u, double v) {
    const double xc = std::clamp(u, -r, r);
    if (v <= -r || xc <= -r) return 0.0;
    if (v >= r) return 2.0 * (antideriv(xc) - antideriv(-r));
    const double a = std::sqrt(r * r - v * v);
    if (v >= 0.0) {
      // Chord region |t| < a contributes v + h, the caps 2h.
      double area = 0.0;
      const double left_end = std::min(xc, -a);
      area += 2.0 * (antideriv(left_end) - antideriv(-r));
      if (xc > -a) {
        const double mid_end = std::min(xc, a);
        area += v * (mid_end + a) + antideriv(mid_end) - antideriv(-a);
      }
      if (xc > a) area += 2.0 * (antideriv(xc) - antideriv(a));
      return area;
    }
    // Below the centre only |t| < a reaches under y = v.
    if (xc <= -a) return 0.0;
    const double mid_end = std::min(xc, a);
    return v * (mid_end + a) + antideriv(mid_end) - antideriv(-a);
  };
  const double u0 = x0 - cx, u1 = x1 - cx, v0 = y0 - cy, v1 = y1 - cy;
  const double area = quadrant(u1, v1) - quadrant(u0, v1) - quadrant(u1, v0) + quadrant(u0, v0);
  return std::max(0.0, area);
}

namespace {

// Calls f(cx, cy) for every lattice core whose disc may touch the box.
template <class F>
void for_each_core(const FopDesign& fop, double dx, double dy, double x0, double y0, double x1,
                   double y1, F&& f) {
  const double r = 0.5 * fop.core_diameter;
  const double p = fop.pitch;
  const double row = p * std::sqrt(3.0) / 2.0;
  const long j0 = static_cast<long>(std::floor((y0 - r - dy) / row));
  const long j1 = static_cast<long>(std::ceil((y1 + r - dy) / row));
  for (long j = j0; j <= j1; ++j) {
    const double cy = j * row + dy;
    if (cy + r < y0 || cy - r > y1) continue;
    const double shift = j * p / 2.0 + dx;
    const long i0 = static_cast<long>(std::floor((x0 - r - shift) / p));
    const long i1 = static_cast<long>(std::ceil((x1 + r - shift) / p));
    for (long i = i0; i <= i1; ++i) {
      const double cx = i * p + shift;
      if (cx + r < x0 || cx - r > x1) continue;
      f(cx, cy);
    }
  }
}

}  // namespace

SceneImage fiber_mask(const FopDesign& fop, const OpticalGeometry& geom, const SceneImage& like) {
  fop.validate();
  SceneImage mask(like.rows, like.cols, like.pitch, like.origin_x, like.origin_y);
  const double r = 0.5 * fop.core_diameter;
  const double t = like.pitch;
  const double area = t * t;
  for (int row = 0; row < like.rows; ++row) {
    const double y0 = like.origin_y + row * t;
    for (int col = 0; col < like.cols; ++col) {
      const double x0 = like.origin_x + col * t;
      double covered = 0.0;
      for_each_core(fop, geom.fiber_dx, geom.fiber_dy, x0, y0, x0 + t, y0 + t, [&](double cx, double cy) {
        covered += disc_rect_area(cx, cy, r, x0, y0, x0 + t, y0 + t);
      });
      mask.at(row, col) = std::min(1.0, covered / area);
    }
  }
  return mask;
}

namespace {

struct BinWeight {
  int texel;
  int pixel;
  double w;
};

std::vector<BinWeight> bin_weights(int texels, double origin, double pitch, int pixels,
                                   double pixel_pitch, double active) {
  std::vector<BinWeight> out;
  const double inset = 0.5 * (1.0 - active) * pixel_pitch;
  for (int i = 0; i < texels; ++i) {
    const double a0 = origin + i * pitch;
    const double a1 = a0 + pitch;
    const int p0 = std::max(0, static_cast<int>(std::floor(a0 / pixel_pitch)));
    const int p1 = std::min(pixels - 1, static_cast<int>(std::floor(a1 / pixel_pitch)));
    for (int p = p0; p <= p1; ++p) {
      const double b0 = p * pixel_pitch + inset;
      const double w = overlap(a0, a1, b0, b0 + active * pixel_pitch) / pitch;
      if (w > 0.0) out.push_back({i, p, w});
    }
  }
  return out;
}

}  // namespace

SceneImage bin_to_pixels(const SceneImage& fine, const OpticalGeometry& geom) {
  geom.validate();
  SceneImage out(geom.rows, geom.cols, geom.pixel_pitch, 0.0, 0.0);
  const auto wx = bin_weights(fine.cols, fine.origin_x, fine.pitch, geom.cols, geom.pixel_pitch,
                              geom.pixel_active);
  const auto wy = bin_weights(fine.rows, fine.origin_y, fine.pitch, geom.rows, geom.pixel_pitch,
                              geom.pixel_active);
  std::vector<double> tmp(static_cast<std::size_t>(fine.rows) * geom.cols, 0.0);
  for (int r = 0; r < fine.rows; ++r)
    for (const auto& w : wx) tmp[static_cast<std::size_t>(r) * geom.cols + w.pixel] += w.w * fine.at(r, w.texel);
  for (const auto& w : wy)
    for (int c = 0; c < geom.cols; ++c)
      out.at(w.pixel, c) += w.w * tmp[static_cast<std::size_t>(w.texel) * geom.cols + c];
  return out;
}

namespace {

SceneImage crop_to_sensor(const SceneImage& img, const OpticalGeometry& geom) {
  const double t = img.pitch;
  const int c0 = std::max(0, static_cast<int>(std::floor((0.0 - img.origin_x) / t)));
  const int c1 = std::min(img.cols, static_cast<int>(std::ceil((geom.width() - img.origin_x) / t)));
  const int r0 = std::max(0, static_cast<int>(std::floor((0.0 - img.origin_y) / t)));
  const int r1 = std::min(img.rows, static_cast<int>(std::ceil((geom.height() - img.origin_y) / t)));
  if (c1 <= c0 || r1 <= r0) {
    SceneImage empty(1, 1, t, -t, -t);
    return empty;
  }
  SceneImage out(r1 - r0, c1 - c0, t, img.origin_x + c0 * t, img.origin_y + r0 * t);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) out.at(r - r0, c - c0) = img.at(r, c);
  return out;
}

void check_oversampling(const SceneImage& scene, const OpticalGeometry& geom) {
  if (scene.pitch > geom.pixel_pitch / 4.0 * (1.0 + 1e-12))
    throw DomainError("scene pitch must be at most a quarter of the pixel pitch");
}

double default_kernel_radius(const OpticalGeometry& geom, double requested) {
  return requested > 0.0 ? requested : std::hypot(geom.width(), geom.height());
}

SceneImage render_with_kernel(const SceneImage& scene, const SceneImage& kernel,
                              const OpticalGeometry& geom, const FopDesign& fop,
                              const RenderOptions& options) {
  SceneImage fine = crop_to_sensor(convolve(scene, kernel), geom);
  if (options.fiber_mask) {
    const SceneImage mask = fiber_mask(fop, geom, fine);
    for (std::size_t i = 0; i < fine.values.size(); ++i) fine.values[i] *= mask.values[i];
  }
  SceneImage out = bin_to_pixels(fine, geom);
  if (options.noise) {
    const NoiseModel& n = *options.noise;
    if (n.frames < 1 || n.read_sigma < 0.0 || n.shot_gain < 0.0)
      throw DomainError("noise model needs frames >= 1 and non-negative sigma and gain");
    const CounterRng rng(options.seed, 0x4E015E);
    const double avg = 1.0 / std::sqrt(static_cast<double>(n.frames));
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      const double v = out.values[i];
      const double noise = n.read_sigma * rng.normal(i, 0) + std::sqrt(n.shot_gain * v) * rng.normal(i, 2);
      out.values[i] = std::max(0.0, v + avg * noise);
    }
  }
  return out;
}

}  // namespace

SceneImage render(const SceneImage& scene, const AngularResponse& frontend_t,
                  const OpticalGeometry& geom, const FopDesign& fop, const RenderOptions& options) {
  scene.validate();
  geom.validate();
  fop.validate();
  check_oversampling(scene, geom);
  const SceneImage kernel = psf_spatial(frontend_t, geom, scene.pitch,
                                        default_kernel_radius(geom, options.max_kernel_radius));
  return render_with_kernel(scene, kernel, geom, fop, options);
}

double michelson_contrast(const SceneImage& image, const Roi& roi) {
  if (roi.rows < 1 || roi.cols < 1) throw DomainError("contrast region is empty");
  if (roi.row < 0 || roi.col < 0 || roi.row + roi.rows > image.rows || roi.col + roi.cols > image.cols)
    throw DomainError("contrast region lies outside the image");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int r = roi.row; r < roi.row + roi.rows; ++r)
    for (int c = roi.col; c < roi.col + roi.cols; ++c) {
      lo = std::min(lo, image.at(r, c));
      hi = std::max(hi, image.at(r, c));
    }
  if (!(hi + lo > 0.0)) throw DomainError("undefined contrast: region is dark");
  return (hi - lo) / (hi + lo);
}

SceneImage usaf_scene(const UsafPattern& pattern, double texel_pitch, double cx, double cy,
                      double margin) {
  if (!(pattern.line_width > 0.0)) throw DomainError("line width must be positive");
  if (pattern.bars < 1) throw DomainError("pattern needs at least one bar");
  if (!(texel_pitch > 0.0) || margin < 0.0) throw DomainError("invalid scene sampling");
  const double w = pattern.line_width;
  const double across = (2 * pattern.bars - 1) * w;  // bars and gaps
  const double along = 5.0 * w;
  const bool vertical = pattern.orientation == BarOrientation::Vertical;
  const double ex = (vertical ? across : along) / 2.0 + margin;
  const double ey = (vertical ? along : across) / 2.0 + margin;
  // Texel grid anchored at the sensor origin so scenes share one lattice.
  const double ox = std::floor((cx - ex) / texel_pitch) * texel_pitch;
  const double oy = std::floor((cy - ey) / texel_pitch) * texel_pitch;
  const int cols = static_cast<int>(std::ceil((cx + ex - ox) / texel_pitch));
  const int rows = static_cast<int>(std::ceil((cy + ey - oy) / texel_pitch));
  SceneImage scene(rows, cols, texel_pitch, ox, oy);

  auto bar_cover = [&](double a0, double a1) {
    // Coverage of [a0, a1] by the bar set across the bars.
    const double start = (vertical ? cx : cy) - across / 2.0;
    double s = 0.0;
    for (int k = 0; k < pattern.bars; ++k) s += overlap(a0, a1, start + 2 * k * w, start + (2 * k + 1) * w);
    return s;
  };
  auto length_cover = [&](double a0, double a1) {
    const double c = vertical ? cy : cx;
    return overlap(a0, a1, c - along / 2.0, c + along / 2.0);
  };
  std::vector<double> fx(cols), fy(rows);
  for (int c = 0; c < cols; ++c) {
    const double a0 = ox + c * texel_pitch;
    fx[c] = (vertical ? bar_cover(a0, a0 + texel_pitch) : length_cover(a0, a0 + texel_pitch)) / texel_pitch;
  }
  for (int r = 0; r < rows; ++r) {
    const double a0 = oy + r * texel_pitch;
    fy[r] = (vertical ? length_cover(a0, a0 + texel_pitch) : bar_cover(a0, a0 + texel_pitch)) / texel_pitch;
  }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) scene.at(r, c) = fx[c] * fy[r];
  return scene;
}

namespace {

double texel_for(const OpticalGeometry& geom, const CtfOptions& options) {
  const double t = options.texel_pitch > 0.0 ? options.texel_pitch : geom.pixel_pitch / 8.0;
  if (t > geom.pixel_pitch / 4.0 * (1.0 + 1e-12))
    throw DomainError("scene pitch must be at most a quarter of the pixel pitch");
  return t;
}

// Pixel indices whose centres fall in [a0, a1]; the pixel containing the
// midpoint when none do.
std::pair<int, int> pixel_span(double a0, double a1, double pitch, int count) {
  int lo = static_cast<int>(std::ceil(a0 / pitch - 0.5));
  int hi = static_cast<int>(std::floor(a1 / pitch - 0.5));
  lo = std::max(lo, 0);
  hi = std::min(hi, count - 1);
  if (hi < lo) {
    const int mid = std::clamp(static_cast<int>(std::floor(0.5 * (a0 + a1) / pitch)), 0, count - 1);
    return {mid, mid};
  }
  return {lo, hi};
}

double score_usaf(const SceneImage& image, const UsafPattern& pattern, const OpticalGeometry& geom,
                  double cx, double cy) {
  const double w = pattern.line_width;
  const double reach = (pattern.bars - 1) * w;  // outer bar centres
  const bool vertical = pattern.orientation == BarOrientation::Vertical;
  const double c_across = vertical ? cx : cy;
  const double c_along = vertical ? cy : cx;
  const int n_across = vertical ? geom.cols : geom.rows;
  const int n_along = vertical ? geom.rows : geom.cols;
  const auto [a0, a1] = pixel_span(c_across - reach, c_across + reach, geom.pixel_pitch, n_across);
  const auto [b0, b1] = pixel_span(c_along - 1.5 * w, c_along + 1.5 * w, geom.pixel_pitch, n_along);
  // Line scan across the bars, averaged along them.
  SceneImage profile(1, a1 - a0 + 1, geom.pixel_pitch);
  for (int a = a0; a <= a1; ++a) {
    double s = 0.0;
    for (int b = b0; b <= b1; ++b) s += vertical ? image.at(b, a) : image.at(a, b);
    profile.at(0, a - a0) = s / (b1 - b0 + 1);
  }
  return michelson_contrast(profile, Roi{0, 0, 1, profile.cols});
}

}  // namespace

UsafRender render_usaf(const UsafPattern& pattern, const AngularResponse& frontend_t,
                       const OpticalGeometry& geom, const FopDesign& fop, double phase_shift,
                       double texel_pitch, const RenderOptions& options) {
  geom.validate();
  const bool vertical = pattern.orientation == BarOrientation::Vertical;
  const double cx = geom.width() / 2.0 + (vertical ? phase_shift : 0.0);
  const double cy = geom.height() / 2.0 + (vertical ? 0.0 : phase_shift);
  UsafRender out;
  out.image = render(usaf_scene(pattern, texel_pitch, cx, cy, 0.0), frontend_t, geom, fop, options);
  out.contrast = score_usaf(out.image, pattern, geom, cx, cy);
  return out;
}

double usaf_contrast(const UsafPattern& pattern, const AngularResponse& frontend_t,
                     const OpticalGeometry& geom, const FopDesign& fop, double phase_shift,
                     const CtfOptions& options) {
  geom.validate();
  RenderOptions ro;
  ro.fiber_mask = options.fiber_mask;
  return render_usaf(pattern, frontend_t, geom, fop, phase_shift, texel_for(geom, options), ro).contrast;
}

std::vector<CtfPoint> ctf(const AngularResponse& frontend_t, const OpticalGeometry& geom,
                          const FopDesign& fop, std::span<const double> line_widths,
                          const CtfOptions& options) {
  geom.validate();
  fop.validate();
  if (line_widths.empty()) throw DomainError("line width list is empty");
  for (std::size_t i = 0; i < line_widths.size(); ++i) {
    if (!(line_widths[i] > 0.0)) throw DomainError("line widths must be positive");
    if (i > 0 && !(line_widths[i] < line_widths[i - 1]))
      throw DomainError("line widths must be sorted in descending order");
  }
  if (options.phases < 1) throw DomainError("need at least one pixel phase");
  const double t = texel_for(geom, options);
  const SceneImage kernel = psf_spatial(frontend_t, geom, t, default_kernel_radius(geom, 0.0));
  const std::size_t phases = static_cast<std::size_t>(options.phases);
  std::vector<double> contrast(line_widths.size() * phases, 0.0);
  RenderOptions ro;
  ro.fiber_mask = options.fiber_mask;
  parallel_for(contrast.size(), [&](std::size_t job) {
    const std::size_t i = job / phases;
    const std::size_t k = job % phases;
    const UsafPattern pattern{line_widths[i], BarOrientation::Vertical, 3};
    const double shift = geom.pixel_pitch * static_cast<double>(k) / static_cast<double>(phases);
    const double cx = geom.width() / 2.0 + shift;
    const double cy = geom.height() / 2.0;
    const SceneImage image = render_with_kernel(usaf_scene(pattern, t, cx, cy, 0.0), kernel, geom, fop, ro);
    contrast[job] = score_usaf(image, pattern, geom, cx, cy);
  });
  std::vector<CtfPoint> out;
  for (std::size_t i = 0; i < line_widths.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < phases; ++k) s += contrast[i * phases + k];
    out.push_back({line_widths[i], s / static_cast<double>(phases)});
  }
  return out;
}

ResolutionResult resolution_at(std::span<const CtfPoint> curve, double level, double nyquist_width) {
  if (curve.empty()) throw DomainError("contrast curve is empty");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("contrast level must lie in (0, 1)");
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (!(curve[i].line_width < curve[i - 1].line_width))
      throw DomainError("line widths must be sorted in descending order");

  ResolutionResult out;
  out.line_width = curve.back().line_width;
  if (curve.front().contrast < level) {
    out.line_width = curve.front().line_width;
    out.crossed = true;
  } else {
    for (std::size_t i = 1; i < curve.size(); ++i) {
      if (curve[i].contrast < level) {
        const auto& a = curve[i - 1];
        const auto& b = curve[i];
        out.line_width = a.line_width + (level - a.contrast) * (b.line_width - a.line_width) / (b.contrast - a.contrast);
        out.crossed = true;
        break;
      }
    }
  }

  // Contrast at the Nyquist width, interpolated on the curve (clamped).
  double at_nyquist;
  if (nyquist_width >= curve.front().line_width) {
    at_nyquist = curve.front().contrast;
  } else if (nyquist_width <= curve.back().line_width) {
    at_nyquist = curve.back().contrast;
  } else {
    std::size_t i = 1;
    while (curve[i].line_width > nyquist_width) ++i;
    const auto& a = curve[i - 1];
    const auto& b = curve[i];
    const double f = (nyquist_width - a.line_width) / (b.line_width - a.line_width);
    at_nyquist = a.contrast + f * (b.contrast - a.contrast);
  }
  out.pixel_limited = at_nyquist >= level;
  if (out.pixel_limited) out.line_width = std::min(out.line_width, nyquist_width);
  return out;
}

std::vector<double> usaf_line_widths(int first_group, int last_group) {
  if (last_group < first_group) throw DomainError("group range is empty");
  std::vector<double> out;
  for (int g = first_group; g <= last_group; ++g)
    for (int e = 1; e <= 6; ++e) {
      const double lp_per_mm = std::pow(2.0, g + (e - 1) / 6.0);
      out.push_back(1000.0 / (2.0 * lp_per_mm));
    }
  return out;
}

std::vector<ModulationPoint> pixel_fiber_modulation(const FopDesign& fop,
                                                    std::span<const double> pitch_ratios,
                                                    int offsets, std::uint64_t seed,
                                                    int pixels_per_side) {
  fop.validate();
  if (offsets < 1) throw DomainError("need at least one alignment sample");
  if (pixels_per_side < 2) throw DomainError("need at least two pixels per side");
  for (double r : pitch_ratios)
    if (!(r >= 0.5)) throw DomainError("pitch ratios must be at least 0.5");

  const double p = fop.pitch;
  const double rad = 0.5 * fop.core_diameter;
  const int m = pixels_per_side;
  const CounterRng rng(seed, 0xF1BE7);
  std::vector<ModulationPoint> out(pitch_ratios.size());

  parallel_for(pitch_ratios.size(), [&](std::size_t ri) {
    const double pp = pitch_ratios[ri] * p;
    const double extent = m * pp;
    const double cell = pp * pp;
    const double reach = extent * std::sqrt(2.0) / 2.0 + rad + 2.0 * p;
    const long span = static_cast<long>(std::ceil(reach / (p * std::sqrt(3.0) / 2.0))) + 1;
    double total = 0.0;
    std::vector<double> cover(static_cast<std::size_t>(m) * m);
    for (int k = 0; k < offsets; ++k) {
      const auto idx = static_cast<std::uint64_t>(k);
      const double u = rng.uniform(idx, 0), v = rng.uniform(idx, 1);
      const double phi = rng.uniform(idx, 2) * kPi / 3.0;
      const double cs = std::cos(phi), sn = std::sin(phi);
      // Lattice origin near the middle of the pixel block.
      const double tx = extent / 2.0 + u * p + v * p / 2.0;
      const double ty = extent / 2.0 + v * p * std::sqrt(3.0) / 2.0;
      std::fill(cover.begin(), cover.end(), 0.0);
      for (long j = -span; j <= span; ++j)
        for (long i = -span - std::abs(j); i <= span + std::abs(j); ++i) {
          const double lx = i * p + j * p / 2.0;
          const double ly = j * p * std::sqrt(3.0) / 2.0;
          const double cx = tx + cs * lx - sn * ly;
          const double cy = ty + sn * lx + cs * ly;
          if (cx + rad < 0.0 || cy + rad < 0.0 || cx - rad > extent || cy - rad > extent) continue;
          const int c0 = std::max(0, static_cast<int>(std::floor((cx - rad) / pp)));
          const int c1 = std::min(m - 1, static_cast<int>(std::floor((cx + rad) / pp)));
          const int r0 = std::max(0, static_cast<int>(std::floor((cy - rad) / pp)));
          const int r1 = std::min(m - 1, static_cast<int>(std::floor((cy + rad) / pp)));
          for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c)
              cover[static_cast<std::size_t>(r) * m + c] +=
                  disc_rect_area(cx, cy, rad, c * pp, r * pp, (c + 1) * pp, (r + 1) * pp);
        }
      double mean = 0.0;
      for (double& a : cover) mean += (a /= cell);
      mean /= static_cast<double>(cover.size());
      double var = 0.0;
      for (double a : cover) var += (a - mean) * (a - mean);
      total += std::sqrt(var / static_cast<double>(cover.size()));
    }
    out[ri] = {pitch_ratios[ri], total / offsets};
  });
  return out;
}

}  // namespace fopsim
