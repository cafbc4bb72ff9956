#include "fopsim/fop_tracer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "fopsim/errors.hpp"
#include "fopsim/parallel.hpp"
#include "fopsim/rng.hpp"

namespace fopsim {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
const double kSqrt3 = std::sqrt(3.0);

// Permutation of [0, n) used to stratify the azimuth independently of the
// entry-point grid: s -> s * step mod n with step coprime to n.
std::uint64_t golden_step(std::uint64_t n) {
  if (n <= 2) return 1;
  auto step = static_cast<std::uint64_t>(std::llround(0.6180339887498949 * static_cast<double>(n)));
  step = std::max<std::uint64_t>(step, 1);
  while (std::gcd(step, n) != 1) ++step;
  return step;
}

}  // namespace

void FopDesign::validate() const {
  if (!(n_clad >= 1.0)) throw InvalidDesign("cladding index must be at least 1");
  if (!(n_core > n_clad)) throw InvalidDesign("core index must exceed cladding index");
  if (!(n0 >= 1.0)) throw InvalidDesign("incident medium index must be at least 1");
  if (!(core_diameter > 0.0 && core_diameter < pitch))
    throw InvalidDesign("fiber geometry requires 0 < d < p");
  if (!(thickness > 0.0)) throw InvalidDesign("plate thickness must be positive");
  if (!(k_clad >= 0.0) || !(k_core >= 0.0))
    throw InvalidDesign("absorption coefficients must be non-negative");
}

double FopDesign::fill_factor() const { return fill_factor_hex(core_diameter, pitch); }

double FopDesign::numerical_aperture() const {
  return std::min(1.0, std::sqrt(n_core * n_core - n_clad * n_clad) / n0);
}

double FopDesign::acceptance_deg() const { return acceptance_angle(n_core, n_clad, n0); }

double acceptance_angle(double n_core, double n_clad, double n0) {
  if (n_clad > n_core) throw InvalidDesign("cladding index exceeds core index");
  if (!(n_clad >= 1.0) || !(n0 >= 1.0)) throw InvalidDesign("indices must be at least 1");
  const double na = std::min(1.0, std::sqrt(n_core * n_core - n_clad * n_clad) / n0);
  return std::asin(na) / kDeg;
}

double fill_factor_hex(double core_diameter, double pitch) {
  if (!(core_diameter > 0.0 && pitch > 0.0)) throw InvalidDesign("fiber sizes must be positive");
  if (core_diameter > pitch) throw InvalidDesign("fibers overlap: core diameter exceeds pitch");
  const double r = core_diameter / pitch;
  return std::numbers::pi / (2.0 * kSqrt3) * r * r;
}

double fresnel_transmittance(double n1, double n2, double incidence_rad) {
  const double ci = std::cos(incidence_rad);
  const double si = std::sin(incidence_rad);
  const double st = n1 * si / n2;
  if (st >= 1.0) return 0.0;
  const double ct = std::sqrt(1.0 - st * st);
  const double rs = (n1 * ci - n2 * ct) / (n1 * ci + n2 * ct);
  const double rp = (n2 * ci - n1 * ct) / (n2 * ci + n1 * ct);
  return 1.0 - 0.5 * (rs * rs + rp * rp);
}

bool in_core(const FopDesign& design, double x, double y) {
  const double p = design.pitch;
  const double row_height = p * kSqrt3 / 2.0;
  const double r2 = 0.25 * design.core_diameter * design.core_diameter;
  const double jf = std::floor(y / row_height);
  const double if_ = std::floor((x - jf * p / 2.0) / p);
  for (int dj = -1; dj <= 2; ++dj) {
    for (int di = -1; di <= 2; ++di) {
      const double j = jf + dj;
      const double i = if_ + di;
      const double cx = i * p + j * p / 2.0;
      const double cy = j * row_height;
      const double dx = x - cx;
      const double dy = y - cy;
      if (dx * dx + dy * dy <= r2) return true;
    }
  }
  return false;
}

PlanarCrossing planar_crossing(const FopDesign& design, double x0, double y0, double ux,
                               double uy, double length) {
  PlanarCrossing out;
  if (length <= 0.0) return out;
  const double p = design.pitch;
  const double row_height = p * kSqrt3 / 2.0;
  const double r = design.core_diameter / 2.0;
  const double r2 = r * r;

  const double y1 = y0 + uy * length;
  const auto j_lo = static_cast<long>(std::floor((std::min(y0, y1) - r) / row_height));
  const auto j_hi = static_cast<long>(std::ceil((std::max(y0, y1) + r) / row_height));

  double core = 0.0;
  for (long j = j_lo; j <= j_hi; ++j) {
    const double yc = static_cast<double>(j) * row_height;
    // Parameter interval where the ray is within r of this row's centre line.
    double t0 = 0.0;
    double t1 = length;
    if (std::abs(uy) < 1e-15) {
      if (std::abs(y0 - yc) > r) continue;
    } else {
      double a = (yc - r - y0) / uy;
      double b = (yc + r - y0) / uy;
      if (a > b) std::swap(a, b);
      t0 = std::max(t0, a);
      t1 = std::min(t1, b);
      if (t0 > t1) continue;
    }
    const double xa = x0 + ux * t0;
    const double xb = x0 + ux * t1;
    const double shift = static_cast<double>(j) * p / 2.0;
    const auto i_lo = static_cast<long>(std::ceil((std::min(xa, xb) - r - shift) / p));
    const auto i_hi = static_cast<long>(std::floor((std::max(xa, xb) + r - shift) / p));
    for (long i = i_lo; i <= i_hi; ++i) {
      const double cx = static_cast<double>(i) * p + shift;
      // |P0 + t u - C|^2 = r^2 with |u| = 1.
      const double fx = x0 - cx;
      const double fy = y0 - yc;
      const double b = fx * ux + fy * uy;
      const double c = fx * fx + fy * fy - r2;
      const double disc = b * b - c;
      if (disc <= 0.0) continue;
      const double s = std::sqrt(disc);
      const double ta = std::max(-b - s, 0.0);
      const double tb = std::min(-b + s, length);
      if (tb > ta) core += tb - ta;
    }
  }
  out.core = std::min(core, length);
  out.clad = length - out.core;
  return out;
}

double trace_ray(const FopDesign& design, const Ray& ray) {
  const auto& d = ray.direction;
  const double norm = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
  if (!(norm > 0.0)) throw DomainError("ray direction must be non-zero");
  const double cos_in = d.z / norm;
  if (!(cos_in > 0.0)) throw DomainError("ray must travel into the plate");
  const double sin_in = std::sqrt(std::max(0.0, 1.0 - cos_in * cos_in));
  const double theta_in = std::atan2(sin_in, cos_in);
  const double h = design.thickness;

  const bool entry_core = in_core(design, ray.origin.x, ray.origin.y);
  const double n_entry = entry_core ? design.n_core : design.n_clad;
  double weight = ray.weight * fresnel_transmittance(design.n0, n_entry, theta_in);
  if (weight == 0.0) return 0.0;

  const double sin_int = design.n0 * sin_in / n_entry;
  const double cos_int = std::sqrt(1.0 - sin_int * sin_int);
  const double theta_int = std::asin(sin_int);
  const double core_na2 = design.n_core * design.n_core - design.n_clad * design.n_clad;

  if (entry_core && design.n_core * sin_int <= std::sqrt(core_na2)) {
    // Meridional guiding: inclination is preserved down the fiber.
    weight *= std::exp(-design.k_core * h / cos_int);
    return weight * fresnel_transmittance(design.n_core, design.n0, theta_int);
  }

  double path_core = 0.0;
  double path_clad = 0.0;
  double exit_x = ray.origin.x;
  double exit_y = ray.origin.y;
  if (sin_int == 0.0) {
    (entry_core ? path_core : path_clad) = h;
  } else {
    const double horizontal = h * sin_int / cos_int;
    const double ux = d.x / (norm * sin_in);
    const double uy = d.y / (norm * sin_in);
    const auto crossing = planar_crossing(design, ray.origin.x, ray.origin.y, ux, uy, horizontal);
    path_core = crossing.core / sin_int;
    path_clad = crossing.clad / sin_int;
    exit_x += ux * horizontal;
    exit_y += uy * horizontal;
  }
  if (path_core + path_clad > 10.0 * h / cos_in)
    throw InternalError("ray march exceeded the path-length guard");

  weight *= std::exp(-design.k_clad * path_clad - design.k_core * path_core);
  const double n_exit = in_core(design, exit_x, exit_y) ? design.n_core : design.n_clad;
  const double exit_angle = std::asin(std::min(1.0, n_entry * sin_int / n_exit));
  return weight * fresnel_transmittance(n_exit, design.n0, exit_angle);
}

AngularResponse angular_transmittance(const FopDesign& design, std::span<const double> theta_grid,
                                      std::uint64_t samples_per_angle, std::uint64_t seed,
                                      double wavelength_nm) {
  design.validate();
  if (samples_per_angle < 1) throw DomainError("need at least one sample per angle");
  if (theta_grid.empty()) throw DomainError("empty angle grid");
  for (std::size_t i = 0; i < theta_grid.size(); ++i) {
    if (!(theta_grid[i] >= 0.0 && theta_grid[i] <= 90.0))
      throw DomainError("angles must lie in [0, 90] degrees");
    if (i > 0 && !(theta_grid[i] > theta_grid[i - 1]))
      throw DomainError("angle grid must be strictly increasing");
  }

  const std::uint64_t n = samples_per_angle;
  const auto side = static_cast<std::uint64_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::uint64_t step = golden_step(n);
  const double p = design.pitch;
  const double row_height = p * kSqrt3 / 2.0;

  AngularResponse out;
  out.theta_deg.assign(theta_grid.begin(), theta_grid.end());
  out.transmittance.assign(theta_grid.size(), 0.0);
  out.wavelength_nm = wavelength_nm;
  out.samples = samples_per_angle;
  out.seed = seed;

  parallel_for(theta_grid.size(), [&](std::size_t a) {
    const double theta = theta_grid[a] * kDeg;
    if (theta_grid[a] >= 90.0) {
      out.transmittance[a] = 0.0;
      return;
    }
    const CounterRng rng(seed, a);
    const double st = std::sin(theta);
    const double ct = std::cos(theta);
    double sum = 0.0;
    for (std::uint64_t s = 0; s < n; ++s) {
      const double u = (static_cast<double>(s % side) + rng.uniform(s, 0)) / static_cast<double>(side);
      const double v = (static_cast<double>((s / side) % side) + rng.uniform(s, 1)) /
                       static_cast<double>(side);
      const double phi = (std::numbers::pi / 3.0) *
                         (static_cast<double>((s * step) % n) + rng.uniform(s, 2)) /
                         static_cast<double>(n);
      Ray ray;
      ray.origin = {u * p + v * p / 2.0, v * row_height, 0.0};
      ray.direction = {st * std::cos(phi), st * std::sin(phi), ct};
      ray.wavelength_nm = wavelength_nm;
      sum += trace_ray(design, ray);
    }
    out.transmittance[a] = std::clamp(sum / static_cast<double>(n), 0.0, 1.0);
  });
  return out;
}

}  // namespace fopsim
