#include "fopsim/filter_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/tools/minima.hpp>

#include "fopsim/errors.hpp"

namespace fopsim {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double shift_factor(double theta_deg, double n_eff) {
  const double s = std::sin(theta_deg * kDeg) / n_eff;
  return std::sqrt(1.0 - s * s);
}

void check_angle(double theta_deg) {
  if (!(theta_deg >= 0.0 && theta_deg < 90.0))
    throw DomainError("angle of incidence must lie in [0, 90) degrees, got " +
                      std::to_string(theta_deg));
}

}  // namespace

void FilterSpec::validate() const {
  if (passbands.empty()) throw InvalidDesign("filter needs at least one passband");
  for (std::size_t i = 0; i < passbands.size(); ++i) {
    const auto& b = passbands[i];
    if (!(b.lo_nm > 0.0 && b.lo_nm < b.hi_nm))
      throw InvalidDesign("passband " + std::to_string(i) + " must satisfy 0 < lo < hi");
    if (i > 0 && !(passbands[i - 1].hi_nm < b.lo_nm))
      throw InvalidDesign("passbands must be sorted and disjoint");
  }
  if (!(pass_transmittance > 0.0 && pass_transmittance <= 1.0))
    throw InvalidDesign("pass_transmittance must lie in (0, 1]");
  if (!(stop_od >= 0.0 && stop_od <= kOdCap))
    throw InvalidDesign("stop_od must lie in [0, 12]");
  if (!(rolloff_nm > 0.0)) throw InvalidDesign("rolloff must be positive");
  if (!(n_eff > 1.0)) throw InvalidDesign("n_eff must exceed 1");
}

double shifted_wavelength(double lambda0_nm, double theta_deg, double n_eff) {
  if (!(lambda0_nm > 0.0)) throw DomainError("wavelength must be positive");
  check_angle(theta_deg);
  if (!(n_eff > std::sin(theta_deg * kDeg)))
    throw DomainError("effective index must exceed sin(theta)");
  return lambda0_nm * shift_factor(theta_deg, n_eff);
}

double calibrate_n_eff(std::span<const EdgeAnchor> anchors, double lambda_edge0_nm) {
  if (anchors.empty()) throw DomainError("calibration needs at least one anchor");
  if (!(lambda_edge0_nm > 0.0)) throw DomainError("edge wavelength must be positive");

  bool informative = false;
  double n_floor = 1.0;
  for (const auto& a : anchors) {
    check_angle(a.theta_deg);
    if (a.theta_deg == 0.0) continue;
    if (!(a.edge_nm > 0.0 && a.edge_nm < lambda_edge0_nm))
      throw DomainError("anchor edges must lie below the normal-incidence edge");
    informative = true;
    n_floor = std::max(n_floor, std::sin(a.theta_deg * kDeg));
  }
  if (!informative) throw DomainError("degenerate anchor: 0 degree anchors do not constrain n_eff");

  // Per-anchor closed form: (sin(theta)/n)^2 = 1 - (edge/edge0)^2.
  auto implied = [&](const EdgeAnchor& a) {
    const double r = a.edge_nm / lambda_edge0_nm;
    return std::sin(a.theta_deg * kDeg) / std::sqrt(1.0 - r * r);
  };

  double lo = std::numeric_limits<double>::max();
  double hi = 0.0;
  int n_informative = 0;
  for (const auto& a : anchors) {
    if (a.theta_deg == 0.0) continue;
    const double n = implied(a);
    lo = std::min(lo, n);
    hi = std::max(hi, n);
    ++n_informative;
  }
  if (hi <= 1.0) throw DomainError("no solution: anchors imply an effective index below 1");
  if (n_informative == 1 && anchors.size() == 1) return hi;

  // The least-squares optimum lies between the smallest and largest implied
  // index because each residual is monotone in n.
  auto cost = [&](double n) {
    double sum = 0.0;
    for (const auto& a : anchors) {
      const double r = lambda_edge0_nm * shift_factor(a.theta_deg, n) - a.edge_nm;
      sum += r * r;
    }
    return sum;
  };
  const double left = std::max(lo, n_floor * (1.0 + 1e-12));
  if (hi - left < 1e-15) return hi;
  const auto [n_best, c] =
      boost::math::tools::brent_find_minima(cost, left, hi, std::numeric_limits<double>::digits);
  (void)c;
  if (n_best <= 1.0) throw DomainError("no solution: fitted effective index is not above 1");
  return n_best;
}

double filter_transmittance(const FilterSpec& spec, double lambda_nm, double theta_deg) {
  if (!(lambda_nm > 0.0)) throw DomainError("wavelength must be positive");
  check_angle(theta_deg);
  const double factor = shift_factor(theta_deg, spec.n_eff);
  const double log_stop = -spec.stop_od;
  const double log_pass = std::log10(spec.pass_transmittance);
  const double half = 0.5 * spec.rolloff_nm;

  double best = log_stop;
  for (const auto& band : spec.passbands) {
    const double lo = band.lo_nm * factor;
    const double hi = band.hi_nm * factor;
    // Position on each ramp in [0, 1]: 0 at the blocking foot, 1 inside the band.
    const double up = std::clamp((lambda_nm - (lo - half)) / spec.rolloff_nm, 0.0, 1.0);
    const double down = std::clamp(((hi + half) - lambda_nm) / spec.rolloff_nm, 0.0, 1.0);
    const double frac = std::min(up, down);
    best = std::max(best, log_stop + frac * (log_pass - log_stop));
  }
  const double t = std::pow(10.0, best);
  return std::clamp(t, std::pow(10.0, log_stop), spec.pass_transmittance);
}

double lambertian_mean_transmittance(const FilterSpec& spec, double lambda_nm, int samples) {
  // Midpoint rule on mu = sin^2(theta): the cosine-weighted measure
  // 2 sin cos dtheta is uniform in mu.
  double sum = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double mu = (i + 0.5) / samples;
    const double theta = std::asin(std::sqrt(mu)) / kDeg;
    sum += filter_transmittance(spec, lambda_nm, theta);
  }
  return sum / samples;
}

double od_of(double t, double cap) {
  if (!(t > 0.0)) return cap;
  if (t > 1.0) throw DomainError("transmittance above 1");
  return std::min(cap, -std::log10(t));
}

FilterSpec reference_filter() {
  FilterSpec spec;
  spec.passbands = {{505.0, 612.0}, {677.0, 763.0}, {807.0, 1000.0}};
  spec.pass_transmittance = 0.95;
  spec.stop_od = 6.0;
  spec.rolloff_nm = 17.0;
  const std::array<EdgeAnchor, 2> anchors{{{42.0, 635.0}, {24.0, 660.0}}};
  spec.n_eff = calibrate_n_eff(anchors, 677.0);
  return spec;
}

}  // namespace fopsim
