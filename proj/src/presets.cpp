#include "fopsim/presets.hpp"

#include <cmath>
#include <numbers>

#include "fopsim/errors.hpp"

namespace fopsim {

double clad_index_for_acceptance(double n_core, double acceptance_deg, double n0) {
  if (!(acceptance_deg > 0.0 && acceptance_deg < 90.0))
    throw DomainError("acceptance angle must lie in (0, 90) degrees");
  const double na = n0 * std::sin(acceptance_deg * std::numbers::pi / 180.0);
  if (!(na < n_core)) throw DomainError("acceptance angle needs NA below n_core");
  return std::sqrt(n_core * n_core - na * na);
}

FopDesign reference_design() { return FopDesign{}; }

FopDesign low_na_design() {
  FopDesign d;
  d.n_core = 1.51;
  d.n_clad = clad_index_for_acceptance(d.n_core, kLowNaFwhmDeg / 2.0);
  d.core_diameter = 9.0;
  d.pitch = 11.0;
  d.thickness = 500.0;
  d.k_clad = 0.12;
  // 50 % measured at 0 deg against 16 % expected from FF and Fresnel over 900 um.
  d.k_core = std::log(50.0 / 16.0) / 900.0;
  return d;
}

FopDesign high_na_design() {
  FopDesign d;
  d.n_core = 1.57;
  d.n_clad = clad_index_for_acceptance(d.n_core, kHighNaFwhmDeg / 2.0);
  d.core_diameter = 14.5;
  d.pitch = 20.0;
  d.thickness = 500.0;
  d.k_clad = 0.08;
  d.k_core = 0.0;
  return d;
}

namespace {

FrontendConfig make_frontend(const FopDesign& fop) {
  FrontendConfig c;
  c.order = StackOrder::DualSided;
  c.fop = fop;
  c.filter = reference_filter();
  // Frozen output of calibrate_scatter on the low-NA stack at 660 nm with
  // the default sampling (see tests).
  c.s_capture = kCalibratedScatter.s_capture;
  c.s_exit = kCalibratedScatter.s_exit;
  return c;
}

}  // namespace

FrontendConfig low_na_frontend() { return make_frontend(low_na_design()); }
FrontendConfig high_na_frontend() { return make_frontend(high_na_design()); }

}  // namespace fopsim
