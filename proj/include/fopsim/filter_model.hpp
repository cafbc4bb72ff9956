#pragma once

#include <span>
#include <vector>

namespace fopsim {

// Transmittance values are clamped to this optical density before taking logs.
inline constexpr double kOdCap = 12.0;

struct Passband {
  double lo_nm;
  double hi_nm;
};

// Multi-bandpass interference filter: ideal bands with a log-linear roll-off
// of width rolloff_nm centred on every band edge. All edges blue-shift with
// angle of incidence through a single effective cavity index.
struct FilterSpec {
  std::vector<Passband> passbands;
  double pass_transmittance = 0.95;
  double stop_od = 6.0;
  double rolloff_nm = 17.0;
  double n_eff = 1.87;

  // Throws InvalidDesign when an invariant does not hold.
  void validate() const;
};

struct EdgeAnchor {
  double theta_deg;
  double edge_nm;
};

// Centre wavelength of a cavity resonance seen at angle theta_deg.
double shifted_wavelength(double lambda0_nm, double theta_deg, double n_eff);

// Least-squares effective index that makes the shifted edge pass through the
// anchors. A single non-zero anchor is solved in closed form.
double calibrate_n_eff(std::span<const EdgeAnchor> anchors, double lambda_edge0_nm);

double filter_transmittance(const FilterSpec& spec, double lambda_nm, double theta_deg);

// Lambertian (cosine) weighted mean of the transmittance over the hemisphere.
double lambertian_mean_transmittance(const FilterSpec& spec, double lambda_nm,
                                     int samples = 720);

// -log10(t). t <= 0 is reported as the cap.
double od_of(double t, double cap = kOdCap);

// Band list of the triple-band filter characterised in the reference build,
// with the effective index fitted from its two bleed-through anchors.
FilterSpec reference_filter();

}  // namespace fopsim
