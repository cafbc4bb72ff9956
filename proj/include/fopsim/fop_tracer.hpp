#pragma once

#include <cstdint>
#include <span>

#include "fopsim/angular_response.hpp"

namespace fopsim {

// Fiber optic plate: a hexagonal lattice of transparent cores embedded in an
// absorbing cladding. Lengths in micrometres, absorption in 1/um.
struct FopDesign {
  double n_core = 1.57;
  double n_clad = 1.56;
  double n0 = 1.0;  // incident and exit medium
  double core_diameter = 20.0;
  double pitch = 27.0;
  double thickness = 250.0;
  double k_clad = 0.025;
  double k_core = 0.0;

  void validate() const;
  double fill_factor() const;
  double numerical_aperture() const;
  double acceptance_deg() const;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct Ray {
  Vec3 origin;     // point on the entry face z = 0
  Vec3 direction;  // unit vector in the incident medium, z > 0 points into the plate
  double wavelength_nm = 660.0;
  double weight = 1.0;
};

// Acceptance half-angle in degrees. 90 when the numerical aperture clamps to 1.
double acceptance_angle(double n_core, double n_clad, double n0);

// Area fraction of the plate covered by cores.
double fill_factor_hex(double core_diameter, double pitch);

// Unpolarized Fresnel power transmittance from index n1 into n2 at the given
// angle of incidence (radians). Zero under total internal reflection.
double fresnel_transmittance(double n1, double n2, double incidence_rad);

// Core and cladding path lengths of a straight ray whose projection on the
// entry face runs from (x, y) for `horizontal_length` along unit azimuth (ux, uy).
struct PlanarCrossing {
  double core = 0.0;
  double clad = 0.0;
};
PlanarCrossing planar_crossing(const FopDesign& design, double x, double y, double ux,
                               double uy, double horizontal_length);

// True when (x, y) on the face lies inside a fiber core.
bool in_core(const FopDesign& design, double x, double y);

// Weight carried through the plate by one ray.
double trace_ray(const FopDesign& design, const Ray& ray);

inline constexpr std::uint64_t kDefaultSamplesPerAngle = 4096;

// Mean transmitted weight per angle, averaged over entry points stratified on
// one lattice cell and over one 60 degree azimuthal period. Angles of exactly
// 90 degrees are grazing and transmit nothing.
AngularResponse angular_transmittance(const FopDesign& design, std::span<const double> theta_grid,
                                      std::uint64_t samples_per_angle, std::uint64_t seed,
                                      double wavelength_nm = 660.0);

}  // namespace fopsim
