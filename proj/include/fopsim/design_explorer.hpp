#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fopsim/angular_response.hpp"
#include "fopsim/frontend_stack.hpp"
#include "fopsim/imaging.hpp"

namespace fopsim {

struct FluorophoreSpec {
  std::string name;
  // Wavelength (nm) against relative value, peak 1, sorted by wavelength.
  std::vector<double> excitation_nm;
  std::vector<double> excitation;
  std::vector<double> emission_nm;
  std::vector<double> emission;

  void validate() const;
};

// IRDye 680LT, coarse tables through the published extinction points.
FluorophoreSpec irdye_680lt();

// Two-column CSV `wavelength_nm,relative_value`. Values are renormalised to a
// peak of 1.
void read_spectrum_csv(const std::string& path, std::vector<double>& nm, std::vector<double>& value);

double excitation_efficiency(const FluorophoreSpec& fluor, double lambda_ex_nm);

struct FomInputs {
  double eta_c = 0.0;
  double excitation_efficiency = 1.0;
  // Emission-band insertion not already folded into eta_c.
  double insertion = 1.0;
};
double system_figure_of_merit(const FomInputs& in);

// ---- plate curve features ------------------------------------------------------

// First angle past the acceptance angle where the log transmittance stops
// falling faster than `slope_dec_per_deg`: the end of the guided-mode cliff.
double saturation_angle(const AngularResponse& fop_t, double acceptance_deg,
                        double slope_dec_per_deg = 0.02);

// Geometric mean of T over [alpha + 10, alpha + 30] degrees (clipped to the curve).
double off_axis_floor(const AngularResponse& fop_t, double acceptance_deg);

// ---- rejection margin --------------------------------------------------------------

struct LaserMargin {
  double max_od = 0.0;       // best rejection over the scanned angles
  double worst_theta = 0.0;  // angle of least rejection
  double worst_od = 0.0;     // rejection at worst_theta
};

LaserMargin laser_margin(const AngularResponse& frontend_curve);
LaserMargin laser_margin(const FrontendConfig& config, double lambda_ex_nm,
                         const AngularResponse& fop_t);

// ---- thickness optimisation ------------------------------------------------

struct ThicknessOptions {
  double od_target = 6.0;
  double theta_min = 0.0;
  double theta_max = 89.0;
  double theta_step = 1.0;
  double h_min = 10.0;
  double h_max = 5000.0;
  std::uint64_t samples = 4096;
  std::uint64_t seed = 0;
  // Scatter makes the floor non-monotone in h; callers must opt in.
  bool acknowledge_scatter = false;
};

struct ThicknessResult {
  double thickness = 0.0;
  double worst_od = 0.0;
  int evaluations = 0;
  std::vector<std::string> warnings;
};

// Worst-case frontend OD over the options' angle range for a plate of thickness h.
double worst_case_od(const FrontendConfig& config, double lambda_ex_nm, double h,
                     const ThicknessOptions& options);

// Smallest whole-micrometre h in [h_min, h_max] whose worst-case OD meets the
// target. Throws InfeasibleError when h_max does not.
ThicknessResult min_thickness(const FrontendConfig& config, double lambda_ex_nm,
                              const ThicknessOptions& options);

// ---- design sweep -----------------------------------------------------------------

struct SweepGrids {
  std::vector<double> numerical_aperture;
  std::vector<double> fill_factor;
  std::vector<double> thickness;
  std::vector<double> lambda_ex;
};

struct SweepOptions {
  FrontendConfig base;
  OpticalGeometry geom;
  FluorophoreSpec fluor = irdye_680lt();
  double emission_nm = 694.0;
  double theta_step = 0.5;
  std::uint64_t samples = 4096;
  std::uint64_t seed = 0;
};

struct DesignReportRow {
  double numerical_aperture = 0.0;
  double fill_factor = 0.0;
  double thickness = 0.0;
  double lambda_ex = 0.0;
  double worst_od = 0.0;
  double eta_c = 0.0;
  double fwhm_deg = 0.0;
  double fwhm_xy = 0.0;
  double fom = 0.0;
};

// Plate with the requested NA (cladding index solved) and fill factor (core
// diameter solved at fixed pitch).
FopDesign design_for(const FopDesign& base, double numerical_aperture, double fill_factor,
                     double thickness);

// One row per grid combination, ordered NA, FF, h, lambda (last varies fastest).
std::vector<DesignReportRow> design_sweep(const SweepGrids& grids, const SweepOptions& options);

}  // namespace fopsim
