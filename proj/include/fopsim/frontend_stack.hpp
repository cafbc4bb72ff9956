#pragma once

#include <optional>
#include <span>
#include <string>

#include "fopsim/angular_response.hpp"
#include "fopsim/filter_model.hpp"
#include "fopsim/fop_tracer.hpp"

namespace fopsim {

enum class StackOrder { FilterFirst, FilterLast, DualSided };

// Angular profile of the light that guided rays scatter into at the exit face.
enum class ExitLobe { Lambertian, Isotropic };

std::string to_string(StackOrder order);
StackOrder parse_stack_order(const std::string& text);

struct FrontendConfig {
  StackOrder order = StackOrder::DualSided;
  FopDesign fop;
  FilterSpec filter;
  // Share of the light bound for cladding absorption that is scattered into
  // guided modes and leaves near the axis.
  double s_capture = 0.0;
  // Share of the guided light scattered into a wide lobe at the exit face.
  double s_exit = 0.0;
  // Passband transmittance of the second coating in the dual-sided stack.
  // Unset means the second coating is an identical copy of the first.
  std::optional<double> dual_insertion;
  double capture_exit_deg = 5.0;
  ExitLobe lobe = ExitLobe::Lambertian;
  double max_scatter = 0.1;

  void validate() const;
};

// Caches the angle-independent filter terms for one wavelength.
class FrontendModel {
 public:
  FrontendModel(const FrontendConfig& config, double lambda_nm, const AngularResponse& fop_t);

  double operator()(double theta_deg) const;

  double lobe_mean() const { return lobe_mean_; }

 private:
  const FrontendConfig& config_;
  double lambda_;
  const AngularResponse& fop_t_;
  double peak_;
  double lobe_mean_;
  double near_normal_;
};

double frontend_transmittance(const FrontendConfig& config, double lambda_nm, double theta_deg,
                              const AngularResponse& fop_t);

AngularResponse sweep_frontend(const FrontendConfig& config, double lambda_nm,
                               std::span<const double> theta_grid, const AngularResponse& fop_t);

// Emission-band transmittance at normal incidence given the plate's T(0).
double min_passband_insertion(const FrontendConfig& config, double fop_t0);

struct ScatterCalibration {
  double s_capture = 0.0;
  double s_exit = 0.0;
};

// Solves the two lumped scatter parameters so that the filter-last stack
// reaches `last_od_normal` at 0 degrees and the filter-first stack reaches
// `first_od_oblique` at `oblique_deg`. Both conditions are linear in their
// parameter, so the inversion is closed form.
ScatterCalibration calibrate_scatter(const FrontendConfig& config, double lambda_nm,
                                     const AngularResponse& fop_t, double last_od_normal,
                                     double first_od_oblique, double oblique_deg);

}  // namespace fopsim
