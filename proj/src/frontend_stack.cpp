#include "fopsim/frontend_stack.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fopsim/errors.hpp"
#include "fopsim/parallel.hpp"

namespace fopsim {

std::string to_string(StackOrder order) {
  switch (order) {
    case StackOrder::FilterFirst: return "filter-first";
    case StackOrder::FilterLast: return "filter-last";
    case StackOrder::DualSided: return "dual-sided";
  }
  return "?";
}

StackOrder parse_stack_order(const std::string& text) {
  if (text == "filter-first" || text == "first") return StackOrder::FilterFirst;
  if (text == "filter-last" || text == "last") return StackOrder::FilterLast;
  if (text == "dual-sided" || text == "dual") return StackOrder::DualSided;
  throw ConfigError("unknown stack order '" + text + "' (filter-first, filter-last, dual-sided)");
}

void FrontendConfig::validate() const {
  fop.validate();
  filter.validate();
  if (!(s_capture >= 0.0 && s_capture <= max_scatter))
    throw InvalidDesign("s_capture must lie in [0, " + std::to_string(max_scatter) + "]");
  if (!(s_exit >= 0.0 && s_exit <= max_scatter))
    throw InvalidDesign("s_exit must lie in [0, " + std::to_string(max_scatter) + "]");
  if (dual_insertion && !(*dual_insertion > 0.0 && *dual_insertion <= filter.pass_transmittance))
    throw InvalidDesign("dual_insertion must lie in (0, pass_transmittance]");
  if (!(capture_exit_deg >= 0.0 && capture_exit_deg < 90.0))
    throw InvalidDesign("capture_exit_deg must lie in [0, 90)");
}

namespace {

double isotropic_mean(const FilterSpec& spec, double lambda_nm, int samples = 720) {
  // Uniform in mu = cos(theta) over the hemisphere.
  double sum = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double mu = (i + 0.5) / samples;
    sum += filter_transmittance(spec, lambda_nm, std::acos(mu) * 180.0 / std::numbers::pi);
  }
  return sum / samples;
}

}  // namespace

FrontendModel::FrontendModel(const FrontendConfig& config, double lambda_nm,
                             const AngularResponse& fop_t)
    : config_(config), lambda_(lambda_nm), fop_t_(fop_t) {
  config.validate();
  fop_t.validate();
  peak_ = fop_t.peak();
  lobe_mean_ = config.lobe == ExitLobe::Lambertian
                   ? lambertian_mean_transmittance(config.filter, lambda_nm)
                   : isotropic_mean(config.filter, lambda_nm);
  near_normal_ = filter_transmittance(config.filter, lambda_nm, config.capture_exit_deg);
}

double FrontendModel::operator()(double theta_deg) const {
  // Grazing incidence transmits nothing, as in the plate sweep.
  if (theta_deg >= 90.0 && theta_deg <= fop_t_.max_theta()) return 0.0;
  const double direct = fop_t_.at(theta_deg);
  const double captured =
      peak_ > 0.0 ? config_.s_capture * (1.0 - direct / peak_) : config_.s_capture;
  const double tf = filter_transmittance(config_.filter, lambda_, theta_deg);
  const double s = config_.s_exit;
  // Light leaving the plate, seen by a coating on the exit face.
  const double exit_filtered = direct * ((1.0 - s) * tf + s * lobe_mean_) + captured * near_normal_;

  double t = 0.0;
  switch (config_.order) {
    case StackOrder::FilterFirst:
      t = tf * (direct + captured);
      break;
    case StackOrder::FilterLast:
      t = exit_filtered;
      break;
    case StackOrder::DualSided: {
      const double scale =
          config_.dual_insertion ? *config_.dual_insertion / config_.filter.pass_transmittance : 1.0;
      t = tf * scale * exit_filtered;
      break;
    }
  }
  return std::clamp(t, 0.0, 1.0);
}

double frontend_transmittance(const FrontendConfig& config, double lambda_nm, double theta_deg,
                              const AngularResponse& fop_t) {
  return FrontendModel(config, lambda_nm, fop_t)(theta_deg);
}

AngularResponse sweep_frontend(const FrontendConfig& config, double lambda_nm,
                               std::span<const double> theta_grid, const AngularResponse& fop_t) {
  const FrontendModel model(config, lambda_nm, fop_t);
  AngularResponse out;
  out.theta_deg.assign(theta_grid.begin(), theta_grid.end());
  out.transmittance.assign(theta_grid.size(), 0.0);
  out.wavelength_nm = lambda_nm;
  out.samples = fop_t.samples;
  out.seed = fop_t.seed;
  parallel_for(theta_grid.size(), [&](std::size_t i) { out.transmittance[i] = model(theta_grid[i]); });
  out.validate();
  return out;
}

double min_passband_insertion(const FrontendConfig& config, double fop_t0) {
  config.validate();
  const double tp = config.filter.pass_transmittance;
  if (config.order != StackOrder::DualSided) return tp * fop_t0;
  return tp * config.dual_insertion.value_or(tp) * fop_t0;
}

ScatterCalibration calibrate_scatter(const FrontendConfig& config, double lambda_nm,
                                     const AngularResponse& fop_t, double last_od_normal,
                                     double first_od_oblique, double oblique_deg) {
  FrontendConfig probe = config;
  probe.s_capture = 0.0;
  probe.s_exit = 0.0;
  const FrontendModel model(probe, lambda_nm, fop_t);
  const double peak = fop_t.peak();

  ScatterCalibration out;
  {
    // T_last(0) = D0 * ((1 - s) tf0 + s mean) + C(0) * tf_near, with C(0) = 0
    // when the plate peaks at normal incidence.
    const double d0 = fop_t.at(0.0);
    const double tf0 = filter_transmittance(config.filter, lambda_nm, 0.0);
    const double target = std::pow(10.0, -last_od_normal);
    const double denom = d0 * (model.lobe_mean() - tf0);
    if (!(denom > 0.0)) throw InfeasibleError("exit scatter cannot change the normal-incidence floor");
    out.s_exit = (target - d0 * tf0) / denom;
  }
  {
    const double d = fop_t.at(oblique_deg);
    const double tf = filter_transmittance(config.filter, lambda_nm, oblique_deg);
    const double target = std::pow(10.0, -first_od_oblique);
    const double share = peak > 0.0 ? 1.0 - d / peak : 1.0;
    if (!(tf > 0.0 && share > 0.0)) throw InfeasibleError("capture scatter cannot change the oblique floor");
    out.s_capture = (target / tf - d) / share;
  }
  if (out.s_exit < 0.0 || out.s_capture < 0.0)
    throw InfeasibleError("scatter-free floors already exceed the calibration targets");
  return out;
}

}  // namespace fopsim
