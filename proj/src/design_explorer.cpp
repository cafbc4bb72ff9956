#include "fopsim/design_explorer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "fopsim/csv.hpp"
#include "fopsim/errors.hpp"
#include "fopsim/filter_model.hpp"
#include "fopsim/parallel.hpp"
#include "fopsim/presets.hpp"

namespace fopsim {
namespace {

void check_table(const std::vector<double>& nm, const std::vector<double>& v, const char* what) {
  if (nm.empty() || nm.size() != v.size())
    throw InvalidDesign(std::string(what) + " table must be non-empty with matching columns");
  for (std::size_t i = 0; i < nm.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0)) throw InvalidDesign(std::string(what) + " values must lie in [0, 1]");
    if (i > 0 && !(nm[i] > nm[i - 1]))
      throw InvalidDesign(std::string(what) + " wavelengths must be strictly increasing");
  }
}

double interp_table(const std::vector<double>& x, const std::vector<double>& y, double v) {
  if (v < x.front() || v > x.back()) throw DomainError("wavelength outside the tabulated range");
  const auto it = std::lower_bound(x.begin(), x.end(), v);
  const std::size_t i = static_cast<std::size_t>(it - x.begin());
  if (x[i] == v) return y[i];
  const double f = (v - x[i - 1]) / (x[i] - x[i - 1]);
  return y[i - 1] + f * (y[i] - y[i - 1]);
}

}  // namespace

void FluorophoreSpec::validate() const {
  check_table(excitation_nm, excitation, "excitation");
  check_table(emission_nm, emission, "emission");
}

FluorophoreSpec irdye_680lt() {
  FluorophoreSpec f;
  f.name = "IRDye 680LT";
  // 635, 660 and 677 nm are the published points; the rest only shapes the tails.
  f.excitation_nm = {600, 620, 635, 650, 660, 670, 677, 690, 700, 720};
  f.excitation = {0.10, 0.20, 0.33, 0.50, 0.65, 0.87, 1.00, 0.55, 0.25, 0.05};
  f.emission_nm = {670, 680, 694, 710, 730, 760, 800};
  f.emission = {0.05, 0.30, 1.00, 0.60, 0.30, 0.10, 0.02};
  return f;
}

void read_spectrum_csv(const std::string& path, std::vector<double>& nm, std::vector<double>& value) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spectrum file " + path);
  const csv::Table t = csv::read_table(in);
  const std::size_t cn = t.column("wavelength_nm");
  const std::size_t cv = t.column("relative_value");
  std::vector<std::pair<double, double>> rows;
  for (const auto& r : t.rows) rows.emplace_back(r[cn], r[cv]);
  std::sort(rows.begin(), rows.end());
  double peak = 0.0;
  for (const auto& r : rows) peak = std::max(peak, r.second);
  if (!(peak > 0.0)) throw ConfigError("spectrum " + path + " has no positive values");
  nm.clear();
  value.clear();
  for (const auto& r : rows) {
    nm.push_back(r.first);
    value.push_back(std::max(0.0, r.second / peak));
  }
  check_table(nm, value, "spectrum");
}

double excitation_efficiency(const FluorophoreSpec& fluor, double lambda_ex_nm) {
  fluor.validate();
  return interp_table(fluor.excitation_nm, fluor.excitation, lambda_ex_nm);
}

double system_figure_of_merit(const FomInputs& in) {
  if (!(in.eta_c >= 0.0 && in.excitation_efficiency >= 0.0 && in.insertion >= 0.0))
    throw DomainError("figure of merit inputs must be non-negative");
  return in.eta_c * in.excitation_efficiency * in.insertion;
}

double saturation_angle(const AngularResponse& fop_t, double acceptance_deg, double slope_dec_per_deg) {
  fop_t.validate();
  const auto& th = fop_t.theta_deg;
  auto lg = [&](std::size_t i) { return std::log10(std::max(fop_t.transmittance[i], 1e-300)); };
  for (std::size_t i = 0; i + 1 < th.size(); ++i) {
    if (th[i] <= acceptance_deg) continue;
    const double slope = (lg(i) - lg(i + 1)) / (th[i + 1] - th[i]);
    if (slope < slope_dec_per_deg) return th[i];
  }
  throw DomainError("response never flattens past the acceptance angle");
}

double off_axis_floor(const AngularResponse& fop_t, double acceptance_deg) {
  fop_t.validate();
  const double lo = acceptance_deg + 10.0;
  const double hi = std::min(acceptance_deg + 30.0, std::min(fop_t.max_theta(), 89.0));
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < fop_t.size(); ++i) {
    if (fop_t.theta_deg[i] < lo || fop_t.theta_deg[i] > hi) continue;
    sum += std::log(std::max(fop_t.transmittance[i], 1e-300));
    ++n;
  }
  if (n == 0) throw DomainError("no samples in the off-axis window");
  return std::exp(sum / n);
}

LaserMargin laser_margin(const AngularResponse& frontend_curve) {
  frontend_curve.validate();
  const auto& t = frontend_curve.transmittance;
  const auto worst = std::max_element(t.begin(), t.end());
  const auto best = std::min_element(t.begin(), t.end());
  LaserMargin m;
  m.max_od = od_of(*best);
  m.worst_theta = frontend_curve.theta_deg[static_cast<std::size_t>(worst - t.begin())];
  m.worst_od = od_of(*worst);
  return m;
}

LaserMargin laser_margin(const FrontendConfig& config, double lambda_ex_nm, const AngularResponse& fop_t) {
  return laser_margin(sweep_frontend(config, lambda_ex_nm, fop_t.theta_deg, fop_t));
}

double worst_case_od(const FrontendConfig& config, double lambda_ex_nm, double h,
                     const ThicknessOptions& options) {
  FrontendConfig c = config;
  c.fop.thickness = h;
  const auto grid = linear_grid(options.theta_min, options.theta_max, options.theta_step);
  const AngularResponse d = angular_transmittance(c.fop, grid, options.samples, options.seed, lambda_ex_nm);
  return laser_margin(c, lambda_ex_nm, d).worst_od;
}

ThicknessResult min_thickness(const FrontendConfig& config, double lambda_ex_nm,
                              const ThicknessOptions& options) {
  config.validate();
  if (!(options.od_target >= 0.0 && options.od_target <= kOdCap))
    throw DomainError("OD target must lie in [0, " + csv::format_number(kOdCap) + "]");
  if (!(options.h_min > 0.0 && options.h_max >= options.h_min))
    throw DomainError("thickness bounds must satisfy 0 < h_min <= h_max");
  if (!(options.theta_min >= 0.0 && options.theta_max < 90.0 && options.theta_min <= options.theta_max))
    throw DomainError("angle range must lie in [0, 90)");

  ThicknessResult out;
  if (config.s_capture > 0.0 || config.s_exit > 0.0) {
    if (!options.acknowledge_scatter)
      throw DomainError("scatter makes the floor non-monotone in thickness; set s_capture = s_exit = 0 "
                        "or acknowledge scatter");
    out.warnings.emplace_back("scatter enabled: bisection assumes a floor that falls with thickness");
  }

  auto od_at = [&](long h) {
    ++out.evaluations;
    return worst_case_od(config, lambda_ex_nm, static_cast<double>(h), options);
  };
  long lo = static_cast<long>(std::ceil(options.h_min));
  long hi = static_cast<long>(std::floor(options.h_max));
  if (hi < lo) throw DomainError("thickness bounds contain no whole micrometre");

  double od_lo = od_at(lo);
  if (od_lo >= options.od_target) {
    out.thickness = static_cast<double>(lo);
    out.worst_od = od_lo;
    return out;
  }
  double od_hi = od_at(hi);
  if (od_hi < options.od_target)
    throw InfeasibleError("OD " + csv::format_number(options.od_target) + " is not reached at h = " +
                          std::to_string(hi) + " um (worst OD " + csv::format_number(od_hi) + ")");
  // Invariant: lo fails, hi passes.
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    const double od = od_at(mid);
    if (od >= options.od_target) {
      hi = mid;
      od_hi = od;
    } else {
      lo = mid;
    }
  }
  out.thickness = static_cast<double>(hi);
  out.worst_od = od_hi;
  return out;
}

FopDesign design_for(const FopDesign& base, double numerical_aperture, double fill_factor,
                     double thickness) {
  if (!(numerical_aperture > 0.0 && numerical_aperture < base.n0))
    throw DomainError("numerical aperture must lie in (0, n0)");
  const double ff_max = std::numbers::pi / (2.0 * std::sqrt(3.0));
  if (!(fill_factor > 0.0 && fill_factor < ff_max)) throw DomainError("fill factor must lie in (0, 0.9069)");
  FopDesign d = base;
  const double alpha = std::asin(numerical_aperture / base.n0) * 180.0 / std::numbers::pi;
  d.n_clad = clad_index_for_acceptance(base.n_core, alpha, base.n0);
  d.core_diameter = base.pitch * std::sqrt(fill_factor / ff_max);
  d.thickness = thickness;
  d.validate();
  return d;
}

std::vector<DesignReportRow> design_sweep(const SweepGrids& grids, const SweepOptions& options) {
  if (grids.numerical_aperture.empty() || grids.fill_factor.empty() || grids.thickness.empty() ||
      grids.lambda_ex.empty())
    throw DomainError("every sweep grid needs at least one value");
  options.base.validate();
  options.geom.validate();
  options.fluor.validate();

  const std::size_t n_ff = grids.fill_factor.size();
  const std::size_t n_h = grids.thickness.size();
  const std::size_t n_l = grids.lambda_ex.size();
  const std::size_t designs = grids.numerical_aperture.size() * n_ff * n_h;
  std::vector<DesignReportRow> rows(designs * n_l);
  const auto grid = linear_grid(0.0, 90.0, options.theta_step);

  parallel_for(designs, [&](std::size_t k) {
    const double na = grids.numerical_aperture[k / (n_ff * n_h)];
    const double ff = grids.fill_factor[(k / n_h) % n_ff];
    const double h = grids.thickness[k % n_h];
    FrontendConfig c = options.base;
    c.fop = design_for(options.base.fop, na, ff, h);
    // The plate model is achromatic, so one sweep serves every wavelength.
    const AngularResponse d = angular_transmittance(c.fop, grid, options.samples, options.seed, options.emission_nm);
    const AngularResponse em = sweep_frontend(c, options.emission_nm, grid, d);
    const double eta = collection_efficiency(em);
    const double fwhm = fwhm_deg(psf_angular(em));
    const double fwhm_xy = spatial_fwhm(em, options.geom);
    for (std::size_t li = 0; li < n_l; ++li) {
      const double lam = grids.lambda_ex[li];
      DesignReportRow& r = rows[k * n_l + li];
      r.numerical_aperture = na;
      r.fill_factor = ff;
      r.thickness = h;
      r.lambda_ex = lam;
      r.worst_od = laser_margin(sweep_frontend(c, lam, grid, d)).worst_od;
      r.eta_c = eta;
      r.fwhm_deg = fwhm;
      r.fwhm_xy = fwhm_xy;
      r.fom = system_figure_of_merit({eta, excitation_efficiency(options.fluor, lam), 1.0});
    }
  });
  return rows;
}

}  // namespace fopsim
