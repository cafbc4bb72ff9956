// Runs the twelve acceptance checks and prints one PASS/FAIL line per check.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fopsim/cli.hpp"
#include "fopsim/design_explorer.hpp"
#include "fopsim/filter_model.hpp"
#include "fopsim/fop_tracer.hpp"
#include "fopsim/frontend_stack.hpp"
#include "fopsim/imaging.hpp"
#include "fopsim/presets.hpp"

using namespace fopsim;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + num(x);
  return s;
}

Outcome c1() {
  const double a = acceptance_angle(1.57, 1.56, 1.0);
  return {std::abs(a - 10.19) <= 0.01, "alpha = " + num(a, 6) + " deg"};
}

Outcome c2() {
  const double ff = fill_factor_hex(20.0, 27.0);
  return {std::abs(ff - 0.498) <= 0.001, "FF = " + num(ff, 6)};
}

Outcome c3() {
  AngularResponse t;
  t.theta_deg = linear_grid(0.0, 90.0, 0.05);
  t.transmittance.assign(t.theta_deg.size(), 1.0);
  const double w = fwhm_deg(psf_angular(t));
  return {std::abs(w - 75.0) <= 0.2, "FWHM = " + num(w, 6) + " deg"};
}

Outcome c4() {
  double worst = 0.0;
  for (double tc : {5.0, 10.0, 22.85, 45.0, 90.0}) {
    const double exact = std::pow(std::sin(tc * kPi / 360.0), 2);
    const double q = collection_efficiency(rectangular_response(tc, 1024));
    worst = std::max(worst, std::abs(q - exact) / exact);
  }
  return {worst < 1e-4, "max relative error " + num(worst, 3)};
}

Outcome c5() {
  FopDesign d = reference_design();
  d.k_core = 0.0;
  const std::vector<double> grid{d.acceptance_deg() + 15.0};
  const double t1 = angular_transmittance(d, grid, 4096, 0).transmittance[0];
  d.thickness *= 2.0;
  const double t2 = angular_transmittance(d, grid, 4096, 0).transmittance[0];
  const double r = t2 / (t1 * t1);
  return {r >= 0.8 && r <= 1.25, "T(2h)/T(h)^2 = " + num(r)};
}

Outcome c6() {
  const auto grid = linear_grid(0.0, 89.0, 1.0);
  const FopDesign base = reference_design();
  std::vector<double> sat;
  for (double alpha : {5.0, 10.0, 15.0, 20.0}) {
    FopDesign d = base;
    d.n_clad = clad_index_for_acceptance(d.n_core, alpha, d.n0);
    sat.push_back(saturation_angle(angular_transmittance(d, grid, kDefaultSamplesPerAngle, 0), d.acceptance_deg()));
  }
  std::vector<double> ff_floor;  // FF descending
  for (double ff : {0.6, 0.5, 0.4, 0.3}) {
    const FopDesign d = design_for(base, base.numerical_aperture(), ff, base.thickness);
    ff_floor.push_back(off_axis_floor(angular_transmittance(d, grid, kDefaultSamplesPerAngle, 0), d.acceptance_deg()));
  }
  std::vector<double> h_floor;
  for (double h : {100.0, 175.0, 250.0, 325.0, 400.0}) {
    FopDesign d = base;
    d.thickness = h;
    h_floor.push_back(off_axis_floor(angular_transmittance(d, grid, kDefaultSamplesPerAngle, 0), d.acceptance_deg()));
  }
  auto neg = [](std::vector<double> v) {
    for (double& x : v) x = -x;
    return v;
  };
  const bool ok = strictly_increasing(sat) && strictly_increasing(neg(ff_floor)) && strictly_increasing(neg(h_floor));
  return {ok, "sat(alpha 5..20) = [" + join(sat) + "] floor(FF 60..30%) = [" + join(ff_floor) +
                  "] floor(h 100..400) = [" + join(h_floor) + "]"};
}

Outcome c7() {
  const auto grid = linear_grid(0.0, 89.0, 1.0);
  FrontendConfig low = low_na_frontend();
  FrontendConfig high = high_na_frontend();
  const auto d_low = angular_transmittance(low.fop, grid, kDefaultSamplesPerAngle, 0);
  const auto d_high = angular_transmittance(high.fop, grid, kDefaultSamplesPerAngle, 0);

  // The shipped scatter constants must be what the calibration produces.
  FrontendConfig probe = low;
  probe.order = StackOrder::FilterLast;
  const auto s = calibrate_scatter(probe, 660.0, d_low, 3.7, 5.0, 45.0);
  const bool frozen = std::abs(s.s_capture / kCalibratedScatter.s_capture - 1.0) < 1e-4 &&
                      std::abs(s.s_exit / kCalibratedScatter.s_exit - 1.0) < 1e-4;

  const double dual_low = laser_margin(low, 660.0, d_low).worst_od;
  const double dual_high = laser_margin(high, 635.0, d_high).worst_od;
  FrontendConfig last = low;
  last.order = StackOrder::FilterLast;
  FrontendConfig first = low;
  first.order = StackOrder::FilterFirst;
  const double last0 = od_of(frontend_transmittance(last, 660.0, 0.0, d_low));
  const double first45 = od_of(frontend_transmittance(first, 660.0, 45.0, d_low));
  const bool ok = frozen && dual_low >= 7.0 && dual_high >= 6.0 && std::abs(last0 - 3.7) <= 0.7 &&
                  std::abs(first45 - 5.0) <= 0.7;
  return {ok, "calibration-matched: dual worst OD low-NA@660 " + num(dual_low) + ", high-NA@635 " +
                  num(dual_high) + "; filter-last OD(0) " + num(last0) + "; filter-first OD(45) " +
                  num(first45) + (frozen ? "" : "; frozen scatter differs from recalibration")};
}

AngularResponse emission_response(const FrontendConfig& c) {
  const auto grid = linear_grid(0.0, 90.0, 0.5);
  const auto d = angular_transmittance(c.fop, grid, kDefaultSamplesPerAngle, 0);
  return sweep_frontend(c, kEmissionNm, grid, d);
}

Outcome c8() {
  const auto low = emission_response(low_na_frontend());
  const auto high = emission_response(high_na_frontend());
  const double ratio = collection_efficiency(high) / collection_efficiency(low);
  const double oracle = collection_efficiency_rect(kHighNaFwhmDeg / 2.0) * high.transmittance[0] /
                        (collection_efficiency_rect(kLowNaFwhmDeg / 2.0) * low.transmittance[0]);
  return {ratio >= 30.0 && ratio <= 90.0,
          "simulated high/low CE ratio " + num(ratio) + " (rectangular oracle " + num(oracle) + ")"};
}

ResolutionResult resolve(const FrontendConfig& c, double l, const std::vector<double>& widths) {
  OpticalGeometry g;
  g.working_distance = l;
  g.medium_index = 1.5;
  CtfOptions o;  // 8 phases, pixel/8 texels
  const auto curve = ctf(emission_response(c), g, c.fop, widths, o);
  return resolution_at(curve, 0.4, 2.0 * g.pixel_pitch);
}

Outcome c9() {
  const auto widths = usaf_line_widths(-1, 3);
  const auto low = resolve(low_na_frontend(), 1000.0, widths);
  const auto high = resolve(high_na_frontend(), 1000.0, widths);
  const auto low_near = resolve(low_na_frontend(), 150.0, widths);
  const auto high_near = resolve(high_na_frontend(), 150.0, widths);
  const double ratio = high.line_width / low.line_width;
  const bool ok = low.line_width <= 150.0 && ratio >= 3.0 && ratio <= 6.0 && low_near.pixel_limited &&
                  high_near.pixel_limited && low_near.line_width <= 110.0 && high_near.line_width <= 110.0;
  auto tag = [](const ResolutionResult& r) { return num(r.line_width) + (r.pixel_limited ? " um (pixel-limited)" : " um"); };
  return {ok, "l=1mm: low " + tag(low) + ", high " + tag(high) + ", ratio " + num(ratio) + "; l=150um: low " +
                  tag(low_near) + ", high " + tag(high_near)};
}

Outcome c10() {
  const std::vector<double> ratios{1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0};
  const auto m = pixel_fiber_modulation(reference_design(), ratios, 64, 0);
  bool mono = true;
  std::vector<double> s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    s.push_back(m[i].std_dev);
    if (i > 0 && m[i].std_dev > m[i - 1].std_dev) mono = false;
  }
  return {mono && m[2].std_dev < 0.5 * m[0].std_dev, "std(ratio 1,1.5,2,3,4,6,8) = [" + join(s) + "]"};
}

Outcome c11() {
  FrontendConfig c;
  c.order = StackOrder::FilterLast;
  c.fop = low_na_design();
  c.filter = reference_filter();
  ThicknessOptions o;
  o.od_target = 6.0;
  o.theta_min = 0.0;
  o.theta_max = 22.0;
  o.theta_step = 1.0;
  const auto r = min_thickness(c, 660.0, o);
  const double od_h = worst_case_od(c, 660.0, r.thickness, o);
  const double od_h2 = worst_case_od(c, 660.0, r.thickness - 2.0, o);
  const bool ok = od_h >= o.od_target && od_h2 < o.od_target && r.thickness <= 250.0;
  return {ok, "low-NA filter-last theta<=22: h = " + num(r.thickness) + " um, OD(h) " + num(od_h) +
                  ", OD(h-2) " + num(od_h2) + ", " + std::to_string(r.evaluations) + " evaluations"};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), dir).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

Outcome c12() {
  const fs::path root = fs::temp_directory_path() / "fopsim_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "run.ini";
  std::ofstream(cfg) << "seed = 5\n"
                        "[frontend]\npreset = calibrated\n"
                        "[sweep]\nsamples = 256\nnumerical_aperture = 0.1, 0.3\nlambda_ex = 660\n"
                        "[render]\nline_widths = 400, 200, 100\nphases = 2\nnoise = true\nread_sigma = 0.01\n"
                        "[optimize]\nod_target = 3\ntheta_max = 20\ntheta_step = 5\n"
                        "acknowledge_scatter = true\n";
  const std::vector<std::vector<std::string>> commands{
      {"angle-sweep"}, {"frontend-sweep"}, {"psf"}, {"eta"}, {"render-usaf"},
      {"ctf"},         {"optimize-h"},     {"design-sweep"}, {"calibrate-filter"}};
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* threads : {"1", "4", "1"}) {
    const fs::path out = root / ("run" + std::to_string(runs.size()));
    for (const auto& cmd : commands) {
      std::vector<std::string> args{"fopsim", "-c", cfg.string(), "--out-dir", out.string(), "--threads", threads};
      args.insert(args.end(), cmd.begin(), cmd.end());
      std::vector<const char*> argv;
      for (const auto& a : args) argv.push_back(a.c_str());
      std::ostringstream sink, err;
      const int code = run_cli(static_cast<int>(argv.size()), argv.data(), sink, err);
      if (code != 0) return {false, cmd[0] + " exited with " + std::to_string(code) + ": " + err.str()};
    }
    runs.push_back(snapshot(out));
  }
  std::size_t files = runs[0].size();
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i] != runs[0]) return {false, "outputs differ between run 0 and run " + std::to_string(i)};
  fs::remove_all(root);
  return {files > 0, std::to_string(files) + " files identical across threads 1, 4 and a rerun"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"acceptance angle", c1},       {"fill factor", c2},         {"bare-sensor PSF", c3},
      {"collection efficiency", c4},  {"Beer-Lambert scaling", c5}, {"sweep trends", c6},
      {"frontend ordering", c7},      {"CE ratio", c8},            {"resolution band", c9},
      {"pitch-ratio rule", c10},      {"thickness optimization", c11}, {"determinism", c12}};
  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << checks[i].first << ": " << o.detail << " ["
              << num(secs, 3) << " s]" << std::endl;
  }
  std::cout << (checks.size() - failed) << "/" << checks.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
