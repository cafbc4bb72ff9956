#include <doctest.h>

#include <cmath>
#include <random>

#include "fopsim/errors.hpp"
#include "fopsim/imaging.hpp"
#include "fopsim/parallel.hpp"
#include "fopsim/presets.hpp"

using namespace fopsim;

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

AngularResponse tabulate(double step, double (*f)(double)) {
  AngularResponse r;
  r.theta_deg = linear_grid(0.0, 90.0, step);
  for (double th : r.theta_deg) r.transmittance.push_back(f(th));
  return r;
}

double flat(double) { return 1.0; }
double gaussian(double th) { return std::exp(-std::pow(th / 15.0, 2)); }

// Half-maximum radius of T(theta_air) cos^3(theta_m) by bisection on theta_m.
double fwhm_xy_oracle(double l, double n) {
  auto e = [&](double tm) {
    const double s = n * std::sin(tm);
    if (s >= 1.0) return 0.0;
    return gaussian(std::asin(s) / kDeg) * std::pow(std::cos(tm), 3);
  };
  double lo = 0.0, hi = std::asin(1.0 / n) - 1e-12;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (e(mid) > 0.5 ? lo : hi) = mid;
  }
  return 2.0 * l * std::tan(lo);
}

OpticalGeometry small_sensor() {
  OpticalGeometry g;
  g.rows = 12;
  g.cols = 12;
  g.pixel_pitch = 55.0;
  g.working_distance = 1e-3;
  return g;
}

SceneImage uniform_sensor_scene(const OpticalGeometry& g, double texel) {
  const int rows = static_cast<int>(std::lround(g.height() / texel));
  const int cols = static_cast<int>(std::lround(g.width() / texel));
  SceneImage s(rows, cols, texel);
  for (double& v : s.values) v = 1.0;
  return s;
}

double relative_std(const SceneImage& img) {
  double mean = img.sum() / static_cast<double>(img.values.size());
  double var = 0.0;
  for (double v : img.values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(img.values.size())) / mean;
}

}  // namespace

TEST_CASE("angular PSF width of a flat response") {
  const auto psf = psf_angular(tabulate(0.05, flat));
  CHECK(psf.peak() == doctest::Approx(1.0));
  CHECK(fwhm_deg(psf) == doctest::Approx(2.0 * std::acos(std::cbrt(0.5)) / kDeg).epsilon(1e-4));
  CHECK(fwhm_deg(rectangular_response(4.0, 1801)) == doctest::Approx(8.0).epsilon(1e-3));
  AngularResponse dark = tabulate(1.0, flat);
  for (double& v : dark.transmittance) v = 0.0;
  CHECK_THROWS_AS(psf_angular(dark), DomainError);
}

TEST_CASE("collection efficiency against closed forms") {
  CHECK(collection_efficiency(tabulate(0.1, flat)) == doctest::Approx(0.5).epsilon(1e-5));
  for (double tc : {5.0, 10.0, 22.85, 45.0}) {
    const double exact = std::pow(std::sin(tc * kDeg / 2.0), 2);
    CHECK(collection_efficiency_rect(tc) == doctest::Approx(exact).epsilon(1e-12));
    CHECK(collection_efficiency(rectangular_response(tc, 1024)) == doctest::Approx(exact).epsilon(1e-4));
  }
  CHECK(collection_efficiency_rect(10.0) == doctest::Approx(7.62e-3).epsilon(2e-3));
  // Midpoint-rule oracle for a smooth response.
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double th = (i + 0.5) * 90.0 / n;
    sum += gaussian(th) * std::sin(th * kDeg) * (90.0 / n) * kDeg;
  }
  CHECK(collection_efficiency(tabulate(0.1, gaussian)) == doctest::Approx(0.5 * sum).epsilon(1e-4));
}

TEST_CASE("collection efficiency rejects thin coverage") {
  AngularResponse coarse = tabulate(5.0, flat);
  CHECK_THROWS_AS(collection_efficiency(coarse), DomainError);
  AngularResponse narrow;
  narrow.theta_deg = linear_grid(0.0, 60.0, 0.5);
  narrow.transmittance.assign(narrow.theta_deg.size(), 1.0);
  CHECK_THROWS_AS(collection_efficiency(narrow), DomainError);
  CHECK_THROWS_AS(collection_efficiency_rect(0.0), DomainError);
}

TEST_CASE("spatial FWHM follows refraction at the plate face") {
  const auto t = tabulate(0.1, gaussian);
  OpticalGeometry g;
  g.working_distance = 1000.0;
  for (double n : {1.0, 1.33, 1.5}) {
    g.medium_index = n;
    CHECK(spatial_fwhm(t, g) == doctest::Approx(fwhm_xy_oracle(1000.0, n)).epsilon(1e-3));
  }
  CHECK(air_angle_deg(30.0, 1.5).has_value());
  CHECK_FALSE(air_angle_deg(42.0, 1.5).has_value());
  CHECK(*air_angle_deg(10.0, 1.5) == doctest::Approx(std::asin(1.5 * std::sin(10.0 * kDeg)) / kDeg));
}

TEST_CASE("spatial kernel is normalised and collapses at contact") {
  const auto t = tabulate(0.5, gaussian);
  OpticalGeometry g;
  g.working_distance = 200.0;
  const auto k = psf_spatial(t, g, 5.0, 2000.0);
  CHECK(k.sum() == doctest::Approx(1.0));
  CHECK(k.rows % 2 == 1);
  // Centre texel is the brightest and the kernel is symmetric.
  const int c = k.rows / 2;
  CHECK(k.at(c, c) == doctest::Approx(k.max()));
  CHECK(k.at(c, c + 3) == doctest::Approx(k.at(c + 3, c)).epsilon(0.05));
  g.working_distance = 1e-3;
  const auto d = psf_spatial(t, g, 5.0, 2000.0);
  CHECK(d.rows == 1);
  CHECK(d.values[0] == doctest::Approx(1.0));
  // Support stops at the requested radius.
  g.working_distance = 1000.0;
  const auto cut = psf_spatial(tabulate(0.5, flat), g, 10.0, 100.0);
  CHECK(cut.rows == 21);
}

TEST_CASE("rendering conserves energy without the fiber mask") {
  OpticalGeometry g = small_sensor();
  g.working_distance = 100.0;
  const double texel = g.pixel_pitch / 8.0;
  SceneImage scene(24, 24, texel, 250.0, 250.0);
  for (double& v : scene.values) v = 1.0;
  RenderOptions o;
  o.fiber_mask = false;
  o.max_kernel_radius = 100.0;
  const auto img = render(scene, tabulate(0.5, gaussian), g, reference_design(), o);
  CHECK(img.rows == g.rows);
  CHECK(img.cols == g.cols);
  CHECK(img.sum() == doctest::Approx(scene.sum()).epsilon(1e-9));
}

TEST_CASE("fiber mask passes the fill factor of a uniform scene") {
  OpticalGeometry g = small_sensor();
  const FopDesign fop = reference_design();
  const auto scene = uniform_sensor_scene(g, g.pixel_pitch / 8.0);
  const auto img = render(scene, tabulate(1.0, flat), g, fop, RenderOptions{});
  CHECK(img.sum() / scene.sum() == doctest::Approx(fop.fill_factor()).epsilon(0.03));
}

TEST_CASE("fixed-pattern modulation shrinks as pixels grow") {
  const FopDesign fop = reference_design();
  OpticalGeometry fine = small_sensor();
  fine.pixel_pitch = 27.0;
  OpticalGeometry coarse = small_sensor();
  coarse.pixel_pitch = 216.0;
  const auto a = render(uniform_sensor_scene(fine, 27.0 / 8.0), tabulate(1.0, flat), fine, fop, RenderOptions{});
  const auto b = render(uniform_sensor_scene(coarse, 216.0 / 32.0), tabulate(1.0, flat), coarse, fop, RenderOptions{});
  CHECK(relative_std(b) < 0.3 * relative_std(a));
}

TEST_CASE("render preconditions and noise") {
  OpticalGeometry g = small_sensor();
  SceneImage coarse(4, 4, g.pixel_pitch / 2.0);
  CHECK_THROWS_AS(render(coarse, tabulate(1.0, flat), g, reference_design(), RenderOptions{}), DomainError);

  const auto scene = uniform_sensor_scene(g, g.pixel_pitch / 4.0);
  RenderOptions o;
  o.noise = NoiseModel{0.5, 0.1, 4};
  o.seed = 9;
  set_thread_count(1);
  const auto a = render(scene, tabulate(1.0, flat), g, reference_design(), o);
  set_thread_count(3);
  const auto b = render(scene, tabulate(1.0, flat), g, reference_design(), o);
  set_thread_count(1);
  CHECK(a.values == b.values);
  o.seed = 10;
  CHECK(render(scene, tabulate(1.0, flat), g, reference_design(), o).values != a.values);
  for (double v : a.values) CHECK(v >= 0.0);
}

TEST_CASE("michelson contrast") {
  SceneImage img(1, 4, 1.0);
  img.values = {1.0, 3.0, 1.0, 3.0};
  CHECK(michelson_contrast(img, Roi{0, 0, 1, 4}) == doctest::Approx(0.5));
  img.values = {0.0, 2.0, 0.0, 2.0};
  CHECK(michelson_contrast(img, Roi{0, 0, 1, 4}) == doctest::Approx(1.0));
  img.values = {2.0, 2.0, 2.0, 2.0};
  CHECK(michelson_contrast(img, Roi{0, 0, 1, 4}) == doctest::Approx(0.0));
  img.values.assign(4, 0.0);
  CHECK_THROWS_AS(michelson_contrast(img, Roi{0, 0, 1, 4}), DomainError);
  CHECK_THROWS_AS(michelson_contrast(img, Roi{0, 2, 1, 4}), DomainError);
}

TEST_CASE("disc and rectangle overlap") {
  const double r = 3.0;
  CHECK(disc_rect_area(0, 0, r, -5, -5, 5, 5) == doctest::Approx(kPi * r * r));
  CHECK(disc_rect_area(0, 0, r, 0, -5, 5, 5) == doctest::Approx(kPi * r * r / 2.0));
  CHECK(disc_rect_area(0, 0, r, 0, 0, 5, 5) == doctest::Approx(kPi * r * r / 4.0));
  CHECK(disc_rect_area(0, 0, r, 4, 4, 5, 5) == doctest::Approx(0.0));
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    const double cx = u(gen), cy = u(gen);
    const double x0 = u(gen) - 1.0, y0 = u(gen) - 2.0, x1 = x0 + 2.5, y1 = y0 + 3.0;
    const int n = 1000;
    int hits = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double x = x0 + (i + 0.5) * (x1 - x0) / n, y = y0 + (j + 0.5) * (y1 - y0) / n;
        hits += (x - cx) * (x - cx) + (y - cy) * (y - cy) <= 1.0;
      }
    const double grid = hits * (x1 - x0) * (y1 - y0) / (double(n) * n);
    CHECK(disc_rect_area(cx, cy, 1.0, x0, y0, x1, y1) == doctest::Approx(grid).epsilon(2e-3));
  }
}

TEST_CASE("contrast falls with line width for a smooth PSF") {
  OpticalGeometry g;
  g.working_distance = 40.0;
  const std::vector<double> widths{300.0, 250.0, 200.0, 160.0, 130.0, 110.0};
  CtfOptions o;
  o.phases = 4;
  const auto curve = ctf(tabulate(0.5, flat), g, reference_design(), widths, o);
  REQUIRE(curve.size() == widths.size());
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].contrast <= curve[i - 1].contrast + 0.02);
  CHECK(curve.front().contrast > curve.back().contrast);
  const std::vector<double> unsorted{100.0, 200.0};
  CHECK_THROWS_AS(ctf(tabulate(0.5, flat), g, reference_design(), unsorted, o), DomainError);
}

TEST_CASE("resolution from a contrast curve") {
  const std::vector<CtfPoint> curve{{200, 0.9}, {150, 0.7}, {100, 0.3}, {50, 0.1}};
  auto r = resolution_at(curve, 0.4, 40.0);
  CHECK(r.crossed);
  CHECK(r.line_width == doctest::Approx(112.5));
  CHECK_FALSE(r.pixel_limited);
  r = resolution_at(curve, 0.4, 120.0);
  CHECK(r.pixel_limited);
  CHECK(r.line_width == doctest::Approx(112.5));
  const std::vector<CtfPoint> sharp{{200, 0.95}, {100, 0.9}, {50, 0.8}};
  r = resolution_at(sharp, 0.4, 110.0);
  CHECK_FALSE(r.crossed);
  CHECK(r.pixel_limited);
  CHECK(r.line_width == doctest::Approx(50.0));
}

TEST_CASE("USAF line widths") {
  const auto w = usaf_line_widths(0, 3);
  REQUIRE(w.size() == 24);
  CHECK(w.front() == doctest::Approx(500.0));
  CHECK(w.back() == doctest::Approx(1000.0 / (2.0 * std::pow(2.0, 3.0 + 5.0 / 6.0))));
  CHECK(w.back() == doctest::Approx(35.1).epsilon(2e-3));
  for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] < w[i - 1]);
}

TEST_CASE("pixel-to-fiber modulation decays with pitch ratio") {
  const std::vector<double> ratios{0.5, 1.0, 2.0, 4.0, 8.0};
  const auto m = pixel_fiber_modulation(reference_design(), ratios, 16, 1);
  REQUIRE(m.size() == 5);
  for (std::size_t i = 1; i < m.size(); ++i) CHECK(m[i].std_dev < m[i - 1].std_dev);
  CHECK(m[0].std_dev > 0.1);
  CHECK(m[4].std_dev < 0.005);
  CHECK_THROWS_AS(pixel_fiber_modulation(reference_design(), std::vector<double>{0.2}, 4, 1), DomainError);
}
