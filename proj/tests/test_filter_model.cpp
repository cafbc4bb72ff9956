#include <doctest.h>

#include <array>
#include <cmath>

#include "fopsim/errors.hpp"
#include "fopsim/filter_model.hpp"

using namespace fopsim;

namespace {
constexpr double kDeg = 3.14159265358979323846 / 180.0;

double shifted(double l0, double th, double n) {
  const double s = std::sin(th * kDeg) / n;
  return l0 * std::sqrt(1.0 - s * s);
}

// Brute-force least squares over a fine index grid.
double scan_n_eff(const std::vector<EdgeAnchor>& anchors, double edge0) {
  double best = 0.0, best_err = 1e300;
  for (double n = 1.2; n <= 3.0; n += 1e-5) {
    double e = 0.0;
    for (const auto& a : anchors) e += std::pow(shifted(edge0, a.theta_deg, n) - a.edge_nm, 2);
    if (e < best_err) {
      best_err = e;
      best = n;
    }
  }
  return best;
}
}  // namespace

TEST_CASE("edge shift follows the cavity formula") {
  CHECK(shifted_wavelength(677.0, 0.0, 1.9) == doctest::Approx(677.0));
  for (double th : {10.0, 24.0, 42.0, 70.0})
    CHECK(shifted_wavelength(677.0, th, 1.9) == doctest::Approx(shifted(677.0, th, 1.9)).epsilon(1e-12));
  CHECK_THROWS_AS(shifted_wavelength(677.0, 90.0, 1.9), DomainError);
  CHECK_THROWS_AS(shifted_wavelength(677.0, -1.0, 1.9), DomainError);
}

TEST_CASE("index fit recovers a synthetic index") {
  std::vector<EdgeAnchor> anchors;
  for (double th : {15.0, 30.0, 45.0}) anchors.push_back({th, shifted(700.0, th, 1.8)});
  CHECK(calibrate_n_eff(anchors, 700.0) == doctest::Approx(1.8).epsilon(1e-6));
}

TEST_CASE("single anchor is solved in closed form") {
  const std::array<EdgeAnchor, 1> a{{{24.0, 660.0}}};
  const double expected = std::sin(24.0 * kDeg) / std::sqrt(1.0 - std::pow(660.0 / 677.0, 2));
  CHECK(calibrate_n_eff(a, 677.0) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(expected == doctest::Approx(1.826).epsilon(1e-3));
}

TEST_CASE("bleed-through anchors agree with a brute-force least squares") {
  const std::vector<EdgeAnchor> anchors{{42.0, 635.0}, {24.0, 660.0}};
  const double fitted = calibrate_n_eff(anchors, 677.0);
  CHECK(fitted == doctest::Approx(scan_n_eff(anchors, 677.0)).epsilon(2e-5));
  CHECK(fitted >= 1.7);
  CHECK(fitted <= 1.95);
}

TEST_CASE("anchors at normal incidence carry no information") {
  const std::array<EdgeAnchor, 2> a{{{0.0, 677.0}, {0.0, 676.0}}};
  CHECK_THROWS_AS(calibrate_n_eff(a, 677.0), DomainError);
}

TEST_CASE("reference filter levels") {
  const FilterSpec f = reference_filter();
  CHECK(filter_transmittance(f, 700.0, 0.0) == doctest::Approx(0.95));
  CHECK(filter_transmittance(f, 660.0, 0.0) == doctest::Approx(1e-6));
  CHECK(filter_transmittance(f, 800.0 - 30.0, 0.0) == doctest::Approx(1e-6));
  // The log-linear ramp is centred on the edge.
  CHECK(filter_transmittance(f, 677.0, 0.0) == doctest::Approx(std::sqrt(0.95 * 1e-6)).epsilon(1e-9));
  CHECK(filter_transmittance(f, 677.0 - 8.5, 0.0) == doctest::Approx(1e-6));
  CHECK(filter_transmittance(f, 677.0 + 8.5, 0.0) == doctest::Approx(0.95));
}

TEST_CASE("stopband light leaks in as the band blue-shifts") {
  const FilterSpec f = reference_filter();
  double prev = 0.0;
  for (double th = 0.0; th <= 50.0; th += 1.0) {
    const double t = filter_transmittance(f, 660.0, th);
    CHECK(t >= prev * (1.0 - 1e-12));
    prev = t;
  }
  CHECK(filter_transmittance(f, 660.0, 40.0) == doctest::Approx(0.95));
}

TEST_CASE("lambertian mean of a flat filter is its level") {
  FilterSpec f;
  f.passbands = {{300.0, 2000.0}};
  f.pass_transmittance = 0.9;
  CHECK(lambertian_mean_transmittance(f, 700.0) == doctest::Approx(0.9));
}

TEST_CASE("optical density") {
  CHECK(od_of(1e-6) == doctest::Approx(6.0));
  CHECK(od_of(1.0) == doctest::Approx(0.0));
  CHECK(od_of(0.0) == doctest::Approx(kOdCap));
  CHECK_THROWS(od_of(1.5));
}

TEST_CASE("filter validation") {
  FilterSpec f = reference_filter();
  f.passbands = {{600.0, 500.0}};
  CHECK_THROWS_AS(f.validate(), InvalidDesign);
  f = reference_filter();
  f.passbands = {{500.0, 700.0}, {650.0, 800.0}};
  CHECK_THROWS_AS(f.validate(), InvalidDesign);
}
