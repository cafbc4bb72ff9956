#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fopsim/angular_response.hpp"
#include "fopsim/fop_tracer.hpp"

namespace fopsim {

// Sample-to-sensor geometry. Lengths in micrometres.
struct OpticalGeometry {
  double working_distance = 1000.0;
  double medium_index = 1.0;
  double pixel_pitch = 55.0;
  int rows = 36;
  int cols = 40;
  double fiber_dx = 0.0;
  double fiber_dy = 0.0;
  // Linear fraction of the pixel pitch that integrates light (centred).
  double pixel_active = 1.0;

  void validate() const;
  double width() const { return cols * pixel_pitch; }
  double height() const { return rows * pixel_pitch; }
};

// Row-major intensity grid. Texel (r, c) covers
// [origin_x + c*pitch, +pitch) x [origin_y + r*pitch, +pitch).
struct SceneImage {
  double pitch = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  SceneImage() = default;
  SceneImage(int rows, int cols, double pitch, double origin_x = 0.0, double origin_y = 0.0);

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  double sum() const;
  double max() const;
  void validate() const;
};

enum class BarOrientation { Vertical, Horizontal };

// Three bright bars of width line_width and length 5*line_width separated by
// equal dark gaps, as in a 1951 USAF element.
struct UsafPattern {
  double line_width = 100.0;
  BarOrientation orientation = BarOrientation::Vertical;
  int bars = 3;
};

// ---- angular PSF and collection efficiency -------------------------------

// T(theta) * cos^3(theta) normalised to a peak of 1.
AngularResponse psf_angular(const AngularResponse& transmittance);

// Full width at half maximum of a response that peaks at or near 0 degrees,
// mirrored about the normal. Throws DomainError when no half-max crossing exists.
double fwhm_deg(const AngularResponse& response);

// 0.5 * integral of T(theta) sin(theta) over [0, 90] degrees (trapezoid rule).
double collection_efficiency(const AngularResponse& transmittance);
double collection_efficiency_rect(double theta_c_deg);

// Rectangular response of height `level` up to theta_c on a grid from 0 to 90.
AngularResponse rectangular_response(double theta_c_deg, std::size_t points, double level = 1.0);

// ---- spatial PSF ------------------------------------------------------------

// Angle inside the plate's incident medium (air) seen by a ray that crosses a
// medium of index n_m at theta_m. Empty beyond the critical angle.
std::optional<double> air_angle_deg(double theta_medium_deg, double medium_index);

// Lateral FWHM of the point response on the sensor (um).
double spatial_fwhm(const AngularResponse& transmittance, const OpticalGeometry& geom);

// Radially symmetric kernel sampled at `texel_pitch`, normalised to unit sum.
// Each texel holds the exact radiant energy falling on it, so kernels much
// narrower than a texel collapse to a delta. Support is truncated where the
// enclosed energy reaches 1 - tail or at max_radius.
SceneImage psf_spatial(const AngularResponse& transmittance, const OpticalGeometry& geom,
                       double texel_pitch, double max_radius, double tail = 1e-7);

// ---- rendering ---------------------------------------------------------------

struct NoiseModel {
  double read_sigma = 0.0;
  double shot_gain = 0.0;
  int frames = 20;
};

struct RenderOptions {
  bool fiber_mask = true;
  std::optional<NoiseModel> noise;
  std::uint64_t seed = 0;
  // 0 selects the sensor diagonal.
  double max_kernel_radius = 0.0;
};

// Fraction of each texel covered by fiber cores, with the lattice shifted by
// the geometry's alignment offset.
SceneImage fiber_mask(const FopDesign& fop, const OpticalGeometry& geom, const SceneImage& like);

// Convolve the scene with the spatial PSF, apply the fiber-core mask and
// integrate over pixels. Returns a rows x cols image with pixel_pitch texels.
SceneImage render(const SceneImage& scene, const AngularResponse& frontend_t,
                  const OpticalGeometry& geom, const FopDesign& fop, const RenderOptions& options);

// Linear convolution (output grows by kernel size - 1), FFT based.
SceneImage convolve(const SceneImage& scene, const SceneImage& kernel);

// Sum texel energy into pixels by exact area overlap.
SceneImage bin_to_pixels(const SceneImage& fine, const OpticalGeometry& geom);

// ---- contrast --------------------------------------------------------------

struct Roi {
  int row = 0;
  int col = 0;
  int rows = 0;
  int cols = 0;
};

double michelson_contrast(const SceneImage& image, const Roi& roi);

// Scene with a USAF element centred at (cx, cy).
SceneImage usaf_scene(const UsafPattern& pattern, double texel_pitch, double cx, double cy,
                      double margin);

struct CtfOptions {
  int phases = 8;
  // 0 selects pixel_pitch / 8.
  double texel_pitch = 0.0;
  bool fiber_mask = true;
};

struct CtfPoint {
  double line_width = 0.0;
  double contrast = 0.0;
};

struct UsafRender {
  SceneImage image;
  double contrast = 0.0;
};

// Renders a USAF element centred on the sensor (shifted across the bars by
// phase_shift) and scores its contrast on the line scan through the element
// centre: pixels between the outer bar centres, averaged along the bars.
UsafRender render_usaf(const UsafPattern& pattern, const AngularResponse& frontend_t,
                       const OpticalGeometry& geom, const FopDesign& fop, double phase_shift,
                       double texel_pitch, const RenderOptions& options);

double usaf_contrast(const UsafPattern& pattern, const AngularResponse& frontend_t,
                     const OpticalGeometry& geom, const FopDesign& fop, double phase_shift,
                     const CtfOptions& options);

std::vector<CtfPoint> ctf(const AngularResponse& frontend_t, const OpticalGeometry& geom,
                          const FopDesign& fop, std::span<const double> line_widths,
                          const CtfOptions& options = {});

struct ResolutionResult {
  double line_width = 0.0;    // interpolated width at the contrast level
  bool pixel_limited = false; // contrast at the Nyquist width still above level
  bool crossed = false;       // the CTF actually dropped below the level
};

ResolutionResult resolution_at(std::span<const CtfPoint> curve, double level, double nyquist_width);

// USAF group/element line widths (um) in descending order.
std::vector<double> usaf_line_widths(int first_group, int last_group);

// ---- fiber/pixel sampling ------------------------------------------------------

// Area of the disc (cx, cy, r) inside the rectangle [x0, x1] x [y0, y1].
double disc_rect_area(double cx, double cy, double r, double x0, double y0, double x1, double y1);

struct ModulationPoint {
  double ratio = 0.0;
  double std_dev = 0.0;
};

// Standard deviation over pixels of the core-area fraction each pixel sees,
// averaged over random lattice translations and rotations.
std::vector<ModulationPoint> pixel_fiber_modulation(const FopDesign& fop,
                                                    std::span<const double> pitch_ratios,
                                                    int offsets, std::uint64_t seed,
                                                    int pixels_per_side = 8);

}  // namespace fopsim
