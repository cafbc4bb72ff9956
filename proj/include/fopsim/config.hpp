#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fopsim/filter_model.hpp"
#include "fopsim/fop_tracer.hpp"
#include "fopsim/frontend_stack.hpp"
#include "fopsim/imaging.hpp"

namespace fopsim {

struct SweepSection {
  double theta_min = 0.0;
  double theta_max = 90.0;
  double theta_step = 1.0;
  std::uint64_t samples = kDefaultSamplesPerAngle;
  double lambda_nm = 660.0;
  double emission_nm = 694.0;
  // angle-sweep: one curve per acceptance angle (cladding index solved).
  std::vector<double> acceptance_deg;
  // design-sweep grids.
  std::vector<double> numerical_aperture{0.1, 0.2, 0.3, 0.4};
  std::vector<double> fill_factor{0.5};
  std::vector<double> thickness{250.0};
  std::vector<double> lambda_ex{635.0, 660.0};
};

struct RenderSection {
  std::vector<double> line_widths = usaf_line_widths(-1, 3);
  double contrast_level = 0.4;
  int phases = 8;
  double texel_pitch = 0.0;
  bool fiber_mask = true;
  bool noise = false;
  double read_sigma = 0.0;
  double shot_gain = 0.0;
  int frames = 20;
};

struct OptimizeSection {
  double od_target = 6.0;
  double lambda_nm = 660.0;
  double theta_min = 0.0;
  double theta_max = 89.0;
  double theta_step = 1.0;
  double h_min = 10.0;
  double h_max = 5000.0;
  bool acknowledge_scatter = false;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  FopDesign fop;
  FilterSpec filter = reference_filter();
  std::vector<EdgeAnchor> anchors{{42.0, 635.0}, {24.0, 660.0}};
  double anchor_edge_nm = 677.0;
  // fop and filter inside are overwritten from the sections above on load.
  FrontendConfig frontend;
  OpticalGeometry geometry;
  SweepSection sweep;
  RenderSection render;
  OptimizeSection optimize;

  FrontendConfig frontend_config() const;
};

// Line-oriented `key = value` text with [section] headers and # comments.
// Unknown sections and keys are rejected with the offending line number; every
// section is validated after loading.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

// Comma-separated numbers; empty text gives an empty list.
std::vector<double> parse_number_list(const std::string& text);

}  // namespace fopsim
