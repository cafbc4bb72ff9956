#include "fopsim/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fopsim/errors.hpp"
#include "fopsim/presets.hpp"

namespace fopsim {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || text.empty()) throw ConfigError("expected a number, got '" + text + "'");
  return v;
}

std::uint64_t to_u64(const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || text.empty())
    throw ConfigError("expected a non-negative integer, got '" + text + "'");
  return v;
}

int to_int(const std::string& text) {
  int v = 0;
  const char* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end || text.empty()) throw ConfigError("expected an integer, got '" + text + "'");
  return v;
}

bool to_bool(const std::string& text) {
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw ConfigError("expected true or false, got '" + text + "'");
}

std::vector<Passband> to_passbands(const std::string& text) {
  std::vector<Passband> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) throw ConfigError("passband must look like lo-hi, got '" + item + "'");
    out.push_back({to_double(trim(item.substr(0, dash))), to_double(trim(item.substr(dash + 1)))});
  }
  return out;
}

std::vector<EdgeAnchor> to_anchors(const std::string& text) {
  std::vector<EdgeAnchor> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("anchor must look like theta_deg:edge_nm, got '" + item + "'");
    out.push_back({to_double(trim(item.substr(0, colon))), to_double(trim(item.substr(colon + 1)))});
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;
using SectionKeys = std::map<std::string, Setter>;

std::map<std::string, SectionKeys> schema() {
  std::map<std::string, SectionKeys> s;
  s[""] = {
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); }},
      {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
  };
  s["fop"] = {
      {"preset",
       [](RunConfig& c, const std::string& v) {
         if (v == "reference") c.fop = reference_design();
         else if (v == "low-na") c.fop = low_na_design();
         else if (v == "high-na") c.fop = high_na_design();
         else throw ConfigError("unknown plate preset '" + v + "' (reference, low-na, high-na)");
       }},
      {"n_core", [](RunConfig& c, const std::string& v) { c.fop.n_core = to_double(v); }},
      {"n_clad", [](RunConfig& c, const std::string& v) { c.fop.n_clad = to_double(v); }},
      {"n0", [](RunConfig& c, const std::string& v) { c.fop.n0 = to_double(v); }},
      {"acceptance_deg",
       [](RunConfig& c, const std::string& v) {
         c.fop.n_clad = clad_index_for_acceptance(c.fop.n_core, to_double(v), c.fop.n0);
       }},
      {"core_diameter", [](RunConfig& c, const std::string& v) { c.fop.core_diameter = to_double(v); }},
      {"pitch", [](RunConfig& c, const std::string& v) { c.fop.pitch = to_double(v); }},
      {"thickness", [](RunConfig& c, const std::string& v) { c.fop.thickness = to_double(v); }},
      {"k_clad", [](RunConfig& c, const std::string& v) { c.fop.k_clad = to_double(v); }},
      {"k_core", [](RunConfig& c, const std::string& v) { c.fop.k_core = to_double(v); }},
  };
  s["filter"] = {
      {"passbands", [](RunConfig& c, const std::string& v) { c.filter.passbands = to_passbands(v); }},
      {"pass_transmittance", [](RunConfig& c, const std::string& v) { c.filter.pass_transmittance = to_double(v); }},
      {"stop_od", [](RunConfig& c, const std::string& v) { c.filter.stop_od = to_double(v); }},
      {"rolloff_nm", [](RunConfig& c, const std::string& v) { c.filter.rolloff_nm = to_double(v); }},
      {"n_eff", [](RunConfig& c, const std::string& v) { c.filter.n_eff = to_double(v); }},
      {"anchors", [](RunConfig& c, const std::string& v) { c.anchors = to_anchors(v); }},
      {"anchor_edge_nm", [](RunConfig& c, const std::string& v) { c.anchor_edge_nm = to_double(v); }},
  };
  s["frontend"] = {
      {"preset",
       [](RunConfig& c, const std::string& v) {
         if (v == "calibrated") {
           c.frontend.s_capture = kCalibratedScatter.s_capture;
           c.frontend.s_exit = kCalibratedScatter.s_exit;
         } else if (v == "scatter-free") {
           c.frontend.s_capture = 0.0;
           c.frontend.s_exit = 0.0;
         } else {
           throw ConfigError("unknown frontend preset '" + v + "' (calibrated, scatter-free)");
         }
       }},
      {"order", [](RunConfig& c, const std::string& v) { c.frontend.order = parse_stack_order(v); }},
      {"s_capture", [](RunConfig& c, const std::string& v) { c.frontend.s_capture = to_double(v); }},
      {"s_exit", [](RunConfig& c, const std::string& v) { c.frontend.s_exit = to_double(v); }},
      {"dual_insertion", [](RunConfig& c, const std::string& v) { c.frontend.dual_insertion = to_double(v); }},
      {"capture_exit_deg", [](RunConfig& c, const std::string& v) { c.frontend.capture_exit_deg = to_double(v); }},
      {"max_scatter", [](RunConfig& c, const std::string& v) { c.frontend.max_scatter = to_double(v); }},
      {"lobe",
       [](RunConfig& c, const std::string& v) {
         if (v == "lambertian") c.frontend.lobe = ExitLobe::Lambertian;
         else if (v == "isotropic") c.frontend.lobe = ExitLobe::Isotropic;
         else throw ConfigError("unknown exit lobe '" + v + "' (lambertian, isotropic)");
       }},
  };
  s["geometry"] = {
      {"working_distance", [](RunConfig& c, const std::string& v) { c.geometry.working_distance = to_double(v); }},
      {"medium_index", [](RunConfig& c, const std::string& v) { c.geometry.medium_index = to_double(v); }},
      {"pixel_pitch", [](RunConfig& c, const std::string& v) { c.geometry.pixel_pitch = to_double(v); }},
      {"rows", [](RunConfig& c, const std::string& v) { c.geometry.rows = to_int(v); }},
      {"cols", [](RunConfig& c, const std::string& v) { c.geometry.cols = to_int(v); }},
      {"fiber_dx", [](RunConfig& c, const std::string& v) { c.geometry.fiber_dx = to_double(v); }},
      {"fiber_dy", [](RunConfig& c, const std::string& v) { c.geometry.fiber_dy = to_double(v); }},
      {"pixel_active", [](RunConfig& c, const std::string& v) { c.geometry.pixel_active = to_double(v); }},
  };
  s["sweep"] = {
      {"theta_min", [](RunConfig& c, const std::string& v) { c.sweep.theta_min = to_double(v); }},
      {"theta_max", [](RunConfig& c, const std::string& v) { c.sweep.theta_max = to_double(v); }},
      {"theta_step", [](RunConfig& c, const std::string& v) { c.sweep.theta_step = to_double(v); }},
      {"samples", [](RunConfig& c, const std::string& v) { c.sweep.samples = to_u64(v); }},
      {"lambda_nm", [](RunConfig& c, const std::string& v) { c.sweep.lambda_nm = to_double(v); }},
      {"emission_nm", [](RunConfig& c, const std::string& v) { c.sweep.emission_nm = to_double(v); }},
      {"acceptance_deg", [](RunConfig& c, const std::string& v) { c.sweep.acceptance_deg = parse_number_list(v); }},
      {"numerical_aperture", [](RunConfig& c, const std::string& v) { c.sweep.numerical_aperture = parse_number_list(v); }},
      {"fill_factor", [](RunConfig& c, const std::string& v) { c.sweep.fill_factor = parse_number_list(v); }},
      {"thickness", [](RunConfig& c, const std::string& v) { c.sweep.thickness = parse_number_list(v); }},
      {"lambda_ex", [](RunConfig& c, const std::string& v) { c.sweep.lambda_ex = parse_number_list(v); }},
  };
  s["render"] = {
      {"line_widths", [](RunConfig& c, const std::string& v) { c.render.line_widths = parse_number_list(v); }},
      {"contrast_level", [](RunConfig& c, const std::string& v) { c.render.contrast_level = to_double(v); }},
      {"phases", [](RunConfig& c, const std::string& v) { c.render.phases = to_int(v); }},
      {"texel_pitch", [](RunConfig& c, const std::string& v) { c.render.texel_pitch = to_double(v); }},
      {"fiber_mask", [](RunConfig& c, const std::string& v) { c.render.fiber_mask = to_bool(v); }},
      {"noise", [](RunConfig& c, const std::string& v) { c.render.noise = to_bool(v); }},
      {"read_sigma", [](RunConfig& c, const std::string& v) { c.render.read_sigma = to_double(v); }},
      {"shot_gain", [](RunConfig& c, const std::string& v) { c.render.shot_gain = to_double(v); }},
      {"frames", [](RunConfig& c, const std::string& v) { c.render.frames = to_int(v); }},
  };
  s["optimize"] = {
      {"od_target", [](RunConfig& c, const std::string& v) { c.optimize.od_target = to_double(v); }},
      {"lambda_nm", [](RunConfig& c, const std::string& v) { c.optimize.lambda_nm = to_double(v); }},
      {"theta_min", [](RunConfig& c, const std::string& v) { c.optimize.theta_min = to_double(v); }},
      {"theta_max", [](RunConfig& c, const std::string& v) { c.optimize.theta_max = to_double(v); }},
      {"theta_step", [](RunConfig& c, const std::string& v) { c.optimize.theta_step = to_double(v); }},
      {"h_min", [](RunConfig& c, const std::string& v) { c.optimize.h_min = to_double(v); }},
      {"h_max", [](RunConfig& c, const std::string& v) { c.optimize.h_max = to_double(v); }},
      {"acknowledge_scatter", [](RunConfig& c, const std::string& v) { c.optimize.acknowledge_scatter = to_bool(v); }},
  };
  return s;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidDesign(what);
}

void validate_section(const RunConfig& c, const std::string& section) {
  if (section.empty()) {
    require(!c.out_dir.empty(), "out_dir must not be empty");
  } else if (section == "fop") {
    c.fop.validate();
  } else if (section == "filter") {
    c.filter.validate();
    require(!c.anchors.empty(), "at least one anchor is required");
  } else if (section == "frontend") {
    c.frontend_config().validate();
  } else if (section == "geometry") {
    c.geometry.validate();
  } else if (section == "sweep") {
    const auto& s = c.sweep;
    require(s.theta_min >= 0.0 && s.theta_max <= 90.0 && s.theta_min < s.theta_max,
            "theta range must satisfy 0 <= theta_min < theta_max <= 90");
    require(s.theta_step > 0.0, "theta_step must be positive");
    require(s.samples >= 1, "samples must be at least 1");
    require(s.lambda_nm > 0.0 && s.emission_nm > 0.0, "wavelengths must be positive");
    for (double a : s.acceptance_deg) require(a > 0.0 && a < 90.0, "acceptance angles must lie in (0, 90)");
  } else if (section == "render") {
    const auto& r = c.render;
    require(r.contrast_level > 0.0 && r.contrast_level < 1.0, "contrast_level must lie in (0, 1)");
    require(r.phases >= 1, "phases must be at least 1");
    require(r.texel_pitch >= 0.0, "texel_pitch must be non-negative (0 selects pixel_pitch/8)");
    require(r.read_sigma >= 0.0 && r.shot_gain >= 0.0, "noise parameters must be non-negative");
    require(r.frames >= 1, "frames must be at least 1");
    for (double w : r.line_widths) require(w > 0.0, "line widths must be positive");
  } else if (section == "optimize") {
    const auto& o = c.optimize;
    require(o.od_target >= 0.0 && o.od_target <= kOdCap, "od_target must lie in [0, 12]");
    require(o.h_min > 0.0 && o.h_max >= o.h_min, "thickness bounds must satisfy 0 < h_min <= h_max");
    require(o.theta_min >= 0.0 && o.theta_max < 90.0 && o.theta_min <= o.theta_max,
            "optimize angle range must lie in [0, 90)");
    require(o.theta_step > 0.0, "theta_step must be positive");
  }
}

}  // namespace

FrontendConfig RunConfig::frontend_config() const {
  FrontendConfig c = frontend;
  c.fop = fop;
  c.filter = filter;
  return c;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item)));
  return out;
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  static const auto keys = schema();
  RunConfig cfg;
  std::map<std::string, int> section_line{{"", 0}};
  std::map<std::string, std::map<std::string, int>> seen;
  std::string section;
  std::string line;
  int number = 0;
  auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError(source + ":" + std::to_string(number) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string text = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw fail("unterminated section header");
      section = trim(text.substr(1, text.size() - 2));
      if (!keys.count(section) || section.empty()) throw fail("unknown section [" + section + "]");
      if (section_line.count(section) && section_line[section] > 0) throw fail("duplicate section [" + section + "]");
      section_line[section] = number;
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw fail("expected key = value");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    const auto& section_keys = keys.at(section);
    const auto it = section_keys.find(key);
    const std::string where = section.empty() ? "top level" : "[" + section + "]";
    if (it == section_keys.end()) throw fail("unknown key '" + key + "' in " + where);
    if (seen[section].count(key)) throw fail("duplicate key '" + key + "' in " + where);
    if (key == "preset" && !seen[section].empty()) throw fail("preset must come before other keys in " + where);
    seen[section][key] = number;
    try {
      it->second(cfg, value);
    } catch (const Error& e) {
      throw fail(key + ": " + e.what());
    }
  }

  for (const auto& [name, unused] : keys) {
    try {
      validate_section(cfg, name);
    } catch (const Error& e) {
      const auto it = section_line.find(name);
      const std::string at = it == section_line.end() || it->second == 0 ? "" : std::to_string(it->second) + ":";
      const std::string label = name.empty() ? "" : "[" + name + "] ";
      throw ConfigError(source + ":" + at + " " + label + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in, path);
}

}  // namespace fopsim
