#include "fopsim/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "fopsim/artifacts.hpp"
#include "fopsim/config.hpp"
#include "fopsim/csv.hpp"
#include "fopsim/design_explorer.hpp"
#include "fopsim/errors.hpp"
#include "fopsim/parallel.hpp"
#include "fopsim/presets.hpp"

namespace fopsim {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;
};

struct Context {
  RunConfig cfg;
  fs::path dir;
  std::ostream& out;

  std::string path(const std::string& name) const { return (dir / name).string(); }
};

void write_json(const std::string& path, const Json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << j.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  return f;
}

std::string fixed1(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 1);
  return std::string(buf, r.ptr);
}

AngularResponse plate_response(const RunConfig& cfg, std::span<const double> grid, double lambda_nm) {
  return angular_transmittance(cfg.fop, grid, cfg.sweep.samples, cfg.seed, lambda_nm);
}

// Imaging commands share how the angular response is obtained.
struct ImagingFlags {
  std::string measured;
  bool bare = false;
  std::optional<double> rect_cutoff;
  bool plate_only = false;
  std::optional<double> working_distance;
  std::optional<double> medium_index;

  void add_to(CLI::App* cmd, bool synthetic) {
    cmd->add_option("--measured", measured, "CSV (theta_deg,transmittance) replacing the simulated plate")
        ->check(CLI::ExistingFile);
    cmd->add_flag("--plate-only", plate_only, "skip the filter stack");
    cmd->add_option("--working-distance", working_distance, "sample to sensor distance (um)");
    cmd->add_option("--medium-index", medium_index, "refractive index between sample and plate");
    if (synthetic) {
      cmd->add_flag("--bare", bare, "bare sensor, T = 1 at every angle");
      cmd->add_option("--rect-cutoff", rect_cutoff, "rectangular response with this cut-off (deg)");
    }
  }

  OpticalGeometry geometry(const RunConfig& cfg) const {
    OpticalGeometry g = cfg.geometry;
    if (working_distance) g.working_distance = *working_distance;
    if (medium_index) g.medium_index = *medium_index;
    g.validate();
    return g;
  }

  AngularResponse response(const RunConfig& cfg) const {
    if (bare + rect_cutoff.has_value() + !measured.empty() > 1)
      throw ConfigError("--bare, --rect-cutoff and --measured are mutually exclusive");
    if (bare) {
      AngularResponse t;
      t.theta_deg = linear_grid(0.0, 90.0, 0.1);
      t.transmittance.assign(t.theta_deg.size(), 1.0);
      return t;
    }
    if (rect_cutoff) return rectangular_response(*rect_cutoff, 1025);
    const double em = cfg.sweep.emission_nm;
    AngularResponse d;
    if (!measured.empty()) {
      d = read_response_csv(measured);
      d.wavelength_nm = em;
    } else {
      d = plate_response(cfg, linear_grid(0.0, 90.0, std::min(cfg.sweep.theta_step, 0.5)), em);
    }
    if (plate_only) return d;
    return sweep_frontend(cfg.frontend_config(), em, d.theta_deg, d);
  }
};

std::vector<double> line_widths_from(const std::optional<std::string>& flag, const RunConfig& cfg) {
  std::vector<double> w = flag ? parse_number_list(*flag) : cfg.render.line_widths;
  if (w.empty()) throw ConfigError("line-width list is empty");
  for (double v : w)
    if (!(v > 0.0)) throw ConfigError("line widths must be positive");
  std::sort(w.begin(), w.end(), std::greater<>());
  w.erase(std::unique(w.begin(), w.end()), w.end());
  return w;
}

// ---- commands --------------------------------------------------------------

struct AngleSweepArgs {
  std::optional<double> theta_max;
  std::optional<std::uint64_t> samples;
  std::string out = "angle_sweep.csv";
};

Json curve_summary(const AngularResponse& t, double alpha) {
  Json j;
  j["acceptance_deg"] = alpha;
  j["t0"] = t.transmittance.front();
  try {
    j["saturation_deg"] = saturation_angle(t, alpha);
  } catch (const DomainError&) {
    j["saturation_deg"] = nullptr;
  }
  try {
    j["off_axis_floor"] = off_axis_floor(t, alpha);
  } catch (const DomainError&) {
    j["off_axis_floor"] = nullptr;
  }
  return j;
}

void angle_sweep(Context& ctx, const AngleSweepArgs& a) {
  RunConfig cfg = ctx.cfg;
  if (a.theta_max) cfg.sweep.theta_max = *a.theta_max;
  if (a.samples) cfg.sweep.samples = *a.samples;
  if (!(cfg.sweep.theta_max > cfg.sweep.theta_min && cfg.sweep.theta_max <= 90.0))
    throw ConfigError("--theta-max must lie in (theta_min, 90]");
  if (cfg.sweep.samples < 1) throw ConfigError("--samples must be at least 1");
  const auto grid = linear_grid(cfg.sweep.theta_min, cfg.sweep.theta_max, cfg.sweep.theta_step);

  std::vector<std::pair<double, FopDesign>> designs;
  if (cfg.sweep.acceptance_deg.empty()) {
    designs.emplace_back(cfg.fop.acceptance_deg(), cfg.fop);
  } else {
    for (double alpha : cfg.sweep.acceptance_deg) {
      FopDesign d = cfg.fop;
      d.n_clad = clad_index_for_acceptance(d.n_core, alpha, d.n0);
      designs.emplace_back(alpha, d);
    }
  }

  const fs::path base(a.out);
  const std::string stem = base.stem().string();
  PlotSpec plot{"Plate transmittance", "angle of incidence (deg)", "transmittance", true, {}};
  Json summary;
  summary["lambda_nm"] = cfg.sweep.lambda_nm;
  summary["samples"] = cfg.sweep.samples;
  summary["seed"] = cfg.seed;
  summary["curves"] = Json::array();
  for (const auto& [alpha, design] : designs) {
    const AngularResponse t = angular_transmittance(design, grid, cfg.sweep.samples, cfg.seed, cfg.sweep.lambda_nm);
    const std::string name =
        cfg.sweep.acceptance_deg.empty() ? a.out : stem + "_alpha" + csv::format_number(alpha) + ".csv";
    auto f = open_out(ctx.path(name));
    write_response_csv(f, t);
    Json c = curve_summary(t, alpha);
    c["csv"] = name;
    summary["curves"].push_back(c);
    plot.series.push_back({"alpha " + fixed1(alpha) + " deg", t.theta_deg, t.transmittance});
    ctx.out << name << ": " << t.size() << " angles, alpha " << fixed1(alpha) << " deg\n";
  }
  write_json(ctx.path(stem + ".json"), summary);
  write_svg_plot(ctx.path(stem + ".svg"), plot);
}

struct FrontendSweepArgs {
  std::string order = "all";
  std::optional<double> lambda;
  std::string measured;
  std::string out = "frontend_sweep.csv";
};

void frontend_sweep(Context& ctx, const FrontendSweepArgs& a) {
  const RunConfig& cfg = ctx.cfg;
  const double lambda = a.lambda.value_or(cfg.sweep.lambda_nm);
  if (!(lambda > 0.0)) throw ConfigError("--lambda must be positive");
  std::vector<StackOrder> orders;
  if (a.order == "all") orders = {StackOrder::FilterFirst, StackOrder::FilterLast, StackOrder::DualSided};
  else orders = {parse_stack_order(a.order)};

  AngularResponse d;
  if (!a.measured.empty()) {
    d = read_response_csv(a.measured);
    d.wavelength_nm = lambda;
  } else {
    d = plate_response(cfg, linear_grid(cfg.sweep.theta_min, cfg.sweep.theta_max, cfg.sweep.theta_step), lambda);
  }

  std::vector<AngularResponse> curves;
  Json summary;
  summary["lambda_nm"] = lambda;
  summary["curves"] = Json::array();
  PlotSpec plot{"Frontend rejection at " + csv::format_number(lambda) + " nm", "angle of incidence (deg)",
                "optical density", false, {}};
  for (StackOrder o : orders) {
    FrontendConfig fc = cfg.frontend_config();
    fc.order = o;
    curves.push_back(sweep_frontend(fc, lambda, d.theta_deg, d));
    const LaserMargin m = laser_margin(curves.back());
    summary["curves"].push_back({{"order", to_string(o)},
                                 {"worst_od", m.worst_od},
                                 {"worst_theta_deg", m.worst_theta},
                                 {"max_od", m.max_od}});
    std::vector<double> od;
    for (double t : curves.back().transmittance) od.push_back(od_of(t));
    plot.series.push_back({to_string(o), d.theta_deg, od});
    ctx.out << to_string(o) << ": worst OD " << fixed1(m.worst_od) << " at " << csv::format_number(m.worst_theta)
            << " deg\n";
  }

  auto f = open_out(ctx.path(a.out));
  std::vector<std::string> header{"theta_deg"};
  for (StackOrder o : orders) {
    std::string col = to_string(o);
    std::replace(col.begin(), col.end(), '-', '_');
    header.push_back(col);
  }
  csv::write_row(f, header);
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<std::string> row{csv::format_number(d.theta_deg[i])};
    for (const auto& c : curves) row.push_back(csv::format_number(c.transmittance[i]));
    csv::write_row(f, row);
  }
  const std::string stem = fs::path(a.out).stem().string();
  write_json(ctx.path(stem + ".json"), summary);
  write_svg_plot(ctx.path(stem + ".svg"), plot);
}

void psf_cmd(Context& ctx, const ImagingFlags& flags) {
  const OpticalGeometry geom = flags.geometry(ctx.cfg);
  const AngularResponse t = flags.response(ctx.cfg);
  const AngularResponse psf = psf_angular(t);
  const double fwhm = fwhm_deg(psf);
  const double fwhm_xy = spatial_fwhm(t, geom);
  const double eta = collection_efficiency(t);

  auto f = open_out(ctx.path("psf.csv"));
  csv::write_header(f, {"theta_deg", "psf"});
  for (std::size_t i = 0; i < psf.size(); ++i)
    csv::write_row(f, {csv::format_number(psf.theta_deg[i]), csv::format_number(psf.transmittance[i])});

  const double texel = ctx.cfg.render.texel_pitch > 0.0 ? ctx.cfg.render.texel_pitch : geom.pixel_pitch / 8.0;
  const SceneImage kernel = psf_spatial(t, geom, texel, std::hypot(geom.width(), geom.height()));
  write_pgm16(ctx.path("psf_kernel.pgm"), kernel);

  Json j;
  j["fwhm_deg"] = fwhm;
  j["fwhm_xy_um"] = fwhm_xy;
  j["eta_c"] = eta;
  j["working_distance_um"] = geom.working_distance;
  j["medium_index"] = geom.medium_index;
  write_json(ctx.path("psf.json"), j);
  write_svg_plot(ctx.path("psf.svg"),
                 {"Angular point spread function", "angle (deg)", "normalised PSF", false,
                  {{"PSF", psf.theta_deg, psf.transmittance}}});
  ctx.out << "fwhm_deg " << csv::format_number(fwhm) << "\nfwhm_xy_um " << csv::format_number(fwhm_xy)
          << "\neta_c " << csv::format_number(eta) << '\n';
}

void eta_cmd(Context& ctx, const ImagingFlags& flags) {
  const double eta = collection_efficiency(flags.response(ctx.cfg));
  write_json(ctx.path("eta.json"), Json{{"eta_c", eta}});
  ctx.out << "eta_c " << csv::format_number(eta) << '\n';
}

struct ImagingArgs {
  ImagingFlags flags;
  std::optional<std::string> line_widths;
  std::optional<double> contrast_level;
};

void render_usaf_cmd(Context& ctx, const ImagingArgs& a) {
  const RunConfig& cfg = ctx.cfg;
  const auto widths = line_widths_from(a.line_widths, cfg);
  const OpticalGeometry geom = a.flags.geometry(cfg);
  const AngularResponse t = a.flags.response(cfg);
  const double texel = cfg.render.texel_pitch > 0.0 ? cfg.render.texel_pitch : geom.pixel_pitch / 8.0;
  RenderOptions ro;
  ro.fiber_mask = cfg.render.fiber_mask;
  ro.seed = cfg.seed;
  if (cfg.render.noise) ro.noise = NoiseModel{cfg.render.read_sigma, cfg.render.shot_gain, cfg.render.frames};

  std::vector<UsafRender> renders(widths.size());
  parallel_for(widths.size(), [&](std::size_t i) {
    RenderOptions o = ro;
    o.seed = ro.seed + i;
    renders[i] = render_usaf({widths[i], BarOrientation::Vertical, 3}, t, geom, cfg.fop, 0.0, texel, o);
  });
  auto f = open_out(ctx.path("render_usaf.csv"));
  csv::write_header(f, {"line_width_um", "contrast", "image"});
  for (std::size_t i = 0; i < widths.size(); ++i) {
    char idx[8];
    std::snprintf(idx, sizeof idx, "%02zu", i);
    const std::string name = std::string("usaf_") + idx + "_" + fixed1(widths[i]) + "um.pgm";
    write_pgm16(ctx.path(name), renders[i].image);
    csv::write_row(f, {csv::format_number(widths[i]), csv::format_number(renders[i].contrast), name});
    ctx.out << name << ": contrast " << csv::format_number(std::round(renders[i].contrast * 1000) / 1000) << '\n';
  }
}

void ctf_cmd(Context& ctx, const ImagingArgs& a) {
  const RunConfig& cfg = ctx.cfg;
  const auto widths = line_widths_from(a.line_widths, cfg);
  const double level = a.contrast_level.value_or(cfg.render.contrast_level);
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("--contrast-level must lie in (0, 1)");
  const OpticalGeometry geom = a.flags.geometry(cfg);
  const AngularResponse t = a.flags.response(cfg);
  CtfOptions opt;
  opt.phases = cfg.render.phases;
  opt.texel_pitch = cfg.render.texel_pitch;
  opt.fiber_mask = cfg.render.fiber_mask;
  const auto curve = ctf(t, geom, cfg.fop, widths, opt);
  const double nyquist = 2.0 * geom.pixel_pitch;
  const ResolutionResult r = resolution_at(curve, level, nyquist);

  auto f = open_out(ctx.path("ctf.csv"));
  csv::write_header(f, {"line_width_um", "contrast"});
  PlotSeries s{"contrast", {}, {}};
  for (const auto& p : curve) {
    csv::write_row(f, {csv::format_number(p.line_width), csv::format_number(p.contrast)});
    s.x.push_back(p.line_width);
    s.y.push_back(p.contrast);
  }
  Json j;
  j["contrast_level"] = level;
  j["line_width_um"] = r.line_width;
  j["pixel_limited"] = r.pixel_limited;
  j["crossed"] = r.crossed;
  j["nyquist_um"] = nyquist;
  j["working_distance_um"] = geom.working_distance;
  j["medium_index"] = geom.medium_index;
  write_json(ctx.path("resolution.json"), j);
  write_svg_plot(ctx.path("ctf.svg"), {"Contrast transfer", "line width (um)", "Michelson contrast", false, {s}});
  ctx.out << "resolution_um " << fixed1(r.line_width) << (r.pixel_limited ? " (pixel-limited)" : "") << '\n';
}

struct OptimizeArgs {
  std::optional<double> od_target;
  std::optional<double> lambda;
};

void optimize_cmd(Context& ctx, const OptimizeArgs& a) {
  const RunConfig& cfg = ctx.cfg;
  ThicknessOptions o;
  o.od_target = a.od_target.value_or(cfg.optimize.od_target);
  o.theta_min = cfg.optimize.theta_min;
  o.theta_max = cfg.optimize.theta_max;
  o.theta_step = cfg.optimize.theta_step;
  o.h_min = cfg.optimize.h_min;
  o.h_max = cfg.optimize.h_max;
  o.samples = cfg.sweep.samples;
  o.seed = cfg.seed;
  o.acknowledge_scatter = cfg.optimize.acknowledge_scatter;
  const double lambda = a.lambda.value_or(cfg.optimize.lambda_nm);
  const ThicknessResult r = min_thickness(cfg.frontend_config(), lambda, o);
  Json j;
  j["thickness_um"] = r.thickness;
  j["worst_od"] = r.worst_od;
  j["od_target"] = o.od_target;
  j["lambda_nm"] = lambda;
  j["order"] = to_string(cfg.frontend.order);
  j["theta_min_deg"] = o.theta_min;
  j["theta_max_deg"] = o.theta_max;
  j["evaluations"] = r.evaluations;
  j["warnings"] = r.warnings;
  write_json(ctx.path("optimize_h.json"), j);
  for (const auto& w : r.warnings) ctx.out << "warning: " << w << '\n';
  ctx.out << "thickness_um " << csv::format_number(r.thickness) << " (worst OD " << fixed1(r.worst_od) << ")\n";
}

void design_sweep_cmd(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  SweepGrids g{cfg.sweep.numerical_aperture, cfg.sweep.fill_factor, cfg.sweep.thickness, cfg.sweep.lambda_ex};
  SweepOptions o;
  o.base = cfg.frontend_config();
  o.geom = cfg.geometry;
  o.emission_nm = cfg.sweep.emission_nm;
  o.theta_step = std::min(cfg.sweep.theta_step, 0.5);
  o.samples = cfg.sweep.samples;
  o.seed = cfg.seed;
  const auto rows = design_sweep(g, o);

  auto f = open_out(ctx.path("design_sweep.csv"));
  csv::write_header(f, {"numerical_aperture", "fill_factor", "thickness_um", "lambda_ex_nm", "worst_od", "eta_c",
                        "fwhm_deg", "fwhm_xy_um", "fom"});
  Json j;
  j["working_distance_um"] = o.geom.working_distance;
  j["emission_nm"] = o.emission_nm;
  j["rows"] = Json::array();
  for (const auto& r : rows) {
    csv::write_row(f, {csv::format_number(r.numerical_aperture), csv::format_number(r.fill_factor),
                       csv::format_number(r.thickness), csv::format_number(r.lambda_ex),
                       csv::format_number(r.worst_od), csv::format_number(r.eta_c), csv::format_number(r.fwhm_deg),
                       csv::format_number(r.fwhm_xy), csv::format_number(r.fom)});
    j["rows"].push_back({{"numerical_aperture", r.numerical_aperture},
                         {"fill_factor", r.fill_factor},
                         {"thickness_um", r.thickness},
                         {"lambda_ex_nm", r.lambda_ex},
                         {"worst_od", r.worst_od},
                         {"eta_c", r.eta_c},
                         {"fwhm_deg", r.fwhm_deg},
                         {"fwhm_xy_um", r.fwhm_xy},
                         {"fom", r.fom}});
  }
  write_json(ctx.path("design_sweep.json"), j);
  ctx.out << "design_sweep.csv: " << rows.size() << " rows\n";
}

struct CalibrateArgs {
  std::vector<std::string> anchors;
  std::optional<double> edge;
};

void calibrate_cmd(Context& ctx, const CalibrateArgs& a) {
  std::vector<EdgeAnchor> anchors = ctx.cfg.anchors;
  if (!a.anchors.empty()) {
    anchors.clear();
    for (const auto& text : a.anchors) {
      const auto colon = text.find(':');
      if (colon == std::string::npos) throw ConfigError("--anchor must look like theta_deg:edge_nm");
      const auto v = parse_number_list(text.substr(0, colon) + "," + text.substr(colon + 1));
      anchors.push_back({v[0], v[1]});
    }
  }
  const double edge = a.edge.value_or(ctx.cfg.anchor_edge_nm);
  const double n_eff = calibrate_n_eff(anchors, edge);
  Json j;
  j["n_eff"] = n_eff;
  j["edge_nm"] = edge;
  j["anchors"] = Json::array();
  double ss = 0.0;
  for (const auto& an : anchors) {
    const double model = shifted_wavelength(edge, an.theta_deg, n_eff);
    ss += (model - an.edge_nm) * (model - an.edge_nm);
    j["anchors"].push_back({{"theta_deg", an.theta_deg}, {"edge_nm", an.edge_nm}, {"model_edge_nm", model}});
  }
  j["rms_residual_nm"] = std::sqrt(ss / static_cast<double>(anchors.size()));
  write_json(ctx.path("calibrate_filter.json"), j);
  ctx.out << "n_eff " << csv::format_number(n_eff) << '\n';
}

int code_for(const std::exception& e) {
  if (dynamic_cast<const InfeasibleError*>(&e)) return kExitInfeasible;
  if (dynamic_cast<const InternalError*>(&e)) return kExitInternal;
  if (dynamic_cast<const Error*>(&e)) return kExitUsage;
  return kExitInternal;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fiber optic plate frontend simulator", "fopsim"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("-c,--config", g.config, "run configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "random seed (overrides the config)");
  app.add_option("--out-dir", g.out_dir, "output directory (overrides the config)");
  app.add_option("--threads", g.threads, "worker threads, 0 for all cores (env FOPSIM_THREADS)");

  std::function<void(Context&)> action;

  AngleSweepArgs as;
  auto* c_as = app.add_subcommand("angle-sweep", "plate transmittance against angle of incidence");
  c_as->add_option("--theta-max", as.theta_max, "largest angle (deg)");
  c_as->add_option("--samples", as.samples, "rays per angle");
  c_as->add_option("--out", as.out, "CSV file name inside the output directory");
  c_as->callback([&] { action = [&](Context& c) { angle_sweep(c, as); }; });

  FrontendSweepArgs fs_args;
  auto* c_fs = app.add_subcommand("frontend-sweep", "filter-first, filter-last and dual-sided stacks");
  c_fs->add_option("--order", fs_args.order, "all, filter-first, filter-last or dual-sided");
  c_fs->add_option("--lambda", fs_args.lambda, "excitation wavelength (nm)");
  c_fs->add_option("--measured", fs_args.measured, "CSV replacing the simulated plate")->check(CLI::ExistingFile);
  c_fs->add_option("--out", fs_args.out, "CSV file name inside the output directory");
  c_fs->callback([&] { action = [&](Context& c) { frontend_sweep(c, fs_args); }; });

  ImagingFlags psf_flags;
  auto* c_psf = app.add_subcommand("psf", "angular and spatial point spread function");
  psf_flags.add_to(c_psf, true);
  c_psf->callback([&] { action = [&](Context& c) { psf_cmd(c, psf_flags); }; });

  ImagingFlags eta_flags;
  auto* c_eta = app.add_subcommand("eta", "collection efficiency");
  eta_flags.add_to(c_eta, true);
  c_eta->callback([&] { action = [&](Context& c) { eta_cmd(c, eta_flags); }; });

  ImagingArgs ru;
  auto* c_ru = app.add_subcommand("render-usaf", "render USAF elements to graymaps");
  ru.flags.add_to(c_ru, false);
  c_ru->add_option("--line-widths", ru.line_widths, "comma-separated line widths (um)");
  c_ru->callback([&] { action = [&](Context& c) { render_usaf_cmd(c, ru); }; });

  ImagingArgs ct;
  auto* c_ct = app.add_subcommand("ctf", "contrast transfer function and resolution");
  ct.flags.add_to(c_ct, false);
  c_ct->add_option("--line-widths", ct.line_widths, "comma-separated line widths (um)");
  c_ct->add_option("--contrast-level", ct.contrast_level, "contrast defining the resolution");
  c_ct->callback([&] { action = [&](Context& c) { ctf_cmd(c, ct); }; });

  OptimizeArgs oh;
  auto* c_oh = app.add_subcommand("optimize-h", "thinnest plate meeting an OD target");
  c_oh->add_option("--od-target", oh.od_target, "required worst-case OD");
  c_oh->add_option("--lambda", oh.lambda, "excitation wavelength (nm)");
  c_oh->callback([&] { action = [&](Context& c) { optimize_cmd(c, oh); }; });

  auto* c_ds = app.add_subcommand("design-sweep", "NA, fill factor, thickness and wavelength grid");
  c_ds->callback([&] { action = [&](Context& c) { design_sweep_cmd(c); }; });

  CalibrateArgs ca;
  auto* c_ca = app.add_subcommand("calibrate-filter", "fit the filter's effective index to edge anchors");
  c_ca->add_option("--anchor", ca.anchors, "theta_deg:edge_nm, repeatable");
  c_ca->add_option("--edge", ca.edge, "normal-incidence edge (nm)");
  c_ca->callback([&] { action = [&](Context& c) { calibrate_cmd(c, ca); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    if (g.out_dir) cfg.out_dir = *g.out_dir;
    unsigned threads = 0;
    if (g.threads) {
      threads = *g.threads;
    } else if (const char* env = std::getenv("FOPSIM_THREADS")) {
      const std::string_view s(env);
      if (std::from_chars(s.data(), s.data() + s.size(), threads).ec != std::errc())
        throw ConfigError("FOPSIM_THREADS must be a non-negative integer");
    }
    set_thread_count(threads);
    fs::create_directories(cfg.out_dir);
    Context ctx{std::move(cfg), fs::path(), out};
    ctx.dir = ctx.cfg.out_dir;
    action(ctx);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return code_for(e);
  }
  return kExitOk;
}

}  // namespace fopsim
