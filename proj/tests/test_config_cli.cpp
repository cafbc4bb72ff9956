#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "fopsim/artifacts.hpp"
#include "fopsim/cli.hpp"
#include "fopsim/config.hpp"
#include "fopsim/errors.hpp"
#include "fopsim/presets.hpp"

using namespace fopsim;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fopsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fopsim_test_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "t.ini");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config defaults and presets") {
  const RunConfig d = parse("");
  CHECK(d.seed == 0);
  CHECK(d.fop.core_diameter == reference_design().core_diameter);
  CHECK(d.render.contrast_level == 0.4);

  const RunConfig c = parse(
      "seed = 7\n"
      "[fop]\npreset = low-na\nthickness = 300\n"
      "[frontend]\npreset = calibrated\norder = filter-last\n"
      "[filter]\npassbands = 505-612, 677-763\n"
      "[sweep]\nnumerical_aperture = 0.1, 0.25\n");
  CHECK(c.seed == 7);
  CHECK(c.fop.n_core == low_na_design().n_core);
  CHECK(c.fop.thickness == 300.0);
  CHECK(c.frontend.s_exit == kCalibratedScatter.s_exit);
  CHECK(c.frontend.order == StackOrder::FilterLast);
  CHECK(c.filter.passbands.size() == 2);
  CHECK(c.filter.passbands[1].lo_nm == 677.0);
  CHECK(c.sweep.numerical_aperture == std::vector<double>{0.1, 0.25});
  const FrontendConfig f = c.frontend_config();
  CHECK(f.fop.thickness == 300.0);
  CHECK(f.filter.passbands.size() == 2);
}

TEST_CASE("config errors carry line numbers") {
  CHECK(error_of("[fop]\nbogus = 1\n") == "t.ini:2: unknown key 'bogus' in [fop]");
  CHECK(error_of("[nowhere]\n").find("t.ini:1: unknown section") == 0);
  CHECK(error_of("[fop]\npitch = 27\npitch = 28\n").find("t.ini:3: duplicate key") == 0);
  CHECK(error_of("[fop]\n[fop]\n").find("t.ini:2: duplicate section") == 0);
  CHECK(error_of("[fop]\npitch = 27\npreset = low-na\n").find("t.ini:3: preset must come") == 0);
  CHECK(error_of("[fop]\npitch = abc\n").find("t.ini:2:") == 0);
  CHECK(error_of("\n\n[fop]\ncore_diameter = 40\n").find("t.ini:3: [fop]") == 0);
  CHECK(error_of("[geometry]\nrows = 0\n").find("[geometry]") != std::string::npos);
  CHECK(parse_number_list(" ").empty());
  CHECK(parse_number_list("1, 2.5").size() == 2);
}

TEST_CASE("angle sweep writes one row per angle and is reproducible") {
  const auto dir = scratch("sweep");
  auto args = std::vector<std::string>{"--out-dir", dir.string(), "--threads", "1", "angle-sweep", "--samples", "256"};
  REQUIRE(cli(args).code == 0);
  const std::string first = slurp(dir / "angle_sweep.csv");
  int lines = 0;
  for (char ch : first) lines += ch == '\n';
  CHECK(lines == 92);
  CHECK(first.rfind("theta_deg,transmittance\n", 0) == 0);
  args[3] = "3";
  REQUIRE(cli(args).code == 0);
  CHECK(slurp(dir / "angle_sweep.csv") == first);
  CHECK(fs::exists(dir / "angle_sweep.svg"));
  CHECK(slurp(dir / "angle_sweep.svg").find("<svg") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("collection efficiency from the command line") {
  const auto dir = scratch("eta");
  REQUIRE(cli({"--out-dir", dir.string(), "eta", "--bare"}).code == 0);
  CHECK(read_json(dir / "eta.json")["eta_c"].get<double>() == doctest::Approx(0.5).epsilon(1e-5));
  REQUIRE(cli({"--out-dir", dir.string(), "eta", "--rect-cutoff", "10"}).code == 0);
  CHECK(read_json(dir / "eta.json")["eta_c"].get<double>() == doctest::Approx(7.62e-3).epsilon(2e-3));
  fs::remove_all(dir);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"no-such-command"}).code == 2);
  CHECK(cli({"--out-dir", dir.string(), "ctf", "--line-widths", ""}).code == 2);
  CHECK(cli({"--out-dir", dir.string(), "render-usaf", "--line-widths", "-5"}).code == 2);

  const fs::path cfg = dir / "infeasible.ini";
  fs::create_directories(dir);
  // Guided light at normal incidence is not absorbed, so one coating caps the OD.
  std::ofstream(cfg) << "[frontend]\norder = filter-last\n[sweep]\nsamples = 128\n"
                        "[optimize]\nh_max = 200\ntheta_max = 10\ntheta_step = 5\n";
  CHECK(cli({"-c", cfg.string(), "--out-dir", dir.string(), "optimize-h", "--od-target", "9"}).code == 3);

  const fs::path bad = dir / "bad.ini";
  std::ofstream(bad) << "[fop]\nbogus = 1\n";
  const Run r = cli({"-c", bad.string(), "angle-sweep"});
  CHECK(r.code == 2);
  CHECK(r.err.find("unknown key 'bogus'") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("filter calibration command") {
  const auto dir = scratch("cal");
  REQUIRE(cli({"--out-dir", dir.string(), "calibrate-filter"}).code == 0);
  const auto j = read_json(dir / "calibrate_filter.json");
  CHECK(j["n_eff"].get<double>() > 1.7);
  CHECK(j["n_eff"].get<double>() < 1.95);
  CHECK(j["anchors"].size() == 2);
  REQUIRE(cli({"--out-dir", dir.string(), "calibrate-filter", "--anchor", "30:650"}).code == 0);
  CHECK(read_json(dir / "calibrate_filter.json")["rms_residual_nm"].get<double>() == doctest::Approx(0.0).scale(1.0));
  fs::remove_all(dir);
}

TEST_CASE("graymap round trip") {
  const auto dir = scratch("pgm");
  fs::create_directories(dir);
  SceneImage img(3, 4, 2.5, -1.0, 4.0);
  for (std::size_t i = 0; i < img.values.size(); ++i) img.values[i] = 0.1 * static_cast<double>(i);
  const std::string path = (dir / "img.pgm").string();
  write_pgm16(path, img);
  CHECK(fs::exists(sidecar_path(path)));
  const SceneImage back = read_pgm16(path);
  REQUIRE(back.rows == 3);
  REQUIRE(back.cols == 4);
  CHECK(back.pitch == doctest::Approx(2.5));
  CHECK(back.origin_x == doctest::Approx(-1.0));
  for (std::size_t i = 0; i < img.values.size(); ++i)
    CHECK(back.values[i] == doctest::Approx(img.values[i]).epsilon(1e-4).scale(img.max()));
  fs::remove_all(dir);
}

TEST_CASE("svg plots") {
  PlotSpec spec;
  spec.title = "t";
  spec.log_y = true;
  spec.series.push_back({"a & b", {0, 1, 2}, {1, 1e-3, 1e-6}});
  std::ostringstream out;
  write_svg_plot(out, spec);
  const std::string s = out.str();
  CHECK(s.find("<svg") != std::string::npos);
  CHECK(s.find("<polyline") != std::string::npos);
  CHECK(s.find("a &amp; b") != std::string::npos);
}
