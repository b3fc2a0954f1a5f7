#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "hkflow/error.hpp"
#include "hkflow_cli/commands.hpp"
#include "hkflow_cli/config.hpp"
#include "hkflow_cli/report.hpp"
#include "hkflow_cli/snapshot_io.hpp"

using namespace hkflow;
using namespace hkflow::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("hkflow_unit_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json base_config() {
  return json::parse(R"({
    "schema_version": 1,
    "grid": {"n": 1, "N": 16},
    "metric": {"kind": "flat"},
    "phi0": [{"k": [1, 0], "amplitude": 0.01}],
    "time": {"dt": 2e-3, "T": 0.1, "snapshot_every": 5},
    "output": {"plots": false}
  })");
}

std::string write_config(const TempDir& d, const json& j, const std::string& name = "cfg.json") {
  std::string p = d / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

int invoke(const std::string& cmd, const std::string& config, const std::string& out,
           const std::string& resume = "") {
  Options o;
  o.command = cmd;
  o.config = config;
  o.out = out;
  o.resume = resume;
  o.quiet = true;
  return execute(o);
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(parse_config(base_config()));

  auto broken = [](auto mutate) {
    json j = base_config();
    mutate(j);
    return j;
  };
  CHECK_THROWS_AS(parse_config(broken([](json& j) { j.erase("schema_version"); })), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(broken([](json& j) { j["schema_version"] = 2; })), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(broken([](json& j) { j["bogus"] = 1; })), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(broken([](json& j) { j["grid"]["N"] = 12; })), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(broken([](json& j) { j["grid"]["N"] = "16"; })), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(broken([](json& j) { j["time"]["cfl_safety"] = 0.5; })), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(broken([](json& j) { j["time"]["dt"] = -1.0; })), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(broken([](json& j) { j["phi0"][0]["k"] = {1, 0, 0, 0}; })), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(broken([](json& j) { j["phi0"][0]["phase"] = "tan"; })), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(broken([](json& j) { j["metric"]["kind"] = "sphere"; })), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(broken([](json& j) { j["verify"] = {{"strides", {1, 2}}}; })), ConfigInvalid);
  CHECK_THROWS_AS(parse_config(broken([](json& j) { j["seed"] = -3; })), ConfigInvalid);

  json conf = base_config();
  conf["grid"]["n"] = 2;
  conf["metric"] = {{"kind", "conformal"}, {"modes", {{{"k", {1, 0, 0, 0}}, {"amplitude", 0.1}}}}};
  conf.erase("phi0");
  CHECK_THROWS_AS(parse_config(conf), ConfigInvalid);

  TempDir d;
  CHECK_THROWS_AS(load_config(d / "missing.json"), ConfigInvalid);
  std::ofstream(d / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_config(d / "bad.json"), ConfigInvalid);

  // A background metric that is not positive definite is a config error.
  json deg = base_config();
  deg["metric"] = {{"kind", "potential"}, {"modes", {{{"k", {1, 0}}, {"amplitude", 0.3}}}}};
  RunConfig c = parse_config(deg);
  CHECK_THROWS_AS(build_g0(c, build_grid(c)), ConfigInvalid);
}

TEST_CASE("config survives a JSON round trip") {
  json j = base_config();
  j["phi1"] = {{{"k", {0, 1}}, {"amplitude", 0.03}, {"phase", "sin"}}};
  j["random_phi0"] = {{"count", 3}, {"amplitude", 1e-3}, {"kmax", 2}};
  j["seed"] = 42;
  j["verify"] = {{"strides", {4, 2, 1}}, {"sample_times", {0.05}}};
  RunConfig a = parse_config(j);
  RunConfig b = parse_config(to_json(a));
  CHECK(to_json(a) == to_json(b));
  GridPtr g = build_grid(a);
  CHECK(max_abs_diff(build_phi0(a, g), build_phi0(b, g)) == 0.0);
  CHECK(max_abs_diff(build_phi1(a, g), build_phi1(b, g)) == 0.0);
  // Seeded random modes are reproducible and change with the seed.
  j["seed"] = 43;
  CHECK(max_abs_diff(build_phi0(parse_config(j), g), build_phi0(a, g)) > 0.0);
}

TEST_CASE("snapshot files") {
  TempDir d;
  auto g = make_grid(1, 8);
  Snapshot s{0.125, 7, field_from_modes(g, {{{1, 0, 0, 0}, 0.3, false}}),
             field_from_modes(g, {{{0, 1, 0, 0}, 1.0 / 3.0, true}})};
  RunConfig c = parse_config(base_config());
  c.N = 8;
  std::string path = save_snapshot(d / "snaps", s, c);
  SnapshotRecord r = load_snapshot(path);
  CHECK(r.snapshot.t == s.t);
  CHECK(r.snapshot.step == 7);
  CHECK(r.snapshot.phi.v == s.phi.v);
  CHECK(r.snapshot.psi.v == s.psi.v);
  CHECK(sha256_file(path).size() == 64);

  // Rewriting the same snapshot is byte identical.
  std::string first = slurp(path);
  save_snapshot(d / "snaps", s, c);
  CHECK(slurp(path) == first);

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    f.put('\x7f');
  }
  CHECK_THROWS_AS(load_snapshot(path), ConfigInvalid);
  CHECK_THROWS_AS(read_snapshot_file(d / "nothing.hkrf"), ConfigInvalid);
}

TEST_CASE("run writes a consistent output directory") {
  TempDir d;
  json j = base_config();
  j["output"]["plots"] = true;
  std::string cfg = write_config(d, j);
  REQUIRE(invoke("run", cfg, d / "a") == kExitOk);
  CHECK(fs::exists(d / "a/summary.json"));
  CHECK(fs::exists(d / "a/plots/vol.svg"));
  CHECK(slurp(d / "a/plots/vol.svg").find("<svg") != std::string::npos);
  CHECK_FALSE(fs::exists(d / "a/singularity.json"));
  CHECK_FALSE(fs::exists(d / "a/.hkflow.lock"));

  std::istringstream csv(slurp(d / "a/series.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == kSeriesHeader);
  int rows = 0;
  while (std::getline(csv, line)) {
    std::istringstream ls(line);
    std::string t, vol;
    std::getline(ls, t, ',');
    std::getline(ls, vol, ',');
    CHECK(std::stod(vol) == doctest::Approx(1.0).epsilon(1e-13));
    ++rows;
  }
  CHECK(rows == 11);
  CHECK(load_run_dir(d / "a").size() == 11);

  // Same config, same bytes.
  REQUIRE(invoke("run", cfg, d / "b") == kExitOk);
  CHECK(slurp(d / "a/series.csv") == slurp(d / "b/series.csv"));
  CHECK(slurp(d / "a/snapshots/snap_0000000050.hkrf") == slurp(d / "b/snapshots/snap_0000000050.hkrf"));

  // Resuming from the middle reproduces the final state exactly.
  REQUIRE(invoke("run", cfg, d / "c", d / "a/snapshots/snap_0000000025.hkrf") == kExitOk);
  CHECK(slurp(d / "c/snapshots/snap_0000000050.hkrf") == slurp(d / "a/snapshots/snap_0000000050.hkrf"));
  CHECK_FALSE(fs::exists(d / "c/snapshots/snap_0000000020.hkrf"));
}

TEST_CASE("a locked output directory is refused") {
  TempDir d;
  std::string cfg = write_config(d, base_config());
  fs::create_directories(d / "out");
  std::ofstream(d / "out/.hkflow.lock") << "1";
  CHECK(invoke("run", cfg, d / "out") == kExitConfig);
  fs::remove(d / "out/.hkflow.lock");
  CHECK(invoke("run", cfg, d / "out") == kExitOk);
}

TEST_CASE("singular runs exit with the singular code and finite outputs") {
  TempDir d;
  json j = base_config();
  j["phi0"][0]["amplitude"] = 0.2;
  j["output"]["plots"] = true;
  std::string cfg = write_config(d, j);
  CHECK(invoke("run", cfg, d / "s") == kExitSingular);
  REQUIRE(fs::exists(d / "s/singularity.json"));
  json s = json::parse(slurp(d / "s/singularity.json"));
  CHECK(s["t_last_good"].get<double>() == 0.0);
  CHECK(s["min_eigenvalue"].get<double>() < 0.0);
  for (auto& e : fs::recursive_directory_iterator(d / "s")) {
    if (!e.is_regular_file() || e.path().extension() == ".hkrf") continue;
    std::string text = slurp(e.path().string());
    INFO(e.path().string());
    CHECK(text.find("nan") == std::string::npos);
    CHECK(text.find("NaN") == std::string::npos);
  }
}

TEST_CASE("verify, converge and curvature commands") {
  TempDir d;
  json j = base_config();
  j["grid"]["N"] = 32;
  j["time"] = {{"dt", 1e-3}, {"T", 0.3}, {"snapshot_every", 10}};
  j["phi0"][0]["amplitude"] = 0.02;
  j["verify"] = {{"sample_times", {0.15}}};
  j["converge"] = {{"dt_levels", {4e-3, 2e-3, 1e-3}}, {"T", 0.2}};
  std::string cfg = write_config(d, j);
  CHECK(invoke("verify", cfg, d / "v") == kExitOk);
  json v = json::parse(slurp(d / "v/verify.json"));
  CHECK(v.contains("identities"));
  CHECK(fs::exists(d / "v/verify.txt"));

  // Verification from a stored run.
  REQUIRE(invoke("run", cfg, d / "r") == kExitOk);
  CHECK(invoke("verify", d / "r", d / "rv") == kExitOk);

  CHECK(invoke("converge", cfg, d / "c") == kExitOk);
  json conv = json::parse(slurp(d / "c/converge.json"));
  CHECK(fs::exists(d / "c/converge_dt.csv"));
  (void)conv;

  json single = j;
  single["converge"]["dt_levels"] = {1e-3};
  CHECK(invoke("converge", write_config(d, single, "single.json"), d / "c1") == kExitConfig);

  json conf = base_config();
  conf["grid"]["N"] = 64;
  conf["metric"] = {{"kind", "conformal"}, {"modes", {{{"k", {1, 0}}, {"amplitude", 0.1}}}}};
  conf.erase("phi0");
  CHECK(invoke("curvature", write_config(d, conf, "conf.json"), d / "k") == kExitOk);
  json k = json::parse(slurp(d / "k/curvature.json"));
  CHECK(k["R_max"]["value"].get<double>() == doctest::Approx(0.1 * M_PI * M_PI * std::exp(-0.1)).epsilon(1e-10));
  CHECK(k["vol"].get<double>() == doctest::Approx(std::cyl_bessel_i(0.0, 0.1)).epsilon(1e-12));
}

TEST_CASE("thread settings") {
  TempDir d;
  std::string cfg = write_config(d, base_config());
  setenv("HKFLOW_THREADS", "zero", 1);
  CHECK(invoke("run", cfg, d / "t0") == kExitConfig);
  setenv("HKFLOW_THREADS", "2", 1);
  CHECK(invoke("run", cfg, d / "t2") == kExitOk);
  unsetenv("HKFLOW_THREADS");
  CHECK(invoke("run", cfg, d / "t1") == kExitOk);
  CHECK(slurp(d / "t1/series.csv") == slurp(d / "t2/series.csv"));
}

TEST_CASE("plots skip non-finite points") {
  std::string svg = svg_line_plot("r", "t", PlotSeries{"r", {0, 1, 2}, {1.0, NAN, 3.0}});
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("nan") == std::string::npos);
}
