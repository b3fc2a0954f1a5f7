#include "hkflow_cli/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "hkflow/error.hpp"
#include "hkflow/parallel.hpp"
#include "hkflow_cli/config.hpp"
#include "hkflow_cli/report.hpp"
#include "hkflow_cli/snapshot_io.hpp"

namespace hkflow::cli {

namespace fs = std::filesystem;

namespace {

// Exclusive ownership of an output directory for the lifetime of a command.
class OutputLock {
 public:
  explicit OutputLock(const std::string& dir) : path_((fs::path(dir) / ".hkflow.lock").string()) {
    fs::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw ConfigInvalid("output directory " + dir + " is locked by another run (remove " + path_ +
                          " if stale)");
    std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) {
      // The pid is informational only.
    }
  }
  ~OutputLock() {
    ::close(fd_);
    ::unlink(path_.c_str());
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

void apply_threads(const Options& o) {
  int k = o.threads;
  if (k <= 0) {
    if (const char* env = std::getenv("HKFLOW_THREADS")) {
      char* end = nullptr;
      long v = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || v < 1 || v > 1024)
        throw ConfigInvalid("HKFLOW_THREADS must be a positive integer");
      k = static_cast<int>(v);
    } else {
      k = 1;
    }
  }
  set_num_threads(k);
}

std::string out_dir(const Options& o, const RunConfig& c) { return o.out.empty() ? c.out_dir : o.out; }

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_plots(const std::string& dir, const std::vector<SeriesRow>& rows) {
  // Best effort: a plotting failure never changes the exit status.
  try {
    fs::create_directories(dir);
    std::vector<double> t;
    for (const SeriesRow& r : rows) t.push_back(r.t);
    auto col = [&](double SeriesRow::*m) {
      std::vector<double> y;
      for (const SeriesRow& r : rows) y.push_back(r.*m);
      return y;
    };
    const std::pair<const char*, double SeriesRow::*> cols[] = {
        {"vol", &SeriesRow::vol},           {"r", &SeriesRow::r},
        {"max_abs_R", &SeriesRow::max_abs_R}, {"min_eig_g", &SeriesRow::min_eig},
        {"mean_phi", &SeriesRow::mean_phi}};
    for (const auto& [name, m] : cols)
      write_text((fs::path(dir) / (std::string(name) + ".svg")).string(),
                 svg_line_plot(name, "t", PlotSeries{name, t, col(m)}));
  } catch (const std::exception& e) {
    std::cerr << "warning: plots not written: " << e.what() << "\n";
  }
}

SingularityReport singularity_at(const MetricDegenerate& e, double t, std::int64_t step) {
  SingularityReport rep;
  rep.t_last_good = t;
  rep.t_failed = e.has_time() ? e.time() : t;
  rep.step = step;
  rep.point = e.point();
  rep.coords = e.coords();
  rep.min_eigenvalue = e.min_eigenvalue();
  rep.message = e.what();
  return rep;
}

// Runs the configured flow. on_snapshot sees every accepted snapshot.
Trajectory run_flow(const RunConfig& c, const PotentialFlow& flow, FlowState start, bool keep, bool series,
                    const std::function<void(const Snapshot&, const SeriesRow&)>& on_snapshot, double* dt_out) {
  double dt = 0.0;
  try {
    dt = resolve_dt(c, flow, start);
  } catch (const MetricDegenerate& e) {
    Trajectory traj;
    traj.grid = flow.g0().grid();
    traj.singularity = singularity_at(e, start.t, start.step);
    traj.t_end = start.t;
    traj.step_end = start.step;
    if (dt_out) *dt_out = 0.0;
    return traj;
  }
  if (dt_out) *dt_out = dt;
  FlowRun run;
  run.dt = dt;
  run.T = c.T;
  run.snapshot_every = c.snapshot_every;
  run.keep_snapshots = keep;
  run.record_series = series;
  return integrate_flow(flow, std::move(start), run, on_snapshot);
}

json singular_summary(const Trajectory& traj) {
  return traj.singularity ? singularity_json(*traj.singularity, traj.grid->axes()) : json(nullptr);
}

// Grid index of `p` on `coarse`, mapped to the same physical point on `fine`.
std::size_t map_point(const Grid& coarse, const Grid& fine, std::size_t p) {
  const int ratio = fine.N() / coarse.N();
  std::size_t q = 0;
  for (int a = 0; a < coarse.axes(); ++a) q = q * fine.N() + static_cast<std::size_t>(coarse.index(p, a) * ratio);
  return q;
}

ScalarField initial_scalar_curvature(const RunConfig& c, const GridPtr& grid) {
  PotentialFlow flow(build_g0(c, grid), FlowOptions{c.dealias});
  FlowState s = flow.initial(build_phi0(c, grid), build_phi1(c, grid));
  MetricField g = flow.metric(s.phi);
  return scalar_curvature(g, ricci(g));
}

double slope(double e0, double e1, double h0, double h1) { return std::log(e0 / e1) / std::log(h0 / h1); }

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

int cmd_run(const Options& o) {
  RunConfig c = load_config(o.config);
  const std::string dir = out_dir(o, c);
  OutputLock lock(dir);
  GridPtr grid = build_grid(c);
  PotentialFlow flow(build_g0(c, grid), FlowOptions{c.dealias});

  FlowState start;
  json resumed = nullptr;
  if (!o.resume.empty()) {
    SnapshotRecord rec = load_snapshot(o.resume);
    if (rec.config.n != c.n || rec.config.N != c.N || rec.config.L != c.L)
      throw ConfigInvalid("resume snapshot grid does not match the config");
    start.t = rec.snapshot.t;
    start.step = rec.snapshot.step;
    start.phi = rec.snapshot.phi;
    start.psi = rec.snapshot.psi;
    start.phi.grid = grid;
    start.psi.grid = grid;
    resumed = {{"snapshot", o.resume}, {"t", start.t}, {"step", start.step}};
  } else {
    start = flow.initial(build_phi0(c, grid), build_phi1(c, grid));
  }

  const std::string snapdir = (fs::path(dir) / "snapshots").string();
  std::size_t written = 0;
  auto on_snapshot = [&](const Snapshot& s, const SeriesRow&) {
    if (c.write_snapshots) {
      save_snapshot(snapdir, s, c);
      ++written;
    }
  };
  double dt = 0.0;
  Trajectory traj = run_flow(c, flow, start, false, true, on_snapshot, &dt);

  write_text((fs::path(dir) / "series.csv").string(), series_csv(traj.series));
  json summary;
  summary["command"] = "run";
  summary["status"] = traj.singularity ? "singular" : "ok";
  summary["config"] = to_json(c);
  summary["dt"] = dt;
  summary["t_start"] = start.t;
  summary["t_end"] = traj.t_end;
  summary["step_end"] = traj.step_end;
  summary["snapshots_written"] = written;
  summary["resumed_from"] = resumed;
  if (!traj.series.empty()) {
    double vmin = INFINITY, vmax = -INFINITY, rmax = 0.0, emin = INFINITY;
    for (const SeriesRow& r : traj.series) {
      vmin = std::min(vmin, r.vol);
      vmax = std::max(vmax, r.vol);
      rmax = std::max(rmax, r.max_abs_R);
      emin = std::min(emin, r.min_eig);
    }
    summary["series"] = {{"rows", traj.series.size()},
                         {"vol_min", vmin},
                         {"vol_max", vmax},
                         {"max_abs_R", rmax},
                         {"min_eig_g", emin}};
  }
  summary["singularity"] = singular_summary(traj);
  write_json((fs::path(dir) / "summary.json").string(), summary);
  if (traj.singularity) write_json((fs::path(dir) / "singularity.json").string(), *summary.find("singularity"));
  if (c.plots) write_plots((fs::path(dir) / "plots").string(), traj.series);

  if (!o.quiet) {
    std::cout << "run: t = " << start.t << " -> " << traj.t_end << ", " << traj.series.size()
              << " samples, output in " << dir << "\n";
    if (traj.singularity)
      std::cout << "metric degenerate after t = " << traj.singularity->t_last_good << ": "
                << traj.singularity->message << "\n";
  }
  return traj.singularity ? kExitSingular : kExitOk;
}

int cmd_verify(const Options& o) {
  RunConfig c;
  Trajectory traj;
  std::string source;
  std::unique_ptr<PotentialFlow> flow;
  std::string dir;
  std::unique_ptr<OutputLock> lock;

  if (fs::is_directory(o.config)) {
    source = "run_dir";
    std::vector<SnapshotRecord> recs = load_run_dir(o.config);
    c = recs.front().config;
    dir = o.out.empty() ? o.config : o.out;
    lock = std::make_unique<OutputLock>(dir);
    GridPtr grid = recs.front().snapshot.phi.grid;
    flow = std::make_unique<PotentialFlow>(build_g0(c, grid), FlowOptions{c.dealias});
    traj.grid = grid;
    for (SnapshotRecord& r : recs) traj.snapshots.push_back(std::move(r.snapshot));
    traj.t_end = traj.snapshots.back().t;
    traj.step_end = traj.snapshots.back().step;
  } else {
    source = "config";
    c = load_config(o.config);
    dir = out_dir(o, c);
    lock = std::make_unique<OutputLock>(dir);
    GridPtr grid = build_grid(c);
    flow = std::make_unique<PotentialFlow>(build_g0(c, grid), FlowOptions{c.dealias});
    FlowState s0 = flow->initial(build_phi0(c, grid), build_phi1(c, grid));
    traj = run_flow(c, *flow, s0, true, true, {}, nullptr);
  }

  json out;
  out["command"] = "verify";
  out["source"] = source;
  out["config"] = to_json(c);
  if (traj.singularity) {
    out["status"] = "singular";
    out["singularity"] = singularity_json(*traj.singularity, traj.grid->axes());
    write_json((fs::path(dir) / "singularity.json").string(), out["singularity"]);
    write_json((fs::path(dir) / "verify.json").string(), out);
    if (!o.quiet) std::cout << "verify: trajectory hit a degenerate metric; see singularity.json\n";
    return kExitSingular;
  }

  std::vector<IdentityReport> reports = verify_trajectory(*flow, traj, c.verify);
  json ids = json::array();
  for (const IdentityReport& r : reports) ids.push_back(report_json(r));
  const bool ok = all_pass(reports);
  out["status"] = "ok";
  out["all_pass"] = ok;
  out["snapshots"] = traj.snapshots.size();
  out["identities"] = ids;
  write_json((fs::path(dir) / "verify.json").string(), out);
  const std::string table = report_table(reports);
  write_text((fs::path(dir) / "verify.txt").string(), table);
  if (!o.quiet) std::cout << table << (ok ? "all identities pass\n" : "some identities FAIL\n");
  return ok ? kExitOk : kExitIdentityFailed;
}

int cmd_converge(const Options& o) {
  RunConfig c = load_config(o.config);
  if (c.converge_dt.size() < 3) throw ConfigInvalid("converge needs at least 3 dt levels");
  for (std::size_t i = 1; i < c.converge_dt.size(); ++i)
    if (!(c.converge_dt[i] < c.converge_dt[i - 1])) throw ConfigInvalid("converge.dt_levels must decrease");
  if (c.converge_N.size() == 1) throw ConfigInvalid("converge.N_levels needs at least 2 entries");
  for (std::size_t i = 1; i < c.converge_N.size(); ++i)
    if (!(c.converge_N[i] > c.converge_N[i - 1])) throw ConfigInvalid("converge.N_levels must increase");
  const double T = c.converge_T ? *c.converge_T : c.T;
  const std::string dir = out_dir(o, c);
  OutputLock lock(dir);

  GridPtr grid = build_grid(c);
  PotentialFlow flow(build_g0(c, grid), FlowOptions{c.dealias});
  TensorFlow tflow(FlowOptions{c.dealias});
  const FlowState s0 = flow.initial(build_phi0(c, grid), build_phi1(c, grid));

  std::vector<ScalarField> phi_end;
  std::vector<double> dual;
  for (double dt : c.converge_dt) {
    const auto steps = std::llround(T / dt);
    if (std::abs(steps * dt - T) > 1e-9 * std::max(1.0, T))
      throw ConfigInvalid("converge: T is not a whole number of steps for dt = " + std::to_string(dt));
    FlowState s = s0;
    TensorFlowState ts = tensor_state_from_potential(flow, s0);
    for (long long k = 0; k < steps; ++k) {
      s = flow.step(s, dt);
      ts = tflow.step(ts, dt);
    }
    MetricField g = flow.metric(s.phi);
    dual.push_back(max_abs_diff(g.g, ts.g));
    phi_end.push_back(s.phi);
  }

  json dt_rows = json::array();
  std::string csv = "# dt,successive_diff_phi,dual_discrepancy\n";
  std::vector<double> succ(c.converge_dt.size(), NAN);
  for (std::size_t i = 1; i < c.converge_dt.size(); ++i) succ[i] = max_abs_diff(phi_end[i - 1], phi_end[i]);
  char line[160];
  for (std::size_t i = 0; i < c.converge_dt.size(); ++i) {
    if (std::isfinite(succ[i]))
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", c.converge_dt[i], succ[i], dual[i]);
    else
      std::snprintf(line, sizeof line, "%.17g,,%.17g\n", c.converge_dt[i], dual[i]);
    csv += line;
    dt_rows.push_back({{"dt", c.converge_dt[i]}, {"successive_diff_phi", num(succ[i])}, {"dual_discrepancy", dual[i]}});
  }
  json temporal = json::array(), dual_slopes = json::array();
  for (std::size_t i = 2; i < c.converge_dt.size(); ++i)
    temporal.push_back(num(slope(succ[i - 1], succ[i], c.converge_dt[i - 1], c.converge_dt[i])));
  for (std::size_t i = 1; i < c.converge_dt.size(); ++i)
    dual_slopes.push_back(num(slope(dual[i - 1], dual[i], c.converge_dt[i - 1], c.converge_dt[i])));
  write_text((fs::path(dir) / "converge_dt.csv").string(), csv);

  json result;
  result["command"] = "converge";
  result["config"] = to_json(c);
  result["T"] = T;
  result["dt_ladder"] = dt_rows;
  result["temporal_slopes"] = temporal;
  result["dual_integrator_slopes"] = dual_slopes;

  if (!c.converge_N.empty()) {
    // Conformal backgrounds with no potential have a closed-form scalar curvature.
    const bool analytic = c.metric_kind == "conformal" && c.phi0.empty() && !c.random_phi0;
    RunConfig finest = c;
    finest.N = c.converge_N.back();
    GridPtr fgrid = build_grid(finest);
    ScalarField Rf = initial_scalar_curvature(finest, fgrid);
    std::string ncsv = "# N,max_abs_error\n";
    json rows = json::array();
    std::vector<double> errs;
    for (int N : c.converge_N) {
      RunConfig cn = c;
      cn.N = N;
      GridPtr g = build_grid(cn);
      ScalarField R = initial_scalar_curvature(cn, g);
      double err = 0.0;
      if (analytic) {
        std::vector<Mode> u_modes, lap_modes;
        for (const ModeSpec& m : c.metric_modes) {
          u_modes.push_back(Mode{m.k, m.amplitude, m.sine});
          double k2 = 0.0;
          for (int a = 0; a < 2; ++a) k2 += m.k[a] * m.k[a];
          lap_modes.push_back(Mode{m.k, -M_PI * M_PI * k2 * m.amplitude, m.sine});
        }
        ScalarField u = field_from_modes(g, u_modes);
        ScalarField ddu = field_from_modes(g, lap_modes);
        for (std::size_t p = 0; p < R.size(); ++p) {
          double exact = -ddu[p].real() * std::exp(-u[p].real()) / c.metric_scale;
          err = std::max(err, std::abs(R[p] - exact));
        }
      } else if (N != c.converge_N.back()) {
        for (std::size_t p = 0; p < R.size(); ++p)
          err = std::max(err, std::abs(R[p] - Rf[map_point(*g, *fgrid, p)]));
      }
      errs.push_back(err);
      std::snprintf(line, sizeof line, "%d,%.17g\n", N, err);
      ncsv += line;
      rows.push_back({{"N", N}, {"max_abs_error", err}});
    }
    write_text((fs::path(dir) / "converge_N.csv").string(), ncsv);
    result["N_ladder"] = rows;
    result["N_reference"] = analytic ? "analytic" : "finest";
  }
  write_json((fs::path(dir) / "converge.json").string(), result);
  if (!o.quiet) std::cout << result.dump(2) << "\n";
  return kExitOk;
}

int cmd_curvature(const Options& o) {
  RunConfig c = load_config(o.config);
  const std::string dir = out_dir(o, c);
  OutputLock lock(dir);
  GridPtr grid = build_grid(c);
  PotentialFlow flow(build_g0(c, grid), FlowOptions{c.dealias});
  FlowState s = flow.initial(build_phi0(c, grid), build_phi1(c, grid));
  MetricField g;
  try {
    g = flow.metric(s.phi);
  } catch (MetricDegenerate& e) {
    e.set_time(s.t);
    write_json((fs::path(dir) / "singularity.json").string(), singularity_json(singularity_at(e, s.t, 0), grid->axes()));
    throw;
  }
  TensorField rm = riemann(g);
  TensorField ric = ricci(g);
  ScalarField R = scalar_curvature(g, ric);
  VolumeAverage va = volume_and_average(g, R);
  std::size_t pmax = 0, pmin = 0;
  for (std::size_t p = 0; p < R.size(); ++p) {
    if (R[p].real() > R[pmax].real()) pmax = p;
    if (R[p].real() < R[pmin].real()) pmin = p;
  }
  double elo = INFINITY, ehi = -INFINITY;
  for (std::size_t p = 0; p < R.size(); ++p) {
    auto [lo, hi] = hermitian_eig_range(ric, p);
    elo = std::min(elo, lo);
    ehi = std::max(ehi, hi);
  }
  CurvatureSymmetry sym = curvature_symmetry(rm);
  auto coords = [&](std::size_t p) {
    Coords x = grid->coords(p);
    json a = json::array();
    for (int i = 0; i < grid->axes(); ++i) a.push_back(x[i]);
    return a;
  };
  json j;
  j["command"] = "curvature";
  j["config"] = to_json(c);
  j["R_max"] = {{"value", R[pmax].real()}, {"coords", coords(pmax)}};
  j["R_min"] = {{"value", R[pmin].real()}, {"coords", coords(pmin)}};
  j["ricci_eigenvalue_range"] = {elo, ehi};
  j["vol"] = va.vol;
  j["r"] = va.r;
  j["integral_R_dmu"] = va.total_scalar;
  j["kahler_residual"] = kahler_residual(g.g);
  j["curvature_symmetry"] = {{"pair_swap", sym.pair_swap}, {"conjugate", sym.conjugate}};
  j["min_eig_g"] = g.min_eig;
  write_json((fs::path(dir) / "curvature.json").string(), j);
  if (!o.quiet) std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int execute(const Options& o) {
  try {
    apply_threads(o);
    if (o.command == "run") return cmd_run(o);
    if (o.command == "verify") return cmd_verify(o);
    if (o.command == "converge") return cmd_converge(o);
    if (o.command == "curvature") return cmd_curvature(o);
    throw ConfigInvalid("unknown command '" + o.command + "'");
  } catch (const MetricDegenerate& e) {
    std::cerr << "error: metric degenerate: " << e.what() << "\n";
    return kExitSingular;
  } catch (const NonFinite& e) {
    std::cerr << "error: non-finite value: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const CflViolation& e) {
    std::cerr << "error: CFL violation: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Hyperbolic Kahler-Ricci flow solver and identity verifier"};
  Options o;
  app.add_option("command", o.command, "run | verify | converge | curvature")
      ->required()
      ->check(CLI::IsMember({"run", "verify", "converge", "curvature"}));
  app.add_option("--config", o.config, "JSON config (verify also accepts a run directory)")->required();
  app.add_option("--out", o.out, "output directory (overrides output.dir)");
  app.add_option("--resume", o.resume, "continue a run from this snapshot (.hkrf)");
  app.add_option("--threads", o.threads, "worker threads (fallback: HKFLOW_THREADS)")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", o.quiet, "suppress console output");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  if (!o.resume.empty() && o.command != "run") {
    std::cerr << "error: --resume is only valid with run\n";
    return kExitConfig;
  }
  return execute(o);
}

}  // namespace hkflow::cli
