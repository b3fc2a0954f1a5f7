// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "hkflow/error.hpp"
#include "hkflow/verify.hpp"
#include "hkflow_cli/commands.hpp"
#include "hkflow_cli/config.hpp"
#include "hkflow_cli/snapshot_io.hpp"

using namespace hkflow;
using namespace hkflow::cli;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

std::string config_path(const std::string& name) { return std::string(HKFLOW_CONFIG_DIR) + "/" + name; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Every snapshot of every run made here, for the torus invariant.
struct TorusLog {
  std::size_t rows = 0;
  double worst_total = 0.0;
  double worst_r = 0.0;

  void add(const SeriesRow& r) {
    ++rows;
    worst_total = std::max(worst_total, std::abs(r.total_scalar));
    worst_r = std::max(worst_r, std::abs(r.r));
    if (!std::isfinite(r.total_scalar) || !std::isfinite(r.r)) worst_total = INFINITY;
  }
  void add(const Trajectory& t) {
    for (const SeriesRow& r : t.series) add(r);
  }
};

TorusLog torus;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Setup {
  RunConfig config;
  GridPtr grid;
  std::unique_ptr<PotentialFlow> flow;
  FlowState start;
};

Setup setup(const std::string& name) {
  Setup s;
  s.config = load_config(config_path(name));
  s.grid = build_grid(s.config);
  s.flow = std::make_unique<PotentialFlow>(build_g0(s.config, s.grid), FlowOptions{s.config.dealias});
  s.start = s.flow->initial(build_phi0(s.config, s.grid), build_phi1(s.config, s.grid));
  return s;
}

Trajectory run_config(Setup& s) {
  FlowRun run;
  run.dt = resolve_dt(s.config, *s.flow, s.start);
  run.T = s.config.T;
  run.snapshot_every = s.config.snapshot_every;
  Trajectory t = integrate_flow(*s.flow, s.start, run);
  torus.add(t);
  return t;
}

std::string failing(const std::vector<IdentityReport>& reps) {
  std::string out;
  for (const auto& r : reps)
    if (!r.pass) out += (out.empty() ? "" : ", ") + r.name;
  return out;
}

double worst_order_deviation(const std::vector<IdentityReport>& reps, int* graded, int* zero) {
  double worst = 0.0;
  for (const auto& r : reps) {
    if (r.kind != "order") continue;
    if (r.zero_case) {
      ++*zero;
      continue;
    }
    ++*graded;
    for (double q : r.orders) worst = std::max(worst, std::abs(q - 2.0));
  }
  return worst;
}

// ---------------------------------------------------------------------------

Outcome static_flat() {
  auto t0 = std::chrono::steady_clock::now();
  Setup s = setup("flat_static.json");
  Trajectory traj = run_config(s);
  double phi = 0.0, R = 0.0;
  for (const Snapshot& snap : traj.snapshots) phi = std::max(phi, max_abs(snap.phi));
  for (const SeriesRow& r : traj.series) R = std::max(R, r.max_abs_R);
  std::vector<IdentityReport> reps = verify_trajectory(*s.flow, traj, s.config.verify);
  double resid = 0.0;
  for (const auto& r : reps) {
    if (r.kind == "order")
      for (const auto& l : r.levels) resid = std::max(resid, l.max_residual);
    else
      resid = std::max(resid, r.value);
  }
  double secs = seconds_since(t0);
  bool ok = !traj.singularity && std::abs(traj.t_end - 10.0) < 1e-9 && phi <= 1e-12 && R <= 1e-12 &&
            resid <= 1e-12 && all_pass(reps) && secs < 5.0;
  return {ok, "max|phi|=" + fmt(phi) + " max|R|=" + fmt(R) + " max identity residual=" + fmt(resid) + " over " +
                  std::to_string(reps.size()) + " checks, " + fmt(secs) + " s"};
}

Outcome curvature_oracle() {
  auto g = make_grid(1, 64);
  MetricField m = conformal_metric(field_from_modes(g, {{{1, 0, 0, 0}, 0.1, false}}));
  TensorField gam = christoffel(m);
  TensorField rm = riemann(m);
  TensorField ric = ricci(m);
  ScalarField R = scalar_curvature(m, ric);
  double e_ric = 0, e_R = 0, e_rm = 0, e_gam = 0;
  for (std::size_t p = 0; p < R.size(); ++p) {
    double x = g->coords(p)[0];
    double u = 0.1 * std::cos(2 * pi * x);
    double base = 0.1 * pi * pi * std::cos(2 * pi * x);
    e_ric = std::max(e_ric, std::abs(ric({0, 0}, p) - base));
    e_R = std::max(e_R, std::abs(R[p] - std::exp(-u) * base));
    e_rm = std::max(e_rm, std::abs(rm({0, 0, 0, 0}, p) - std::exp(u) * base));
    e_gam = std::max(e_gam, std::abs(gam({0, 0, 0}, p) + 0.1 * pi * std::sin(2 * pi * x)));
  }
  double worst = std::max({e_ric, e_R, e_rm, e_gam});
  return {worst <= 1e-11, "Ric " + fmt(e_ric) + ", R " + fmt(e_R) + ", Rm " + fmt(e_rm) + ", Gamma " + fmt(e_gam)};
}

Outcome linearized() {
  const double eps = 1e-4, dt = 1e-3;
  auto g = make_grid(1, 32);
  PotentialFlow flow(flat_metric(g));
  FlowState s = flow.initial(field_from_modes(g, {{{1, 0, 0, 0}, eps, false}}), ScalarField(g));
  double worst = 0.0;
  auto check = [&](const FlowState& st) {
    for (std::size_t p = 0; p < st.phi.size(); ++p) {
      double x = g->coords(p)[0];
      double exact = eps * std::cos(2 * pi * x) * std::cos(pi * st.t);
      worst = std::max(worst, std::abs(st.phi[p].real() - exact) / eps);
    }
  };
  check(s);
  for (int i = 0; i < 1000; ++i) {
    s = flow.step(s, dt);
    check(s);
    if ((i + 1) % 10 == 0) torus.add(series_row(flow, s));
  }
  return {worst < 1e-3, "max relative error " + fmt(worst) + " over t in [0, 1]"};
}

Outcome dual_integrator() {
  Setup s = setup("nonlinear.json");
  auto discrepancy = [&](double dt) {
    FlowState p = s.start;
    TensorFlowState ts = tensor_state_from_potential(*s.flow, p);
    TensorFlow tf(FlowOptions{s.config.dealias});
    const int steps = static_cast<int>(std::llround(0.5 / dt));
    double worst = 0.0;
    for (int i = 0; i < steps; ++i) {
      p = s.flow->step(p, dt);
      ts = tf.step(ts, dt);
      TensorField gp = s.flow->g0().g + hermitian_hessian(p.phi);
      worst = std::max(worst, max_abs_diff(gp, ts.g));
      if ((i + 1) % 50 == 0) torus.add(series_row(*s.flow, p));
    }
    return worst;
  };
  double e2 = discrepancy(2e-3), e1 = discrepancy(1e-3), e05 = discrepancy(5e-4);
  double q1 = std::log2(e2 / e1), q2 = std::log2(e1 / e05);
  bool ok = e1 <= 1e-6 && std::abs(q1 - 2.0) <= 0.2 && std::abs(q2 - 2.0) <= 0.2;
  return {ok, "max discrepancy " + fmt(e2) + " / " + fmt(e1) + " / " + fmt(e05) +
                  " at dt 2e-3 / 1e-3 / 5e-4, orders " + fmt(q1) + ", " + fmt(q2)};
}

Outcome identity_suite() {
  auto t0 = std::chrono::steady_clock::now();
  Setup s = setup("nonlinear.json");
  Trajectory traj = run_config(s);
  std::vector<IdentityReport> reps = verify_trajectory(*s.flow, traj, s.config.verify);
  double secs = seconds_since(t0);
  int graded = 0, zero = 0;
  double dev = worst_order_deviation(reps, &graded, &zero);
  bool ok = !traj.singularity && all_pass(reps) && secs < 120.0;
  std::string d = std::to_string(reps.size()) + " checks, " + std::to_string(graded) +
                  " order-graded (max |order-2|=" + fmt(dev) + "), " + std::to_string(zero) + " zero-case, " +
                  fmt(secs) + " s";
  if (!all_pass(reps)) d += "; failing: " + failing(reps);
  return {ok, d};
}

Outcome kahler_preservation() {
  const double dt = 1e-3;
  double worst = 0.0;
  std::string d;
  for (int n : {1, 2}) {
    auto g = make_grid(n, n == 1 ? 32 : 8);
    std::vector<Mode> modes{{{1, 0, 0, 0}, 0.02, false}};
    if (n == 2) modes.push_back({{1, 0, 0, 1}, 0.01, false});
    PotentialFlow flow(flat_metric(g));
    FlowState p = flow.initial(field_from_modes(g, modes), field_from_modes(g, {{{0, 1, 0, 0}, 0.02 * pi, true}}));
    TensorFlowState ts = tensor_state_from_potential(flow, p);
    TensorFlow tf;
    double w = kahler_residual(ts.g);
    for (int i = 0; i < 500; ++i) {
      ts = tf.step(ts, dt);
      w = std::max(w, kahler_residual(ts.g));
    }
    worst = std::max(worst, w);
    d += (d.empty() ? "" : ", ") + std::string("n=") + std::to_string(n) + ": " + fmt(w);
  }
  return {worst <= 1e-9, "max Kahler residual over T=0.5 " + d};
}

Outcome reversibility() {
  Setup s = setup("nonlinear.json");
  FlowState f = s.start;
  for (int i = 0; i < 1000; ++i) f = s.flow->step(f, 1e-3);
  torus.add(series_row(*s.flow, f));
  FlowState b = f;
  for (int i = 0; i < 1000; ++i) b = s.flow->step(b, -1e-3);
  double ephi = max_abs_diff(b.phi, s.start.phi), epsi = max_abs_diff(b.psi, s.start.psi);
  return {std::max(ephi, epsi) <= 1e-10 && b.step == 0,
          "phi " + fmt(ephi) + ", psi " + fmt(epsi) + " after 1000 steps each way"};
}

Outcome singular_cli() {
  fs::path dir = fs::temp_directory_path() / ("hkflow_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  Options o;
  o.command = "run";
  o.config = config_path("singular.json");
  o.out = dir.string();
  o.quiet = true;
  int code = execute(o);
  bool report = fs::exists(dir / "singularity.json");
  bool clean = true;
  int files = 0;
  for (auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    ++files;
    if (e.path().extension() == ".hkrf") {
      LoadedSnapshot s = read_snapshot_file(e.path().string());
      for (const auto& v : s.phi) clean = clean && std::isfinite(v.real()) && std::isfinite(v.imag());
      for (const auto& v : s.psi) clean = clean && std::isfinite(v.real()) && std::isfinite(v.imag());
      continue;
    }
    std::ifstream in(e.path());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    std::transform(text.begin(), text.end(), text.begin(), ::tolower);
    if (text.find("nan") != std::string::npos) clean = false;
  }
  fs::remove_all(dir);
  return {code == kExitSingular && report && clean,
          "exit " + std::to_string(code) + ", singularity.json " + (report ? "written" : "missing") + ", " +
              std::to_string(files) + " files " + (clean ? "NaN-free" : "contain NaN")};
}

Outcome n2_smoke() {
  auto t0 = std::chrono::steady_clock::now();
  Setup s = setup("n2_smoke.json");
  Trajectory traj = run_config(s);
  double sym = 0.0;
  for (const Snapshot& snap : traj.snapshots) {
    CurvatureSymmetry c = curvature_symmetry(riemann(s.flow->metric(snap.phi)));
    sym = std::max({sym, c.pair_swap, c.conjugate});
  }
  std::vector<IdentityReport> reps = verify_trajectory(*s.flow, traj, s.config.verify);
  double secs = seconds_since(t0);
  int graded = 0, zero = 0;
  double dev = worst_order_deviation(reps, &graded, &zero);
  bool ok = !traj.singularity && sym <= 1e-10 && all_pass(reps) && secs < 300.0;
  std::string d = "N=" + std::to_string(s.config.N) + ", symmetry " + fmt(sym) + ", " + std::to_string(graded) +
                  " order-graded (max |order-2|=" + fmt(dev) + "), " + std::to_string(zero) + " zero-case, " +
                  fmt(secs) + " s";
  if (!all_pass(reps)) d += "; failing: " + failing(reps);
  return {ok, d};
}

Outcome torus_invariant() {
  bool ok = torus.rows > 0 && torus.worst_total <= 1e-10 && torus.worst_r <= 1e-10;
  return {ok, std::to_string(torus.rows) + " snapshots, max |int R dmu|=" + fmt(torus.worst_total) +
                  ", max |r|=" + fmt(torus.worst_r)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  // The torus invariant is evaluated last, over every run made by the others.
  std::vector<Criterion> criteria{
      {1, "static flat solution", static_flat},
      {2, "analytic curvature of the conformal metric", curvature_oracle},
      {3, "linearized flow", linearized},
      {4, "potential vs tensor flow", dual_integrator},
      {5, "identity suite on nonlinear data", identity_suite},
      {7, "Kahler condition under the tensor flow", kahler_preservation},
      {8, "time reversibility", reversibility},
      {9, "singular run from the command line", singular_cli},
      {10, "n = 2 smoke run", n2_smoke},
      {6, "integrated scalar curvature on the torus", torus_invariant},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::string line = std::string(o.pass ? "PASS" : "FAIL") + " [" + std::to_string(c.id) + "] " + c.name + ": " +
                       o.detail;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
