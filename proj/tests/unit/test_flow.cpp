#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hkflow/error.hpp"
#include "hkflow/flow.hpp"

using namespace hkflow;

namespace {

constexpr double pi = std::numbers::pi;

ScalarField cos_mode(const GridPtr& g, double amp, std::array<int, 4> k = {1, 0, 0, 0}) {
  return field_from_modes(g, {{k, amp, false}});
}

// phi0 = eps cos(2 pi x1), psi0 = eps pi sin(2 pi y1).
FlowState nonlinear_start(const PotentialFlow& flow, double eps) {
  auto g = flow.g0().grid();
  return flow.initial(cos_mode(g, eps), field_from_modes(g, {{{0, 1, 0, 0}, eps * pi, true}}));
}

FlowState advance(const PotentialFlow& flow, FlowState s, double dt, int steps) {
  for (int i = 0; i < steps; ++i) s = flow.step(s, dt);
  return s;
}

}  // namespace

TEST_CASE("flat metric with zero data is a fixed point") {
  auto g = make_grid(1, 16);
  PotentialFlow flow(flat_metric(g));
  CHECK(max_abs(flow.f0()) == 0.0);
  FlowState s = advance(flow, flow.initial(ScalarField(g), ScalarField(g)), 5e-3, 200);
  CHECK(max_abs(s.phi) == 0.0);
  CHECK(max_abs(s.psi) == 0.0);
  CHECK(s.t == doctest::Approx(1.0));
  CHECK(s.step == 200);
}

TEST_CASE("small data follows the linearized wave") {
  // Linearization: phi_tt = d dbar phi = -pi^2 phi for cos(2 pi x1), so
  // phi = eps cos(pi t) cos(2 pi x1) when psi0 = 0.
  auto g = make_grid(1, 32);
  const double eps = 1e-4;
  PotentialFlow flow(flat_metric(g));
  const double dt = 1e-3;
  FlowState s = advance(flow, flow.initial(cos_mode(g, eps), ScalarField(g)), dt, 1000);
  double err = 0.0;
  for (std::size_t p = 0; p < s.phi.size(); ++p) {
    double x = g->coords(p)[0];
    double exact = eps * std::cos(pi * s.t) * std::cos(2 * pi * x);
    err = std::max(err, std::abs(s.phi[p].real() - exact));
  }
  CHECK(err / eps < 1e-3);
}

TEST_CASE("leapfrog is time reversible") {
  auto g = make_grid(1, 32);
  PotentialFlow flow(flat_metric(g));
  FlowState s0 = nonlinear_start(flow, 0.02);
  FlowState fwd = advance(flow, s0, 1e-3, 200);
  FlowState back = advance(flow, fwd, -1e-3, 200);
  CHECK(back.step == 0);
  CHECK(std::abs(back.t) < 1e-13);
  CHECK(max_abs_diff(back.phi, s0.phi) < 1e-10);
  CHECK(max_abs_diff(back.psi, s0.psi) < 1e-10);
}

TEST_CASE("CFL limit") {
  // Flat: c_max = 1/2, so the limit is safety * 2h.
  auto g = make_grid(1, 16);
  CHECK(cfl_dt(flat_metric(g), g->h(), 0.5) == doctest::Approx(0.0625));
  CHECK_THROWS_AS(cfl_dt(flat_metric(g), g->h(), 0.0), ConfigInvalid);
  CHECK_THROWS_AS(cfl_dt(flat_metric(g), g->h(), -1.0), ConfigInvalid);

  // Conformal exp(0.1 cos): largest inverse eigenvalue exp(0.1), c_max = exp(0.05) / 2.
  MetricField e = conformal_metric(cos_mode(g, 0.1));
  CHECK(cfl_dt(e, g->h(), 0.5) == doctest::Approx(0.5 * g->h() * 2.0 * std::exp(-0.05)).epsilon(1e-12));
  CHECK(cfl_dt(e, g->h(), 0.5) == doctest::Approx(0.0594518).epsilon(1e-6));

  PotentialFlow flow(flat_metric(g));
  FlowState s = flow.initial(ScalarField(g), ScalarField(g));
  CHECK_THROWS_AS(flow.step(s, 0.2), CflViolation);
  CHECK_THROWS_AS(flow.step(s, 0.0), ConfigInvalid);
}

TEST_CASE("moderate data completes, large data becomes singular") {
  auto g = make_grid(1, 32);
  PotentialFlow flow(flat_metric(g));
  FlowRun run;
  run.dt = 1e-3;
  run.T = 0.5;
  run.snapshot_every = 50;
  Trajectory ok = integrate_flow(flow, nonlinear_start(flow, 0.05), run);
  CHECK_FALSE(ok.singularity.has_value());
  CHECK(ok.t_end == doctest::Approx(0.5));
  CHECK(ok.snapshots.size() == 11);
  CHECK(ok.series.size() == 11);

  // 1 - 0.2 pi^2 < 0: degenerate before the first step.
  Trajectory bad = integrate_flow(flow, flow.initial(cos_mode(g, 0.2), ScalarField(g)), run);
  REQUIRE(bad.singularity.has_value());
  CHECK(bad.singularity->t_last_good == 0.0);
  CHECK(bad.singularity->min_eigenvalue < 0.0);
  CHECK(bad.snapshots.empty());
}

TEST_CASE("volume is conserved along the flow") {
  for (int n : {1, 2}) {
    auto g = make_grid(n, n == 1 ? 32 : 8);
    PotentialFlow flow(flat_metric(g));
    FlowRun run;
    run.dt = 2e-3;
    run.T = 0.2;
    run.snapshot_every = 10;
    Trajectory t = integrate_flow(flow, nonlinear_start(flow, 0.02), run);
    REQUIRE_FALSE(t.singularity.has_value());
    for (const SeriesRow& r : t.series) {
      CHECK(r.vol == doctest::Approx(1.0).epsilon(1e-13));
      CHECK(std::abs(r.total_scalar) < 1e-10);
    }
  }
}

TEST_CASE("adding a constant to phi0 shifts phi and nothing else") {
  auto g = make_grid(1, 32);
  PotentialFlow flow(flat_metric(g));
  FlowState a = nonlinear_start(flow, 0.02);
  FlowState b = a;
  b.has_force = false;
  for (cplx& x : b.phi.v) x += 0.7;
  a = advance(flow, a, 1e-3, 100);
  b = advance(flow, b, 1e-3, 100);
  CHECK(max_abs_diff(b.psi, a.psi) < 1e-13);
  CHECK(max_abs_diff(b.phi - a.phi, ScalarField(g, 0.7)) < 1e-13);
}

TEST_CASE("tensor flow") {
  auto g = make_grid(1, 16);
  TensorFlow tf;
  TensorFlowState st{0.0, flat_metric(g).g, hermitian_field(g)};
  for (int i = 0; i < 50; ++i) st = tf.step(st, 1e-2);
  CHECK(max_abs_diff(st.g, flat_metric(g).g) == 0.0);
  CHECK(max_abs(st.gdot) == 0.0);

  // Agrees with the potential flow to second order in dt.
  auto g32 = make_grid(1, 32);
  PotentialFlow flow(flat_metric(g32));
  FlowState s = nonlinear_start(flow, 0.02);
  TensorFlowState ts = tensor_state_from_potential(flow, s);
  const double dt = 1e-3;
  for (int i = 0; i < 100; ++i) {
    s = flow.step(s, dt);
    ts = tf.step(ts, dt);
  }
  TensorField gp = flow.g0().g + hermitian_hessian(s.phi);
  CHECK(max_abs_diff(gp, ts.g) < 1e-6);
  CHECK(kahler_residual(ts.g) < 1e-10);
}

TEST_CASE("wave equation for v = -dphi/dt") {
  auto g = make_grid(1, 32);
  PotentialFlow flow(flat_metric(g));
  FlowRun run;
  run.dt = 1e-3;
  run.T = 0.1;
  run.snapshot_every = 5;
  Trajectory t = integrate_flow(flow, nonlinear_start(flow, 0.02), run);
  std::vector<double> r1 = v_wave_residual(flow, t, 1, {10});
  std::vector<double> r2 = v_wave_residual(flow, t, 2, {10});
  REQUIRE(r1.size() == 1);
  // Second-order centered difference.
  CHECK(r2[0] / r1[0] == doctest::Approx(4.0).epsilon(0.05));
  CHECK_THROWS_AS(v_wave_residual(flow, t, 1, {0}), ConfigInvalid);
}

TEST_CASE("volume normalization on static flat tori") {
  auto g = make_grid(1, 16);
  FlowRun run;
  run.dt = 1e-2;
  run.T = 0.1;
  run.snapshot_every = 1;

  PotentialFlow unit(flat_metric(g));
  Trajectory t = integrate_flow(unit, unit.initial(ScalarField(g), ScalarField(g)), run);
  NormalizedFlowCheck c = normalize_flow(unit, t, 1, {});
  CHECK(c.volume_normalization == 0.0);
  for (double r : c.residual) CHECK(r < 1e-10);
  CHECK(c.record.t_tilde.back() == doctest::Approx(0.1));

  // Metric scaled by 4 (lambda = 2): Vol = 4, phi = 1/2, t~ = t/2.
  PotentialFlow big(flat_metric(g, {4.0}));
  Trajectory tb = integrate_flow(big, big.initial(ScalarField(g), ScalarField(g)), run);
  NormalizedFlowCheck cb = normalize_flow(big, tb, 1, {});
  for (double p : cb.record.phi_norm) CHECK(p == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(cb.record.t_tilde.back() == doctest::Approx(0.05).epsilon(1e-13));
  CHECK(cb.volume_normalization < 1e-14);
  for (double r : cb.residual) CHECK(r < 1e-10);
  CHECK(std::isnan(cb.record.a.front()));
}

TEST_CASE("snapshots must be equispaced") {
  auto g = make_grid(1, 8);
  Trajectory t;
  t.grid = g;
  for (std::int64_t k : {0, 1, 3}) t.snapshots.push_back({0.1 * k, k, ScalarField(g), ScalarField(g)});
  CHECK_THROWS_AS(require_equispaced(t), ConfigInvalid);
  t.snapshots.pop_back();
  CHECK_NOTHROW(require_equispaced(t));
}
