#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hkflow/error.hpp"
#include "hkflow/verify.hpp"

using namespace hkflow;

namespace {

constexpr double pi = std::numbers::pi;

LevelResult level(double spacing, double residual, double magnitude = 1.0) {
  LevelResult l;
  l.spacing = spacing;
  l.max_residual = residual;
  l.magnitude = magnitude;
  return l;
}

Trajectory run(const PotentialFlow& flow, const FlowState& s, double T) {
  FlowRun r;
  r.dt = 1e-3;
  r.T = T;
  r.snapshot_every = 10;
  return integrate_flow(flow, s, r);
}

const IdentityReport& find(const std::vector<IdentityReport>& reps, const std::string& name) {
  for (const auto& r : reps)
    if (r.name == name) return r;
  FAIL("missing identity " << name);
  return reps.front();
}

}  // namespace

TEST_CASE("finite differences in time") {
  // t^2 has exact centered second differences.
  auto g = make_grid(1, 8);
  std::vector<TensorField> f;
  for (double t : {0.9, 1.0, 1.1}) {
    TensorField x = hermitian_field(g);
    for (cplx& v : x.data) v = t * t;
    f.push_back(x);
  }
  TensorField d2 = dt_tensor({&f[0], &f[1], &f[2]}, 0.1, 2);
  TensorField d1 = dt_tensor({&f[0], &f[1], &f[2]}, 0.1, 1);
  for (std::size_t i = 0; i < d2.data.size(); ++i) {
    CHECK(std::abs(d2.data[i] - 2.0) < 1e-12);
    CHECK(std::abs(d1.data[i] - 2.0) < 1e-12);
  }
  CHECK_THROWS_AS(dt_tensor({&f[0], &f[1]}, 0.1, 2), ConfigInvalid);
  CHECK_THROWS_AS(dt_tensor({&f[0], &f[1], &f[2]}, 0.1, 3), ConfigInvalid);

  // Error of the 3-point second difference of sin quarters when ds halves.
  auto err = [](double ds, bool five) {
    std::vector<double> s;
    for (int k = five ? -2 : -1; k <= (five ? 2 : 1); ++k) s.push_back(std::sin(0.3 + k * ds));
    return std::abs(dt_scalar(s, ds, 2) + std::sin(0.3));
  };
  CHECK(err(0.1, false) / err(0.05, false) == doctest::Approx(4.0).epsilon(0.01));
  CHECK(err(0.1, true) / err(0.05, true) == doctest::Approx(16.0).epsilon(0.02));
  CHECK(dt_scalar({std::sin(0.2), std::sin(0.3), std::sin(0.4)}, 0.1, 1) ==
        doctest::Approx(std::cos(0.3)).epsilon(2e-3));
}

TEST_CASE("order grading") {
  VerifySettings s;
  IdentityReport r;
  r.levels = {level(0.04, 4e-4), level(0.02, 1e-4), level(0.01, 2.5e-5)};
  grade_order(r, s);
  CHECK(r.pass);
  REQUIRE(r.orders.size() == 2);
  CHECK(r.orders[0] == doctest::Approx(2.0));

  // First order is rejected.
  r.levels = {level(0.04, 4e-4), level(0.02, 2e-4), level(0.01, 1e-4)};
  grade_order(r, s);
  CHECK_FALSE(r.pass);

  // Second order but above the ceiling.
  r.levels = {level(0.04, 40), level(0.02, 10), level(0.01, 2.5)};
  grade_order(r, s);
  CHECK_FALSE(r.pass);

  // Roundoff-level residuals are a zero case regardless of ratios.
  r.levels = {level(0.04, 3e-15), level(0.02, 5e-15), level(0.01, 2e-15)};
  grade_order(r, s);
  CHECK(r.pass);
  CHECK(r.zero_case);

  // Both sides vanishing also counts as zero.
  r.levels = {level(0.04, 1e-9, 1e-13), level(0.02, 1e-9, 1e-13), level(0.01, 1e-9, 1e-13)};
  grade_order(r, s);
  CHECK(r.zero_case);

  r.levels = {level(0.02, 1e-4), level(0.01, 2.5e-5)};
  grade_order(r, s);
  CHECK_FALSE(r.pass);

  r.levels = {level(0.04, NAN), level(0.02, 1e-4), level(0.01, 2.5e-5)};
  grade_order(r, s);
  CHECK_FALSE(r.pass);
}

TEST_CASE("static flat torus satisfies every identity trivially") {
  auto g = make_grid(1, 16);
  PotentialFlow flow(flat_metric(g));
  Trajectory t = run(flow, flow.initial(ScalarField(g), ScalarField(g)), 0.2);
  std::vector<IdentityReport> reps = verify_trajectory(flow, t, VerifySettings{});
  CHECK(reps.size() > 20);
  for (const auto& r : reps) {
    INFO(r.name << " " << r.note);
    CHECK(r.pass);
    if (r.kind == "order") CHECK(r.zero_case);
  }
}

TEST_CASE("nonlinear data passes the identity suite") {
  auto g = make_grid(1, 32);
  PotentialFlow flow(flat_metric(g));
  FlowState s = flow.initial(field_from_modes(g, {{{1, 0, 0, 0}, 0.02, false}}),
                             field_from_modes(g, {{{0, 1, 0, 0}, 0.02 * pi, true}}));
  Trajectory t = run(flow, s, 0.3);
  VerifySettings vs;
  vs.sample_times = {0.15};
  std::vector<IdentityReport> reps = verify_trajectory(flow, t, vs);
  for (const auto& r : reps) {
    INFO(r.name << " value=" << r.value << " " << r.note);
    CHECK(r.pass);
  }
  const IdentityReport& riem = find(reps, "riemann_evolution");
  CHECK_FALSE(riem.zero_case);
  REQUIRE(riem.orders.size() == 2);
  CHECK(riem.orders[1] == doctest::Approx(2.0).epsilon(0.05));
  CHECK(all_pass(reps));

  // Five-point differences: order window doubles.
  vs.five_point = true;
  vs.strides = {2, 1};
  vs.sample_times = {0.15};
  for (const auto& r : verify_trajectory(flow, t, vs))
    if (r.name == "riemann_evolution") {
      INFO(r.note);
      CHECK(r.levels.size() == 2);
    }
}

TEST_CASE("verification rejects unusable sample times and settings") {
  auto g = make_grid(1, 16);
  PotentialFlow flow(flat_metric(g));
  Trajectory t = run(flow, flow.initial(ScalarField(g), ScalarField(g)), 0.2);
  VerifySettings s;
  s.sample_times = {0.01};
  CHECK_THROWS_AS(verify_trajectory(flow, t, s), ConfigInvalid);
  s.sample_times = {0.105};
  CHECK_THROWS_AS(verify_trajectory(flow, t, s), ConfigInvalid);
  s.sample_times = {};
  s.strides = {1, 2};
  CHECK_THROWS_AS(verify_trajectory(flow, t, s), ConfigInvalid);
  Trajectory shortt = run(flow, flow.initial(ScalarField(g), ScalarField(g)), 0.03);
  CHECK_THROWS_AS(verify_trajectory(flow, shortt, VerifySettings{}), ConfigInvalid);
}
