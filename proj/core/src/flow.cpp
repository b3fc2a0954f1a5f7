#include "hkflow/flow.hpp"

#include <cmath>

#include "hkflow/error.hpp"
#include "hkflow/parallel.hpp"

namespace hkflow {

ScalarField f0_of_initial(const MetricField& g0) { return ricci_potential(g0); }

ScalarField ma_rhs(const FlowState& state, const MetricField& g0, const ScalarField& f0) {
  MetricField g = metric_from_potential(g0, state.phi);
  ScalarField out(g.grid());
  for (std::size_t p = 0; p < out.size(); ++p)
    out[p] = std::log(g.det[p].real()) - std::log(g0.det[p].real()) - f0[p].real();
  if (!all_finite(out)) throw NonFinite("Monge-Ampere right-hand side is not finite");
  return out;
}

double cfl_dt(const MetricField& g, double h, double safety) {
  if (!(safety > 0.0) || !std::isfinite(safety)) throw ConfigInvalid("CFL safety factor must be positive");
  if (!(h > 0.0)) throw ConfigInvalid("grid spacing must be positive");
  // d dbar = Laplacian/4, so the fastest wave speed is sqrt(lambda_max(g^{-1}))/2.
  double c_max = 0.5 * std::sqrt(g.max_inv_eig);
  return safety * h / c_max;
}

PotentialFlow::PotentialFlow(MetricField g0, FlowOptions opt)
    : g0_(std::move(g0)), f0_(f0_of_initial(g0_)), logdet0_(log_det(g0_)), opt_(opt) {}

MetricField PotentialFlow::metric(const ScalarField& phi) const {
  return metric_from_potential(g0_, phi);
}

FlowState PotentialFlow::initial(const ScalarField& phi0, const ScalarField& psi0, double t0) const {
  require_same_grid(phi0, psi0);
  if (!phi0.grid->compatible(*g0_.grid())) throw ShapeMismatch("initial data grid differs from g0");
  FlowState s;
  s.t = t0;
  s.phi = opt_.dealias ? real_part(dealias(phi0)) : real_part(phi0);
  s.psi = opt_.dealias ? real_part(dealias(psi0)) : real_part(psi0);
  return s;
}

void PotentialFlow::prepare(FlowState& s) const {
  if (s.has_force) return;
  MetricField g;
  try {
    g = metric(s.phi);
  } catch (MetricDegenerate& e) {
    e.set_time(s.t);
    throw;
  }
  ScalarField F(g.grid());
  for (std::size_t p = 0; p < F.size(); ++p)
    F[p] = std::log(g.det[p].real()) - logdet0_[p].real() - f0_[p].real();
  if (opt_.dealias) F = dealias(F);
  for (cplx& x : F.v) x = x.real();
  if (!all_finite(F)) throw NonFinite("force is not finite at t = " + std::to_string(s.t));
  s.force = std::move(F);
  s.cfl_limit = cfl_dt(g, g.grid()->h(), 1.0);
  s.has_force = true;
}

FlowState PotentialFlow::step(const FlowState& s0, double dt) const {
  FlowState s = s0;
  prepare(s);
  if (!std::isfinite(dt) || dt == 0.0) throw ConfigInvalid("time step must be finite and nonzero");
  if (std::abs(dt) > s.cfl_limit)
    throw CflViolation("dt = " + std::to_string(dt) + " exceeds the CFL limit " +
                       std::to_string(s.cfl_limit));
  const std::size_t P = s.phi.size();
  const double half = 0.5 * dt;
  FlowState out;
  out.t = s.t + dt;
  out.step = s.step + (dt > 0 ? 1 : -1);
  out.phi = ScalarField(s.phi.grid);
  out.psi = ScalarField(s.psi.grid);
  for (std::size_t p = 0; p < P; ++p) {
    double psi_half = s.psi[p].real() + half * s.force[p].real();
    out.psi[p] = psi_half;
    out.phi[p] = s.phi[p].real() + dt * psi_half;
  }
  prepare(out);
  for (std::size_t p = 0; p < P; ++p) out.psi[p] = out.psi[p].real() + half * out.force[p].real();
  return out;
}

TensorField TensorFlow::acceleration(const TensorField& g) const {
  MetricField m = make_metric(g);
  ScalarField ld = log_det(m);
  if (opt_.dealias) ld = real_part(dealias(ld));
  return hermitian_hessian(ld);
}

TensorFlowState TensorFlow::step(const TensorFlowState& s, double dt) const {
  TensorFlowState out;
  out.t = s.t + dt;
  TensorField g_half = s.g + (0.5 * dt) * s.gdot;
  TensorField acc;
  try {
    acc = acceleration(g_half);
  } catch (MetricDegenerate& e) {
    e.set_time(s.t + 0.5 * dt);
    throw;
  }
  if (!all_finite(acc)) throw NonFinite("tensor flow acceleration is not finite");
  out.gdot = s.gdot + dt * acc;
  out.g = g_half + (0.5 * dt) * out.gdot;
  return out;
}

TensorFlowState tensor_state_from_potential(const PotentialFlow& flow, const FlowState& s) {
  TensorFlowState out;
  out.t = s.t;
  out.g = flow.g0().g + hermitian_hessian(s.phi);
  out.gdot = hermitian_hessian(s.psi);
  return out;
}

}  // namespace hkflow
