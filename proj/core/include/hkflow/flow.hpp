#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hkflow/geometry.hpp"

namespace hkflow {

struct FlowOptions {
  bool dealias = true;
};

// (t, phi, psi = dphi/dt). The force F(phi) is cached so that kick-drift-kick
// costs one metric evaluation per step.
struct FlowState {
  double t = 0.0;
  std::int64_t step = 0;
  ScalarField phi;
  ScalarField psi;
  ScalarField force;
  double cfl_limit = 0.0;
  bool has_force = false;
};

// Mean-zero Ricci potential of the background metric.
ScalarField f0_of_initial(const MetricField& g0);

// log det g(t) - log det g0 - f0, without dealiasing.
ScalarField ma_rhs(const FlowState& state, const MetricField& g0, const ScalarField& f0);

// safety * h / c_max, c_max = sqrt(max eigenvalue of g^{-1}) / 2.
double cfl_dt(const MetricField& g, double h, double safety = 0.5);

// Scalar Monge-Ampere flow phi_tt = log det(g0 + d dbar phi) - log det g0 - f0.
class PotentialFlow {
 public:
  explicit PotentialFlow(MetricField g0, FlowOptions opt = {});

  const MetricField& g0() const { return g0_; }
  const ScalarField& f0() const { return f0_; }
  const FlowOptions& options() const { return opt_; }

  // Builds a state from initial data, band-limiting it when dealiasing is on.
  FlowState initial(const ScalarField& phi0, const ScalarField& psi0, double t0 = 0.0) const;
  // Fills the force cache of s if missing.
  void prepare(FlowState& s) const;
  // One kick-drift-kick step; dt may be negative.
  FlowState step(const FlowState& s, double dt) const;
  MetricField metric(const ScalarField& phi) const;

 private:
  MetricField g0_;
  ScalarField f0_;
  ScalarField logdet0_;
  FlowOptions opt_;
};

// Tensor-level flow g_tt = -Ric(g) with Ric taken through -d dbar log det g.
struct TensorFlowState {
  double t = 0.0;
  TensorField g;
  TensorField gdot;
};

class TensorFlow {
 public:
  explicit TensorFlow(FlowOptions opt = {}) : opt_(opt) {}
  // -Ric(g), dealiased on log det g when enabled.
  TensorField acceleration(const TensorField& g) const;
  // Drift-kick-drift leapfrog.
  TensorFlowState step(const TensorFlowState& s, double dt) const;

 private:
  FlowOptions opt_;
};

struct Snapshot {
  double t = 0.0;
  std::int64_t step = 0;
  ScalarField phi;
  ScalarField psi;
};

struct SeriesRow {
  double t = 0.0;
  double vol = 0.0;
  double r = 0.0;
  double total_scalar = 0.0;
  double max_abs_R = 0.0;
  double min_eig = 0.0;
  double mean_phi = 0.0;
};

struct SingularityReport {
  double t_last_good = 0.0;
  double t_failed = 0.0;
  std::int64_t step = 0;
  std::size_t point = 0;
  Coords coords{0, 0, 0, 0};
  double min_eigenvalue = 0.0;
  std::string message;
};

struct Trajectory {
  GridPtr grid;
  double dt = 0.0;
  double snapshot_dt = 0.0;
  std::vector<Snapshot> snapshots;
  std::vector<SeriesRow> series;
  std::optional<SingularityReport> singularity;
  // Last accepted state.
  double t_end = 0.0;
  std::int64_t step_end = 0;
};

struct FlowRun {
  double dt = 1e-3;
  double T = 1.0;
  int snapshot_every = 10;
  bool keep_snapshots = true;
  bool record_series = true;
};

SeriesRow series_row(const PotentialFlow& flow, const FlowState& s);

// Integrates from `start` to T. A MetricDegenerate halts the run and is
// recorded as a SingularityReport; other errors propagate.
Trajectory integrate_flow(const PotentialFlow& flow, FlowState start, const FlowRun& run,
                          const std::function<void(const Snapshot&, const SeriesRow&)>& on_snapshot = {});

// Builds g0 + d dbar phi and g_t = d dbar psi for a potential state.
TensorFlowState tensor_state_from_potential(const PotentialFlow& flow, const FlowState& s);

// Centered second difference residual of v = -psi against the wave equation
// v_tt = Laplacian_g v, one value per requested center.
std::vector<double> v_wave_residual(const PotentialFlow& flow, const Trajectory& traj, int stride,
                                    const std::vector<std::size_t>& centers);

struct NormalizationRecord {
  std::vector<double> t;
  std::vector<double> phi_norm;
  std::vector<double> t_tilde;
  std::vector<double> a;  // NaN where centered differences are unavailable
  std::vector<double> b;
  std::vector<double> normalized_volume;
};

struct NormalizedFlowCheck {
  NormalizationRecord record;
  std::vector<double> residual;       // per center
  double ricci_invariance = 0.0;      // max |Ric(phi^2 g) - Ric(g)|
  double scalar_scaling = 0.0;        // max |R(phi^2 g) - R(g)/phi^2|
  double volume_normalization = 0.0;  // max |Vol(phi^2 g) - 1|
};

// phi_norm = Vol^{-1/(2n)}, t_tilde = int phi_norm dt (trapezoid), and the
// residual of  g~'' + Ric(g~) - a g~' - b g~  in t_tilde at each center.
NormalizedFlowCheck normalize_flow(const PotentialFlow& flow, const Trajectory& traj, int stride,
                                   const std::vector<std::size_t>& centers);

// Throws ConfigInvalid unless snapshots are equispaced.
void require_equispaced(const Trajectory& traj);

}  // namespace hkflow
