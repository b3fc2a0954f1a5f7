#include <cmath>
#include <limits>

#include "hkflow/error.hpp"
#include "hkflow/flow.hpp"

namespace hkflow {

SeriesRow series_row(const PotentialFlow& flow, const FlowState& s) {
  MetricField g = flow.metric(s.phi);
  ScalarField R = scalar_curvature(g, ricci(g));
  VolumeAverage va = volume_and_average(g, R);
  SeriesRow row;
  row.t = s.t;
  row.vol = va.vol;
  row.r = va.r;
  row.total_scalar = va.total_scalar;
  row.max_abs_R = max_abs(R);
  row.min_eig = g.min_eig;
  row.mean_phi = mean(s.phi).real();
  return row;
}

Trajectory integrate_flow(const PotentialFlow& flow, FlowState state, const FlowRun& run,
                          const std::function<void(const Snapshot&, const SeriesRow&)>& on_snapshot) {
  if (!(run.dt > 0.0) || !std::isfinite(run.dt)) throw ConfigInvalid("dt must be positive");
  if (!(run.T >= 0.0)) throw ConfigInvalid("T must be non-negative");
  if (run.snapshot_every < 1) throw ConfigInvalid("snapshot_every must be >= 1");

  Trajectory traj;
  traj.grid = flow.g0().grid();
  traj.dt = run.dt;
  traj.snapshot_dt = run.dt * run.snapshot_every;

  // Steps are counted from t = 0 so that a resumed run lands on the same grid.
  const auto total = static_cast<std::int64_t>(std::llround(run.T / run.dt));
  auto record = [&](const FlowState& s) {
    Snapshot snap{s.t, s.step, s.phi, s.psi};
    SeriesRow row;
    if (run.record_series) {
      row = series_row(flow, s);
      traj.series.push_back(row);
    }
    if (on_snapshot) on_snapshot(snap, row);
    if (run.keep_snapshots) traj.snapshots.push_back(std::move(snap));
  };

  try {
    flow.prepare(state);
    if (state.step % run.snapshot_every == 0) record(state);
    while (state.step < total) {
      state = flow.step(state, run.dt);
      if (state.step % run.snapshot_every == 0) record(state);
    }
  } catch (const MetricDegenerate& e) {
    SingularityReport rep;
    // `state` still holds the last accepted step (the initial state if the
    // failure is at the start).
    rep.t_last_good = state.t;
    rep.t_failed = e.has_time() ? e.time() : state.t;
    rep.step = state.step;
    rep.point = e.point();
    rep.coords = e.coords();
    rep.min_eigenvalue = e.min_eigenvalue();
    rep.message = e.what();
    traj.singularity = rep;
  }
  traj.t_end = state.t;
  traj.step_end = state.step;
  return traj;
}

void require_equispaced(const Trajectory& traj) {
  const auto& s = traj.snapshots;
  if (s.size() < 2) return;
  const double dts = s[1].t - s[0].t;
  const std::int64_t dstep = s[1].step - s[0].step;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].step - s[i - 1].step != dstep || !(dstep > 0))
      throw ConfigInvalid("snapshots are not equispaced");
    if (std::abs((s[i].t - s[i - 1].t) - dts) > 1e-9 * std::max(1.0, std::abs(dts)))
      throw ConfigInvalid("snapshots are not equispaced in t");
  }
}

namespace {

void check_centers(const Trajectory& traj, int stride, const std::vector<std::size_t>& centers,
                   std::size_t min_snapshots) {
  if (traj.snapshots.size() < min_snapshots)
    throw ConfigInvalid("trajectory has too few snapshots");
  require_equispaced(traj);
  if (stride < 1) throw ConfigInvalid("stride must be >= 1");
  for (std::size_t c : centers)
    if (c < static_cast<std::size_t>(stride) || c + stride >= traj.snapshots.size())
      throw ConfigInvalid("sample center too close to the trajectory ends");
}

std::vector<std::size_t> default_centers(const Trajectory& traj, int stride,
                                         const std::vector<std::size_t>& centers) {
  if (!centers.empty()) return centers;
  std::vector<std::size_t> out;
  for (std::size_t c = stride; c + stride < traj.snapshots.size(); ++c) out.push_back(c);
  return out;
}

}  // namespace

std::vector<double> v_wave_residual(const PotentialFlow& flow, const Trajectory& traj, int stride,
                                    const std::vector<std::size_t>& centers_in) {
  std::vector<std::size_t> centers = default_centers(traj, stride, centers_in);
  check_centers(traj, stride, centers, 5);
  const double ds = traj.snapshots[stride].t - traj.snapshots[0].t;
  std::vector<double> out;
  for (std::size_t c : centers) {
    const auto& m = traj.snapshots[c - stride];
    const auto& z = traj.snapshots[c];
    const auto& p = traj.snapshots[c + stride];
    MetricField g = flow.metric(z.phi);
    ScalarField v = -1.0 * z.psi;
    ScalarField lap = laplacian_fn(g, v);
    double r = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double d2 = (-p.psi[i].real() + 2.0 * z.psi[i].real() - m.psi[i].real()) / (ds * ds);
      r = std::max(r, std::abs(d2 - lap[i]));
    }
    out.push_back(r);
  }
  return out;
}

NormalizedFlowCheck normalize_flow(const PotentialFlow& flow, const Trajectory& traj, int stride,
                                   const std::vector<std::size_t>& centers_in) {
  std::vector<std::size_t> centers = default_centers(traj, stride, centers_in);
  check_centers(traj, stride, centers, 5);
  const int n = traj.grid->n();
  const std::size_t S = traj.snapshots.size();
  NormalizedFlowCheck out;
  NormalizationRecord& rec = out.record;
  for (const Snapshot& s : traj.snapshots) {
    MetricField g = flow.metric(s.phi);
    double vol = volume_and_average(g, ScalarField(g.grid())).vol;
    rec.t.push_back(s.t);
    rec.phi_norm.push_back(std::pow(vol, -1.0 / (2.0 * n)));
    rec.normalized_volume.push_back(vol * std::pow(rec.phi_norm.back(), 2 * n));
  }
  rec.t_tilde.assign(S, 0.0);
  for (std::size_t i = 1; i < S; ++i)
    rec.t_tilde[i] =
        rec.t_tilde[i - 1] + 0.5 * (rec.t[i] - rec.t[i - 1]) * (rec.phi_norm[i] + rec.phi_norm[i - 1]);
  for (double v : rec.normalized_volume)
    out.volume_normalization = std::max(out.volume_normalization, std::abs(v - 1.0));

  const double nan = std::numeric_limits<double>::quiet_NaN();
  rec.a.assign(S, nan);
  rec.b.assign(S, nan);
  const double ds = rec.t[stride] - rec.t[0];
  for (std::size_t c : centers) {
    const double f = rec.phi_norm[c];
    const double f1 = (rec.phi_norm[c + stride] - rec.phi_norm[c - stride]) / (2.0 * ds);
    const double f2 =
        (rec.phi_norm[c + stride] - 2.0 * f + rec.phi_norm[c - stride]) / (ds * ds);
    const double a = 3.0 * f1 / (f * f);
    // Product form; stays finite where f1 = 0.
    const double b = (2.0 / (f * f)) * (f2 / f - 3.0 * (f1 / f) * (f1 / f));
    rec.a[c] = a;
    rec.b[c] = b;

    const double h1 = rec.t_tilde[c] - rec.t_tilde[c - stride];
    const double h2 = rec.t_tilde[c + stride] - rec.t_tilde[c];
    const double wm2 = 2.0 / (h1 * (h1 + h2)), w02 = -2.0 / (h1 * h2), wp2 = 2.0 / (h2 * (h1 + h2));
    const double wm1 = -h2 / (h1 * (h1 + h2)), w01 = (h2 - h1) / (h1 * h2),
                 wp1 = h1 / (h2 * (h1 + h2));

    auto scaled = [&](std::size_t i) {
      MetricField g = flow.metric(traj.snapshots[i].phi);
      double s2 = rec.phi_norm[i] * rec.phi_norm[i];
      return std::make_pair(s2, std::move(g));
    };
    auto [sm, gm] = scaled(c - stride);
    auto [s0, g0] = scaled(c);
    auto [sp, gp] = scaled(c + stride);
    TensorField ric = ricci(g0);
    MetricField gt = make_metric(s0 * g0.g);
    TensorField ric_t = ricci(gt);
    out.ricci_invariance = std::max(out.ricci_invariance, max_abs_diff(ric_t, ric));
    ScalarField R = scalar_curvature(g0, ric);
    ScalarField R_t = scalar_curvature(gt, ric_t);
    for (std::size_t i = 0; i < R.size(); ++i)
      out.scalar_scaling = std::max(out.scalar_scaling, std::abs(R_t[i] - R[i] / s0));

    double res = 0.0;
    for (std::size_t k = 0; k < ric.components(); ++k) {
      const cplx* m = gm.g.comp(k);
      const cplx* z = g0.g.comp(k);
      const cplx* p = gp.g.comp(k);
      const cplx* rt = ric_t.comp(k);
      for (std::size_t i = 0; i < ric.points(); ++i) {
        cplx gm_ = sm * m[i], g0_ = s0 * z[i], gp_ = sp * p[i];
        cplx d2 = wm2 * gm_ + w02 * g0_ + wp2 * gp_;
        cplx d1 = wm1 * gm_ + w01 * g0_ + wp1 * gp_;
        res = std::max(res, std::abs(d2 + rt[i] - a * d1 - b * g0_));
      }
    }
    out.residual.push_back(res);
  }
  return out;
}

}  // namespace hkflow
