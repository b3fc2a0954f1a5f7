#include "hkflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "hkflow/error.hpp"

namespace hkflow {

// ---------------------------------------------------------------------------
// Finite differences and grading

TensorField dt_tensor(const std::vector<const TensorField*>& f, double ds, int order) {
  if (f.size() != 3 && f.size() != 5) throw ConfigInvalid("dt_tensor needs 3 or 5 samples");
  if (order != 1 && order != 2) throw ConfigInvalid("dt_tensor order must be 1 or 2");
  for (const TensorField* t : f) require_same_shape(*f[0], *t);
  std::vector<double> w;
  double scale;
  if (f.size() == 3) {
    w = order == 1 ? std::vector<double>{-0.5, 0.0, 0.5} : std::vector<double>{1.0, -2.0, 1.0};
    scale = order == 1 ? 1.0 / ds : 1.0 / (ds * ds);
  } else {
    w = order == 1 ? std::vector<double>{1.0, -8.0, 0.0, 8.0, -1.0}
                   : std::vector<double>{-1.0, 16.0, -30.0, 16.0, -1.0};
    scale = order == 1 ? 1.0 / (12.0 * ds) : 1.0 / (12.0 * ds * ds);
  }
  TensorField out(f[0]->grid, f[0]->sig);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    cplx s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k)
      if (w[k] != 0.0) s += w[k] * f[k]->data[i];
    out.data[i] = s * scale;
  }
  return out;
}

double dt_scalar(const std::vector<double>& f, double ds, int order) {
  if (f.size() != 3 && f.size() != 5) throw ConfigInvalid("dt_scalar needs 3 or 5 samples");
  if (order != 1 && order != 2) throw ConfigInvalid("dt_scalar order must be 1 or 2");
  if (f.size() == 3)
    return order == 1 ? (f[2] - f[0]) / (2.0 * ds) : (f[2] - 2.0 * f[1] + f[0]) / (ds * ds);
  return order == 1 ? (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * ds)
                    : (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * ds * ds);
}

void grade_order(IdentityReport& rep, const VerifySettings& s) {
  rep.kind = "order";
  rep.orders.clear();
  bool finite = true;
  bool all_zero = true;
  for (const LevelResult& l : rep.levels) {
    if (!std::isfinite(l.max_residual)) finite = false;
    if (l.max_residual > s.zero_tol && !(l.magnitude <= s.zero_tol)) all_zero = false;
  }
  rep.zero_case = finite && all_zero;
  if (!finite) {
    rep.pass = false;
    rep.note = "non-finite residual";
    return;
  }
  if (rep.zero_case) {
    rep.pass = true;
    rep.tolerance = s.zero_tol;
    return;
  }
  if (rep.levels.size() < 3) {
    rep.pass = false;
    rep.note = "order needs at least 3 refinement levels";
    return;
  }
  bool ok = true;
  for (std::size_t i = 0; i + 1 < rep.levels.size(); ++i) {
    const auto& a = rep.levels[i];
    const auto& b = rep.levels[i + 1];
    double q = std::log(a.max_residual / b.max_residual) / std::log(a.spacing / b.spacing);
    rep.orders.push_back(q);
    if (!(q >= s.order_min && q <= s.order_max)) ok = false;
  }
  rep.tolerance = s.ceiling;
  if (!(rep.levels.back().max_residual <= s.ceiling)) {
    ok = false;
    rep.note = "finest residual above ceiling";
  }
  rep.pass = ok;
}

bool all_pass(const std::vector<IdentityReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const IdentityReport& r) { return r.pass; });
}

namespace {

struct Resid {
  double max = 0.0;
  double l2 = 0.0;
  double magnitude = 0.0;
};

Resid scalar_resid(double lhs, double rhs) {
  return Resid{std::abs(lhs - rhs), std::abs(lhs - rhs), std::max(std::abs(lhs), std::abs(rhs))};
}

Resid residual(const TensorField& lhs, const TensorField& rhs) {
  require_same_shape(lhs, rhs);
  Resid r;
  double ss = 0.0;
  for (std::size_t i = 0; i < lhs.data.size(); ++i) {
    double d = std::abs(lhs.data[i] - rhs.data[i]);
    r.max = std::max(r.max, d);
    r.magnitude = std::max({r.magnitude, std::abs(lhs.data[i]), std::abs(rhs.data[i])});
    ss += d * d;
  }
  r.l2 = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(1, lhs.points())));
  return r;
}

TensorField as_tensor(const ScalarField& f) {
  TensorField t(f.grid, {});
  std::copy(f.v.begin(), f.v.end(), t.data.begin());
  return t;
}

IdentityReport absolute(const std::string& name, double value, double tol,
                        const std::string& note = "") {
  IdentityReport r;
  r.name = name;
  r.kind = "absolute";
  r.value = value;
  r.tolerance = tol;
  r.pass = std::isfinite(value) && value <= tol;
  r.note = note;
  return r;
}

// Geometry of one snapshot. Ricci is taken through the trace of the Riemann
// tensor so that finite-difference Leibniz replays are exact.
struct Geo {
  MetricField g;
  TensorField h;
  TensorField gamma;
  TensorField rm;
  TensorField ric;
  TensorField ric_logdet;
  ScalarField R;
  ScalarField f;
  double vol = 0.0;
  double total_scalar = 0.0;
  double r = 0.0;
};

class GeoCache {
 public:
  GeoCache(const PotentialFlow& flow, const Trajectory& traj) : flow_(flow), traj_(traj) {}

  const Geo& get(std::size_t i) {
    auto it = cache_.find(i);
    if (it != cache_.end()) return *it->second;
    const Snapshot& s = traj_.snapshots.at(i);
    auto geo = std::make_unique<Geo>();
    try {
      geo->g = flow_.metric(s.phi);
    } catch (MetricDegenerate& e) {
      e.set_time(s.t);
      throw;
    }
    geo->h = hermitian_hessian(s.psi);
    geo->gamma = christoffel(geo->g);
    geo->rm = riemann(geo->g);
    geo->ric = ricci_from_riemann(geo->g, geo->rm);
    geo->ric_logdet = ricci(geo->g);
    geo->R = scalar_curvature(geo->g, geo->ric);
    geo->f = ricci_potential(geo->g);
    VolumeAverage va = volume_and_average(geo->g, geo->R);
    geo->vol = va.vol;
    geo->total_scalar = va.total_scalar;
    geo->r = va.r;
    return *cache_.emplace(i, std::move(geo)).first->second;
  }

 private:
  const PotentialFlow& flow_;
  const Trajectory& traj_;
  std::map<std::size_t, std::unique_ptr<Geo>> cache_;
};

// Everything at a sample center that does not depend on the time spacing.
struct Center {
  std::size_t index = 0;
  UnitaryFrame frame;
  // Coordinates.
  TensorField dginv;    // analytic d/dt g^{k lbar}
  TensorField d2ginv;   // Ricci + quadratic formula for the second derivative
  TensorField dh;       // nabla_k h_{i qbar}: (i, q, k)
  TensorField dbh;      // nabla_lbar h_{p jbar}: (p, j, l)
  TensorField dric;     // nabla_a Ric_{b dbar}: (b, d, a)
  TensorField lap_rm;
  TensorField lap_ric;
  ScalarField lap_R;
  ScalarField lap_f;
  ScalarField trh;      // g^{a bbar} h_{a bbar}
  ScalarField h2;       // |h|^2
  ScalarField lap_h2;
  // Frame components.
  TensorField rm_f, ric_f, h_f, lap_rm_f, lap_ric_f, dh_f, dbh_f;
};

TensorField inverse_metric_rate(const MetricField& g, const TensorField& h) {
  // -g^{k sbar} h_{r sbar} g^{r lbar}
  TensorField out(g.grid(), {Slot::Upper, Slot::UpperBar});
  const int n = g.n();
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (std::size_t p = 0; p < out.points(); ++p) {
        cplx s = 0.0;
        for (int r = 0; r < n; ++r)
          for (int ss = 0; ss < n; ++ss) s += g.ginv({k, ss}, p) * h({r, ss}, p) * g.ginv({r, l}, p);
        out({k, l}, p) = -s;
      }
  return out;
}

TensorField inverse_metric_accel(const MetricField& g, const TensorField& h, const TensorField& ric) {
  // R_{r sbar} g^{k sbar} g^{r lbar} + 2 h_{n mbar} h_{r sbar} g^{k sbar} g^{r mbar} g^{n lbar}
  TensorField out(g.grid(), {Slot::Upper, Slot::UpperBar});
  const int n = g.n();
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (std::size_t p = 0; p < out.points(); ++p) {
        cplx s = 0.0;
        for (int r = 0; r < n; ++r)
          for (int ss = 0; ss < n; ++ss) {
            s += ric({r, ss}, p) * g.ginv({k, ss}, p) * g.ginv({r, l}, p);
            for (int nn = 0; nn < n; ++nn)
              for (int m = 0; m < n; ++m)
                s += 2.0 * h({nn, m}, p) * h({r, ss}, p) * g.ginv({k, ss}, p) * g.ginv({r, m}, p) *
                     g.ginv({nn, l}, p);
          }
        out({k, l}, p) = s;
      }
  return out;
}

ScalarField trace_with(const MetricField& g, const TensorField& a) {
  ScalarField out(g.grid());
  const int n = g.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (std::size_t p = 0; p < out.size(); ++p) out[p] += g.ginv({i, j}, p) * a({i, j}, p);
  return out;
}

// Sum of |a_{ij}|^2 over frame components.
ScalarField frame_norm2(const TensorField& af) {
  ScalarField out(af.grid);
  for (std::size_t c = 0; c < af.components(); ++c) {
    const cplx* v = af.comp(c);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += std::norm(v[p]);
  }
  return out;
}

Center build_center(GeoCache& cache, std::size_t c) {
  const Geo& G = cache.get(c);
  Center C;
  C.index = c;
  C.frame = unitary_frame(G.g);
  C.dginv = inverse_metric_rate(G.g, G.h);
  C.d2ginv = inverse_metric_accel(G.g, G.h, G.ric);
  C.dh = nabla(G.h, G.gamma);
  C.dbh = nabla_bar(G.h, G.gamma);
  C.dric = nabla(G.ric, G.gamma);
  C.lap_rm = laplacian_R(G.g, G.gamma, G.rm);
  C.lap_ric = laplacian_R(G.g, G.gamma, G.ric);
  C.lap_R = laplacian_fn(G.g, G.R);
  C.lap_f = laplacian_fn(G.g, G.f);
  C.trh = trace_with(G.g, G.h);
  C.rm_f = to_frame(G.rm, C.frame);
  C.ric_f = to_frame(G.ric, C.frame);
  C.h_f = to_frame(G.h, C.frame);
  C.lap_rm_f = to_frame(C.lap_rm, C.frame);
  C.lap_ric_f = to_frame(C.lap_ric, C.frame);
  C.dh_f = to_frame(C.dh, C.frame);
  C.dbh_f = to_frame(C.dbh, C.frame);
  C.h2 = frame_norm2(C.h_f);
  C.lap_h2 = laplacian_fn(G.g, C.h2);
  return C;
}

// ---- Right-hand sides, frame components -----------------------------------

TensorField riemann_rhs(const Center& C) {
  const TensorField& R = C.rm_f;
  const TensorField& Ric = C.ric_f;
  TensorField out = C.lap_rm_f;
  const int n = R.n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          for (std::size_t p = 0; p < out.points(); ++p) {
            cplx s = 0.0;
            for (int a = 0; a < n; ++a) {
              for (int b = 0; b < n; ++b) {
                s += R({i, a, b, l}, p) * R({a, j, k, b}, p) - R({i, a, k, b}, p) * R({a, j, b, l}, p) +
                     R({i, j, b, a}, p) * R({a, b, k, l}, p);
              }
              s -= 0.5 * (Ric({i, a}, p) * R({a, j, k, l}, p) + Ric({a, j}, p) * R({i, a, k, l}, p) +
                          Ric({k, a}, p) * R({i, j, a, l}, p) + Ric({a, l}, p) * R({i, j, k, a}, p));
              s += 2.0 * C.dh_f({i, a, k}, p) * C.dbh_f({a, j, l}, p);
            }
            out({i, j, k, l}, p) += s;
          }
  return out;
}

TensorField ricci_rhs(const Center& C, const TensorField& d1rm_f) {
  const TensorField& R = C.rm_f;
  const TensorField& Ric = C.ric_f;
  const TensorField& h = C.h_f;
  TensorField out = C.lap_ric_f;
  const int n = R.n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (std::size_t p = 0; p < out.points(); ++p) {
        cplx s = 0.0;
        for (int k = 0; k < n; ++k) {
          s -= Ric({i, k}, p) * Ric({k, j}, p);
          for (int l = 0; l < n; ++l) {
            s += R({i, j, k, l}, p) * Ric({l, k}, p);
            s -= 2.0 * std::conj(h({k, l}, p)) * d1rm_f({i, j, k, l}, p);
            for (int m = 0; m < n; ++m) s += 2.0 * R({i, j, k, l}, p) * h({l, m}, p) * h({m, k}, p);
          }
          for (int q = 0; q < n; ++q) s += 2.0 * C.dh_f({i, q, k}, p) * C.dbh_f({q, j, k}, p);
        }
        out({i, j}, p) += s;
      }
  return out;
}

// 2 R_{k lbar} h h g g g in the frame.
ScalarField ricci_hh(const Center& C) {
  const TensorField& Ric = C.ric_f;
  const TensorField& h = C.h_f;
  ScalarField out(Ric.grid);
  const int n = Ric.n;
  for (std::size_t p = 0; p < out.size(); ++p) {
    cplx s = 0.0;
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m) s += 2.0 * Ric({k, l}, p) * h({l, m}, p) * h({m, k}, p);
    out[p] = s;
  }
  return out;
}

// <h, A> = sum conj(h_ab) A_ab in the frame.
ScalarField pairing(const TensorField& hf, const TensorField& af) {
  ScalarField out(hf.grid);
  for (std::size_t c = 0; c < hf.components(); ++c) {
    const cplx* a = hf.comp(c);
    const cplx* b = af.comp(c);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += std::conj(a[p]) * b[p];
  }
  return out;
}

ScalarField scalar_rhs(const Center& C, const TensorField& d1ric_f) {
  ScalarField ric2 = frame_norm2(C.ric_f);
  ScalarField hr = pairing(C.h_f, d1ric_f);
  ScalarField hh = ricci_hh(C);
  ScalarField out(C.h_f.grid);
  for (std::size_t p = 0; p < out.size(); ++p)
    out[p] = C.lap_R[p] + ric2[p] + C.lap_h2[p] - 2.0 * hr[p] + hh[p];
  return out;
}

TensorField christoffel_rhs(const Geo& G, const Center& C) {
  TensorField out(G.gamma.grid, G.gamma.sig);
  const int n = G.g.n();
  for (int c = 0; c < n; ++c)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (std::size_t p = 0; p < out.points(); ++p) {
          cplx s = 0.0;
          for (int d = 0; d < n; ++d)
            s += -G.g.ginv({c, d}, p) * C.dric({b, d, a}, p) + 2.0 * C.dginv({c, d}, p) * C.dh({b, d, a}, p);
          out({c, a, b}, p) = s;
        }
  return out;
}

// -R + (tr h)^2 - |h|^2, the second log-derivative of the density.
ScalarField volume_factor(const Geo& G, const Center& C) {
  ScalarField out(G.R.grid);
  for (std::size_t p = 0; p < out.size(); ++p)
    out[p] = -G.R[p] + C.trh[p] * C.trh[p] - C.h2[p];
  return out;
}

struct Level {
  int stride;
  double spacing;
  std::vector<std::size_t> idx;  // sample indices around the center
};

template <typename F>
std::vector<TensorField> collect(GeoCache& cache, const std::vector<std::size_t>& idx, F pick) {
  std::vector<TensorField> out;
  for (std::size_t i : idx) out.push_back(pick(cache.get(i)));
  return out;
}

std::vector<const TensorField*> ptrs(const std::vector<TensorField>& v) {
  std::vector<const TensorField*> out;
  for (const auto& t : v) out.push_back(&t);
  return out;
}

void push_level(IdentityReport& rep, std::size_t slot, int stride, double spacing, const Resid& r) {
  if (rep.levels.size() <= slot) {
    rep.levels.resize(slot + 1);
    rep.levels[slot].stride = stride;
    rep.levels[slot].spacing = spacing;
    rep.levels[slot].magnitude = 0.0;
  }
  LevelResult& l = rep.levels[slot];
  l.magnitude = std::max(l.magnitude, r.magnitude);
  l.per_center.push_back(r.max);
  l.max_residual = std::max(l.max_residual, r.max);
  l.l2_residual = std::max(l.l2_residual, r.l2);
}

std::vector<std::size_t> resolve_centers(const Trajectory& traj, const VerifySettings& s, int reach) {
  const std::size_t S = traj.snapshots.size();
  const double t0 = traj.snapshots.front().t;
  const double ds = traj.snapshots[1].t - t0;
  std::vector<std::size_t> out;
  if (s.sample_times.empty()) {
    for (std::size_t c = reach; c + reach < S; ++c) out.push_back(c);
  } else {
    for (double t : s.sample_times) {
      long long c = std::llround((t - t0) / ds);
      if (c < reach || c + reach >= static_cast<long long>(S) ||
          std::abs(traj.snapshots[c].t - t) > 1e-6 * std::max(1.0, std::abs(ds)))
        throw ConfigInvalid("sample time " + std::to_string(t) +
                            " is not a snapshot with enough neighbours on both sides");
      out.push_back(static_cast<std::size_t>(c));
    }
  }
  if (out.empty()) throw ConfigInvalid("no usable sample centers in trajectory");
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

IdentityReport commutator_check(const MetricField& g, const TensorField& eta, const TensorField& one_form) {
  TensorField gamma = christoffel(g);
  TensorField rm = riemann(g);
  const int n = g.n();
  const std::size_t P = g.g.points();
  double worst = 0.0;
  double scale = 0.0;
  {
    TensorField x = nabla_bar(nabla(eta, gamma), gamma);  // (c, d, a, b)
    TensorField y = nabla(nabla_bar(eta, gamma), gamma);  // (c, d, b, a)
    for (int c = 0; c < n; ++c)
      for (int d = 0; d < n; ++d)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            for (std::size_t p = 0; p < P; ++p) {
              cplx lhs = x({c, d, a, b}, p) - y({c, d, b, a}, p);
              cplx rhs = 0.0;
              for (int pp = 0; pp < n; ++pp)
                for (int q = 0; q < n; ++q)
                  rhs += g.ginv({pp, q}, p) *
                         (rm({c, q, a, b}, p) * eta({pp, d}, p) - rm({pp, d, a, b}, p) * eta({c, q}, p));
              worst = std::max(worst, std::abs(lhs - rhs));
              scale = std::max(scale, std::abs(lhs));
            }
  }
  if (!one_form.data.empty()) {
    TensorField x = nabla_bar(nabla(one_form, gamma), gamma);  // (c, a, b)
    TensorField y = nabla(nabla_bar(one_form, gamma), gamma);  // (c, b, a)
    for (int c = 0; c < n; ++c)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (std::size_t p = 0; p < P; ++p) {
            cplx lhs = x({c, a, b}, p) - y({c, b, a}, p);
            cplx rhs = 0.0;
            for (int pp = 0; pp < n; ++pp)
              for (int q = 0; q < n; ++q) rhs += g.ginv({pp, q}, p) * rm({c, q, a, b}, p) * one_form({pp}, p);
            worst = std::max(worst, std::abs(lhs - rhs));
            scale = std::max(scale, std::abs(lhs));
          }
  }
  std::ostringstream note;
  note << "max |commutator| = " << scale;
  return absolute("commutator", worst, 1e-10, note.str());
}

std::vector<IdentityReport> verify_trajectory(const PotentialFlow& flow, const Trajectory& traj,
                                              const VerifySettings& s) {
  if (traj.snapshots.size() < 5) throw ConfigInvalid("verification needs at least 5 snapshots");
  require_equispaced(traj);
  if (s.strides.empty()) throw ConfigInvalid("no refinement levels configured");
  for (std::size_t i = 0; i < s.strides.size(); ++i) {
    if (s.strides[i] < 1) throw ConfigInvalid("strides must be positive");
    if (i > 0 && s.strides[i] >= s.strides[i - 1]) throw ConfigInvalid("strides must decrease");
  }
  const int half_width = s.five_point ? 2 : 1;
  const int reach = s.strides.front() * half_width;
  const std::vector<std::size_t> centers = resolve_centers(traj, s, reach);
  const double ds = traj.snapshots[1].t - traj.snapshots[0].t;
  const int finest = s.strides.back();

  GeoCache cache(flow, traj);
  std::map<std::string, IdentityReport> rep;
  const char* order_names[] = {"inverse_metric_first", "inverse_metric_second", "riemann_evolution",
                               "ricci_evolution",      "scalar_evolution",      "christoffel_evolution",
                               "volume_evolution",     "ricci_potential",       "total_scalar_curvature",
                               "average_scalar_curvature"};
  for (const char* nm : order_names) rep[nm].name = nm;

  double replay_ricci = 0.0, replay_scalar = 0.0, trace_defect = 0.0;
  double frame_dev = 0.0, vol_integrated = 0.0, inverse_alg = 0.0, routes = 0.0;
  double potential_shift = 0.0, contraction_defect = 0.0, shift_roundoff = 0.0;

  for (std::size_t ci = 0; ci < centers.size(); ++ci) {
    const std::size_t c = centers[ci];
    Center C = build_center(cache, c);
    const Geo& G = cache.get(c);
    const std::size_t P = G.g.g.points();

    // Spacing-independent checks.
    {
      TensorField ginv_f = to_frame(G.g.ginv, C.frame);
      for (int a = 0; a < G.g.n(); ++a)
        for (int b = 0; b < G.g.n(); ++b)
          for (std::size_t p = 0; p < P; ++p)
            frame_dev = std::max(frame_dev, std::abs(ginv_f({a, b}, p) - (a == b ? 1.0 : 0.0)));
      for (std::size_t p = 0; p < P; ++p) {
        cplx tr = 0.0;
        for (int a = 0; a < G.g.n(); ++a) tr += C.ric_f({a, a}, p);
        frame_dev = std::max(frame_dev, std::abs(tr - G.R[p]));
        double dl = 1.0;
        for (int a = 0; a < G.g.n(); ++a) dl *= std::norm(C.frame.L[p][a * 3]);
        frame_dev = std::max(frame_dev, std::abs(dl - G.g.det[p].real()));
        // |h|^2 = tr(G^{-1} H G^{-1} H) in coordinates.
        cplx h2 = 0.0;
        const int n = G.g.n();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
              for (int l = 0; l < n; ++l)
                h2 += G.g.ginv({j, i}, p) * G.h({j, k}, p) * G.g.ginv({l, k}, p) * G.h({l, i}, p);
        frame_dev = std::max(frame_dev, std::abs(h2 - C.h2[p]));
      }
      // d/dt (g^{k lbar} g_{j lbar}) = 0 with the analytic derivative formula.
      const int n = G.g.n();
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (std::size_t p = 0; p < P; ++p) {
            cplx sum = 0.0;
            for (int l = 0; l < n; ++l)
              sum += C.dginv({k, l}, p) * G.g.g({j, l}, p) + G.g.ginv({k, l}, p) * G.h({j, l}, p);
            inverse_alg = std::max(inverse_alg, std::abs(sum));
          }
      routes = std::max(routes, max_abs_diff(G.ric, G.ric_logdet));
    }

    for (std::size_t li = 0; li < s.strides.size(); ++li) {
      const int st = s.strides[li];
      const double h = st * ds;
      std::vector<std::size_t> idx;
      for (int o = -half_width; o <= half_width; ++o) idx.push_back(c + o * st);

      auto ginv_s = collect(cache, idx, [](const Geo& x) { return x.g.ginv; });
      auto rm_s = collect(cache, idx, [](const Geo& x) { return x.rm; });
      auto ric_s = collect(cache, idx, [](const Geo& x) { return x.ric; });
      auto gam_s = collect(cache, idx, [](const Geo& x) { return x.gamma; });
      auto R_s = collect(cache, idx, [](const Geo& x) { return as_tensor(x.R); });
      auto det_s = collect(cache, idx, [](const Geo& x) { return as_tensor(x.g.det); });
      auto f_s = collect(cache, idx, [](const Geo& x) { return as_tensor(x.f); });
      std::vector<double> I_s, r_s, V_s;
      for (std::size_t i : idx) {
        const Geo& x = cache.get(i);
        I_s.push_back(x.total_scalar);
        r_s.push_back(x.r);
        V_s.push_back(x.vol);
      }

      TensorField d1ginv = dt_tensor(ptrs(ginv_s), h, 1);
      TensorField d2ginv = dt_tensor(ptrs(ginv_s), h, 2);
      TensorField d1rm = dt_tensor(ptrs(rm_s), h, 1);
      TensorField d2rm = dt_tensor(ptrs(rm_s), h, 2);
      TensorField d1ric = dt_tensor(ptrs(ric_s), h, 1);
      TensorField d2ric = dt_tensor(ptrs(ric_s), h, 2);
      TensorField d2gam = dt_tensor(ptrs(gam_s), h, 2);
      TensorField d1R = dt_tensor(ptrs(R_s), h, 1);
      TensorField d2R = dt_tensor(ptrs(R_s), h, 2);
      TensorField d2det = dt_tensor(ptrs(det_s), h, 2);
      TensorField d2f = dt_tensor(ptrs(f_s), h, 2);

      TensorField d1rm_f = to_frame(d1rm, C.frame);
      TensorField d2rm_f = to_frame(d2rm, C.frame);
      TensorField d1ric_f = to_frame(d1ric, C.frame);
      TensorField d2ric_f = to_frame(d2ric, C.frame);

      // Inverse metric.
      push_level(rep["inverse_metric_first"], li, st, h, residual(d1ginv, C.dginv));
      push_level(rep["inverse_metric_second"], li, st, h, residual(d2ginv, C.d2ginv));

      // Curvature tensors in the frame.
      TensorField rhs41 = riemann_rhs(C);
      TensorField rhs44 = ricci_rhs(C, d1rm_f);
      ScalarField rhs45 = scalar_rhs(C, d1ric_f);
      push_level(rep["riemann_evolution"], li, st, h, residual(d2rm_f, rhs41));
      push_level(rep["ricci_evolution"], li, st, h, residual(d2ric_f, rhs44));
      push_level(rep["scalar_evolution"], li, st, h, residual(d2R, as_tensor(rhs45)));

      // Christoffel symbols and volume density (coordinates).
      push_level(rep["christoffel_evolution"], li, st, h, residual(d2gam, christoffel_rhs(G, C)));
      ScalarField vf = volume_factor(G, C);
      ScalarField vol_rhs = vf * G.g.det;
      push_level(rep["volume_evolution"], li, st, h, residual(d2det, as_tensor(vol_rhs)));

      // Ricci potential: the spatial mean of the raw residual is the gauge c(t).
      {
        ScalarField raw(G.f.grid);
        for (std::size_t p = 0; p < P; ++p) raw[p] = d2f.data[p] - C.lap_f[p] - C.h2[p];
        cplx gauge = mean(raw);
        ScalarField dev(G.f.grid);
        for (std::size_t p = 0; p < P; ++p) dev[p] = raw[p] - gauge;
        push_level(rep["ricci_potential"], li, st, h, residual(as_tensor(dev), TensorField(dev.grid, {})));
        if (st == finest) rep["ricci_potential"].gauge.push_back(gauge.real());
        if (st == finest) {
          // Adding a per-snapshot constant to f must not change the deviation.
          std::vector<TensorField> shifted = f_s;
          for (std::size_t k = 0; k < shifted.size(); ++k)
            for (cplx& x : shifted[k].data) x += 1e-3 * static_cast<double>((k + 1) * (k + 1));
          TensorField d2fs = dt_tensor(ptrs(shifted), h, 2);
          ScalarField raw2(G.f.grid);
          for (std::size_t p = 0; p < P; ++p) raw2[p] = d2fs.data[p] - C.lap_f[p] - C.h2[p];
          cplx g2 = mean(raw2);
          for (std::size_t p = 0; p < P; ++p)
            potential_shift = std::max(potential_shift, std::abs((raw2[p] - g2) - dev[p]));
          // Rounding f + c costs one ulp per sample, amplified by the stencil.
          double mag = 0.0;
          for (const auto& t : shifted) mag = std::max(mag, max_abs(t));
          shift_roundoff = std::max(shift_roundoff, 16.0 * 4.0 * mag * std::numeric_limits<double>::epsilon() / (h * h));
        }
      }

      // Integrated curvature and average scalar curvature.
      {
        ScalarField hr = pairing(C.h_f, d1ric_f);
        ScalarField hh = ricci_hh(C);
        ScalarField integrand(G.R.grid), quad(G.R.grid), dvol(G.R.grid);
        for (std::size_t p = 0; p < P; ++p) {
          cplx q = C.trh[p] * C.trh[p] - C.h2[p];
          quad[p] = q;
          dvol[p] = C.trh[p];
          integrand[p] = G.R[p] * q + 2.0 * d1R.data[p] * C.trh[p] - 2.0 * hr[p] + hh[p];
        }
        ScalarField one(G.R.grid, 1.0);
        double rhs_I = integrate(integrand, G.g.det).real();
        double lhs_I = dt_scalar(I_s, h, 2);
        push_level(rep["total_scalar_curvature"], li, st, h, scalar_resid(lhs_I, rhs_I));

        double V = G.vol, I = G.total_scalar, r = G.r;
        double dV = integrate(dvol, G.g.det).real();
        double dI = dt_scalar(I_s, h, 1);
        double Q = integrate(quad, G.g.det).real();
        double rhs_r = r * r + rhs_I / V + 2.0 * dV * dV * I / (V * V * V) - (I * Q + 2.0 * dI * dV) / (V * V);
        double lhs_r = dt_scalar(r_s, h, 2);
        push_level(rep["average_scalar_curvature"], li, st, h, scalar_resid(lhs_r, rhs_r));

        if (st == finest) {
          double d2V = dt_scalar(V_s, h, 2);
          double vrhs = integrate(vf, G.g.det).real();
          vol_integrated = std::max(vol_integrated, std::abs(d2V - vrhs));
        }
      }

      // Derivation replays at the finest three-point level: the discrete
      // Leibniz rule makes these exact up to roundoff and aliasing.
      if (st == finest && !s.five_point) {
        const int n = G.g.n();
        TensorField res41 = d2rm_f - rhs41;
        TensorField res44 = d2ric_f - rhs44;
        TensorField res43a = to_frame(d1ginv - C.dginv, C.frame);
        TensorField res43b = to_frame(d2ginv - C.d2ginv, C.frame);
        TensorField d2ginv_f = to_frame(d2ginv, C.frame);
        const double half_h2 = 0.5 * h * h;
        for (std::size_t p = 0; p < P; ++p) {
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
              // The spatial Laplacian commutes with contraction only up to
              // truncation; that defect is removed and reported separately.
              cplx defect = -C.lap_ric_f({i, j}, p);
              cplx e = res44({i, j}, p);
              for (int k = 0; k < n; ++k) {
                defect += C.lap_rm_f({i, j, k, k}, p);
                e -= res41({i, j, k, k}, p);
                for (int l = 0; l < n; ++l) {
                  e -= C.rm_f({i, j, k, l}, p) * res43b({k, l}, p);
                  e -= 2.0 * res43a({k, l}, p) * d1rm_f({i, j, k, l}, p);
                  e -= half_h2 * d2ginv_f({k, l}, p) * d2rm_f({i, j, k, l}, p);
                }
              }
              replay_ricci = std::max(replay_ricci, std::abs(e - defect));
              contraction_defect = std::max(contraction_defect, std::abs(defect));
            }
          cplx es = d2R.data[p] - rhs45[p];
          cplx defect = -C.lap_h2[p];
          cplx lap_defect = -C.lap_R[p];
          for (int a = 0; a < n; ++a) {
            es -= res44({a, a}, p);
            lap_defect += C.lap_ric_f({a, a}, p);
          }
          contraction_defect = std::max(contraction_defect, std::abs(lap_defect));
          es -= lap_defect;
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              es -= C.ric_f({k, l}, p) * res43b({k, l}, p);
              es -= 2.0 * res43a({k, l}, p) * d1ric_f({k, l}, p);
              es -= half_h2 * d2ginv_f({k, l}, p) * d2ric_f({k, l}, p);
              for (int i = 0; i < n; ++i) {
                defect -= 2.0 * std::conj(C.h_f({k, l}, p)) * d1rm_f({i, i, k, l}, p);
                for (int m = 0; m < n; ++m)
                  defect += 2.0 * C.rm_f({i, i, k, l}, p) * C.h_f({l, m}, p) * C.h_f({m, k}, p);
              }
            }
          for (int i = 0; i < n; ++i)
            for (int q = 0; q < n; ++q)
              for (int k = 0; k < n; ++k) defect += 2.0 * C.dh_f({i, q, k}, p) * C.dbh_f({q, i, k}, p);
          replay_scalar = std::max(replay_scalar, std::abs(es - defect));
          trace_defect = std::max(trace_defect, std::abs(defect));
        }
      }
    }
  }

  VerifySettings order_settings = s;
  if (s.five_point) {
    order_settings.order_min = 2.0 * s.order_min;
    order_settings.order_max = 2.0 * s.order_max;
  }

  std::vector<IdentityReport> out;
  for (const char* nm : order_names) {
    IdentityReport r = rep[nm];
    grade_order(r, order_settings);
    const std::string name = nm;
    if (!r.pass && (name == "total_scalar_curvature" || name == "average_scalar_curvature")) {
      // On the torus both sides vanish identically; when they are this small
      // the order cannot be measured and the reduction is the check.
      double mag = 0.0;
      for (const LevelResult& l : r.levels) mag = std::max(mag, l.magnitude);
      if (mag <= s.torus_tol) {
        r.pass = true;
        std::ostringstream note;
        note << "order not measurable, both sides vanish (max " << mag << ")";
        r.note = note.str();
      }
    }
    out.push_back(std::move(r));
  }

  // Flow-level identities.
  {
    IdentityReport r;
    r.name = "v_wave";
    std::vector<double> per;
    for (std::size_t li = 0; li < s.strides.size(); ++li) {
      std::vector<double> res = v_wave_residual(flow, traj, s.strides[li], centers);
      LevelResult l;
      l.stride = s.strides[li];
      l.spacing = s.strides[li] * ds;
      l.per_center = res;
      for (double x : res) l.max_residual = std::max(l.max_residual, x);
      l.l2_residual = l.max_residual;
      r.levels.push_back(l);
    }
    grade_order(r, s);
    out.push_back(r);
  }
  double norm_inv = 0.0;
  {
    IdentityReport r;
    r.name = "normalized_flow";
    for (std::size_t li = 0; li < s.strides.size(); ++li) {
      NormalizedFlowCheck nc = normalize_flow(flow, traj, s.strides[li], centers);
      LevelResult l;
      l.stride = s.strides[li];
      l.spacing = s.strides[li] * ds;
      l.per_center = nc.residual;
      for (double x : nc.residual) l.max_residual = std::max(l.max_residual, x);
      l.l2_residual = l.max_residual;
      r.levels.push_back(l);
      norm_inv = std::max({norm_inv, nc.ricci_invariance, nc.scalar_scaling, nc.volume_normalization});
    }
    grade_order(r, s);
    out.push_back(r);
  }

  // Consistency checks.
  {
    const Geo& G = cache.get(centers.front());
    ScalarField psi = traj.snapshots[centers.front()].psi;
    TensorField one_form = partial(as_tensor(psi), Direction::Holomorphic);
    one_form.sig = {Slot::Lower};
    IdentityReport r = commutator_check(G.g, G.h, one_form);
    out.push_back(r);
  }
  {
    double topo = 0.0;
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
      if (i < traj.series.size()) {
        topo = std::max({topo, std::abs(traj.series[i].total_scalar), std::abs(traj.series[i].r)});
      } else {
        SeriesRow row = series_row(flow, FlowState{traj.snapshots[i].t, 0, traj.snapshots[i].phi,
                                                   traj.snapshots[i].psi, ScalarField(), 0.0, false});
        topo = std::max({topo, std::abs(row.total_scalar), std::abs(row.r)});
      }
    }
    out.push_back(absolute("topological", topo, 1e-10, "max |int R dmu|, |r| over snapshots"));
  }
  out.push_back(absolute("volume_integrated", vol_integrated, 1e-6,
                         "|d2 Vol/dt2 - int (second log-derivative) dmu|"));
  out.push_back(absolute("inverse_metric_algebra", inverse_alg, 1e-11));
  out.push_back(absolute("frame_sanity", frame_dev, 1e-12));
  out.push_back(absolute("ricci_routes", routes, s.routes_tol, "log-det vs trace of Riemann"));
  out.push_back(absolute("normalized_curvature_scaling", norm_inv, 1e-10));
  out.push_back(absolute("ricci_potential_gauge", potential_shift, std::max(1e-13, shift_roundoff),
                         "deviation change under per-snapshot constant shifts"));
  if (!s.five_point) {
    std::ostringstream nr;
    nr << "Laplacian/contraction defect removed, max " << contraction_defect;
    out.push_back(absolute("replay_ricci", replay_ricci, s.replay_tol, nr.str()));
    std::ostringstream ns;
    ns << "trace correction term max " << trace_defect;
    out.push_back(absolute("replay_scalar", replay_scalar, s.replay_tol, ns.str()));
  }
  return out;
}

}  // namespace hkflow
