#include "hkflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hkflow/error.hpp"
#include "hkflow/parallel.hpp"

namespace hkflow {

namespace {

constexpr int kMaxRank = 6;

[[noreturn]] void throw_degenerate(const Grid& grid, std::size_t p, double value,
                                   const char* what) {
  std::ostringstream os;
  os << "metric degenerate: " << what << " = " << value << " at point " << p << " (x1="
     << grid.coords(p)[0] << ")";
  throw MetricDegenerate(os.str(), p, grid.coords(p), value);
}

void require_hermitian_rank2(const TensorField& g) {
  if (g.sig != std::vector<Slot>{Slot::Lower, Slot::LowerBar})
    throw ShapeMismatch("expected a Hermitian (1,1) field");
}

void require_gamma(const TensorField& gamma) {
  if (gamma.sig != std::vector<Slot>{Slot::Upper, Slot::Lower, Slot::Lower})
    throw ShapeMismatch("expected a Christoffel field");
}

std::vector<Slot> appended(const std::vector<Slot>& sig, Slot s) {
  std::vector<Slot> out = sig;
  out.push_back(s);
  return out;
}

}  // namespace

std::pair<double, double> hermitian_eig_range(const TensorField& a, std::size_t p) {
  if (a.n == 1) {
    double v = a({0, 0}, p).real();
    return {v, v};
  }
  double x = a({0, 0}, p).real(), y = a({1, 1}, p).real();
  double b = std::abs(a({0, 1}, p));
  double mid = 0.5 * (x + y), rad = std::hypot(0.5 * (x - y), b);
  return {mid - rad, mid + rad};
}

std::pair<TensorField, ScalarField> inverse_det(const TensorField& g) {
  require_hermitian_rank2(g);
  TensorField inv(g.grid, {Slot::Upper, Slot::UpperBar});
  ScalarField det(g.grid);
  const std::size_t P = g.points();
  for (std::size_t p = 0; p < P; ++p) {
    if (g.n == 1) {
      det[p] = g({0, 0}, p);
    } else {
      det[p] = g({0, 0}, p) * g({1, 1}, p) - g({0, 1}, p) * g({1, 0}, p);
    }
    if (!(std::abs(det[p]) > kPositiveFloor))
      throw_degenerate(*g.grid, p, std::abs(det[p]), "|det g|");
  }
  parallel_for(P, [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      if (g.n == 1) {
        inv({0, 0}, p) = 1.0 / g({0, 0}, p);
        continue;
      }
      cplx d = det[p];
      // ginv is the transpose of the matrix inverse.
      inv({0, 0}, p) = g({1, 1}, p) / d;
      inv({1, 1}, p) = g({0, 0}, p) / d;
      inv({0, 1}, p) = -g({1, 0}, p) / d;
      inv({1, 0}, p) = -g({0, 1}, p) / d;
    }
  });
  return {std::move(inv), std::move(det)};
}

MetricField make_metric(TensorField g) {
  require_hermitian_rank2(g);
  if (!all_finite(g)) throw NonFinite("metric has non-finite components");
  MetricField m;
  m.min_eig = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < g.points(); ++p) {
    double lo = hermitian_eig_range(g, p).first;
    if (lo < m.min_eig) {
      m.min_eig = lo;
      m.argmin = p;
    }
  }
  if (!(m.min_eig > kPositiveFloor))
    throw_degenerate(*g.grid, m.argmin, m.min_eig, "min eigenvalue");
  auto [inv, det] = inverse_det(g);
  for (cplx& d : det.v) d = d.real();
  m.g = std::move(g);
  m.ginv = std::move(inv);
  m.det = std::move(det);
  // Eigenvalues of the inverse are reciprocals of those of g.
  m.max_inv_eig = 1.0 / m.min_eig;
  return m;
}

MetricField flat_metric(GridPtr grid, const std::vector<double>& diag) {
  TensorField g = hermitian_field(grid);
  for (int a = 0; a < g.n; ++a) {
    double v = diag.empty() ? 1.0 : diag.at(a);
    std::fill(g.comp(g.flat({a, a})), g.comp(g.flat({a, a})) + g.points(), cplx(v, 0.0));
  }
  return make_metric(std::move(g));
}

MetricField conformal_metric(const ScalarField& u, double scale) {
  if (u.grid->n() != 1) throw ConfigInvalid("conformal metric is defined for n = 1 only");
  TensorField g = hermitian_field(u.grid);
  for (std::size_t p = 0; p < u.size(); ++p) g({0, 0}, p) = scale * std::exp(u[p].real());
  return make_metric(std::move(g));
}

TensorField partial(const TensorField& t, Direction dir) {
  if (t.rank() >= kMaxRank) throw ConfigInvalid("tensor rank too large for differentiation");
  const Grid& grid = *t.grid;
  const bool hol = dir == Direction::Holomorphic;
  TensorField out(t.grid, appended(t.sig, hol ? Slot::Lower : Slot::LowerBar));
  const std::size_t P = t.points();
  std::vector<cplx> spec(P), work(P);
  for (std::size_t c = 0; c < t.components(); ++c) {
    grid.forward(t.comp(c), spec.data());
    for (int a = 0; a < t.n; ++a) {
      const auto& m = hol ? grid.dz_multiplier(a) : grid.dzbar_multiplier(a);
      for (std::size_t p = 0; p < P; ++p) work[p] = spec[p] * m[p];
      grid.backward(work.data(), out.comp(c * t.n + a));
    }
  }
  return out;
}

TensorField complex_hessian(const ScalarField& f) {
  const Grid& grid = *f.grid;
  TensorField h = hermitian_field(f.grid);
  const std::size_t P = grid.size();
  std::vector<cplx> spec(P), work(P);
  grid.forward(f.v.data(), spec.data());
  for (int a = 0; a < h.n; ++a)
    for (int b = 0; b < h.n; ++b) {
      const auto& ma = grid.dz_multiplier(a);
      const auto& mb = grid.dzbar_multiplier(b);
      for (std::size_t p = 0; p < P; ++p) work[p] = spec[p] * ma[p] * mb[p];
      grid.backward(work.data(), h.comp(h.flat({a, b})));
    }
  return h;
}

TensorField hermitian_hessian(const ScalarField& f) {
  TensorField h = complex_hessian(f);
  for (int a = 0; a < h.n; ++a) {
    cplx* d = h.comp(h.flat({a, a}));
    for (std::size_t p = 0; p < h.points(); ++p) d[p] = d[p].real();
    for (int b = a + 1; b < h.n; ++b) {
      const cplx* up = h.comp(h.flat({a, b}));
      cplx* lo = h.comp(h.flat({b, a}));
      for (std::size_t p = 0; p < h.points(); ++p) lo[p] = std::conj(up[p]);
    }
  }
  return h;
}

MetricField metric_from_potential(const MetricField& g0, const ScalarField& phi) {
  if (!phi.grid || !phi.grid->compatible(*g0.grid())) throw ShapeMismatch("potential grid differs");
  if (!all_finite(phi)) throw NonFinite("potential has non-finite values");
  return make_metric(g0.g + hermitian_hessian(real_part(phi)));
}

TensorField christoffel(const MetricField& m) {
  TensorField dg = partial(m.g, Direction::Holomorphic);  // dg(i, l, j) = d_j g_{i lbar}
  TensorField gamma(m.grid(), {Slot::Upper, Slot::Lower, Slot::Lower});
  const int n = m.n();
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        cplx* out = gamma.comp(gamma.flat({k, i, j}));
        for (int l = 0; l < n; ++l) {
          const cplx* gi = m.ginv.comp(m.ginv.flat({k, l}));
          const cplx* d = dg.comp(dg.flat({i, l, j}));
          for (std::size_t p = 0; p < gamma.points(); ++p) out[p] += gi[p] * d[p];
        }
      }
  return gamma;
}

TensorField riemann(const MetricField& m) {
  const Grid& grid = *m.grid();
  const int n = m.n();
  const std::size_t P = grid.size();
  TensorField dg = partial(m.g, Direction::Holomorphic);     // (i, j, k): d_k g_{i jbar}
  TensorField dbg = partial(m.g, Direction::Antiholomorphic);  // (i, j, l): d_lbar g_{i jbar}
  TensorField rm(m.grid(), {Slot::Lower, Slot::LowerBar, Slot::Lower, Slot::LowerBar});
  std::vector<cplx> spec(P), work(P);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      grid.forward(m.g.comp(m.g.flat({i, j})), spec.data());
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const auto& mk = grid.dz_multiplier(k);
          const auto& ml = grid.dzbar_multiplier(l);
          for (std::size_t p = 0; p < P; ++p) work[p] = -spec[p] * mk[p] * ml[p];
          cplx* out = rm.comp(rm.flat({i, j, k, l}));
          grid.backward(work.data(), out);
          for (int pp = 0; pp < n; ++pp)
            for (int q = 0; q < n; ++q) {
              const cplx* gi = m.ginv.comp(m.ginv.flat({pp, q}));
              const cplx* a = dg.comp(dg.flat({i, q, k}));
              const cplx* b = dbg.comp(dbg.flat({pp, j, l}));
              for (std::size_t p = 0; p < P; ++p) out[p] += gi[p] * a[p] * b[p];
            }
        }
    }
  return rm;
}

ScalarField log_det(const MetricField& m) {
  ScalarField out(m.grid());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = std::log(m.det[p].real());
  return out;
}

TensorField ricci(const MetricField& m) { return -1.0 * hermitian_hessian(log_det(m)); }

TensorField ricci_from_riemann(const MetricField& m, const TensorField& rm) {
  const int n = m.n();
  TensorField ric = hermitian_field(m.grid());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cplx* out = ric.comp(ric.flat({i, j}));
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const cplx* gi = m.ginv.comp(m.ginv.flat({k, l}));
          const cplx* r = rm.comp(rm.flat({i, j, k, l}));
          for (std::size_t p = 0; p < ric.points(); ++p) out[p] += gi[p] * r[p];
        }
    }
  return ric;
}

ScalarField scalar_curvature(const MetricField& m, const TensorField& ric) {
  if (!ric.grid || !ric.grid->compatible(*m.grid())) throw ShapeMismatch("Ricci grid differs");
  require_hermitian_rank2(ric);
  ScalarField R(m.grid());
  const int n = m.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx* gi = m.ginv.comp(m.ginv.flat({i, j}));
      const cplx* r = ric.comp(ric.flat({i, j}));
      for (std::size_t p = 0; p < R.size(); ++p) R[p] += gi[p] * r[p];
    }
  return R;
}

VolumeAverage volume_and_average(const MetricField& m, const ScalarField& scalar) {
  VolumeAverage out;
  out.density = m.det;
  ScalarField one(m.grid(), 1.0);
  out.vol = integrate(one, out.density).real();
  out.total_scalar = integrate(scalar, out.density).real();
  out.r = out.total_scalar / out.vol;
  return out;
}

VolumeAverage volume_and_average(const MetricField& m) {
  return volume_and_average(m, scalar_curvature(m, ricci(m)));
}

ScalarField ricci_potential(const MetricField& m) {
  ScalarField ld = log_det(m);
  cplx mu = mean(ld);
  ScalarField f(m.grid());
  for (std::size_t p = 0; p < f.size(); ++p) f[p] = -(ld[p] - mu).real();
  return f;
}

TensorField covariant_derivative(const TensorField& t, Direction dir, const TensorField& gamma) {
  require_gamma(gamma);
  if (!t.grid || !t.grid->compatible(*gamma.grid)) throw ShapeMismatch("tensor grid differs");
  if (t.rank() >= kMaxRank)
    throw ConfigInvalid("covariant derivative: unsupported index signature (rank too large)");
  const bool hol = dir == Direction::Holomorphic;
  TensorField out = partial(t, dir);
  const int n = t.n, rank = t.rank();
  const std::size_t P = t.points();
  // Slots that pick up connection terms in this direction.
  std::vector<int> active;
  for (int s = 0; s < rank; ++s) {
    Slot k = t.sig[s];
    if (hol ? (k == Slot::Lower || k == Slot::Upper) : (k == Slot::LowerBar || k == Slot::UpperBar))
      active.push_back(s);
  }
  if (active.empty()) return out;

  std::vector<int> idx(rank + 1), src(rank);
  for (std::size_t oc = 0; oc < out.components(); ++oc) {
    out.unflat(oc, idx.data());
    const int a = idx[rank];
    cplx* o = out.comp(oc);
    for (int s : active) {
      const bool lower = t.sig[s] == Slot::Lower || t.sig[s] == Slot::LowerBar;
      for (int e = 0; e < n; ++e) {
        std::copy(idx.begin(), idx.begin() + rank, src.begin());
        src[s] = e;
        const cplx* tv = t.comp(t.flat(src.data()));
        // Lower: -Gamma^e_{a i} T_{..e..}; Upper: +Gamma^i_{a e} T^{..e..}.
        const cplx* gv = lower ? gamma.comp(gamma.flat({e, a, idx[s]}))
                               : gamma.comp(gamma.flat({idx[s], a, e}));
        const double sign = lower ? -1.0 : 1.0;
        if (hol) {
          for (std::size_t p = 0; p < P; ++p) o[p] += sign * gv[p] * tv[p];
        } else {
          for (std::size_t p = 0; p < P; ++p) o[p] += sign * std::conj(gv[p]) * tv[p];
        }
      }
    }
  }
  return out;
}

TensorField nabla(const TensorField& t, const TensorField& gamma) {
  return covariant_derivative(t, Direction::Holomorphic, gamma);
}

TensorField nabla_bar(const TensorField& t, const TensorField& gamma) {
  return covariant_derivative(t, Direction::Antiholomorphic, gamma);
}

ScalarField laplacian_fn(const MetricField& m, const ScalarField& f) {
  if (!f.grid || !f.grid->compatible(*m.grid())) throw ShapeMismatch("function grid differs");
  TensorField hess = complex_hessian(f);
  ScalarField out(m.grid());
  const int n = m.n();
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const cplx* gi = m.ginv.comp(m.ginv.flat({a, b}));
      const cplx* hv = hess.comp(hess.flat({a, b}));
      for (std::size_t p = 0; p < out.size(); ++p) out[p] += gi[p] * hv[p];
    }
  return out;
}

TensorField laplacian_R(const MetricField& m, const TensorField& gamma, const TensorField& t) {
  if (t.rank() + 2 > kMaxRank)
    throw ConfigInvalid("laplacian_R: unsupported index signature (rank too large)");
  TensorField a = nabla(nabla_bar(t, gamma), gamma);  // (.., b, beta): nabla_beta nabla_bbar
  TensorField b = nabla_bar(nabla(t, gamma), gamma);  // (.., beta, b): nabla_bbar nabla_beta
  TensorField out(t.grid, t.sig);
  const int n = t.n;
  const std::size_t P = t.points();
  for (std::size_t c = 0; c < t.components(); ++c) {
    cplx* o = out.comp(c);
    for (int beta = 0; beta < n; ++beta)
      for (int bb = 0; bb < n; ++bb) {
        const cplx* gi = m.ginv.comp(m.ginv.flat({beta, bb}));
        const cplx* av = a.comp((c * n + bb) * n + beta);
        const cplx* bv = b.comp((c * n + beta) * n + bb);
        for (std::size_t p = 0; p < P; ++p) o[p] += 0.5 * gi[p] * (av[p] + bv[p]);
      }
  }
  return out;
}

double kahler_residual(const TensorField& g) {
  require_hermitian_rank2(g);
  TensorField dg = partial(g, Direction::Holomorphic);  // (i, j, k): d_k g_{i jbar}
  double r = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      for (int k = 0; k < g.n; ++k) {
        const cplx* a = dg.comp(dg.flat({i, j, k}));
        const cplx* b = dg.comp(dg.flat({k, j, i}));
        for (std::size_t p = 0; p < g.points(); ++p) r = std::max(r, std::abs(a[p] - b[p]));
      }
  return r;
}

CurvatureSymmetry curvature_symmetry(const TensorField& rm) {
  CurvatureSymmetry s;
  const int n = rm.n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const cplx* a = rm.comp(rm.flat({i, j, k, l}));
          const cplx* b = rm.comp(rm.flat({k, l, i, j}));
          const cplx* c = rm.comp(rm.flat({j, i, l, k}));
          for (std::size_t p = 0; p < rm.points(); ++p) {
            s.pair_swap = std::max(s.pair_swap, std::abs(a[p] - b[p]));
            s.conjugate = std::max(s.conjugate, std::abs(a[p] - std::conj(c[p])));
          }
        }
  return s;
}

}  // namespace hkflow
