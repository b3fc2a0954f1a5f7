#include "hkflow/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "hkflow/error.hpp"
#include "hkflow/parallel.hpp"

namespace hkflow {

namespace {

// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

bool is_power_of_two(int N) { return N > 0 && (N & (N - 1)) == 0; }

}  // namespace

Grid::Grid(int n, int N, double L) : n_(n), N_(N), L_(L) {
  if (n != 1 && n != 2) throw ConfigInvalid("grid: n must be 1 or 2, got " + std::to_string(n));
  if (N < 8 || !is_power_of_two(N))
    throw ConfigInvalid("grid: N must be a power of two >= 8, got " + std::to_string(N));
  if (!(L > 0.0) || !std::isfinite(L)) throw ConfigInvalid("grid: L must be positive");

  size_ = 1;
  for (int a = 0; a < 2 * n; ++a) size_ *= static_cast<std::size_t>(N);

  std::vector<int> dims(2 * n, N);
  std::vector<cplx> scratch_in(size_), scratch_out(size_);
  auto* in = reinterpret_cast<fftw_complex*>(scratch_in.data());
  auto* out = reinterpret_cast<fftw_complex*>(scratch_out.data());
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_dft(2 * n, dims.data(), in, out, FFTW_FORWARD, flags);
    bwd_ = fftw_plan_dft(2 * n, dims.data(), in, out, FFTW_BACKWARD, flags);
  }

  // Per-axis derivative wavenumbers with the Nyquist bin removed.
  const double s = std::numbers::pi / L;
  const int cutoff = N / 3;
  dz_.assign(n, std::vector<cplx>(size_));
  dzbar_.assign(n, std::vector<cplx>(size_));
  keep_.assign(size_, 1);
  for (std::size_t p = 0; p < size_; ++p) {
    bool keep = true;
    for (int ax = 0; ax < 2 * n; ++ax) {
      int k = wavenumber(index(p, ax));
      if (std::abs(k) > cutoff) keep = false;
    }
    keep_[p] = keep ? 1 : 0;
    for (int a = 0; a < n; ++a) {
      int jx = index(p, 2 * a), jy = index(p, 2 * a + 1);
      double kx = jx == N / 2 ? 0.0 : wavenumber(jx);
      double ky = jy == N / 2 ? 0.0 : wavenumber(jy);
      // d/dz = (d/dx - i d/dy)/2 acting on exp(2 pi i (kx x + ky y)/L).
      dz_[a][p] = s * cplx(ky, kx);
      dzbar_[a][p] = s * cplx(-ky, kx);
    }
  }
}

Grid::~Grid() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  if (bwd_) fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
}

int Grid::index(std::size_t p, int axis) const {
  int shift = 2 * n_ - 1 - axis;
  for (int i = 0; i < shift; ++i) p /= static_cast<std::size_t>(N_);
  return static_cast<int>(p % static_cast<std::size_t>(N_));
}

Coords Grid::coords(std::size_t p) const {
  Coords c{0, 0, 0, 0};
  for (int ax = 2 * n_ - 1; ax >= 0; --ax) {
    c[ax] = static_cast<double>(p % N_) * L_ / N_;
    p /= N_;
  }
  return c;
}

bool Grid::compatible(const Grid& other) const {
  return n_ == other.n_ && N_ == other.N_ && L_ == other.L_;
}

void Grid::forward(const cplx* in, cplx* out) const {
  fftw_execute_dft(static_cast<fftw_plan>(fwd_),
                   reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

void Grid::backward(const cplx* in, cplx* out) const {
  fftw_execute_dft(static_cast<fftw_plan>(bwd_),
                   reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
  const double inv = 1.0 / static_cast<double>(size_);
  for (std::size_t p = 0; p < size_; ++p) out[p] *= inv;
}

GridPtr make_grid(int n, int N, double L) { return std::make_shared<const Grid>(n, N, L); }

ScalarField::ScalarField(GridPtr g, cplx value) : grid(std::move(g)) {
  v.assign(grid->size(), value);
}

ScalarField ScalarField::from_function(GridPtr g, const std::function<cplx(const Coords&)>& fn) {
  ScalarField f(g);
  parallel_for(f.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) f[p] = fn(g->coords(p));
  });
  return f;
}

ScalarField field_from_modes(GridPtr g, const std::vector<Mode>& modes) {
  const double w = 2.0 * std::numbers::pi / g->L();
  const int axes = g->axes();
  return ScalarField::from_function(g, [&](const Coords& x) {
    double s = 0.0;
    for (const Mode& m : modes) {
      double arg = 0.0;
      for (int ax = 0; ax < axes; ++ax) arg += m.k[ax] * x[ax];
      s += m.amplitude * (m.sine ? std::sin(w * arg) : std::cos(w * arg));
    }
    return cplx(s, 0.0);
  });
}

void require_same_grid(const ScalarField& a, const ScalarField& b) {
  if (!a.grid || !b.grid || !a.grid->compatible(*b.grid) || a.size() != b.size())
    throw ShapeMismatch("fields live on different grids");
}

namespace {

ScalarField apply_multiplier(const ScalarField& f, const std::vector<cplx>& m1,
                             const std::vector<cplx>* m2) {
  if (!f.grid || f.size() != f.grid->size()) throw ShapeMismatch("field does not match its grid");
  const Grid& g = *f.grid;
  std::vector<cplx> spec(g.size());
  g.forward(f.v.data(), spec.data());
  for (std::size_t p = 0; p < spec.size(); ++p) {
    spec[p] *= m1[p];
    if (m2) spec[p] *= (*m2)[p];
  }
  ScalarField out(f.grid);
  g.backward(spec.data(), out.v.data());
  return out;
}

void check_axis(const ScalarField& f, int a) {
  if (!f.grid) throw ShapeMismatch("field has no grid");
  if (a < 0 || a >= f.grid->n()) throw ShapeMismatch("complex axis out of range");
}

}  // namespace

ScalarField d_dz(const ScalarField& f, int a) {
  check_axis(f, a);
  return apply_multiplier(f, f.grid->dz_multiplier(a), nullptr);
}

ScalarField d_dzbar(const ScalarField& f, int a) {
  check_axis(f, a);
  return apply_multiplier(f, f.grid->dzbar_multiplier(a), nullptr);
}

ScalarField d_dz_dzbar(const ScalarField& f, int a, int b) {
  check_axis(f, a);
  check_axis(f, b);
  // Product of the two first-derivative multipliers: the same operator as
  // composing d_dzbar and d_dz, without the intermediate round trip.
  return apply_multiplier(f, f.grid->dz_multiplier(a), &f.grid->dzbar_multiplier(b));
}

cplx integrate(const ScalarField& f, const ScalarField& density) {
  require_same_grid(f, density);
  cplx s = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) s += f[p] * density[p];
  double w = std::pow(f.grid->h(), f.grid->axes());
  return s * w;
}

cplx mean(const ScalarField& f) {
  cplx s = 0.0;
  for (const cplx& x : f.v) s += x;
  return s / static_cast<double>(f.size());
}

ScalarField dealias(const ScalarField& f) {
  if (!f.grid) throw ShapeMismatch("field has no grid");
  const Grid& g = *f.grid;
  std::vector<cplx> spec(g.size());
  g.forward(f.v.data(), spec.data());
  const auto& keep = g.dealias_mask();
  for (std::size_t p = 0; p < spec.size(); ++p)
    if (!keep[p]) spec[p] = 0.0;
  ScalarField out(f.grid);
  g.backward(spec.data(), out.v.data());
  return out;
}

double max_abs(const ScalarField& f) {
  double m = 0.0;
  for (const cplx& x : f.v) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a, b);
  double m = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) m = std::max(m, std::abs(a[p] - b[p]));
  return m;
}

double max_abs_imag(const ScalarField& f) {
  double m = 0.0;
  for (const cplx& x : f.v) m = std::max(m, std::abs(x.imag()));
  return m;
}

bool all_finite(const ScalarField& f) {
  for (const cplx& x : f.v)
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
  return true;
}

ScalarField real_part(const ScalarField& f) {
  ScalarField out(f.grid);
  for (std::size_t p = 0; p < f.size(); ++p) out[p] = f[p].real();
  return out;
}

ScalarField operator+(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a, b);
  ScalarField out(a.grid);
  for (std::size_t p = 0; p < a.size(); ++p) out[p] = a[p] + b[p];
  return out;
}

ScalarField operator-(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a, b);
  ScalarField out(a.grid);
  for (std::size_t p = 0; p < a.size(); ++p) out[p] = a[p] - b[p];
  return out;
}

ScalarField operator*(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a, b);
  ScalarField out(a.grid);
  for (std::size_t p = 0; p < a.size(); ++p) out[p] = a[p] * b[p];
  return out;
}

ScalarField operator*(cplx s, const ScalarField& a) {
  ScalarField out(a.grid);
  for (std::size_t p = 0; p < a.size(); ++p) out[p] = s * a[p];
  return out;
}

ScalarField conj(const ScalarField& a) {
  ScalarField out(a.grid);
  for (std::size_t p = 0; p < a.size(); ++p) out[p] = std::conj(a[p]);
  return out;
}

}  // namespace hkflow
