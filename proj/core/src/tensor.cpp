#include "hkflow/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "hkflow/error.hpp"

namespace hkflow {

TensorField::TensorField(GridPtr g, std::vector<Slot> signature)
    : grid(std::move(g)), n(grid->n()), sig(std::move(signature)) {
  data.assign(components() * points(), 0.0);
}

std::size_t TensorField::components() const {
  std::size_t c = 1;
  for (std::size_t s = 0; s < sig.size(); ++s) c *= static_cast<std::size_t>(n);
  return c;
}

std::size_t TensorField::flat(std::initializer_list<int> idx) const { return flat(idx.begin()); }

std::size_t TensorField::flat(const int* idx) const {
  std::size_t c = 0;
  for (std::size_t s = 0; s < sig.size(); ++s) c = c * n + idx[s];
  return c;
}

void TensorField::unflat(std::size_t c, int* idx) const {
  for (int s = rank() - 1; s >= 0; --s) {
    idx[s] = static_cast<int>(c % n);
    c /= n;
  }
}

ScalarField TensorField::component(std::size_t c) const {
  ScalarField f(grid);
  std::copy(comp(c), comp(c) + points(), f.v.begin());
  return f;
}

void TensorField::set_component(std::size_t c, const ScalarField& f) {
  if (!f.grid || !grid->compatible(*f.grid)) throw ShapeMismatch("component on a different grid");
  std::copy(f.v.begin(), f.v.end(), comp(c));
}

void require_same_shape(const TensorField& a, const TensorField& b) {
  if (!a.grid || !b.grid || !a.grid->compatible(*b.grid) || a.sig != b.sig)
    throw ShapeMismatch("tensor fields differ in grid or index signature");
}

double max_abs(const TensorField& t) {
  double m = 0.0;
  for (const cplx& x : t.data) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(const TensorField& a, const TensorField& b) {
  require_same_shape(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

bool all_finite(const TensorField& t) {
  for (const cplx& x : t.data)
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
  return true;
}

TensorField operator+(const TensorField& a, const TensorField& b) {
  require_same_shape(a, b);
  TensorField out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

TensorField operator-(const TensorField& a, const TensorField& b) {
  require_same_shape(a, b);
  TensorField out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

TensorField operator*(cplx s, const TensorField& a) {
  TensorField out = a;
  for (cplx& x : out.data) x *= s;
  return out;
}

double hermitian_residual(const TensorField& a) {
  if (a.rank() != 2) throw ShapeMismatch("hermitian_residual needs a rank-2 field");
  double m = 0.0;
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j < a.n; ++j)
      for (std::size_t p = 0; p < a.points(); ++p)
        m = std::max(m, std::abs(a({i, j}, p) - std::conj(a({j, i}, p))));
  return m;
}

}  // namespace hkflow
