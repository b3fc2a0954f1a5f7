#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "hkflow/grid.hpp"

namespace hkflow {

// Index kinds. Lower is a holomorphic covariant index (z^a), LowerBar an
// antiholomorphic one (zbar^b), Upper/UpperBar their contravariant partners.
enum class Slot { Lower, LowerBar, Upper, UpperBar };

// Tensor field with components stored component-major: data[c * points + p],
// where c is the row-major multi-index over the slots, each running over n.
struct TensorField {
  GridPtr grid;
  int n = 0;
  std::vector<Slot> sig;
  std::vector<cplx> data;

  TensorField() = default;
  TensorField(GridPtr g, std::vector<Slot> signature);

  int rank() const { return static_cast<int>(sig.size()); }
  std::size_t points() const { return grid ? grid->size() : 0; }
  std::size_t components() const;

  std::size_t flat(std::initializer_list<int> idx) const;
  std::size_t flat(const int* idx) const;
  void unflat(std::size_t c, int* idx) const;

  cplx* comp(std::size_t c) { return data.data() + c * points(); }
  const cplx* comp(std::size_t c) const { return data.data() + c * points(); }
  cplx& operator()(std::initializer_list<int> idx, std::size_t p) {
    return data[flat(idx) * points() + p];
  }
  const cplx& operator()(std::initializer_list<int> idx, std::size_t p) const {
    return data[flat(idx) * points() + p];
  }

  ScalarField component(std::size_t c) const;
  void set_component(std::size_t c, const ScalarField& f);
};

inline TensorField hermitian_field(GridPtr g) {
  return TensorField(std::move(g), {Slot::Lower, Slot::LowerBar});
}

void require_same_shape(const TensorField& a, const TensorField& b);

double max_abs(const TensorField& t);
double max_abs_diff(const TensorField& a, const TensorField& b);
bool all_finite(const TensorField& t);

TensorField operator+(const TensorField& a, const TensorField& b);
TensorField operator-(const TensorField& a, const TensorField& b);
TensorField operator*(cplx s, const TensorField& a);

// max |a_{ij} - conj(a_{ji})| for a rank-2 Lower/LowerBar field.
double hermitian_residual(const TensorField& a);

}  // namespace hkflow
