#pragma once

#include <array>
#include <vector>

#include "hkflow/geometry.hpp"
#include "hkflow/tensor.hpp"

namespace hkflow {

// Pointwise Cholesky factor g = L L^* (L lower triangular) and its inverse.
// Components expressed in the frame e_a = sum_i M_{a i} dz^i have identity
// metric, so index sums can be written without metric factors.
struct UnitaryFrame {
  GridPtr grid;
  int n = 0;
  std::vector<std::array<cplx, 4>> L;  // row-major 2x2 (only [0] used when n = 1)
  std::vector<std::array<cplx, 4>> M;  // L^{-1}
};

UnitaryFrame unitary_frame(const MetricField& g);

// Re-expresses every slot of t in the frame. Lower slots transform with M,
// LowerBar with conj(M), Upper with L^T and UpperBar with L^*.
TensorField to_frame(const TensorField& t, const UnitaryFrame& f);

// Inverse of to_frame.
TensorField from_frame(const TensorField& t, const UnitaryFrame& f);

}  // namespace hkflow
