#pragma once

#include <utility>
#include <vector>

#include "hkflow/grid.hpp"
#include "hkflow/tensor.hpp"

namespace hkflow {

// Positive-definiteness floor for metrics.
inline constexpr double kPositiveFloor = 1e-8;

// A Kahler metric g_{a bbar} together with its pointwise inverse and
// determinant. ginv(k, l) = g^{k lbar}, so sum_l g^{k lbar} g_{m lbar} = delta.
struct MetricField {
  TensorField g;
  TensorField ginv;
  ScalarField det;
  double min_eig = 0.0;
  std::size_t argmin = 0;
  double max_inv_eig = 0.0;

  const GridPtr& grid() const { return g.grid; }
  int n() const { return g.n; }
};

// Validates positive definiteness and caches inverse and determinant.
MetricField make_metric(TensorField g);
MetricField flat_metric(GridPtr grid, const std::vector<double>& diag = {});
// g = scale * exp(u) for n = 1.
MetricField conformal_metric(const ScalarField& u, double scale = 1.0);

// d/dz^a d/dzbar^b f. For real f the result is Hermitian to roundoff;
// hermitian_hessian enforces it exactly.
TensorField complex_hessian(const ScalarField& f);
TensorField hermitian_hessian(const ScalarField& f);

MetricField metric_from_potential(const MetricField& g0, const ScalarField& phi);

std::pair<TensorField, ScalarField> inverse_det(const TensorField& g);

// Gamma(k, i, j) = Gamma^k_{ij} = g^{k lbar} d_j g_{i lbar}.
TensorField christoffel(const MetricField& g);
// Rm(i, j, k, l) = R_{i jbar k lbar}.
TensorField riemann(const MetricField& g);
// Ricci via -d dbar log det g.
TensorField ricci(const MetricField& g);
// Ricci via g^{k lbar} R_{i jbar k lbar}.
TensorField ricci_from_riemann(const MetricField& g, const TensorField& rm);
ScalarField scalar_curvature(const MetricField& g, const TensorField& ric);
ScalarField log_det(const MetricField& g);

struct VolumeAverage {
  ScalarField density;
  double vol = 0.0;
  double total_scalar = 0.0;
  double r = 0.0;
};

VolumeAverage volume_and_average(const MetricField& g);
VolumeAverage volume_and_average(const MetricField& g, const ScalarField& scalar);

// Mean-zero (Lebesgue) potential with d dbar f = Ric.
ScalarField ricci_potential(const MetricField& g);

enum class Direction { Holomorphic, Antiholomorphic };

// Appends one covariant index (Lower for Holomorphic, LowerBar otherwise) as
// the last slot.
TensorField covariant_derivative(const TensorField& t, Direction dir, const TensorField& gamma);
TensorField nabla(const TensorField& t, const TensorField& gamma);
TensorField nabla_bar(const TensorField& t, const TensorField& gamma);

// Plain spectral derivative d_a (or d_abar) appended as the last slot.
TensorField partial(const TensorField& t, Direction dir);

// g^{a bbar} d_a d_bbar f.
ScalarField laplacian_fn(const MetricField& g, const ScalarField& f);
// 1/2 g^{b cbar} (nabla_b nabla_cbar + nabla_cbar nabla_b) T.
TensorField laplacian_R(const MetricField& g, const TensorField& gamma, const TensorField& t);

// max |d_k g_{i jbar} - d_i g_{k jbar}|.
double kahler_residual(const TensorField& g);

struct CurvatureSymmetry {
  double pair_swap = 0.0;  // R_{i jbar k lbar} - R_{k lbar i jbar}
  double conjugate = 0.0;  // R_{i jbar k lbar} - conj(R_{j ibar l kbar})
};

CurvatureSymmetry curvature_symmetry(const TensorField& rm);

// Pointwise eigenvalue range of a Hermitian rank-2 field.
std::pair<double, double> hermitian_eig_range(const TensorField& a, std::size_t p);

}  // namespace hkflow
