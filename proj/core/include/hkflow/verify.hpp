#pragma once

#include <limits>
#include <string>
#include <vector>

#include "hkflow/flow.hpp"
#include "hkflow/frame.hpp"

namespace hkflow {

struct VerifySettings {
  // Snapshot strides, coarse to fine; each level halves the spacing.
  std::vector<int> strides{4, 2, 1};
  // Sample times (snapshot-ring centers). Empty: every usable snapshot.
  std::vector<double> sample_times;
  bool five_point = false;
  double zero_tol = 1e-12;
  double order_min = 1.8;
  double order_max = 2.2;
  double ceiling = 1.0;
  double replay_tol = 1e-10;
  // Pointwise log-det vs Riemann-trace Ricci on evolved states; limited by
  // spatial truncation rather than roundoff.
  double routes_tol = 1e-8;
  // Integrated-curvature identities whose two sides both stay below this are
  // accepted through the torus reduction (both sides are identically zero).
  double torus_tol = 1e-6;
};

struct LevelResult {
  int stride = 1;
  double spacing = 0.0;
  double max_residual = 0.0;
  double l2_residual = 0.0;  // root mean square over points, max over centers
  // Largest |LHS| or |RHS| entry; infinite when not tracked. Both sides at or
  // below the zero tolerance make the identity trivially satisfied.
  double magnitude = std::numeric_limits<double>::infinity();
  std::vector<double> per_center;
};

struct IdentityReport {
  std::string name;
  std::string kind;  // "order" (ratio test) or "absolute"
  std::vector<LevelResult> levels;
  std::vector<double> orders;
  double tolerance = 0.0;
  double value = 0.0;  // absolute checks: the measured quantity
  bool pass = false;
  bool zero_case = false;
  std::vector<double> gauge;  // fitted additive constants per center (finest level)
  std::string note;
};

// Order or zero acceptance for a residual ladder.
void grade_order(IdentityReport& rep, const VerifySettings& s);

// Centered finite difference of samples taken at spacing ds. samples holds
// 3 (f_-1, f_0, f_1) or 5 (f_-2 .. f_2) entries.
TensorField dt_tensor(const std::vector<const TensorField*>& samples, double ds, int order);
double dt_scalar(const std::vector<double>& samples, double ds, int order);

// (nabla_bbar nabla_a - nabla_a nabla_bbar) eta against the curvature action,
// for a closed (1,1) form eta. If one_form is non-empty it must be a closed
// (1,0) form and its commutator is checked too.
IdentityReport commutator_check(const MetricField& g, const TensorField& eta,
                                const TensorField& one_form = TensorField());

// Runs every identity and consistency check along a potential-flow
// trajectory with a fixed snapshot spacing.
std::vector<IdentityReport> verify_trajectory(const PotentialFlow& flow, const Trajectory& traj,
                                              const VerifySettings& s);

bool all_pass(const std::vector<IdentityReport>& reports);

}  // namespace hkflow
