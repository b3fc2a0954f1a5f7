#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace hkflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

// Raised when a metric loses positive definiteness. Carries the offending grid
// point and, once known, the flow time at which it happened.
class MetricDegenerate : public Error {
 public:
  MetricDegenerate(const std::string& what, std::size_t point, std::array<double, 4> coords,
                   double min_eig)
      : Error(what), point_(point), coords_(coords), min_eig_(min_eig) {}

  std::size_t point() const { return point_; }
  const std::array<double, 4>& coords() const { return coords_; }
  double min_eigenvalue() const { return min_eig_; }
  double time() const { return t_; }
  bool has_time() const { return has_t_; }
  void set_time(double t) {
    t_ = t;
    has_t_ = true;
  }

 private:
  std::size_t point_;
  std::array<double, 4> coords_;
  double min_eig_;
  double t_ = 0.0;
  bool has_t_ = false;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

class CflViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace hkflow
