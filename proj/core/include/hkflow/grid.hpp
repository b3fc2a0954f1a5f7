#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace hkflow {

using cplx = std::complex<double>;
using Coords = std::array<double, 4>;

// Periodic grid on the torus R^{2n}/(L Z)^{2n}. Real axes are ordered
// x1, y1, x2, y2 and stored row-major, so the last axis varies fastest.
class Grid {
 public:
  Grid(int n, int N, double L);
  ~Grid();
  Grid(const Grid&) = delete;
  Grid& operator=(const Grid&) = delete;

  int n() const { return n_; }
  int N() const { return N_; }
  double L() const { return L_; }
  double h() const { return L_ / N_; }
  int axes() const { return 2 * n_; }
  std::size_t size() const { return size_; }

  // Integer position of point p along a real axis.
  int index(std::size_t p, int axis) const;
  Coords coords(std::size_t p) const;
  // Signed wavenumber of FFT bin j in {-N/2, ..., N/2-1}.
  int wavenumber(int j) const { return j < N_ / 2 ? j : j - N_; }

  bool compatible(const Grid& other) const;

  // Unnormalized forward DFT and normalized inverse. in and out must differ.
  void forward(const cplx* in, cplx* out) const;
  void backward(const cplx* in, cplx* out) const;

  // Spectral multipliers for d/dz^a and d/dzbar^a, one entry per bin.
  const std::vector<cplx>& dz_multiplier(int a) const { return dz_[a]; }
  const std::vector<cplx>& dzbar_multiplier(int a) const { return dzbar_[a]; }
  // 1 for bins kept by the 2/3 rule, 0 otherwise.
  const std::vector<unsigned char>& dealias_mask() const { return keep_; }

 private:
  int n_;
  int N_;
  double L_;
  std::size_t size_;
  void* fwd_ = nullptr;
  void* bwd_ = nullptr;
  std::vector<std::vector<cplx>> dz_, dzbar_;
  std::vector<unsigned char> keep_;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(int n, int N, double L = 1.0);

struct ScalarField {
  GridPtr grid;
  std::vector<cplx> v;

  ScalarField() = default;
  explicit ScalarField(GridPtr g, cplx value = 0.0);

  std::size_t size() const { return v.size(); }
  cplx& operator[](std::size_t p) { return v[p]; }
  const cplx& operator[](std::size_t p) const { return v[p]; }

  static ScalarField from_function(GridPtr g, const std::function<cplx(const Coords&)>& fn);
};

// One Fourier mode amplitude * cos(2 pi k.x / L) or amplitude * sin(...),
// with k given per real axis in x1, y1, x2, y2 order.
struct Mode {
  std::array<int, 4> k{0, 0, 0, 0};
  double amplitude = 0.0;
  bool sine = false;
};

ScalarField field_from_modes(GridPtr g, const std::vector<Mode>& modes);

void require_same_grid(const ScalarField& a, const ScalarField& b);

ScalarField d_dz(const ScalarField& f, int a);
ScalarField d_dzbar(const ScalarField& f, int a);
// d/dz^a d/dzbar^b applied as two successive first derivatives.
ScalarField d_dz_dzbar(const ScalarField& f, int a, int b);

// h^{2n} * sum f * density, summed in index order.
cplx integrate(const ScalarField& f, const ScalarField& density);
cplx mean(const ScalarField& f);

ScalarField dealias(const ScalarField& f);

double max_abs(const ScalarField& f);
double max_abs_diff(const ScalarField& a, const ScalarField& b);
double max_abs_imag(const ScalarField& f);
bool all_finite(const ScalarField& f);
ScalarField real_part(const ScalarField& f);

ScalarField operator+(const ScalarField& a, const ScalarField& b);
ScalarField operator-(const ScalarField& a, const ScalarField& b);
ScalarField operator*(const ScalarField& a, const ScalarField& b);
ScalarField operator*(cplx s, const ScalarField& a);
ScalarField conj(const ScalarField& a);

}  // namespace hkflow
