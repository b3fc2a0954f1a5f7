#include "hkflow/frame.hpp"

#include <cmath>

#include "hkflow/error.hpp"

namespace hkflow {

UnitaryFrame unitary_frame(const MetricField& m) {
  UnitaryFrame f;
  f.grid = m.grid();
  f.n = m.n();
  const std::size_t P = m.g.points();
  f.L.resize(P);
  f.M.resize(P);
  for (std::size_t p = 0; p < P; ++p) {
    auto& L = f.L[p];
    auto& M = f.M[p];
    L.fill(0.0);
    M.fill(0.0);
    if (f.n == 1) {
      L[0] = std::sqrt(m.g({0, 0}, p).real());
      M[0] = 1.0 / L[0];
      continue;
    }
    double l11 = std::sqrt(m.g({0, 0}, p).real());
    cplx l21 = m.g({1, 0}, p) / l11;
    double l22 = std::sqrt(m.g({1, 1}, p).real() - std::norm(l21));
    L = {l11, 0.0, l21, l22};
    M = {1.0 / l11, 0.0, -l21 / (l11 * l22), 1.0 / l22};
  }
  return f;
}

namespace {

// Applies, slot by slot, T'[..a..] = sum_i A(a, i) T[..i..] where A depends on
// the slot kind and on whether we go into or out of the frame.
TensorField transform(const TensorField& t, const UnitaryFrame& f, bool into) {
  if (!t.grid || !t.grid->compatible(*f.grid)) throw ShapeMismatch("frame grid differs");
  const int n = t.n, rank = t.rank();
  const std::size_t P = t.points();
  TensorField cur = t;
  std::vector<int> idx(rank);
  for (int s = 0; s < rank; ++s) {
    TensorField next(t.grid, t.sig);
    const Slot kind = t.sig[s];
    for (std::size_t c = 0; c < cur.components(); ++c) {
      cur.unflat(c, idx.data());
      const int a = idx[s];
      cplx* out = next.comp(c);
      for (int i = 0; i < n; ++i) {
        idx[s] = i;
        const cplx* in = cur.comp(cur.flat(idx.data()));
        for (std::size_t p = 0; p < P; ++p) {
          const auto& L = f.L[p];
          const auto& M = f.M[p];
          const bool lower = kind == Slot::Lower || kind == Slot::LowerBar;
          const bool bar = kind == Slot::LowerBar || kind == Slot::UpperBar;
          cplx w;
          if (n == 1)
            w = (lower == into) ? M[0] : L[0];
          else if (into)
            w = lower ? M[a * 2 + i] : L[i * 2 + a];
          else
            w = lower ? L[a * 2 + i] : M[i * 2 + a];
          if (bar) w = std::conj(w);
          out[p] += w * in[p];
        }
      }
      idx[s] = a;
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace

TensorField to_frame(const TensorField& t, const UnitaryFrame& f) { return transform(t, f, true); }

TensorField from_frame(const TensorField& t, const UnitaryFrame& f) {
  return transform(t, f, false);
}

}  // namespace hkflow
