#pragma once

// Test-only oracles, independent of the library's decomposition paths.

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "qleak/matrix.hpp"
#include "qleak/rng.hpp"

namespace oracles {

using qleak::ComplexMatrix;
using qleak::Cx;

inline ComplexMatrix random_matrix(qleak::Rng& rng, std::size_t r, std::size_t c) {
  ComplexMatrix m(r, c);
  for (auto& z : m.a) z = Cx{rng.gauss(), rng.gauss()};
  return m;
}

inline ComplexMatrix random_hermitian(qleak::Rng& rng, std::size_t n) {
  return qleak::hermitize(random_matrix(rng, n, n));
}

inline ComplexMatrix random_psd(qleak::Rng& rng, std::size_t n, std::size_t k = 0) {
  ComplexMatrix g = random_matrix(rng, n, k == 0 ? n : k);
  return qleak::matmul(g, qleak::adjoint(g));
}

inline ComplexMatrix random_unitary(qleak::Rng& rng, std::size_t n) {
  return qleak::qr_unitary(random_matrix(rng, n, n)).q;
}

// Ginibre-induced density matrix G G† / tr.
inline ComplexMatrix random_density(qleak::Rng& rng, std::size_t n, std::size_t rank = 0) {
  ComplexMatrix p = random_psd(rng, n, rank);
  const Cx t = qleak::trace(p);
  return qleak::scale(p, Cx{1.0 / t.real(), 0.0});
}

inline std::vector<Cx> random_ket(qleak::Rng& rng, std::size_t n) {
  std::vector<Cx> v(n);
  for (auto& z : v) z = Cx{rng.gauss(), rng.gauss()};
  const double nrm = std::sqrt(qleak::kernels::active().nrm2sq(n, v.data()));
  qleak::kernels::active().scal(n, Cx{1.0 / nrm, 0.0}, v.data());
  return v;
}

// Characteristic polynomial coefficients by Faddeev-LeVerrier:
// p(x) = x^n + c[0] x^{n-1} + ... + c[n-1].
inline std::vector<Cx> char_poly(const ComplexMatrix& a) {
  const std::size_t n = a.rows;
  std::vector<Cx> c(n);
  ComplexMatrix m = a;
  c[0] = -qleak::trace(m);
  for (std::size_t k = 1; k < n; ++k) {
    ComplexMatrix t = m;
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) += c[k - 1];
    m = qleak::matmul(a, t);
    c[k] = -qleak::trace(m) / static_cast<double>(k + 1);
  }
  return c;
}

// Durand-Kerner simultaneous root iteration for a monic polynomial.
inline std::vector<Cx> poly_roots(const std::vector<Cx>& c) {
  const std::size_t n = c.size();
  std::vector<Cx> x(n);
  const Cx seed{0.4, 0.9};
  Cx p{1.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    p *= seed;
    x[i] = p;
  }
  auto eval = [&](Cx z) {
    Cx v{1.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) v = v * z + c[i];
    return v;
  };
  for (int iter = 0; iter < 500; ++iter) {
    double step = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Cx denom{1.0, 0.0};
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) denom *= (x[i] - x[j]);
      const Cx d = eval(x[i]) / denom;
      x[i] -= d;
      step = std::max(step, std::abs(d));
    }
    if (step < 1e-14) break;
  }
  return x;
}

// Descending real parts of the characteristic roots of a Hermitian matrix.
inline std::vector<double> eigenvalues_by_roots(const ComplexMatrix& a) {
  std::vector<Cx> roots = poly_roots(char_poly(a));
  std::vector<double> out(roots.size());
  for (std::size_t i = 0; i < roots.size(); ++i) out[i] = roots[i].real();
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

// Direct index-sum partial trace over the tail subsystem of a bipartite
// d1 x d2 system (independent of the library's stride bookkeeping).
inline ComplexMatrix naive_trace_out_second(const ComplexMatrix& rho, std::size_t d1,
                                            std::size_t d2) {
  ComplexMatrix out(d1, d1);
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t j = 0; j < d1; ++j) {
      Cx s{};
      for (std::size_t k = 0; k < d2; ++k) s += rho.at(i * d2 + k, j * d2 + k);
      out.at(i, j) = s;
    }
  return out;
}

inline ComplexMatrix naive_trace_out_first(const ComplexMatrix& rho, std::size_t d1,
                                           std::size_t d2) {
  ComplexMatrix out(d2, d2);
  for (std::size_t i = 0; i < d2; ++i)
    for (std::size_t j = 0; j < d2; ++j) {
      Cx s{};
      for (std::size_t k = 0; k < d1; ++k) s += rho.at(k * d2 + i, k * d2 + j);
      out.at(i, j) = s;
    }
  return out;
}

}  // namespace oracles
