#include "qleak/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

namespace qleak {

namespace {
constexpr double kHermTol = 1e-10;
constexpr double kPhaseTol = 1e-8;

double sign_like(double a, double b) { return b >= 0.0 ? std::fabs(a) : -std::fabs(a); }
}  // namespace

ComplexMatrix add(const ComplexMatrix& x, const ComplexMatrix& y) {
  require(x.rows == y.rows && x.cols == y.cols, Errc::DimMismatch, "add: shape mismatch");
  ComplexMatrix out = x;
  kernels::active().axpy(out.size(), Cx{1.0, 0.0}, y.a.data(), out.a.data());
  return out;
}

ComplexMatrix sub(const ComplexMatrix& x, const ComplexMatrix& y) {
  require(x.rows == y.rows && x.cols == y.cols, Errc::DimMismatch, "sub: shape mismatch");
  ComplexMatrix out = x;
  kernels::active().axpy(out.size(), Cx{-1.0, 0.0}, y.a.data(), out.a.data());
  return out;
}

ComplexMatrix scale(const ComplexMatrix& x, Cx alpha) {
  ComplexMatrix out = x;
  kernels::active().scal(out.size(), alpha, out.a.data());
  return out;
}

ComplexMatrix matmul(const ComplexMatrix& x, const ComplexMatrix& y) {
  require(x.cols == y.rows, Errc::DimMismatch, "matmul: inner dims differ");
  ComplexMatrix out(x.rows, y.cols);
  kernels::active().gemm(x.a.data(), y.a.data(), out.a.data(), x.rows, x.cols, y.cols);
  return out;
}

ComplexMatrix adjoint(const ComplexMatrix& x) {
  ComplexMatrix out(x.cols, x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) out.at(j, i) = std::conj(x.at(i, j));
  return out;
}

ComplexMatrix transpose(const ComplexMatrix& x) {
  ComplexMatrix out(x.cols, x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) out.at(j, i) = x.at(i, j);
  return out;
}

ComplexMatrix conjugate(const ComplexMatrix& x) {
  ComplexMatrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out.a[i] = std::conj(x.a[i]);
  return out;
}

ComplexMatrix kron(const ComplexMatrix& x, const ComplexMatrix& y) {
  ComplexMatrix out(x.rows * y.rows, x.cols * y.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) {
      const Cx xij = x.at(i, j);
      if (xij == Cx{}) continue;
      for (std::size_t k = 0; k < y.rows; ++k) {
        Cx* dst = out.row(i * y.rows + k) + j * y.cols;
        const Cx* src = y.row(k);
        for (std::size_t l = 0; l < y.cols; ++l) dst[l] = xij * src[l];
      }
    }
  return out;
}

Cx trace(const ComplexMatrix& x) {
  require(x.square(), Errc::NotSquare, "trace");
  Cx t{};
  for (std::size_t i = 0; i < x.rows; ++i) t += x.at(i, i);
  return t;
}

double fro_norm(const ComplexMatrix& x) {
  return std::sqrt(kernels::active().nrm2sq(x.size(), x.a.data()));
}

double max_abs(const ComplexMatrix& x) {
  double m = 0.0;
  for (const Cx& z : x.a) m = std::max(m, std::abs(z));
  return m;
}

bool all_finite(const ComplexMatrix& x) {
  for (const Cx& z : x.a)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

double hermitian_defect(const ComplexMatrix& x) {
  if (!x.square()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = i; j < x.cols; ++j)
      m = std::max(m, std::abs(x.at(i, j) - std::conj(x.at(j, i))));
  return m;
}

ComplexMatrix hermitize(const ComplexMatrix& x) {
  require(x.square(), Errc::NotSquare, "hermitize");
  ComplexMatrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j)
      out.at(i, j) = 0.5 * (x.at(i, j) + std::conj(x.at(j, i)));
  return out;
}

std::vector<Cx> matvec(const ComplexMatrix& m, const std::vector<Cx>& v) {
  require(m.cols == v.size(), Errc::DimMismatch, "matvec");
  std::vector<Cx> out(m.rows);
  const auto& ops = kernels::active();
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = ops.dotu(m.cols, m.row(i), v.data());
  return out;
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition: Householder tridiagonalization, subdiagonal
// phase chase, implicit-shift QL with eigenvector accumulation.
// Eigenvector columns are kept contiguous (one row of `vt` per column) so the
// QL plane rotations run through kernels::rot.
// ---------------------------------------------------------------------------

namespace {

struct Tridiag {
  std::vector<double> diag;
  std::vector<double> off;  // off[i] couples i and i+1; off[n-1] unused
  // Columns of the accumulated unitary Q, stored contiguously: qcols row j is
  // the j-th column of Q.
  ComplexMatrix qcols;
};

Tridiag tridiagonalize(ComplexMatrix a) {
  const std::size_t n = a.rows;
  const auto& ops = kernels::active();
  std::vector<std::vector<Cx>> hh(n >= 2 ? n - 2 : 0);  // Householder vectors
  std::vector<double> taus(n >= 2 ? n - 2 : 0, 0.0);

  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t m = n - k - 1;
    std::vector<Cx> x(m);
    for (std::size_t i = 0; i < m; ++i) x[i] = a.at(k + 1 + i, k);
    const double xnorm = std::sqrt(ops.nrm2sq(m, x.data()));
    if (xnorm < 1e-300) {
      a.at(k + 1, k) = 0.0;
      a.at(k, k + 1) = 0.0;
      continue;
    }
    const Cx alpha = x[0];
    const double aabs = std::abs(alpha);
    const Cx phase = aabs > 0.0 ? alpha / aabs : Cx{1.0, 0.0};
    const Cx beta = -phase * xnorm;
    std::vector<Cx> v = x;
    v[0] -= beta;
    const double vnorm2 = ops.nrm2sq(m, v.data());
    if (vnorm2 < 1e-300) {
      a.at(k + 1, k) = beta;
      a.at(k, k + 1) = std::conj(beta);
      continue;
    }
    const double tau = 2.0 / vnorm2;

    // p = tau * A_sub v ; w = p - (tau/2)(v† p) v ; A_sub -= v w† + w v†
    std::vector<Cx> p(m);
    for (std::size_t i = 0; i < m; ++i) p[i] = tau * ops.dotu(m, a.row(k + 1 + i) + k + 1, v.data());
    const Cx kcoef = 0.5 * tau * ops.dotc(m, v.data(), p.data());
    std::vector<Cx> w = p;
    ops.axpy(m, -kcoef, v.data(), w.data());
    for (std::size_t i = 0; i < m; ++i) {
      Cx* arow = a.row(k + 1 + i) + k + 1;
      ops.axpyc(m, -v[i], w.data(), arow);
      ops.axpyc(m, -w[i], v.data(), arow);
    }
    a.at(k + 1, k) = beta;
    a.at(k, k + 1) = std::conj(beta);
    hh[k] = std::move(v);
    taus[k] = tau;
  }

  Tridiag t;
  t.diag.resize(n);
  t.off.assign(n, 0.0);
  std::vector<Cx> coff(n, Cx{});
  for (std::size_t i = 0; i < n; ++i) t.diag[i] = a.at(i, i).real();
  for (std::size_t i = 0; i + 1 < n; ++i) coff[i] = a.at(i + 1, i);

  // Accumulate Q = H_0 H_1 ... H_{n-3}, columns contiguous.
  t.qcols = ComplexMatrix::identity(n);
  for (std::size_t kk = n >= 2 ? n - 2 : 0; kk-- > 0;) {
    if (taus[kk] == 0.0) continue;
    const std::vector<Cx>& v = hh[kk];
    const std::size_t m = v.size();
    for (std::size_t j = 0; j < n; ++j) {
      Cx* col = t.qcols.row(j) + kk + 1;
      const Cx c = ops.dotc(m, v.data(), col);
      ops.axpy(m, -taus[kk] * c, v.data(), col);
    }
  }

  // Chase subdiagonal phases into Q so the tridiagonal matrix is real.
  Cx d = Cx{1.0, 0.0};
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double m = std::abs(coff[i]);
    t.off[i] = m;
    const Cx s = m > 1e-300 ? coff[i] / m : Cx{1.0, 0.0};
    d *= s;
    ops.scal(n, d, t.qcols.row(i + 1));
  }
  return t;
}

// Implicit-shift QL on a real symmetric tridiagonal, rotating the complex
// eigenvector columns along. Classic EISPACK tql2 scheme.
void ql_implicit(std::vector<double>& d, std::vector<double>& e, ComplexMatrix& qcols) {
  const std::size_t n = d.size();
  if (n <= 1) return;
  const double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
        if (std::fabs(e[m]) <= eps * dd + 1e-300) break;
      }
      if (m != l) {
        require(iter++ < 80, Errc::SolverDiverged, "QL iteration limit");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + sign_like(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        std::size_t i = m;
        bool underflow = false;
        while (i-- > l) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          kernels::active().rot(qcols.cols, qcols.row(i + 1), qcols.row(i), c, s);
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

void fix_column_phase(Cx* col, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double m = std::abs(col[i]);
    if (m > kPhaseTol) {
      kernels::active().scal(n, std::conj(col[i]) / m, col);
      return;
    }
  }
}

}  // namespace

HermitianEig hermitian_eig(const ComplexMatrix& m) {
  require(m.square(), Errc::NotSquare, "hermitian_eig");
  require(all_finite(m), Errc::NotFinite, "hermitian_eig: non-finite entries");
  require(hermitian_defect(m) <= kHermTol, Errc::NotHermitian, "hermitian_eig: defect exceeds 1e-10");
  const std::size_t n = m.rows;
  HermitianEig out;
  if (n == 0) {
    out.eigenvectors = ComplexMatrix(0, 0);
    return out;
  }
  Tridiag t = tridiagonalize(hermitize(m));
  ql_implicit(t.diag, t.off, t.qcols);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return t.diag[a] > t.diag[b]; });

  out.eigenvalues.resize(n);
  out.eigenvectors = ComplexMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = t.diag[idx[j]];
    Cx* col = t.qcols.row(idx[j]);
    fix_column_phase(col, n);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors.at(i, j) = col[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// One-sided complex Jacobi SVD.
// ---------------------------------------------------------------------------

SVDResult svd(const ComplexMatrix& m) {
  require(all_finite(m), Errc::NotFinite, "svd: non-finite entries");
  if (m.rows < m.cols) {
    SVDResult t = svd(adjoint(m));
    return SVDResult{std::move(t.right), std::move(t.singular), std::move(t.left)};
  }
  const std::size_t rows = m.rows, cols = m.cols;
  const auto& ops = kernels::active();

  // Work with columns stored contiguously.
  ComplexMatrix b(cols, rows);  // row j = column j of m
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) b.at(j, i) = m.at(i, j);
  ComplexMatrix v = ComplexMatrix::identity(cols);  // row j = column j of V

  std::vector<double> colsq(cols);
  for (std::size_t j = 0; j < cols; ++j) colsq[j] = ops.nrm2sq(rows, b.row(j));
  const double scale2 = *std::max_element(colsq.begin(), colsq.end());

  const double conv = 1e-28;  // on |g|^2 / (|bp|^2 |bq|^2)
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        if (colsq[p] <= 1e-280 * std::max(1.0, scale2) || colsq[q] <= 1e-280 * std::max(1.0, scale2))
          continue;
        const Cx g = ops.dotc(rows, b.row(p), b.row(q));
        const double g2 = std::norm(g);
        if (g2 <= conv * colsq[p] * colsq[q]) continue;
        rotated = true;
        const double absg = std::sqrt(g2);
        const Cx phase = g / absg;
        const double tau = (colsq[q] - colsq[p]) / (2.0 * absg);
        const double tt = sign_like(1.0, tau) / (std::fabs(tau) + std::hypot(tau, 1.0));
        const double c = 1.0 / std::hypot(tt, 1.0);
        const double s = tt * c;
        // [b_p, b_q] <- [b_p, b_q] * diag(1, conj(phase)) * [[c, s], [-s, c]]
        const Cx ph = std::conj(phase);
        Cx* bp = b.row(p);
        Cx* bq = b.row(q);
        for (std::size_t i = 0; i < rows; ++i) {
          const Cx xp = bp[i];
          const Cx xq = ph * bq[i];
          bp[i] = c * xp - s * xq;
          bq[i] = s * xp + c * xq;
        }
        Cx* vp = v.row(p);
        Cx* vq = v.row(q);
        for (std::size_t i = 0; i < cols; ++i) {
          const Cx xp = vp[i];
          const Cx xq = ph * vq[i];
          vp[i] = c * xp - s * xq;
          vq[i] = s * xp + c * xq;
        }
        colsq[p] = ops.nrm2sq(rows, bp);
        colsq[q] = ops.nrm2sq(rows, bq);
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(cols);
  for (std::size_t j = 0; j < cols; ++j) sigma[j] = std::sqrt(colsq[j]);
  std::vector<std::size_t> idx(cols);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t bb) { return sigma[a] > sigma[bb]; });

  SVDResult out;
  out.singular.resize(cols);
  out.right = ComplexMatrix(cols, cols);
  const double smax = sigma.empty() ? 0.0 : sigma[idx[0]];
  const double stol = 1e-13 * std::max(1.0, smax);

  std::size_t nkeep = 0;
  ComplexMatrix ucols(cols, rows);  // normalized kept columns, contiguous
  for (std::size_t j = 0; j < cols; ++j) {
    const std::size_t src = idx[j];
    out.singular[j] = sigma[src];
    for (std::size_t i = 0; i < cols; ++i) out.right.at(i, j) = v.at(src, i);
    if (sigma[src] > stol) {
      std::memcpy(ucols.row(j), b.row(src), rows * sizeof(Cx));
      ops.scal(rows, Cx{1.0 / sigma[src], 0.0}, ucols.row(j));
      ++nkeep;
    }
  }

  // Left singular vectors: kept columns (all sorted before the near-zero
  // ones), completed to a full rows x rows unitary.
  ComplexMatrix kept(rows, nkeep);
  for (std::size_t j = 0; j < nkeep; ++j)
    for (std::size_t i = 0; i < rows; ++i) kept.at(i, j) = ucols.at(j, i);
  out.left = complete_isometry(kept);

  // Phase convention on U columns, compensated on V where a pair exists.
  for (std::size_t j = 0; j < rows; ++j) {
    std::vector<Cx> ucol(rows);
    for (std::size_t i = 0; i < rows; ++i) ucol[i] = out.left.at(i, j);
    Cx ph{1.0, 0.0};
    for (std::size_t i = 0; i < rows; ++i) {
      const double ma = std::abs(ucol[i]);
      if (ma > kPhaseTol) {
        ph = std::conj(ucol[i]) / ma;
        break;
      }
    }
    ops.scal(rows, ph, ucol.data());
    for (std::size_t i = 0; i < rows; ++i) out.left.at(i, j) = ucol[i];
    if (j < cols) {
      std::vector<Cx> vcol(cols);
      for (std::size_t i = 0; i < cols; ++i) vcol[i] = out.right.at(i, j);
      if (out.singular[j] > stol) {
        ops.scal(cols, ph, vcol.data());
      } else {
        fix_column_phase(vcol.data(), cols);
      }
      for (std::size_t i = 0; i < cols; ++i) out.right.at(i, j) = vcol[i];
    }
  }
  return out;
}

ComplexMatrix matrix_sqrt_psd(const ComplexMatrix& m) {
  HermitianEig eig = hermitian_eig(m);
  const std::size_t n = m.rows;
  for (double& lam : eig.eigenvalues) {
    require(lam >= -kHermTol, Errc::NotPSD, "matrix_sqrt_psd: eigenvalue below -1e-10");
    lam = lam > 0.0 ? std::sqrt(lam) : 0.0;
  }
  // V diag(sqrt(lam)) V†
  ComplexMatrix vs = eig.eigenvectors;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) vs.at(i, j) *= eig.eigenvalues[j];
  return matmul(vs, adjoint(eig.eigenvectors));
}

double trace_norm(const ComplexMatrix& m) {
  require(m.square(), Errc::NotSquare, "trace_norm");
  // Hermitian fast path: singular values are |eigenvalues|.
  if (hermitian_defect(m) <= kHermTol) {
    HermitianEig eig = hermitian_eig(m);
    double s = 0.0;
    for (double lam : eig.eigenvalues) s += std::fabs(lam);
    return 0.5 * s;
  }
  SVDResult d = svd(m);
  double s = 0.0;
  for (double sv : d.singular) s += sv;
  return 0.5 * s;
}

std::optional<ComplexMatrix> cholesky(const ComplexMatrix& m) {
  if (!m.square()) return std::nullopt;
  const std::size_t n = m.rows;
  const auto& ops = kernels::active();
  ComplexMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const double djj = m.at(j, j).real() - ops.nrm2sq(j, l.row(j));
    if (!(djj > 0.0) || !std::isfinite(djj)) return std::nullopt;
    const double ljj = std::sqrt(djj);
    l.at(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      const Cx z = m.at(i, j) - ops.dotc(j, l.row(j), l.row(i));
      l.at(i, j) = z / ljj;
    }
  }
  return l;
}

double logdet_from_cholesky(const ComplexMatrix& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows; ++i) s += std::log(l.at(i, i).real());
  return 2.0 * s;
}

ComplexMatrix inverse_from_cholesky(const ComplexMatrix& l) {
  const std::size_t n = l.rows;
  const auto& ops = kernels::active();
  // Y = (L^{-1})† stored row-major (row j = column j of L^{-1}, conjugated),
  // then m^{-1} = Y Y† using only the structural tails.
  ComplexMatrix y(n, n);
  std::vector<Cx> col(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(col.begin() + static_cast<long>(j), col.end(), Cx{});
    col[j] = 1.0;
    for (std::size_t i = j; i < n; ++i) {
      Cx s = col[i];
      if (i > j) s -= ops.dotu(i - j, l.row(i) + j, col.data() + j);
      col[i] = s / l.at(i, i).real();
    }
    Cx* yrow = y.row(j);
    for (std::size_t i = j; i < n; ++i) yrow[i] = std::conj(col[i]);
  }
  ComplexMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const std::size_t k0 = std::max(i, j);
      const Cx t = ops.dotc(n - k0, y.row(i) + k0, y.row(j) + k0);
      out.at(j, i) = t;
      out.at(i, j) = std::conj(t);
    }
  return out;
}

double min_eigenvalue(const ComplexMatrix& m) {
  HermitianEig eig = hermitian_eig(m);
  return eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.back();
}

QRResult qr_unitary(const ComplexMatrix& m) {
  require(m.square(), Errc::NotSquare, "qr_unitary");
  const std::size_t n = m.rows;
  const auto& ops = kernels::active();
  ComplexMatrix r = m;
  ComplexMatrix q = ComplexMatrix::identity(n);
  std::vector<Cx> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t mlen = n - k;
    for (std::size_t i = 0; i < mlen; ++i) v[i] = r.at(k + i, k);
    const double xnorm = std::sqrt(ops.nrm2sq(mlen, v.data()));
    if (xnorm < 1e-300) continue;
    const double aabs = std::abs(v[0]);
    const Cx phase = aabs > 0.0 ? v[0] / aabs : Cx{1.0, 0.0};
    const Cx beta = -phase * xnorm;
    v[0] -= beta;
    const double vnorm2 = ops.nrm2sq(mlen, v.data());
    if (vnorm2 < 1e-300) continue;
    const double tau = 2.0 / vnorm2;
    // R <- H R, columns k..n-1; Q <- Q H (store Q columns as rows of qt later).
    for (std::size_t j = k; j < n; ++j) {
      Cx s{};
      for (std::size_t i = 0; i < mlen; ++i) s += std::conj(v[i]) * r.at(k + i, j);
      s *= tau;
      for (std::size_t i = 0; i < mlen; ++i) r.at(k + i, j) -= s * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      Cx s{};
      for (std::size_t jj = 0; jj < mlen; ++jj) s += q.at(i, k + jj) * v[jj];
      s *= tau;
      for (std::size_t jj = 0; jj < mlen; ++jj) q.at(i, k + jj) -= s * std::conj(v[jj]);
    }
  }
  // Phase-fix so diag(R) is real nonnegative.
  for (std::size_t k = 0; k < n; ++k) {
    const Cx d = r.at(k, k);
    const double da = std::abs(d);
    const Cx ph = da > 1e-300 ? d / da : Cx{1.0, 0.0};
    for (std::size_t j = k; j < n; ++j) r.at(k, j) *= std::conj(ph);
    for (std::size_t i = 0; i < n; ++i) q.at(i, k) *= ph;
  }
  return {std::move(q), std::move(r)};
}

ComplexMatrix complete_isometry(const ComplexMatrix& v) {
  const std::size_t n = v.rows;
  const std::size_t k = v.cols;
  require(k <= n, Errc::DimMismatch, "complete_isometry: more columns than rows");
  const auto& ops = kernels::active();
  // Collected columns kept contiguous.
  ComplexMatrix cols(n, n);
  std::size_t have = 0;
  std::vector<Cx> work(n);
  auto push = [&](const std::vector<Cx>& c) {
    for (std::size_t i = 0; i < n; ++i) cols.at(have, i) = c[i];
    ++have;
  };
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < n; ++i) work[i] = v.at(i, j);
    push(work);
  }
  for (std::size_t cand = 0; cand < n && have < n; ++cand) {
    std::fill(work.begin(), work.end(), Cx{});
    work[cand] = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < have; ++j) {
        const Cx c = ops.dotc(n, cols.row(j), work.data());
        ops.axpy(n, -c, cols.row(j), work.data());
      }
    const double nrm = std::sqrt(ops.nrm2sq(n, work.data()));
    if (nrm < 1e-6) continue;
    ops.scal(n, Cx{1.0 / nrm, 0.0}, work.data());
    push(work);
  }
  require(have == n, Errc::SolverDiverged, "complete_isometry: basis completion failed");
  ComplexMatrix out(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) out.at(i, j) = cols.at(j, i);
  return out;
}

}  // namespace qleak
