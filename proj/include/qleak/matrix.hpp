#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "qleak/errors.hpp"
#include "qleak/kernels.hpp"

namespace qleak {

using Cx = std::complex<double>;

// Dense complex matrix, row-major. Values are immutable by convention once
// handed to other modules; all operations return fresh matrices.
struct ComplexMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Cx> a;

  ComplexMatrix() = default;
  ComplexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c) {}

  static ComplexMatrix zero(std::size_t r, std::size_t c) { return ComplexMatrix(r, c); }
  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.a[i * n + i] = 1.0;
    return m;
  }

  Cx& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  const Cx& at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
  Cx* row(std::size_t i) { return a.data() + i * cols; }
  const Cx* row(std::size_t i) const { return a.data() + i * cols; }
  bool square() const { return rows == cols; }
  std::size_t size() const { return a.size(); }
};

ComplexMatrix add(const ComplexMatrix& x, const ComplexMatrix& y);
ComplexMatrix sub(const ComplexMatrix& x, const ComplexMatrix& y);
ComplexMatrix scale(const ComplexMatrix& x, Cx alpha);
ComplexMatrix matmul(const ComplexMatrix& x, const ComplexMatrix& y);
ComplexMatrix adjoint(const ComplexMatrix& x);
ComplexMatrix transpose(const ComplexMatrix& x);
ComplexMatrix conjugate(const ComplexMatrix& x);

// Standard Kronecker product: (a (x) b)[(i*rb+k),(j*cb+l)] = a[i,j]*b[k,l].
ComplexMatrix kron(const ComplexMatrix& x, const ComplexMatrix& y);

Cx trace(const ComplexMatrix& x);
double fro_norm(const ComplexMatrix& x);
double max_abs(const ComplexMatrix& x);
bool all_finite(const ComplexMatrix& x);

// max_ij |m[i,j] - conj(m[j,i])|
double hermitian_defect(const ComplexMatrix& x);
// (m + m†)/2
ComplexMatrix hermitize(const ComplexMatrix& x);

// apply m to a vector: out = m * v
std::vector<Cx> matvec(const ComplexMatrix& m, const std::vector<Cx>& v);

struct HermitianEig {
  std::vector<double> eigenvalues;  // descending
  ComplexMatrix eigenvectors;       // unitary, columns are eigenvectors
};

// Eigendecomposition of a Hermitian matrix via Householder tridiagonalization
// followed by implicit-shift QL, with a fixed phase convention: the first
// component of each eigenvector with modulus > 1e-8 is made real positive,
// so decompositions are reproducible. Inputs must be Hermitian within 1e-10
// (absolute, max-entry); inside that tolerance they are symmetrized first.
HermitianEig hermitian_eig(const ComplexMatrix& m);

struct SVDResult {
  ComplexMatrix left;            // unitary, columns
  std::vector<double> singular;  // nonnegative, descending
  ComplexMatrix right;           // unitary, columns; input = U diag(s) V†
};

// One-sided complex Jacobi SVD. Same phase convention as hermitian_eig,
// applied to the left singular vectors.
SVDResult svd(const ComplexMatrix& m);

// PSD square root via the eigendecomposition; eigenvalues in [-1e-10, 0) are
// clamped to zero, below -1e-10 throws NotPSD.
ComplexMatrix matrix_sqrt_psd(const ComplexMatrix& m);

// Halved trace norm (1/2) sum of singular values, so the distance between
// density operators lies in [0,1]. Note most textbooks use the unhalved
// Schatten-1 norm; all distances in this library use the halved form.
double trace_norm(const ComplexMatrix& m);

// Cholesky factor L (lower) with m = L L†, or nullopt if m is not positive
// definite (a nonpositive pivot is encountered).
std::optional<ComplexMatrix> cholesky(const ComplexMatrix& m);
// 2 * sum log diag(L) = log det m
double logdet_from_cholesky(const ComplexMatrix& l);
// m^{-1} from its Cholesky factor.
ComplexMatrix inverse_from_cholesky(const ComplexMatrix& l);
// Smallest eigenvalue of a Hermitian matrix (convenience over hermitian_eig).
double min_eigenvalue(const ComplexMatrix& m);

struct QRResult {
  ComplexMatrix q;  // unitary
  ComplexMatrix r;  // upper triangular, real nonnegative diagonal
};

// Householder QR of a square matrix with the R diagonal phase-fixed to be
// real nonnegative, so Q is a deterministic function of the input.
QRResult qr_unitary(const ComplexMatrix& m);

// Extends k orthonormal columns (n x k, k <= n) to a full n x n unitary by
// Gram-Schmidt against the canonical basis. Deterministic.
ComplexMatrix complete_isometry(const ComplexMatrix& v);

}  // namespace qleak
