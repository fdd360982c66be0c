#include "qleak/kernels.hpp"

#include <cstring>

// Scalar reference kernels. These are the ground truth the AVX2 variants are
// equivalence-tested against; keep them simple.

namespace qleak::kernels {
namespace {

void gemm_scalar(const Cx* a, const Cx* b, Cx* c, std::size_t m, std::size_t k, std::size_t n) {
  std::memset(static_cast<void*>(c), 0, m * n * sizeof(Cx));
  for (std::size_t i = 0; i < m; ++i) {
    const Cx* arow = a + i * k;
    Cx* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Cx aip = arow[p];
      if (aip == Cx{}) continue;
      const Cx* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void gemm_acc_scalar(const Cx* a, const Cx* b, Cx* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const Cx* arow = a + i * k;
    Cx* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Cx aip = arow[p];
      if (aip == Cx{}) continue;
      const Cx* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void axpy_scalar(std::size_t n, Cx alpha, const Cx* x, Cx* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpyc_scalar(std::size_t n, Cx alpha, const Cx* x, Cx* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * std::conj(x[i]);
}

void scal_scalar(std::size_t n, Cx alpha, Cx* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

Cx dotc_scalar(std::size_t n, const Cx* x, const Cx* y) {
  Cx acc{};
  for (std::size_t i = 0; i < n; ++i) acc += std::conj(x[i]) * y[i];
  return acc;
}

Cx dotu_scalar(std::size_t n, const Cx* x, const Cx* y) {
  Cx acc{};
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double nrm2sq_scalar(std::size_t n, const Cx* x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  return acc;
}

void rot_scalar(std::size_t n, Cx* x, Cx* y, double c, double s) {
  for (std::size_t i = 0; i < n; ++i) {
    const Cx xi = x[i];
    const Cx yi = y[i];
    x[i] = c * xi + s * yi;
    y[i] = c * yi - s * xi;
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {gemm_scalar, gemm_acc_scalar, axpy_scalar,   axpyc_scalar, scal_scalar,
                          dotc_scalar, dotu_scalar,     nrm2sq_scalar, rot_scalar,   "scalar"};
  return ops;
}

}  // namespace qleak::kernels
