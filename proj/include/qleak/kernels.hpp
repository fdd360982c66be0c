#pragma once

#include <complex>
#include <cstddef>

// Low-level dense complex kernels. Every arithmetic inner loop in the library
// funnels through this table so the scalar reference path and the AVX2 path
// stay interchangeable. The active implementation is picked once at startup:
// AVX2+FMA when the CPU supports it, scalar otherwise; the environment
// variable QLEAK_KERNELS=scalar|avx2 forces a choice (used by the
// equivalence tests).

namespace qleak::kernels {

using Cx = std::complex<double>;

struct Ops {
  // c[m x n] = a[m x k] * b[k x n], row-major, c fully overwritten.
  void (*gemm)(const Cx* a, const Cx* b, Cx* c, std::size_t m, std::size_t k, std::size_t n);
  // c += a * b
  void (*gemm_acc)(const Cx* a, const Cx* b, Cx* c, std::size_t m, std::size_t k, std::size_t n);
  // y += alpha * x
  void (*axpy)(std::size_t n, Cx alpha, const Cx* x, Cx* y);
  // y += alpha * conj(x)
  void (*axpyc)(std::size_t n, Cx alpha, const Cx* x, Cx* y);
  // x *= alpha
  void (*scal)(std::size_t n, Cx alpha, Cx* x);
  // sum_i conj(x[i]) * y[i]
  Cx (*dotc)(std::size_t n, const Cx* x, const Cx* y);
  // sum_i x[i] * y[i]
  Cx (*dotu)(std::size_t n, const Cx* x, const Cx* y);
  // sum_i |x[i]|^2
  double (*nrm2sq)(std::size_t n, const Cx* x);
  // real plane rotation applied to complex vectors:
  // (x[i], y[i]) <- (c*x[i] + s*y[i], c*y[i] - s*x[i])
  void (*rot)(std::size_t n, Cx* x, Cx* y, double c, double s);
  const char* name;
};

const Ops& scalar_ops();

// Null when the binary was built without AVX2 support or the CPU lacks it.
const Ops* avx2_ops();

bool cpu_has_avx2_fma();

// Runtime-selected table (see above). Stable for the process lifetime.
const Ops& active();

}  // namespace qleak::kernels
