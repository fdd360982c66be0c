#include "qleak/kernels.hpp"

#ifdef QLEAK_HAVE_AVX2

#include <immintrin.h>

#include <cstring>

// AVX2+FMA kernels for interleaved complex<double>. One __m256d register
// holds two complex values [re0, im0, re1, im1]. Complex multiply uses the
// addsub trick:
//   acc + a*b = addsub(fma(Re a, b, acc), (Im a) * swap(b))
// where swap exchanges re/im within each complex lane. Results differ from
// the scalar kernels only by rounding; tests compare at 1e-13 relative.

namespace qleak::kernels {
namespace {

inline __m256d swap_ri(__m256d v) { return _mm256_permute_pd(v, 0b0101); }
inline __m256d dup_re(__m256d v) { return _mm256_permute_pd(v, 0b0000); }
inline __m256d dup_im(__m256d v) { return _mm256_permute_pd(v, 0b1111); }
inline __m256d neg(__m256d v) { return _mm256_xor_pd(v, _mm256_set1_pd(-0.0)); }

// acc += a * b for broadcast scalar a = (ar, ai)
inline __m256d cmadd(__m256d ar, __m256d ai, __m256d b, __m256d acc) {
  const __m256d t1 = _mm256_fmadd_pd(ar, b, acc);
  const __m256d t2 = _mm256_mul_pd(ai, swap_ri(b));
  return _mm256_addsub_pd(t1, t2);
}

void gemm_acc_avx2(const Cx* a, const Cx* b, Cx* c, std::size_t m, std::size_t k, std::size_t n) {
  const std::size_t n2 = n & ~std::size_t{1};
  for (std::size_t i = 0; i < m; ++i) {
    const Cx* arow = a + i * k;
    Cx* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Cx aip = arow[p];
      if (aip == Cx{}) continue;
      const __m256d ar = _mm256_set1_pd(aip.real());
      const __m256d ai = _mm256_set1_pd(aip.imag());
      const double* brow = reinterpret_cast<const double*>(b + p * n);
      double* crd = reinterpret_cast<double*>(crow);
      std::size_t j = 0;
      for (; j + 4 <= n2; j += 4) {
        __m256d b0 = _mm256_loadu_pd(brow + 2 * j);
        __m256d b1 = _mm256_loadu_pd(brow + 2 * j + 4);
        __m256d c0 = _mm256_loadu_pd(crd + 2 * j);
        __m256d c1 = _mm256_loadu_pd(crd + 2 * j + 4);
        _mm256_storeu_pd(crd + 2 * j, cmadd(ar, ai, b0, c0));
        _mm256_storeu_pd(crd + 2 * j + 4, cmadd(ar, ai, b1, c1));
      }
      for (; j < n2; j += 2) {
        __m256d b0 = _mm256_loadu_pd(brow + 2 * j);
        __m256d c0 = _mm256_loadu_pd(crd + 2 * j);
        _mm256_storeu_pd(crd + 2 * j, cmadd(ar, ai, b0, c0));
      }
      if (j < n) crow[j] += aip * (b + p * n)[j];
    }
  }
}

void gemm_avx2(const Cx* a, const Cx* b, Cx* c, std::size_t m, std::size_t k, std::size_t n) {
  std::memset(static_cast<void*>(c), 0, m * n * sizeof(Cx));
  gemm_acc_avx2(a, b, c, m, k, n);
}

void axpy_avx2(std::size_t n, Cx alpha, const Cx* x, Cx* y) {
  const __m256d ar = _mm256_set1_pd(alpha.real());
  const __m256d ai = _mm256_set1_pd(alpha.imag());
  const double* xd = reinterpret_cast<const double*>(x);
  double* yd = reinterpret_cast<double*>(y);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    __m256d yv = _mm256_loadu_pd(yd + 2 * i);
    _mm256_storeu_pd(yd + 2 * i, cmadd(ar, ai, xv, yv));
  }
  if (i < n) y[i] += alpha * x[i];
}

void axpyc_avx2(std::size_t n, Cx alpha, const Cx* x, Cx* y) {
  // y += alpha * conj(x):
  //   re += ar*xr + ai*xi,  im += ai*xr - ar*xi
  const __m256d ai = _mm256_set1_pd(alpha.imag());
  const __m256d nar = _mm256_set1_pd(-alpha.real());
  const double* xd = reinterpret_cast<const double*>(x);
  double* yd = reinterpret_cast<double*>(y);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    __m256d yv = _mm256_loadu_pd(yd + 2 * i);
    __m256d t1 = _mm256_fmadd_pd(ai, swap_ri(xv), yv);
    __m256d t2 = _mm256_mul_pd(nar, xv);
    _mm256_storeu_pd(yd + 2 * i, _mm256_addsub_pd(t1, t2));
  }
  if (i < n) y[i] += alpha * std::conj(x[i]);
}

void scal_avx2(std::size_t n, Cx alpha, Cx* x) {
  const __m256d ar = _mm256_set1_pd(alpha.real());
  const __m256d ai = _mm256_set1_pd(alpha.imag());
  double* xd = reinterpret_cast<double*>(x);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    __m256d t1 = _mm256_mul_pd(ar, xv);
    __m256d t2 = _mm256_mul_pd(ai, swap_ri(xv));
    _mm256_storeu_pd(xd + 2 * i, _mm256_addsub_pd(t1, t2));
  }
  if (i < n) x[i] *= alpha;
}

Cx dotc_avx2(std::size_t n, const Cx* x, const Cx* y) {
  __m256d acc = _mm256_setzero_pd();
  const double* xd = reinterpret_cast<const double*>(x);
  const double* yd = reinterpret_cast<const double*>(y);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    __m256d yv = _mm256_loadu_pd(yd + 2 * i);
    __m256d t1 = _mm256_fmadd_pd(dup_re(xv), yv, acc);
    __m256d t2 = _mm256_mul_pd(dup_im(xv), swap_ri(yv));
    acc = _mm256_addsub_pd(t1, neg(t2));
  }
  alignas(32) double buf[4];
  _mm256_store_pd(buf, acc);
  Cx out{buf[0] + buf[2], buf[1] + buf[3]};
  if (i < n) out += std::conj(x[i]) * y[i];
  return out;
}

Cx dotu_avx2(std::size_t n, const Cx* x, const Cx* y) {
  __m256d acc = _mm256_setzero_pd();
  const double* xd = reinterpret_cast<const double*>(x);
  const double* yd = reinterpret_cast<const double*>(y);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    __m256d yv = _mm256_loadu_pd(yd + 2 * i);
    __m256d t1 = _mm256_fmadd_pd(dup_re(xv), yv, acc);
    __m256d t2 = _mm256_mul_pd(dup_im(xv), swap_ri(yv));
    acc = _mm256_addsub_pd(t1, t2);
  }
  alignas(32) double buf[4];
  _mm256_store_pd(buf, acc);
  Cx out{buf[0] + buf[2], buf[1] + buf[3]};
  if (i < n) out += x[i] * y[i];
  return out;
}

double nrm2sq_avx2(std::size_t n, const Cx* x) {
  __m256d acc = _mm256_setzero_pd();
  const double* xd = reinterpret_cast<const double*>(x);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    acc = _mm256_fmadd_pd(xv, xv, acc);
  }
  alignas(32) double buf[4];
  _mm256_store_pd(buf, acc);
  double out = buf[0] + buf[1] + buf[2] + buf[3];
  if (i < n) out += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  return out;
}

void rot_avx2(std::size_t n, Cx* x, Cx* y, double c, double s) {
  // Real rotation acts identically on re/im parts: operate on 2n doubles.
  const __m256d cv = _mm256_set1_pd(c);
  const __m256d sv = _mm256_set1_pd(s);
  double* xd = reinterpret_cast<double*>(x);
  double* yd = reinterpret_cast<double*>(y);
  const std::size_t nd = 2 * n;
  std::size_t i = 0;
  for (; i + 4 <= nd; i += 4) {
    __m256d xv = _mm256_loadu_pd(xd + i);
    __m256d yv = _mm256_loadu_pd(yd + i);
    _mm256_storeu_pd(xd + i, _mm256_fmadd_pd(cv, xv, _mm256_mul_pd(sv, yv)));
    _mm256_storeu_pd(yd + i, _mm256_fmsub_pd(cv, yv, _mm256_mul_pd(sv, xv)));
  }
  for (; i < nd; ++i) {
    const double xi = xd[i];
    const double yi = yd[i];
    xd[i] = c * xi + s * yi;
    yd[i] = c * yi - s * xi;
  }
}

}  // namespace

const Ops* avx2_ops() {
  static const Ops ops = {gemm_avx2, gemm_acc_avx2, axpy_avx2,   axpyc_avx2, scal_avx2,
                          dotc_avx2, dotu_avx2,     nrm2sq_avx2, rot_avx2,   "avx2"};
  return &ops;
}

}  // namespace qleak::kernels

#else

namespace qleak::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace qleak::kernels

#endif  // QLEAK_HAVE_AVX2
