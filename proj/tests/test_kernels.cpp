#include <vector>

#include "doctest.h"
#include "qleak/kernels.hpp"
#include "qleak/rng.hpp"

using qleak::Rng;
using namespace qleak::kernels;

namespace {

std::vector<Cx> random_vec(Rng& rng, std::size_t n) {
  std::vector<Cx> v(n);
  for (auto& z : v) z = Cx{rng.gauss(), rng.gauss()};
  return v;
}

double maxdiff(const std::vector<Cx>& a, const std::vector<Cx>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("scalar gemm matches a naive triple loop") {
  Rng rng(11);
  for (std::size_t m : {1u, 3u, 7u}) {
    for (std::size_t k : {1u, 5u}) {
      for (std::size_t n : {2u, 9u}) {
        auto a = random_vec(rng, m * k);
        auto b = random_vec(rng, k * n);
        std::vector<Cx> c(m * n), ref(m * n);
        scalar_ops().gemm(a.data(), b.data(), c.data(), m, k, n);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            Cx s{};
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            ref[i * n + j] = s;
          }
        CHECK(maxdiff(c, ref) < 1e-12);
      }
    }
  }
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const Ops* simd = avx2_ops();
  if (simd == nullptr || !cpu_has_avx2_fma()) {
    MESSAGE("AVX2 unavailable; equivalence suite skipped");
    return;
  }
  const Ops& ref = scalar_ops();
  Rng rng(1234);

  for (std::size_t n : {1u, 2u, 3u, 8u, 17u, 64u, 255u}) {
    auto x = random_vec(rng, n);
    auto y = random_vec(rng, n);
    const Cx alpha{rng.gauss(), rng.gauss()};

    SUBCASE("") {}  // keep loop variables alive per doctest run

    {
      auto y1 = y, y2 = y;
      ref.axpy(n, alpha, x.data(), y1.data());
      simd->axpy(n, alpha, x.data(), y2.data());
      CHECK(maxdiff(y1, y2) < 1e-12);
    }
    {
      auto y1 = y, y2 = y;
      ref.axpyc(n, alpha, x.data(), y1.data());
      simd->axpyc(n, alpha, x.data(), y2.data());
      CHECK(maxdiff(y1, y2) < 1e-12);
    }
    {
      auto x1 = x, x2 = x;
      ref.scal(n, alpha, x1.data());
      simd->scal(n, alpha, x2.data());
      CHECK(maxdiff(x1, x2) < 1e-12);
    }
    CHECK(std::abs(ref.dotc(n, x.data(), y.data()) - simd->dotc(n, x.data(), y.data())) <
          1e-11 * (1.0 + static_cast<double>(n)));
    CHECK(std::abs(ref.dotu(n, x.data(), y.data()) - simd->dotu(n, x.data(), y.data())) <
          1e-11 * (1.0 + static_cast<double>(n)));
    CHECK(ref.nrm2sq(n, x.data()) ==
          doctest::Approx(simd->nrm2sq(n, x.data())).epsilon(1e-12));
    {
      auto x1 = x, x2 = x, y1 = y, y2 = y;
      const double c = 0.8, s = 0.6;
      ref.rot(n, x1.data(), y1.data(), c, s);
      simd->rot(n, x2.data(), y2.data(), c, s);
      CHECK(maxdiff(x1, x2) < 1e-13);
      CHECK(maxdiff(y1, y2) < 1e-13);
    }
  }

  for (std::size_t m : {1u, 4u, 13u}) {
    for (std::size_t k : {1u, 6u, 32u}) {
      for (std::size_t n : {1u, 2u, 5u, 31u}) {
        auto a = random_vec(rng, m * k);
        auto b = random_vec(rng, k * n);
        std::vector<Cx> c1(m * n), c2(m * n);
        ref.gemm(a.data(), b.data(), c1.data(), m, k, n);
        simd->gemm(a.data(), b.data(), c2.data(), m, k, n);
        CHECK(maxdiff(c1, c2) < 1e-11 * (1.0 + static_cast<double>(k)));
        auto acc1 = c1, acc2 = c2;
        ref.gemm_acc(a.data(), b.data(), acc1.data(), m, k, n);
        simd->gemm_acc(a.data(), b.data(), acc2.data(), m, k, n);
        CHECK(maxdiff(acc1, acc2) < 1e-11 * (1.0 + static_cast<double>(k)));
      }
    }
  }
}

TEST_CASE("active dispatch returns a usable table") {
  const Ops& ops = active();
  CHECK(ops.gemm != nullptr);
  CHECK((std::string_view(ops.name) == "scalar" || std::string_view(ops.name) == "avx2"));
}
