#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "qleak/state.hpp"

using namespace qleak;
using oracles::random_density;
using oracles::random_ket;
using oracles::random_unitary;

namespace {

SystemLayout qubits(std::initializer_list<const char*> labels) {
  std::vector<Subsystem> subs;
  for (const char* l : labels) subs.push_back({l, 2, false});
  return SystemLayout(subs);
}

DensityOperator random_state(Rng& rng, SystemLayout layout, std::size_t rank = 0) {
  ComplexMatrix m = random_density(rng, layout.total_dim(), rank);
  return DensityOperator::make(std::move(layout), std::move(m));
}

}  // namespace

TEST_CASE("layout invariants") {
  CHECK_THROWS_AS(SystemLayout({{"A", 2, false}, {"A", 2, false}}), Error);
  CHECK_THROWS_AS(SystemLayout({{"A", 1, false}}), Error);
  CHECK_THROWS_AS(SystemLayout({{"A", 32, false}, {"B", 32, false}}), Error);  // 1024 > 256
  SystemLayout l({{"A", 4, true}, {"B", 2, false}});
  CHECK(l.total_dim() == 8);
  CHECK(l.index_of("B") == 1);
  CHECK_THROWS_AS(l.index_of("C"), Error);
}

TEST_CASE("density operator validation") {
  SystemLayout l({{"A", 2, false}});
  ComplexMatrix ok(2, 2);
  ok.at(0, 0) = 0.5;
  ok.at(1, 1) = 0.5;
  CHECK_NOTHROW(DensityOperator::make(l, ok));

  ComplexMatrix bad_trace = ok;
  bad_trace.at(0, 0) = 0.7;
  CHECK_THROWS_AS(DensityOperator::make(l, bad_trace), Error);

  ComplexMatrix neg(2, 2);
  neg.at(0, 0) = 1.5;
  neg.at(1, 1) = -0.5;
  CHECK_THROWS_AS(DensityOperator::make(l, neg), Error);

  // classical flag forces diagonality
  SystemLayout lc({{"A", 2, true}});
  ComplexMatrix plus(2, 2);
  plus.at(0, 0) = plus.at(0, 1) = plus.at(1, 0) = plus.at(1, 1) = 0.5;
  CHECK_THROWS_AS(DensityOperator::make(lc, plus), Error);
  CHECK_NOTHROW(DensityOperator::make(SystemLayout({{"A", 2, false}}), plus));
}

TEST_CASE("partial trace of a product state returns the factor") {
  Rng rng(101);
  DensityOperator a = random_state(rng, SystemLayout({{"A", 3, false}}));
  DensityOperator b = random_state(rng, SystemLayout({{"B", 4, false}}));
  DensityOperator ab = DensityOperator::make(SystemLayout({{"A", 3, false}, {"B", 4, false}}),
                                             kron(a.matrix, b.matrix));
  DensityOperator ra = partial_trace(ab, {"A"});
  CHECK(max_abs(sub(ra.matrix, a.matrix)) < 1e-10);
  DensityOperator rb = partial_trace(ab, {"B"});
  CHECK(max_abs(sub(rb.matrix, b.matrix)) < 1e-10);
  CHECK_THROWS_AS(partial_trace(ab, {"C"}), Error);
}

TEST_CASE("partial trace of an EPR pair matches the index-sum oracle") {
  PureState phi = epr_pairs(1);
  DensityOperator rho = phi.to_density();
  DensityOperator ra = partial_trace(rho, {"A1"});
  ComplexMatrix oracle = oracles::naive_trace_out_second(rho.matrix, 2, 2);
  CHECK(max_abs(sub(ra.matrix, oracle)) < 1e-12);
  CHECK(std::abs(ra.matrix.at(0, 0) - Cx{0.5, 0.0}) < 1e-12);
  CHECK(std::abs(ra.matrix.at(1, 1) - Cx{0.5, 0.0}) < 1e-12);
  CHECK(std::abs(ra.matrix.at(0, 1)) < 1e-12);
}

TEST_CASE("partial trace keeps subsystem order and the classical marginal of a cq state") {
  Rng rng(55);
  std::vector<DensityOperator> cond;
  SystemLayout lb({{"B", 2, false}});
  for (int i = 0; i < 3; ++i) cond.push_back(random_state(rng, lb));
  std::vector<double> w{0.5, 0.3, 0.2};
  DensityOperator cq = make_cq("X", w, cond);
  DensityOperator marg = partial_trace(cq, {"X"});
  for (std::size_t a = 0; a < 3; ++a)
    CHECK(std::abs(marg.matrix.at(a, a) - Cx{w[a], 0.0}) < 1e-12);
}

TEST_CASE("make_cq shapes") {
  Rng rng(77);
  SystemLayout lb({{"B", 2, false}});
  DensityOperator b = random_state(rng, lb);

  // degenerate single-symbol distribution: |0><0| (x) rho
  DensityOperator single = make_cq("A", {1.0}, {b});
  CHECK(single.layout[0].dim == 2);
  CHECK(single.layout[0].classical);
  ComplexMatrix expect = kron([] {
        ComplexMatrix e(2, 2);
        e.at(0, 0) = 1.0;
        return e;
      }(),
      b.matrix);
  CHECK(max_abs(sub(single.matrix, expect)) < 1e-12);

  // uniform two bits of classical input, conditionals all maximally mixed
  ComplexMatrix half = scale(ComplexMatrix::identity(2), Cx{0.5, 0.0});
  DensityOperator mm = DensityOperator::make(lb, half);
  DensityOperator u2 = make_cq("A", {0.25, 0.25, 0.25, 0.25}, {mm, mm, mm, mm});
  CHECK(max_abs(sub(u2.matrix, scale(ComplexMatrix::identity(8), Cx{0.125, 0.0}))) < 1e-12);

  CHECK_THROWS_AS(make_cq("A", {0.7, 0.7}, {b, b}), Error);
}

TEST_CASE("epr_pairs values and marginals") {
  PureState one = epr_pairs(1);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(one.amplitudes[0] - Cx{r, 0.0}) < 1e-15);
  CHECK(std::abs(one.amplitudes[1]) < 1e-15);
  CHECK(std::abs(one.amplitudes[2]) < 1e-15);
  CHECK(std::abs(one.amplitudes[3] - Cx{r, 0.0}) < 1e-15);

  DensityOperator two = epr_pairs(2).to_density();
  DensityOperator alice = partial_trace(two, {"A1", "A2"});
  CHECK(max_abs(sub(alice.matrix, scale(ComplexMatrix::identity(4), Cx{0.25, 0.0}))) < 1e-12);
  DensityOperator bob = partial_trace(two, {"B1", "B2"});
  CHECK(max_abs(sub(bob.matrix, scale(ComplexMatrix::identity(4), Cx{0.25, 0.0}))) < 1e-12);

  CHECK_THROWS_AS(epr_pairs(5), Error);
}

TEST_CASE("purify: pure input, maximally mixed, random rank-3") {
  Rng rng(202);
  SystemLayout l({{"A", 4, false}});

  std::vector<Cx> ket = random_ket(rng, 4);
  PureState pure = PureState::make(l, ket);
  PureState back = purify(pure.to_density());
  CHECK(back.layout == l);  // trivial environment omitted
  Cx overlap{};
  for (std::size_t i = 0; i < 4; ++i) overlap += std::conj(back.amplitudes[i]) * ket[i];
  CHECK(std::abs(std::abs(overlap) - 1.0) < 1e-9);

  DensityOperator mm = DensityOperator::make(SystemLayout({{"A", 2, false}}),
                                             scale(ComplexMatrix::identity(2), Cx{0.5, 0.0}));
  PureState pm = purify(mm);
  CHECK(pm.layout.size() == 2);
  CHECK(pm.layout[1].dim == 2);
  DensityOperator rec = partial_trace(pm.to_density(), {"A"});
  CHECK(max_abs(sub(rec.matrix, mm.matrix)) < 1e-9);

  DensityOperator r3 = random_state(rng, l, 3);
  PureState p3 = purify(r3);
  CHECK(p3.layout.size() == 2);
  CHECK(p3.layout[1].dim == 3);
  DensityOperator rec3 = partial_trace(p3.to_density(), {"A"});
  CHECK(max_abs(sub(rec3.matrix, r3.matrix)) < 1e-9);
}

TEST_CASE("schmidt decomposition") {
  Rng rng(303);
  // product state -> rank 1
  std::vector<Cx> a = random_ket(rng, 2), b = random_ket(rng, 4);
  std::vector<Cx> prod(8);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) prod[i * 4 + j] = a[i] * b[j];
  SystemLayout l({{"A", 2, false}, {"B", 4, false}});
  PureState ps = PureState::make(l, prod);
  SchmidtDecomposition sd = schmidt(ps, {"A"});
  CHECK(sd.rank == 1);
  CHECK(sd.coefficients[0] == doctest::Approx(1.0).epsilon(1e-10));

  // EPR across the pair
  SchmidtDecomposition se = schmidt(epr_pairs(1), {"A1"});
  CHECK(se.rank == 2);
  CHECK(se.coefficients[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(se.coefficients[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

  // random 2x4: lambda^2 equal eigenvalues of the reduced state
  PureState r = PureState::make(l, random_ket(rng, 8));
  SchmidtDecomposition sr = schmidt(r, {"A"});
  DensityOperator red = partial_trace(r.to_density(), {"A"});
  auto ev = hermitian_eig(red.matrix);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(sr.coefficients[i] * sr.coefficients[i] ==
          doctest::Approx(ev.eigenvalues[i]).epsilon(0).scale(1).epsilon(1e-9));

  // reconstruction
  double sum2 = 0.0;
  for (double c : sr.coefficients) sum2 += c * c;
  CHECK(sum2 == doctest::Approx(1.0).epsilon(1e-9));
  std::vector<Cx> rec(8, Cx{});
  for (std::size_t k = 0; k < sr.coefficients.size(); ++k)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        rec[i * 4 + j] += sr.coefficients[k] * sr.left_vectors.at(i, k) * sr.right_vectors.at(j, k);
  double err = 0.0;
  for (std::size_t i = 0; i < 8; ++i) err = std::max(err, std::abs(rec[i] - r.amplitudes[i]));
  CHECK(err < 1e-8);

  CHECK_THROWS_AS(schmidt(r, {"A", "B"}), Error);
  CHECK_THROWS_AS(schmidt(r, {}), Error);
}

TEST_CASE("schmidt coefficients across a cut equal singular values of the reshaped amplitudes") {
  Rng rng(404);
  SystemLayout l = qubits({"A1", "B1", "A2"});
  PureState psi = PureState::make(l, random_ket(rng, 8));
  SchmidtDecomposition sd = schmidt(psi, {"A1", "A2"});
  // reshape with the cut (A1, A2) slowest: amplitudes permuted to A1 A2 B1
  std::vector<Cx> v = permute_vector(psi.amplitudes, {2, 2, 2}, {0, 2, 1});
  ComplexMatrix m(4, 2);
  std::copy(v.begin(), v.end(), m.a.begin());
  auto sv = svd(m);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(sd.coefficients[i] == doctest::Approx(sv.singular[i]).epsilon(0).scale(1).epsilon(1e-10));
}

TEST_CASE("fidelity: identical, orthogonal, pure-pair inner product") {
  Rng rng(505);
  SystemLayout l({{"A", 4, false}});
  DensityOperator rho = random_state(rng, l);
  CHECK(fidelity(rho, rho) == doctest::Approx(1.0).epsilon(1e-9));

  ComplexMatrix p0(2, 2), p1(2, 2);
  p0.at(0, 0) = 1.0;
  p1.at(1, 1) = 1.0;
  SystemLayout lq({{"A", 2, false}});
  CHECK(fidelity(DensityOperator::make(lq, p0), DensityOperator::make(lq, p1)) ==
        doctest::Approx(0.0).epsilon(0).scale(1).epsilon(1e-9));

  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Cx> u = random_ket(rng, 4), v = random_ket(rng, 4);
    Cx inner{};
    for (std::size_t i = 0; i < 4; ++i) inner += std::conj(u[i]) * v[i];
    const double f = fidelity(PureState::make(l, u).to_density(), PureState::make(l, v).to_density());
    CHECK(f == doctest::Approx(std::abs(inner)).epsilon(0).scale(1).epsilon(1e-9));
  }
}

TEST_CASE("Fuchs-van de Graaf sandwich and purified distance") {
  Rng rng(606);
  SystemLayout l({{"A", 4, false}});
  DensityOperator rho = random_state(rng, l);
  CHECK(purified_distance(rho, rho) < 1e-7);

  for (int trial = 0; trial < 50; ++trial) {
    DensityOperator x = random_state(rng, l);
    DensityOperator y = random_state(rng, l);
    const double f = fidelity(x, y);
    const double td = trace_distance(x, y);
    const double pd = purified_distance(x, y);
    CHECK(1.0 - f <= td + 1e-8);
    CHECK(td <= std::sqrt(1.0 - f * f) + 1e-8);
    CHECK(pd == doctest::Approx(std::sqrt(std::max(0.0, 1.0 - f * f))).epsilon(0).scale(1).epsilon(1e-10));
  }
}

TEST_CASE("uhlmann_extension") {
  Rng rng(707);
  SystemLayout lab({{"A", 2, false}, {"B", 3, false}});
  DensityOperator rho_ab = random_state(rng, lab);
  DensityOperator rho_a = partial_trace(rho_ab, {"A"});

  // zero-epsilon case: extending the exact marginal reaches fidelity ~1
  DensityOperator ext0 = uhlmann_extension(rho_ab, rho_a);
  CHECK(max_abs(sub(partial_trace(ext0, {"A"}).matrix, rho_a.matrix)) < 1e-8);
  CHECK(fidelity(rho_ab, ext0) >= 1.0 - 1e-8);

  // pure rho_AB
  PureState psi = PureState::make(lab, random_ket(rng, 6));
  DensityOperator pure_ab = psi.to_density();
  DensityOperator ext_p = uhlmann_extension(pure_ab, partial_trace(pure_ab, {"A"}));
  CHECK(fidelity(pure_ab, ext_p) >= 1.0 - 1e-8);

  // perturbed marginals never lose more than 1e-8 of fidelity
  for (int trial = 0; trial < 10; ++trial) {
    DensityOperator ab = random_state(rng, lab);
    ComplexMatrix pert = random_density(rng, 2);
    ComplexMatrix mix = add(scale(partial_trace(ab, {"A"}).matrix, Cx{0.9, 0.0}),
                            scale(pert, Cx{0.1, 0.0}));
    DensityOperator sigma_a = DensityOperator::make(SystemLayout({{"A", 2, false}}), mix);
    DensityOperator ext = uhlmann_extension(ab, sigma_a);
    CHECK(max_abs(sub(partial_trace(ext, {"A"}).matrix, sigma_a.matrix)) < 1e-8);
    const double achieved = fidelity(ab, ext);
    const double marginal = fidelity(partial_trace(ab, {"A"}), sigma_a);
    CHECK(achieved >= marginal - 1e-8);
  }
}

TEST_CASE("lo attack unitary meets the sqrt(eps(2-eps)) bound") {
  Rng rng(808);
  SystemLayout lab({{"A", 4, false}, {"B", 4, false}});

  // identical states: distance 0
  PureState phi = PureState::make(lab, random_ket(rng, 16));
  ComplexMatrix u0 = lo_attack_unitary(phi, phi, {"B"});
  PureState corrected0 = apply_local_unitary(phi, u0, {"B"});
  CHECK(trace_distance(phi.to_density(), corrected0.to_density()) < 1e-8);

  // local-unitary equivalent states: perfect correction
  ComplexMatrix v = random_unitary(rng, 4);
  PureState psi_lu = apply_local_unitary(phi, v, {"B"});
  ComplexMatrix u1 = lo_attack_unitary(phi, psi_lu, {"B"});
  PureState corrected1 = apply_local_unitary(psi_lu, u1, {"B"});
  CHECK(trace_distance(phi.to_density(), corrected1.to_density()) < 1e-8);

  // random pairs: bound holds, and the amplitude-norm reading is looser
  for (int trial = 0; trial < 40; ++trial) {
    PureState x = PureState::make(lab, random_ket(rng, 16));
    PureState y = PureState::make(lab, random_ket(rng, 16));
    const double eps = trace_distance(partial_trace(x.to_density(), {"A"}),
                                      partial_trace(y.to_density(), {"A"}));
    ComplexMatrix u = lo_attack_unitary(x, y, {"B"});
    PureState yc = apply_local_unitary(y, u, {"B"});
    const double achieved = trace_distance(x.to_density(), yc.to_density());
    CHECK(achieved <= std::sqrt(eps * (2.0 - eps)) + 1e-8);

    // phase-optimized amplitude distance <= density-operator distance
    Cx overlap{};
    for (std::size_t i = 0; i < 16; ++i) overlap += std::conj(x.amplitudes[i]) * yc.amplitudes[i];
    const double amp = 0.5 * std::sqrt(std::max(0.0, 2.0 - 2.0 * std::abs(overlap)));
    CHECK(amp <= achieved + 1e-9);
  }
}
