#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "qleak/channel.hpp"
#include "qleak/minentropy.hpp"

using namespace qleak;
using oracles::random_density;
using oracles::random_unitary;

namespace {

DensityOperator cc_state(const std::vector<std::vector<double>>& joint) {
  const std::size_t a = joint.size();
  const std::size_t b = joint.front().size();
  ComplexMatrix m(a * b, a * b);
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j) m.at(i * b + j, i * b + j) = joint[i][j];
  return DensityOperator::make(SystemLayout({{"A", a, true}, {"B", b, true}}), std::move(m));
}

std::vector<std::vector<double>> random_joint(Rng& rng, std::size_t a, std::size_t b) {
  std::vector<std::vector<double>> t(a, std::vector<double>(b));
  double sum = 0.0;
  for (auto& row : t)
    for (double& v : row) {
      v = -std::log(std::max(rng.uniform(), 1e-300));
      sum += v;
    }
  for (auto& row : t)
    for (double& v : row) v /= sum;
  return t;
}

double closed_form_cc(const std::vector<std::vector<double>>& joint) {
  double acc = 0.0;
  for (std::size_t b = 0; b < joint.front().size(); ++b) {
    double mx = 0.0;
    for (const auto& row : joint) mx = std::max(mx, row[b]);
    acc += mx;
  }
  return -std::log2(acc);
}

}  // namespace

TEST_CASE("hmin of uniform (x) rho_B is log2 dA with sigma* = rho_B/dA") {
  Rng rng(1800);
  for (std::size_t da : {2u, 4u}) {
    for (std::size_t db : {2u, 3u}) {
      ComplexMatrix rho_b = random_density(rng, db);
      ComplexMatrix rho = kron(scale(ComplexMatrix::identity(da), Cx{1.0 / da, 0.0}), rho_b);
      EntropySolution sol = solve_hmin_sdp(rho, da, db);
      CHECK(sol.hmin == doctest::Approx(std::log2(double(da))).epsilon(0).scale(1).epsilon(1e-7));
      CHECK(sol.gap <= 1e-6);
      CHECK(max_abs(sub(sol.primal_sigma, scale(rho_b, Cx{1.0 / da, 0.0}))) < 1e-5);
    }
  }
}

TEST_CASE("hmin of one EPR pair is -1, with the textbook witness pair") {
  PureState phi = epr_pairs(1);
  DensityOperator rho = phi.to_density();
  EntropySolution sol = hmin(rho, {"A1"}, {"B1"});
  CHECK(sol.hmin == doctest::Approx(-1.0).epsilon(0).scale(1).epsilon(1e-7));
  CHECK(sol.gap <= 1e-6);
  CHECK(sol.primal_bound == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(sol.dual_bound == doctest::Approx(2.0).epsilon(1e-6));

  // explicit witnesses: sigma = id_B (trace 2), X = 2 |Phi+><Phi+|
  ComplexMatrix s = sub(ComplexMatrix::identity(4), rho.matrix);
  CHECK(min_eigenvalue(s) > -1e-12);
  ComplexMatrix x = scale(rho.matrix, Cx{2.0, 0.0});
  ComplexMatrix tra(2, 2);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) tra.at(i, j) += x.at(a * 2 + i, a * 2 + j);
  CHECK(max_abs(sub(tra, ComplexMatrix::identity(2))) < 1e-12);
  CHECK(trace(matmul(rho.matrix, x)).real() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("hmin matches the classical-classical closed form") {
  Rng rng(1801);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t a = 2 + trial % 3;
    const std::size_t b = 2 + (trial / 3) % 3;
    auto joint = random_joint(rng, a, b);
    DensityOperator rho = cc_state(joint);
    EntropySolution sol = hmin(rho, {"A"}, {"B"});
    CHECK(std::fabs(sol.hmin - closed_form_cc(joint)) < 1e-7);
    CHECK(sol.gap <= 1e-6);
  }
}

TEST_CASE("hmin_cc closed-form examples") {
  CHECK(hmin_cc({{0.25, 0.25}, {0.25, 0.25}}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hmin_cc({{1.0 / 6, 1.0 / 6, 1.0 / 6}, {1.0 / 6, 1.0 / 6, 1.0 / 6}}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hmin_cc({{0.5, 0.0}, {0.0, 0.5}}) == doctest::Approx(0.0).epsilon(0).scale(1).epsilon(1e-12));
  CHECK(hmin_cc({{0.4, 0.1}, {0.2, 0.3}}) == doctest::Approx(-std::log2(0.7)).epsilon(1e-12));
  CHECK_THROWS_AS(hmin_cc({{0.5, 0.2}}), Error);
  CHECK_THROWS_AS(hmin_cc({{-0.1, 1.1}}), Error);
}

TEST_CASE("hmin matches -log2 lambda_max on product states") {
  Rng rng(1802);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t da = 2 + trial % 3;
    const std::size_t db = 2 + (trial / 2) % 3;
    ComplexMatrix rho_a = random_density(rng, da);
    ComplexMatrix rho_b = random_density(rng, db);
    ComplexMatrix rho = kron(rho_a, rho_b);
    EntropySolution sol = solve_hmin_sdp(rho, da, db);
    const double expect = -std::log2(hermitian_eig(rho_a).eigenvalues.front());
    CHECK(std::fabs(sol.hmin - expect) < 1e-7);
  }
}

TEST_CASE("pguess_cq: examples and the Helstrom closed form") {
  // orthogonal conditionals, uniform prior: perfect guessing
  ComplexMatrix e0(2, 2), e1(2, 2);
  e0.at(0, 0) = 1.0;
  e1.at(1, 1) = 1.0;
  SystemLayout lb({{"B", 2, false}});
  DensityOperator rho_perfect = make_cq(
      "A", {0.5, 0.5}, {DensityOperator::make(lb, e0), DensityOperator::make(lb, e1)});
  CHECK(pguess_cq(rho_perfect, "A", {"B"}) == doctest::Approx(1.0).epsilon(1e-7));

  // identical conditionals: no information, pguess = 1/dA
  ComplexMatrix half = scale(ComplexMatrix::identity(2), Cx{0.5, 0.0});
  DensityOperator mm = DensityOperator::make(lb, half);
  DensityOperator rho_none = make_cq("A", {0.25, 0.25, 0.25, 0.25}, {mm, mm, mm, mm});
  CHECK(pguess_cq(rho_none, "A", {"B"}) == doctest::Approx(0.25).epsilon(1e-7));

  // |0> vs |+>: 1/2 + sqrt(2)/4
  ComplexMatrix plus(2, 2);
  plus.at(0, 0) = plus.at(0, 1) = plus.at(1, 0) = plus.at(1, 1) = 0.5;
  DensityOperator rho_hel = make_cq(
      "A", {0.5, 0.5}, {DensityOperator::make(lb, e0), DensityOperator::make(lb, plus)});
  CHECK(pguess_cq(rho_hel, "A", {"B"}) ==
        doctest::Approx(0.5 + std::sqrt(2.0) / 4.0).epsilon(1e-7));

  // classical flag required
  DensityOperator notcq = DensityOperator::make(
      SystemLayout({{"A", 2, false}, {"B", 2, false}}), kron(half, half));
  CHECK_THROWS_AS(pguess_cq(notcq, "A", {"B"}), Error);
}

TEST_CASE("hmin agrees with Helstrom on random binary cq states") {
  Rng rng(1803);
  SystemLayout lb({{"B", 3, false}});
  for (int trial = 0; trial < 10; ++trial) {
    const double p0 = 0.2 + 0.6 * rng.uniform();
    DensityOperator c0 = DensityOperator::make(lb, random_density(rng, 3));
    DensityOperator c1 = DensityOperator::make(lb, random_density(rng, 3));
    DensityOperator rho = make_cq("A", {p0, 1.0 - p0}, {c0, c1});
    ComplexMatrix diff = sub(scale(c0.matrix, Cx{p0, 0.0}), scale(c1.matrix, Cx{1.0 - p0, 0.0}));
    const double helstrom = 0.5 + trace_norm(diff);
    EntropySolution sol = hmin(rho, {"A"}, {"B"});
    CHECK(std::fabs(sol.hmin - (-std::log2(helstrom))) < 1e-7);
  }
}

TEST_CASE("duality certificate and range on random states") {
  Rng rng(1804);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t da = 2 + trial % 2;
    const std::size_t db = 2 + (trial / 2) % 3;
    ComplexMatrix rho = random_density(rng, da * db);
    EntropySolution sol = solve_hmin_sdp(rho, da, db);
    const double v = std::pow(2.0, -sol.hmin);
    CHECK(sol.dual_bound <= v * (1.0 + 1e-9) + 1e-12);
    CHECK(v <= sol.primal_bound * (1.0 + 1e-9) + 1e-12);
    CHECK(sol.gap <= 1e-6);
    CHECK(sol.hmin >= -std::log2(double(da)) - 1e-9);
    CHECK(sol.hmin <= std::log2(double(da)) + 1e-9);
    // witness feasibility as stated
    ComplexMatrix s = sub(kron(ComplexMatrix::identity(da), sol.primal_sigma), rho);
    CHECK(min_eigenvalue(s) >= -1e-7);
    CHECK(min_eigenvalue(sol.dual_x) >= -1e-9);
    ComplexMatrix tra(db, db);
    for (std::size_t a = 0; a < da; ++a)
      for (std::size_t i = 0; i < db; ++i)
        for (std::size_t j = 0; j < db; ++j) tra.at(i, j) += sol.dual_x.at(a * db + i, a * db + j);
    CHECK(max_abs(sub(tra, ComplexMatrix::identity(db))) <= 1e-7);
  }
}

TEST_CASE("data processing: channels on B cannot decrease hmin") {
  Rng rng(1805);
  SystemLayout l({{"A", 2, false}, {"B", 2, false}});
  for (int trial = 0; trial < 8; ++trial) {
    DensityOperator rho = DensityOperator::make(l, random_density(rng, 4));
    const double before = hmin(rho, {"A"}, {"B"}).hmin;
    // random unital-ish channel: two Kraus from a split unitary
    ComplexMatrix u = random_unitary(rng, 4);
    ComplexMatrix e0(2, 2), e1(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        e0.at(i, j) = u.at(i, j);
        e1.at(i, j) = u.at(i + 2, j);
      }
    DensityOperator mapped = apply(KrausChannel::make({e0, e1}), rho, {"B"});
    const double after = hmin(mapped, {"A"}, {"B"}).hmin;
    CHECK(after >= before - 1e-6);
  }
}

TEST_CASE("empty conditioning system and smooth placeholder") {
  Rng rng(1806);
  ComplexMatrix rho_a = random_density(rng, 4);
  DensityOperator rho = DensityOperator::make(SystemLayout({{"A", 4, false}}), rho_a);
  EntropySolution sol = hmin(rho, {"A"}, {});
  const double expect = -std::log2(hermitian_eig(rho_a).eigenvalues.front());
  CHECK(std::fabs(sol.hmin - expect) < 1e-7);

  CHECK_THROWS_AS(hmin_smooth(rho, {"A"}, {}, 0.1), Error);
  CHECK_NOTHROW(hmin_smooth(rho, {"A"}, {}, 0.0));

  CHECK_THROWS_AS(hmin(rho, {}, {"A"}), Error);
  CHECK_THROWS_AS(hmin(rho, {"A"}, {"A"}), Error);
}
