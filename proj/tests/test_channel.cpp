#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "qleak/channel.hpp"

using namespace qleak;
using oracles::random_density;
using oracles::random_unitary;

namespace {

DensityOperator random_state(Rng& rng, SystemLayout layout) {
  return DensityOperator::make(layout, random_density(rng, layout.total_dim()));
}

KrausChannel depolarizing(std::size_t d) {
  std::vector<ComplexMatrix> ops;
  const double r = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      ComplexMatrix e(d, d);
      e.at(i, j) = r;
      ops.push_back(std::move(e));
    }
  return KrausChannel::make(std::move(ops));
}

// Direct Kraus application on a bare matrix, used as the dilation oracle.
ComplexMatrix kraus_apply_oracle(const KrausChannel& ch, const ComplexMatrix& m) {
  ComplexMatrix out(ch.output_dim, ch.output_dim);
  for (const ComplexMatrix& e : ch.kraus)
    out = add(out, matmul(matmul(e, m), adjoint(e)));
  return out;
}

}  // namespace

TEST_CASE("channel construction validates CPTP") {
  ComplexMatrix half = scale(ComplexMatrix::identity(2), Cx{0.5, 0.0});
  CHECK_THROWS_AS(KrausChannel::make({half}), Error);
  CHECK_NOTHROW(KrausChannel::identity(3));
  CHECK(standard_gate("H").is_unitary());
  CHECK(!standard_gate("MEASURE").is_unitary());
}

TEST_CASE("apply: identity, unitary conjugation, depolarizing") {
  Rng rng(900);
  SystemLayout l({{"A", 2, false}, {"B", 3, false}});
  DensityOperator rho = random_state(rng, l);

  DensityOperator same = apply(KrausChannel::identity(2), rho, {"A"});
  CHECK(max_abs(sub(same.matrix, rho.matrix)) < 1e-12);

  // single-Kraus unitary on the non-leading subsystem
  ComplexMatrix u = random_unitary(rng, 3);
  DensityOperator rotated = apply(KrausChannel::from_unitary(u), rho, {"B"});
  ComplexMatrix expect = matmul(matmul(kron(ComplexMatrix::identity(2), u), rho.matrix),
                                adjoint(kron(ComplexMatrix::identity(2), u)));
  CHECK(max_abs(sub(rotated.matrix, expect)) < 1e-11);

  DensityOperator depol = apply(depolarizing(3), rho, {"B"});
  DensityOperator marg = partial_trace(depol, {"B"});
  CHECK(max_abs(sub(marg.matrix, scale(ComplexMatrix::identity(3), Cx{1.0 / 3.0, 0.0}))) < 1e-10);
  // A marginal untouched
  CHECK(max_abs(sub(partial_trace(depol, {"A"}).matrix, partial_trace(rho, {"A"}).matrix)) <
        1e-10);
}

TEST_CASE("apply: target order matters and non-contiguous targets reorder correctly") {
  Rng rng(901);
  SystemLayout l({{"A", 2, false}, {"M", 2, false}, {"B", 2, false}});
  DensityOperator rho = random_state(rng, l);

  // CNOT with control B, target A (reversed, non-contiguous)
  DensityOperator ba = apply(standard_gate("CNOT"), rho, {"B", "A"});
  // oracle: build the full 8x8 unitary by permuting indices
  ComplexMatrix big(8, 8);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t m = 0; m < 2; ++m)
      for (std::size_t b = 0; b < 2; ++b) {
        const std::size_t in = a * 4 + m * 2 + b;
        const std::size_t aout = b == 1 ? 1 - a : a;  // CNOT(control=B, target=A)
        const std::size_t out = aout * 4 + m * 2 + b;
        big.at(out, in) = 1.0;
      }
  ComplexMatrix expect = matmul(matmul(big, rho.matrix), adjoint(big));
  CHECK(max_abs(sub(ba.matrix, expect)) < 1e-11);
  CHECK(ba.layout == l);
}

TEST_CASE("trace and positivity preserved over random channels") {
  Rng rng(902);
  SystemLayout l({{"A", 2, false}, {"B", 2, false}});
  for (int trial = 0; trial < 200; ++trial) {
    DensityOperator rho = random_state(rng, l);
    // random 2-Kraus channel on B from a 4x4 unitary split
    ComplexMatrix u = random_unitary(rng, 4);
    ComplexMatrix e0(2, 2), e1(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        e0.at(i, j) = u.at(i, j);
        e1.at(i, j) = u.at(i + 2, j);
      }
    KrausChannel ch = KrausChannel::make({e0, e1});
    DensityOperator out = apply(ch, rho, {"B"});
    CHECK(std::abs(trace(out.matrix).real() - 1.0) < 1e-9);
    CHECK(min_eigenvalue(out.matrix) > -1e-8);
  }
}

TEST_CASE("apply_controlled: identity branches, CNOT-style copy, marginal preservation") {
  Rng rng(903);

  // control uniform bit, branches {id, X} on |0>: classically correlated state
  ComplexMatrix zero(2, 2);
  zero.at(0, 0) = 1.0;
  DensityOperator target0 = DensityOperator::make(SystemLayout({{"T", 2, false}}), zero);
  DensityOperator cq = make_cq("C", {0.5, 0.5}, {target0, target0});
  ControlledChannel cx = controlled_gate("X", 2);
  DensityOperator copied = apply_controlled(cx, cq, "C", {"T"});
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t t = 0; t < 2; ++t)
      CHECK(std::abs(copied.matrix.at(a * 2 + t, a * 2 + t) - (a == t ? Cx{0.5, 0.0} : Cx{})) <
            1e-12);

  // all-identity branches leave the state alone
  ControlledChannel cid = ControlledChannel::make(
      {KrausChannel::identity(2), KrausChannel::identity(2)});
  DensityOperator same = apply_controlled(cid, cq, "C", {"T"});
  CHECK(max_abs(sub(same.matrix, cq.matrix)) < 1e-12);

  // random controlled channel preserves the control marginal
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DensityOperator> cond;
    SystemLayout lt({{"T", 2, false}});
    cond.push_back(random_state(rng, lt));
    cond.push_back(random_state(rng, lt));
    const double w = 0.2 + 0.6 * rng.uniform();
    DensityOperator in = make_cq("C", {w, 1.0 - w}, cond);
    ControlledChannel ch = ControlledChannel::make(
        {KrausChannel::from_unitary(random_unitary(rng, 2)),
         KrausChannel::from_unitary(random_unitary(rng, 2))});
    DensityOperator out = apply_controlled(ch, in, "C", {"T"});
    CHECK(max_abs(sub(partial_trace(out, {"C"}).matrix, partial_trace(in, {"C"}).matrix)) < 1e-9);
    // commutes with tracing out the targets
    CHECK(max_abs(sub(partial_trace(out, {"C"}).matrix, partial_trace(in, {"C"}).matrix)) < 1e-9);
  }

  // a coherent control is rejected
  ComplexMatrix plus(2, 2);
  plus.at(0, 0) = plus.at(0, 1) = plus.at(1, 0) = plus.at(1, 1) = 0.5;
  DensityOperator coherent = DensityOperator::make(
      SystemLayout({{"C", 2, false}, {"T", 2, false}}), kron(plus, zero));
  CHECK_THROWS_AS(apply_controlled(cx, coherent, "C", {"T"}), Error);
}

TEST_CASE("dilate: unitary, dephasing, depolarizing against the Kraus oracle") {
  Rng rng(904);

  // unitary channel: ancilla stays trivial
  ComplexMatrix u = random_unitary(rng, 2);
  KrausChannel uch = KrausChannel::from_unitary(u);
  CHECK(dilation_ancilla_dim(uch) == 1);
  ComplexMatrix v = dilate(uch);
  CHECK(max_abs(sub(v, u)) < 1e-10);

  auto check_dilation = [&](const KrausChannel& ch) {
    const std::size_t d = ch.input_dim;
    const std::size_t ka = dilation_ancilla_dim(ch);
    ComplexMatrix vd = dilate(ch);
    CHECK(max_abs(sub(matmul(adjoint(vd), vd), ComplexMatrix::identity(d * ka))) < 1e-10);
    // basis of input operators |i><j|
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        ComplexMatrix eij(d, d);
        eij.at(i, j) = 1.0;
        // lift to (input (x) ancilla), conjugate by V, trace out ancilla
        ComplexMatrix anc(ka, ka);
        anc.at(0, 0) = 1.0;
        ComplexMatrix lifted = kron(eij, anc);
        ComplexMatrix evolved = matmul(matmul(vd, lifted), adjoint(vd));
        ComplexMatrix reduced = ptrace_matrix(evolved, {d, ka}, {true, false});
        ComplexMatrix expect = kraus_apply_oracle(ch, eij);
        CHECK(max_abs(sub(reduced, expect)) < 1e-8);
      }
  };

  const double r = std::sqrt(0.5);
  KrausChannel dephase = KrausChannel::make(
      {scale(ComplexMatrix::identity(2), Cx{r, 0.0}), scale(standard_gate("Z").kraus[0], Cx{r, 0.0})});
  CHECK(dilation_ancilla_dim(dephase) == 2);
  check_dilation(dephase);

  KrausChannel depol = depolarizing(2);
  CHECK(dilation_ancilla_dim(depol) == 4);
  check_dilation(depol);
  // completely depolarizing on id/2 input stays id/2
  SystemLayout lq({{"Q", 2, false}});
  DensityOperator mm = DensityOperator::make(lq, scale(ComplexMatrix::identity(2), Cx{0.5, 0.0}));
  DensityOperator out = apply(depol, mm, {"Q"});
  CHECK(max_abs(sub(out.matrix, mm.matrix)) < 1e-10);
}

TEST_CASE("standard gates: involution, bell measurement, superdense encoding") {
  // X twice is the identity
  ComplexMatrix xx = matmul(standard_gate("X").kraus[0], standard_gate("X").kraus[0]);
  CHECK(max_abs(sub(xx, ComplexMatrix::identity(2))) == 0.0);

  CHECK_THROWS_AS(standard_gate("FLIP"), Error);

  // BELL_MEASURE on |Phi+> yields outcome 0 with probability 1
  PureState phi = epr_pairs(1);
  DensityOperator measured = apply(standard_gate("BELL_MEASURE"), phi.to_density(),
                                   {"A1", "B1"}, {"M"});
  CHECK(measured.layout.size() == 1);
  CHECK(measured.layout[0].classical);
  CHECK(std::abs(measured.matrix.at(0, 0) - Cx{1.0, 0.0}) < 1e-12);

  // PAULI_ENCODE branches on one EPR half produce the four orthogonal Bell
  // states: encoded versions are mutually orthogonal and measure to a.
  for (std::size_t a = 0; a < 4; ++a) {
    const std::string name = "PAULI_ENCODE(" + std::to_string(a) + ")";
    DensityOperator enc = apply(standard_gate(name), phi.to_density(), {"A1"});
    DensityOperator m = apply(standard_gate("BELL_MEASURE"), enc, {"A1", "B1"}, {"M"});
    CHECK(std::abs(m.matrix.at(a, a) - Cx{1.0, 0.0}) < 1e-12);
    for (std::size_t b = 0; b < 4; ++b)
      if (b != a) CHECK(std::abs(m.matrix.at(b, b)) < 1e-12);
  }

  // pairwise inner products of the encoded states vanish
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b) {
      DensityOperator ea = apply(standard_gate("PAULI_ENCODE(" + std::to_string(a) + ")"),
                                 phi.to_density(), {"A1"});
      DensityOperator eb = apply(standard_gate("PAULI_ENCODE(" + std::to_string(b) + ")"),
                                 phi.to_density(), {"A1"});
      CHECK(std::abs(trace(matmul(ea.matrix, eb.matrix))) < 1e-12);
    }
}

TEST_CASE("measure collapses to a classical register") {
  Rng rng(905);
  SystemLayout l({{"Q", 2, false}});
  ComplexMatrix plus(2, 2);
  plus.at(0, 0) = plus.at(0, 1) = plus.at(1, 0) = plus.at(1, 1) = 0.5;
  DensityOperator rho = DensityOperator::make(l, plus);
  DensityOperator m = apply(standard_gate("MEASURE"), rho, {"Q"});
  CHECK(m.layout[0].classical);
  CHECK(std::abs(m.matrix.at(0, 0) - Cx{0.5, 0.0}) < 1e-12);
  CHECK(std::abs(m.matrix.at(0, 1)) < 1e-12);
  (void)rng;
}
