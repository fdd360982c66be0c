#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "qleak/io.hpp"
#include "qleak/protocol.hpp"

using namespace qleak;
using oracles::random_ket;

namespace {

const char* kMinimal = R"(
protocol minimal
system A1 dim=2
round 1
alice send A1
)";

const char* kIdentity = R"(
protocol idle
system A0 dim=2 classical
system B1 dim=2
input uniform A0
round 1
alice op=I targets=A1
alice send
bob op=I targets=B1
)";

const char* kPingPong = R"(
protocol pingpong
system A0 dim=2 classical
system A1 dim=2
system A2 dim=2
system B1 dim=2
round 1
alice op=H targets=A1
alice op=Z targets=A2 control=A0
alice send A1
bob op=CNOT targets=A1,B1
bob send A1
round 2
alice op=CNOT targets=A1,A2
alice send A2
)";

ProtocolSpec fix_idle() {
  // kIdentity references A1 which does not exist; build the correct source
  const char* src = R"(
protocol idle
system A0 dim=2 classical
system A1 dim=2
system B1 dim=2
input uniform A0
round 1
alice op=I targets=A1
alice send
bob op=I targets=B1
)";
  return parse_protocol(src);
}

}  // namespace

TEST_CASE("parse: minimal one-round protocol") {
  ProtocolSpec spec = parse_protocol(kMinimal);
  CHECK(spec.rounds == 1);
  CommStats cs = comm_stats(spec);
  CHECK(cs.m_a == doctest::Approx(1.0));
  CHECK(cs.m_b == doctest::Approx(0.0));
  CHECK(spec.classical_input_label.empty());
}

TEST_CASE("parse: bundled superdense file and print round-trip") {
  const std::string text = read_text_file("data/superdense.qpt");
  ProtocolSpec spec = parse_protocol(text, "data");
  CHECK(spec.rounds == 1);
  CHECK(spec.classical_input_label == "A0");
  CommStats cs = comm_stats(spec);
  CHECK(cs.m_a == doctest::Approx(1.0));
  CHECK(cs.m_b == doctest::Approx(0.0));

  ProtocolSpec again = parse_protocol(print_protocol(spec), "data");
  CHECK(spec == again);
  CHECK(print_protocol(spec) == print_protocol(again));
}

TEST_CASE("validate: Bob cannot send a nonempty final message") {
  const char* bad = R"(
protocol bad
system A1 dim=2
system B1 dim=2
round 1
alice send A1
bob send B1
)";
  try {
    parse_protocol(bad);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ValidationError);
    CHECK(std::string(e.what()).find("first and the last") != std::string::npos);
  }
}

TEST_CASE("validate: ownership and ordering") {
  // Alice acting on Bob's register
  CHECK_THROWS_AS(parse_protocol(R"(
protocol bad
system A1 dim=2
system B1 dim=2
round 1
alice op=X targets=B1
alice send A1
)"),
                  Error);
  // Bob acting before receiving, on a register Alice still owns
  CHECK_THROWS_AS(parse_protocol(R"(
protocol bad
system A1 dim=2
round 1
bob op=X targets=A1
)"),
                  Error);
  // Alice op after her send within the round
  CHECK_THROWS_AS(parse_protocol(R"(
protocol bad
system A1 dim=2
system A2 dim=2
round 1
alice send A1
alice op=X targets=A2
)"),
                  Error);
  // targeting the classical input register
  CHECK_THROWS_AS(parse_protocol(R"(
protocol bad
system A0 dim=2 classical
system A1 dim=2
round 1
alice op=X targets=A0
alice send A1
)"),
                  Error);
}

TEST_CASE("run: identity protocol leaves the input unchanged") {
  ProtocolSpec spec = fix_idle();
  DensityOperator input = build_input(spec);
  RunResult res = run(spec, input);
  CHECK(res.stats.m_a == doctest::Approx(0.0));
  CHECK(res.stats.m_b == doctest::Approx(0.0));
  CHECK(max_abs(sub(res.final_state.matrix, input.matrix)) < 1e-12);
}

TEST_CASE("run: bit send copies the bit into Bob's register") {
  ProtocolSpec spec = parse_protocol(read_text_file("data/bitsend.qpt"), "data");
  DensityOperator input = build_input(spec);
  RunResult res = run(spec, input);
  CHECK(res.stats.m_a == doctest::Approx(1.0));
  // final layout [A0, BM], perfectly correlated
  REQUIRE(res.final_state.layout.size() == 2);
  const ComplexMatrix& m = res.final_state.matrix;
  CHECK(std::abs(m.at(0, 0) - Cx{0.5, 0.0}) < 1e-10);
  CHECK(std::abs(m.at(3, 3) - Cx{0.5, 0.0}) < 1e-10);
  CHECK(std::abs(m.at(1, 1)) < 1e-10);
  CHECK(std::abs(m.at(2, 2)) < 1e-10);
  // Bob ends up owning BM
  auto bobs = res.owned_by(Party::Bob);
  REQUIRE(bobs.size() == 1);
  CHECK(bobs[0] == "BM");
}

TEST_CASE("run: superdense coding decodes both bits with certainty") {
  ProtocolSpec spec = parse_protocol(read_text_file("data/superdense.qpt"), "data");
  DensityOperator input = build_input(spec);
  RunResult res = run(spec, input);
  CHECK(res.stats.m_a == doctest::Approx(1.0));
  CHECK(res.stats.m_b == doctest::Approx(0.0));
  // final layout [A0 (dim 4), BM (dim 4)]; outcome equals input symbol
  const ComplexMatrix& m = res.final_state.matrix;
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t o = 0; o < 4; ++o) {
      const double expect = a == o ? 0.25 : 0.0;
      CHECK(std::abs(m.at(a * 4 + o, a * 4 + o) - Cx{expect, 0.0}) < 1e-10);
    }
  // the classical input marginal never moved
  for (const StepRecord& rec : res.trace) {
    ComplexMatrix marg = partial_trace(rec.state, {"A0"}).matrix;
    CHECK(max_abs(sub(marg, scale(ComplexMatrix::identity(4), Cx{0.25, 0.0}))) < 1e-9);
  }
}

TEST_CASE("run_prefix") {
  ProtocolSpec spec = parse_protocol(kPingPong);
  // deterministic input: A0 = |1><1|, workspaces |0>, B1 random
  Rng rng(4242);
  std::vector<Cx> zeta = random_ket(rng, 2);
  ComplexMatrix a0(2, 2);
  a0.at(1, 1) = 1.0;
  ComplexMatrix b1(2, 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) b1.at(i, j) = zeta[i] * std::conj(zeta[j]);
  ComplexMatrix zero(2, 2);
  zero.at(0, 0) = 1.0;
  ComplexMatrix full = kron(kron(kron(a0, zero), zero), b1);
  DensityOperator input = DensityOperator::make(spec.layout, std::move(full));

  DensityOperator full_run = run(spec, input).final_state;
  DensityOperator prefix_full = run_prefix(spec, input, 2, Party::Bob);
  CHECK(max_abs(sub(full_run.matrix, prefix_full.matrix)) < 1e-12);

  for (std::size_t k = 1; k <= 2; ++k) {
    for (Party half : {Party::Alice, Party::Bob}) {
      DensityOperator st = run_prefix(spec, input, k, half);
      CHECK(std::abs(trace(st.matrix).real() - 1.0) < 1e-9);
    }
  }
  CHECK_THROWS_AS(run_prefix(spec, input, 3, Party::Alice), Error);
}

TEST_CASE("yao: no-communication protocol has a single term") {
  const char* src = R"(
protocol silent
system A0 dim=2 classical
system A1 dim=2
system B1 dim=2
round 1
alice op=H targets=A1
alice send
)";
  ProtocolSpec spec = parse_protocol(src);
  Rng rng(7);
  PureState zeta = PureState::make(spec.layout.keep({"B1"}), random_ket(rng, 2));
  YaoDecomposition yd = yao_decompose(spec, 1, zeta);
  CHECK(yd.term_bound == 1);
  REQUIRE(yd.terms.size() == 1);
  CHECK(yd.terms[0].coefficient == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("yao: two-round unitary protocol reconstructs the runner's state") {
  ProtocolSpec spec = parse_protocol(kPingPong);
  Rng rng(99);
  for (std::size_t x = 0; x < 2; ++x) {
    std::vector<Cx> zeta = random_ket(rng, 2);
    PureState bob_init = PureState::make(spec.layout.keep({"B1"}), zeta);
    YaoDecomposition yd = yao_decompose(spec, x, bob_init);
    CommStats cs = comm_stats(spec);
    CHECK(cs.m_a == doctest::Approx(2.0));
    CHECK(cs.m_b == doctest::Approx(1.0));
    CHECK(yd.term_bound == 8);
    CHECK(yd.terms.size() <= yd.term_bound);
    for (const YaoTerm& t : yd.terms) CHECK(t.coefficient >= 0.0);

    // matching density-operator run
    ComplexMatrix a0(2, 2);
    a0.at(x, x) = 1.0;
    ComplexMatrix zero(2, 2);
    zero.at(0, 0) = 1.0;
    ComplexMatrix b1(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) b1.at(i, j) = zeta[i] * std::conj(zeta[j]);
    DensityOperator input =
        DensityOperator::make(spec.layout, kron(kron(kron(a0, zero), zero), b1));
    DensityOperator final_run = run(spec, input).final_state;

    std::vector<Cx> rec = yd.reconstruct(spec, x);
    ComplexMatrix outer(rec.size(), rec.size());
    for (std::size_t i = 0; i < rec.size(); ++i)
      for (std::size_t j = 0; j < rec.size(); ++j) outer.at(i, j) = rec[i] * std::conj(rec[j]);
    CHECK(trace_norm(sub(outer, final_run.matrix)) < 1e-7);
  }
}

TEST_CASE("yao rejects non-unitary protocols and mixed inputs") {
  ProtocolSpec spec = parse_protocol(read_text_file("data/superdense.qpt"), "data");
  PureState zeta = PureState::make(spec.layout.keep({"B1"}), {Cx{1.0, 0.0}, Cx{}});
  // BELL_MEASURE is not unitary
  CHECK_THROWS_AS(yao_decompose(spec, 0, zeta), Error);
}

TEST_CASE("input file clause round-trips through the state format") {
  const char* src = R"(
protocol fromfile
system A1 dim=2
system B1 dim=2
input file epr_pair.qst
round 1
alice send A1
)";
  ProtocolSpec spec = parse_protocol(src, "data");
  DensityOperator input = build_input(spec);
  DensityOperator expect = epr_pairs(1).to_density();
  CHECK(max_abs(sub(input.matrix, expect.matrix)) < 1e-12);
}
