#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qleak/channel.hpp"
#include "qleak/state.hpp"

namespace qleak {

enum class Party { Alice, Bob };
inline const char* party_name(Party p) { return p == Party::Alice ? "alice" : "bob"; }

// One protocol instruction. Ops reference a named gate or a Kraus file
// ("file:<path>"); sends move the payload registers to the other party.
struct ProtoStep {
  enum class Kind { Op, Send };
  Kind kind = Kind::Op;
  Party party = Party::Alice;
  std::size_t round = 0;  // 1-based

  std::string gate;
  std::vector<std::string> targets;
  std::string control;            // empty when uncontrolled
  std::vector<std::string> outs;  // measurement outcome labels

  std::vector<std::string> payload;  // for sends; may be empty

  bool operator==(const ProtoStep&) const = default;
};

struct InputClause {
  enum class Kind { Cq, Epr, File, Uniform, Basis };
  Kind kind = Kind::Uniform;
  std::vector<std::string> labels;
  std::vector<double> weights;           // cq
  std::vector<std::string> state_files;  // cq conditionals / file path
  std::size_t basis_index = 0;

  bool operator==(const InputClause&) const = default;
};

// The full (r, m_A, m_B) protocol: declared registers with initial ownership
// by label prefix (A*/a* Alice, B*/b* Bob), per-round operations, message
// routing, and the preserved classical input register when Alice declares a
// classical one.
struct ProtocolSpec {
  std::string name;
  SystemLayout layout;
  std::map<std::string, Party> owner;
  std::vector<InputClause> inputs;
  std::vector<ProtoStep> steps;
  std::size_t rounds = 0;
  std::string classical_input_label;  // empty when absent
  std::string base_dir;               // for file: references

  bool operator==(const ProtocolSpec& o) const {
    return name == o.name && layout == o.layout && owner == o.owner && inputs == o.inputs &&
           steps == o.steps && rounds == o.rounds &&
           classical_input_label == o.classical_input_label;
  }
};

struct CommStats {
  double m_a = 0.0;  // qubits Alice -> Bob, sum of log2 message dims
  double m_b = 0.0;  // qubits Bob -> Alice
  std::vector<std::pair<double, double>> per_round;
};

struct StepRecord {
  std::size_t index = 0;
  std::size_t round = 0;
  Party party = Party::Alice;
  ProtoStep::Kind kind = ProtoStep::Kind::Op;
  std::string text;
  DensityOperator state;
  std::map<std::string, Party> owner_after;
};

struct RunResult {
  DensityOperator final_state;
  CommStats stats;
  std::vector<StepRecord> trace;
  std::map<std::string, Party> final_owner;

  std::vector<std::string> owned_by(Party p) const;
};

struct YaoTerm {
  double coefficient = 0.0;
  std::vector<Cx> alice_vector;  // over Alice's final registers minus the input
  std::vector<Cx> bob_vector;    // over Bob's final registers
};

struct YaoDecomposition {
  std::vector<YaoTerm> terms;
  std::size_t term_bound = 0;  // 2^(m_a + m_b)
  SystemLayout alice_layout;   // excluding the classical input register
  SystemLayout bob_layout;
  // Global reconstruction with |x> in the classical input register.
  std::vector<Cx> reconstruct(const ProtocolSpec& spec, std::size_t x) const;
};

// Parses and validates the protocol description language (see README;
// data/superdense.qpt is the canonical example). Parse errors carry line
// numbers; validation errors cite the structural rule broken.
ProtocolSpec parse_protocol(const std::string& text, const std::string& base_dir = ".");
std::string print_protocol(const ProtocolSpec& spec);

// Input state assembled from the protocol's input clauses; registers not
// covered by any clause start in |0><0|.
DensityOperator build_input(const ProtocolSpec& spec);

// Executes all rounds in definition order. The trace records the state and
// ownership after every step; when a classical input register is declared,
// its marginal is checked unchanged (1e-9) at every step.
RunResult run(const ProtocolSpec& spec, const DensityOperator& input);

// Partial composition: through Alice's send of round k (half = Alice) or
// through Bob's step of round k (half = Bob).
DensityOperator run_prefix(const ProtocolSpec& spec, const DensityOperator& input, std::size_t k,
                           Party half);

CommStats comm_stats(const ProtocolSpec& spec);

// Lemma-style final-state expansion for unitary protocols on the initial
// state |x>_{A0} (x) |0...0>_{Alice workspace} (x) bob_init: iterated Schmidt
// splits at each message, term count bounded by 2^(m_a+m_b).
YaoDecomposition yao_decompose(const ProtocolSpec& spec, std::size_t x, const PureState& bob_init);

}  // namespace qleak
