#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qleak/minentropy.hpp"
#include "qleak/protocol.hpp"
#include "qleak/rng.hpp"

namespace qleak {

enum class Rule {
  SEP_LCR,          // separable chain rule, drop <= log dX
  GEN_LCR,          // general chain rule, drop <= 2 log min(dA dB, dX)
  INTERACTIVE_LCR,  // interactive rule, drop <= min(mA+mB, 2 mA)
  ENTANGLED_LCR,    // pre-shared entanglement, drop <= 2 mA
  COMM_TOTAL,       // mA + mB >= Hmin - log 1/p
  COMM_ONEWAY,      // 2 mA   >= Hmin - log 1/p
};

const char* rule_name(Rule r);
std::optional<Rule> rule_from_name(const std::string& name);

// One audited inequality: pass iff slack = lhs - rhs >= -1e-6 bits.
struct ChainRuleCase {
  Rule rule = Rule::SEP_LCR;
  double lhs_bits = 0.0;
  double rhs_bits = 0.0;
  double slack = 0.0;
  std::uint64_t seed = 0;
  std::string descriptor;

  bool pass() const { return slack >= -1e-6; }
};

struct AuditReport {
  std::uint64_t master_seed = 0;
  Rule rule = Rule::SEP_LCR;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double tightest_slack = 0.0;
  std::vector<ChainRuleCase> cases;

  // Stable schema: {master_seed, rule, trials, failures,
  // cases: [{seed, lhs_bits, rhs_bits, slack, pass, descriptor}]}.
  // Byte-identical for a fixed master seed regardless of thread count.
  std::string to_json() const;
};

struct AuditOptions {
  std::uint64_t master_seed = 0;
  std::size_t trials = 100;
  std::size_t threads = 1;
  bool measured = false;  // comm bounds read Bob's classical output registers only
};

// Runs the randomized audit for one rule over its instance family (static
// Ginibre/separable states for the static rules, random controlled
// protocols for the interactive ones). Deterministic in master_seed.
AuditReport run_audit(Rule rule, const AuditOptions& opts);

// --- single-instance checkers ---

ChainRuleCase audit_separable_case(const DensityOperator& rho,
                                   const std::vector<std::string>& a_labels,
                                   const std::vector<std::string>& x_labels,
                                   const std::vector<std::string>& b_labels, std::uint64_t seed,
                                   const std::string& descriptor);

ChainRuleCase audit_general_case(const DensityOperator& rho,
                                 const std::vector<std::string>& a_labels,
                                 const std::vector<std::string>& x_labels,
                                 const std::vector<std::string>& b_labels, std::uint64_t seed,
                                 const std::string& descriptor);

ChainRuleCase audit_interactive(const ProtocolSpec& spec, const DensityOperator& input,
                                std::uint64_t seed, const std::string& descriptor);

// epr_m = number of pre-shared EPR pairs in the input; requires m_a <= epr_m.
ChainRuleCase audit_entangled(const ProtocolSpec& spec, const DensityOperator& input,
                              std::size_t epr_m, std::uint64_t seed,
                              const std::string& descriptor);

std::pair<ChainRuleCase, ChainRuleCase> audit_comm_bounds(const ProtocolSpec& spec,
                                                          const DensityOperator& input,
                                                          bool measured, std::uint64_t seed,
                                                          const std::string& descriptor);

// --- deterministic instance generators (Ginibre states, QR-phase-fixed
// unitaries, Dirichlet mixture weights, gate-table protocols) ---

DensityOperator random_ginibre_state(Rng& rng, SystemLayout layout, std::size_t rank = 0);
ComplexMatrix random_unitary_matrix(Rng& rng, std::size_t n);
// sum_k p_k rho_AX^k (x) rho_B^k with at most 4 components
DensityOperator random_separable_axb(Rng& rng, std::size_t da, std::size_t dx, std::size_t db);
DensityOperator random_cq_state(Rng& rng, const std::string& classical_label, std::size_t da,
                                SystemLayout b_layout);

struct RandomProtocolOptions {
  std::size_t max_rounds = 3;
  bool unitary_only = false;  // gate set restricted to unitaries
  std::size_t epr_pairs = 0;  // pre-shared entanglement
};

struct ProtocolInstance {
  ProtocolSpec spec;
  DensityOperator input;
  std::size_t epr_pairs = 0;
};

ProtocolInstance random_protocol(Rng& rng, const RandomProtocolOptions& opts);

// --- bundled demos (tightness witnesses) ---

struct DemoResult {
  std::string text;
  std::vector<ChainRuleCase> cases;
  bool ok = true;  // demo-specific checks beyond the chain-rule cases
  bool all_pass() const;
};

DemoResult demo_superdense();
DemoResult demo_bitsend();
DemoResult demo_lo_attack(std::uint64_t seed);

}  // namespace qleak
