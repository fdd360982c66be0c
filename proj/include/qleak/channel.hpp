#pragma once

#include <string>
#include <vector>

#include "qleak/state.hpp"

namespace qleak {

struct OutputFactor {
  std::size_t dim = 0;
  bool classical = false;

  bool operator==(const OutputFactor&) const = default;
};

// CPTP map in Kraus form. output_factors describe how the output space
// splits into subsystems (product of dims = output_dim); by default a single
// quantum factor.
struct KrausChannel {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<ComplexMatrix> kraus;  // output_dim x input_dim each
  std::vector<OutputFactor> output_factors;

  // Validates shapes and sum_k E_k† E_k = id within 1e-9.
  static KrausChannel make(std::vector<ComplexMatrix> ops,
                           std::vector<OutputFactor> factors = {});
  static KrausChannel identity(std::size_t dim);
  static KrausChannel from_unitary(ComplexMatrix u);

  bool is_unitary(double tol = 1e-9) const;
};

// One CPTP branch per classical control symbol (Def.-style controlled op).
struct ControlledChannel {
  std::size_t control_dim = 0;
  std::vector<KrausChannel> branches;

  static ControlledChannel make(std::vector<KrausChannel> branches);
};

// Applies the channel to the listed target subsystems (identity elsewhere).
// The channel input ordering is the order the targets are listed in. The
// output layout replaces the targets with the channel's output factors,
// inserted at the first target's position; out_labels name those factors
// (defaults to the target labels when the counts match).
DensityOperator apply(const KrausChannel& ch, const DensityOperator& rho,
                      const std::vector<std::string>& targets,
                      const std::vector<std::string>& out_labels = {});

// Applies branch a to the block of classical control value a. The control
// must be flagged classical and rho block-diagonal in it (off-diagonal
// entries above 1e-9 raise BlockLeakage). The control marginal is unchanged.
DensityOperator apply_controlled(const ControlledChannel& gamma, const DensityOperator& rho,
                                 const std::string& control,
                                 const std::vector<std::string>& targets,
                                 const std::vector<std::string>& out_labels = {});

// Stinespring dilation of a square channel: a unitary V on input (x) ancilla
// (ancilla dimension = number of Kraus operators padded to a power of two,
// initialized to |0>) such that tracing the ancilla after V reproduces the
// channel. Basis ordering: |i>_in |k>_anc -> flat i*anc_dim + k.
ComplexMatrix dilate(const KrausChannel& ch);
std::size_t dilation_ancilla_dim(const KrausChannel& ch);

// Named gates: I, X, Y, Z, H, S, CNOT, SWAP, BELL_MEASURE, MEASURE,
// PAULI_ENCODE(a) with a in 0..3. MEASURE takes its dimension from dim_hint
// (default 2). BELL_MEASURE emits a dim-4 classical outcome register and
// MEASURE a dim-d classical register in place of its input.
KrausChannel standard_gate(const std::string& name, std::size_t dim_hint = 0);

// Controlled family from a unitary gate: branch a applies gate^a
// (PAULI_ENCODE instead selects {I, X, Z, XZ}[a] and requires control_dim 4).
ControlledChannel controlled_gate(const std::string& name, std::size_t control_dim,
                                  std::size_t dim_hint = 0);

bool is_standard_gate(const std::string& name);

}  // namespace qleak
