#pragma once

#include <string>
#include <vector>

#include "qleak/layout.hpp"
#include "qleak/matrix.hpp"

namespace qleak {

// PSD unit-trace operator over an ordered composite layout. Construction
// validates: Hermitian within 1e-9 (then symmetrized), min eigenvalue
// >= -1e-9, unit trace within 1e-9, and every classical subsystem diagonal
// in the computational basis (largest off-diagonal entry of its reduced
// state <= 1e-9).
struct DensityOperator {
  SystemLayout layout;
  ComplexMatrix matrix;

  static DensityOperator make(SystemLayout layout, ComplexMatrix m);
  std::size_t dim() const { return matrix.rows; }
};

struct PureState {
  SystemLayout layout;
  std::vector<Cx> amplitudes;  // unit norm within 1e-10

  static PureState make(SystemLayout layout, std::vector<Cx> amps);
  DensityOperator to_density() const;
  std::size_t dim() const { return amplitudes.size(); }
};

struct SchmidtDecomposition {
  std::vector<double> coefficients;  // nonnegative, descending
  ComplexMatrix left_vectors;        // orthonormal columns over the cut part
  ComplexMatrix right_vectors;       // orthonormal columns over the complement
  std::size_t rank = 0;              // number of coefficients > 1e-9
};

// --- raw-matrix index utilities shared by the channel/protocol layers ---

// Partial trace keeping the subsystems where keep[i] is true.
ComplexMatrix ptrace_matrix(const ComplexMatrix& m, const std::vector<std::size_t>& dims,
                            const std::vector<bool>& keep);

// Reorders subsystems: position p of the result is subsystem perm[p] of the
// input.
ComplexMatrix permute_matrix(const ComplexMatrix& m, const std::vector<std::size_t>& dims,
                             const std::vector<std::size_t>& perm);
std::vector<Cx> permute_vector(const std::vector<Cx>& v, const std::vector<std::size_t>& dims,
                               const std::vector<std::size_t>& perm);

// --- state operations ---

DensityOperator partial_trace(const DensityOperator& rho, const std::vector<std::string>& keep);

// sum_a p_a |a><a| (x) rho_a with the classical register first. The register
// dimension is max(2, weights.size()); missing symbols get weight zero.
DensityOperator make_cq(const std::string& classical_label, const std::vector<double>& weights,
                        const std::vector<DensityOperator>& conditionals);

// (|00> + |11>)^{(x)m} / 2^{m/2} on alternating labels A1,B1,...,Am,Bm.
PureState epr_pairs(std::size_t m);

// Canonical purification sum_i sqrt(lambda_i) |v_i>|i>_E. Eigenvalues
// <= 1e-9 are treated as zero, so the environment dimension is rank(rho);
// rank-1 inputs are returned as-is (trivial environment omitted).
PureState purify(const DensityOperator& rho);

SchmidtDecomposition schmidt(const PureState& psi, const std::vector<std::string>& cut);

// F(rho, sigma) = tr sqrt(rho^{1/2} sigma rho^{1/2}), clamped to [0, 1].
double fidelity(const DensityOperator& rho, const DensityOperator& sigma);

// sqrt(1 - F^2), clamped to [0, 1].
double purified_distance(const DensityOperator& rho, const DensityOperator& sigma);

// Halved trace norm of the difference; lies in [0, 1] for states.
double trace_distance(const DensityOperator& rho, const DensityOperator& sigma);

// Extends sigma_a to the full layout of rho_ab such that the extension's
// marginal is sigma_a and F(rho_ab, extension) >= F(tr_B rho_ab, sigma_a),
// via purification plus the Uhlmann-optimal unitary on the purifier.
DensityOperator uhlmann_extension(const DensityOperator& rho_ab, const DensityOperator& sigma_a);

// Unitary on the b_labels part aligning psi with phi: the returned U makes
// the trace distance between phi and (id (x) U) psi at most
// sqrt(eps(2-eps)), eps being the trace distance of the non-B marginals.
// Built from the polar decomposition of the B-side overlap matrix.
ComplexMatrix lo_attack_unitary(const PureState& phi, const PureState& psi,
                                const std::vector<std::string>& b_labels);

// Applies u to the b_labels part of psi (helper for exercising the bound).
PureState apply_local_unitary(const PureState& psi, const ComplexMatrix& u,
                              const std::vector<std::string>& b_labels);

}  // namespace qleak
