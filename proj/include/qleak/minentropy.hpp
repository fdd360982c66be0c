#pragma once

#include <string>
#include <vector>

#include "qleak/state.hpp"

namespace qleak {

// Certified conditional min-entropy result.
//
// The defining program is the trace-minimization form
//     minimize tr(sigma)  s.t.  id_A (x) sigma >= rho_AB,  sigma Hermitian,
// whose optimal value t* gives hmin = -log2(t*). (The usual definition
// quantifies over unit-trace sigma_B and a separate exponent lambda; the
// two are related exactly by sigma = 2^lambda sigma_B, so the reduction is
// lossless.) The dual is
//     maximize tr(rho X)  s.t.  Tr_A(X) = id_B,  X >= 0,
// and both witnesses are reported.
struct EntropySolution {
  double hmin = 0.0;            // bits, from the log-midpoint of the two bounds
  double primal_bound = 0.0;    // tr(primal_sigma) >= t*
  double dual_bound = 0.0;      // tr(rho dual_x)   <= t*
  double gap = 0.0;             // |log2 primal - log2 dual| in bits
  std::size_t iterations = 0;   // Newton steps spent
  ComplexMatrix primal_sigma;   // PSD on B, id_A (x) sigma - rho >= -1e-7
  ComplexMatrix dual_x;         // >= -1e-9 on AB, ||Tr_A X - id_B|| <= 1e-7
  SystemLayout b_layout;        // layout of the conditioning part (may be empty)
};

// H_min(A|B) of rho over the given partition. a_labels and b_labels must be
// disjoint and together cover the layout; b_labels may be empty (trivial
// conditioning system). Deterministic for fixed input.
EntropySolution hmin(const DensityOperator& rho, const std::vector<std::string>& a_labels,
                     const std::vector<std::string>& b_labels);

// Smooth variant placeholder: epsilon = 0 falls through to hmin, anything
// else is rejected (no construction to implement it against).
EntropySolution hmin_smooth(const DensityOperator& rho, const std::vector<std::string>& a_labels,
                            const std::vector<std::string>& b_labels, double epsilon);

// Classical-classical closed form: -log2 sum_b max_a P(a,b).
double hmin_cc(const std::vector<std::vector<double>>& joint);

// Optimal guessing probability 2^{-hmin} of a classical register given the
// rest. For binary a the result is cross-checked against the Helstrom value
// 1/2 + ||p0 rho0 - p1 rho1||_tr (halved norm).
double pguess_cq(const DensityOperator& rho, const std::string& a_label,
                 const std::vector<std::string>& b_labels);

// Raw-matrix solver: rho over C^{da} (x) C^{db}, A part leading.
EntropySolution solve_hmin_sdp(const ComplexMatrix& rho, std::size_t da, std::size_t db);

}  // namespace qleak
