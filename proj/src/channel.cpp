#include "qleak/channel.hpp"

#include <algorithm>
#include <cmath>

namespace qleak {

namespace {
constexpr double kCptpTol = 1e-9;
constexpr double kBlockTol = 1e-9;
}  // namespace

KrausChannel KrausChannel::make(std::vector<ComplexMatrix> ops, std::vector<OutputFactor> factors) {
  require(!ops.empty(), Errc::NotCPTP, "channel needs at least one Kraus operator");
  const std::size_t out = ops.front().rows;
  const std::size_t in = ops.front().cols;
  for (const ComplexMatrix& e : ops) {
    require(e.rows == out && e.cols == in, Errc::DimMismatch, "Kraus operator shapes differ");
    require(all_finite(e), Errc::NotFinite, "Kraus operator has non-finite entries");
  }
  ComplexMatrix sum(in, in);
  for (const ComplexMatrix& e : ops) {
    ComplexMatrix ed = adjoint(e);
    kernels::active().gemm_acc(ed.a.data(), e.a.data(), sum.a.data(), in, out, in);
  }
  require(max_abs(sub(sum, ComplexMatrix::identity(in))) <= kCptpTol, Errc::NotCPTP,
          "sum E_k† E_k differs from the identity");
  if (factors.empty()) factors = {OutputFactor{out, false}};
  std::size_t prod = 1;
  for (const OutputFactor& f : factors) prod *= f.dim;
  require(prod == out, Errc::DimMismatch, "output factors do not multiply to output_dim");
  return KrausChannel{in, out, std::move(ops), std::move(factors)};
}

KrausChannel KrausChannel::identity(std::size_t dim) {
  return make({ComplexMatrix::identity(dim)});
}

KrausChannel KrausChannel::from_unitary(ComplexMatrix u) {
  require(u.square(), Errc::NotSquare, "from_unitary");
  return make({std::move(u)});
}

bool KrausChannel::is_unitary(double tol) const {
  if (kraus.size() != 1 || input_dim != output_dim) return false;
  return max_abs(sub(matmul(adjoint(kraus[0]), kraus[0]), ComplexMatrix::identity(input_dim))) <=
         tol;
}

ControlledChannel ControlledChannel::make(std::vector<KrausChannel> branches) {
  require(branches.size() >= 2, Errc::NotClassicalControl, "need one branch per control symbol");
  for (const KrausChannel& b : branches) {
    require(b.input_dim == branches.front().input_dim && b.output_dim == branches.front().output_dim,
            Errc::DimMismatch, "controlled branches must share input/output dims");
    require(b.output_factors == branches.front().output_factors, Errc::DimMismatch,
            "controlled branches must share output factorization");
  }
  return ControlledChannel{branches.size(), std::move(branches)};
}

// ---------------------------------------------------------------------------
// apply
// ---------------------------------------------------------------------------

namespace {

// (E (x) id_rest) m, with m indexed (din*rest) x n row-major, via one gemm on
// the (din, rest*n) reshape.
ComplexMatrix lift_left(const ComplexMatrix& e, const ComplexMatrix& m, std::size_t rest) {
  const std::size_t din = e.cols;
  const std::size_t dout = e.rows;
  const std::size_t n = m.cols;
  ComplexMatrix out(dout * rest, n);
  kernels::active().gemm(e.a.data(), m.a.data(), out.a.data(), dout, din, rest * n);
  return out;
}

ComplexMatrix kraus_conjugate(const ComplexMatrix& e, const ComplexMatrix& m, std::size_t rest) {
  ComplexMatrix y = lift_left(e, m, rest);
  return adjoint(lift_left(e, adjoint(y), rest));
}

struct ApplyResult {
  ComplexMatrix matrix;
  SystemLayout layout;
};

// Core of apply(): channel on raw state matrix over `layout`, targets listed
// in channel-input order. No trace/positivity validation here so controlled
// blocks (unnormalized) can reuse it.
ApplyResult apply_raw(const KrausChannel& ch, const ComplexMatrix& m, const SystemLayout& layout,
                      const std::vector<std::string>& targets,
                      const std::vector<std::string>& out_labels) {
  require(!targets.empty(), Errc::UnknownLabel, "apply: no targets");
  std::vector<std::size_t> tpos;
  std::size_t tdim = 1;
  for (const std::string& t : targets) {
    const std::size_t i = layout.index_of(t);
    require(std::find(tpos.begin(), tpos.end(), i) == tpos.end(), Errc::UnknownLabel,
            "apply: duplicate target " + t);
    tpos.push_back(i);
    tdim *= layout[i].dim;
  }
  require(tdim == ch.input_dim, Errc::DimMismatch, "apply: target dims != channel input dim");

  // An unsplit square output (the from_unitary default) inherits the target
  // subsystems' factorization.
  std::vector<OutputFactor> factors = ch.output_factors;
  if (factors.size() == 1 && !factors[0].classical && factors[0].dim == ch.output_dim &&
      ch.output_dim == tdim && targets.size() > 1) {
    factors.clear();
    for (const std::size_t p : tpos) factors.push_back({layout[p].dim, layout[p].classical});
  }

  // output labels
  std::vector<std::string> labels = out_labels;
  if (labels.empty() && factors.size() == targets.size()) labels = targets;
  require(labels.size() == factors.size(), Errc::LayoutMismatch,
          "apply: output labels required for a factor count change");

  const std::vector<std::size_t> dims = layout.dims();
  std::vector<std::size_t> perm = tpos;
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (std::find(tpos.begin(), tpos.end(), i) == tpos.end()) perm.push_back(i);
  const std::size_t rest = layout.total_dim() / tdim;

  ComplexMatrix work = permute_matrix(m, dims, perm);
  ComplexMatrix acc(ch.output_dim * rest, ch.output_dim * rest);
  for (const ComplexMatrix& e : ch.kraus) {
    ComplexMatrix term = kraus_conjugate(e, work, rest);
    kernels::active().axpy(acc.size(), Cx{1.0, 0.0}, term.a.data(), acc.a.data());
  }

  // layout after the permuted application: [factors..., untouched...]
  std::vector<Subsystem> cur;
  for (std::size_t f = 0; f < factors.size(); ++f)
    cur.push_back({labels[f], factors[f].dim, factors[f].classical});
  for (std::size_t p = targets.size(); p < perm.size(); ++p) cur.push_back(layout[perm[p]]);
  SystemLayout cur_layout{cur};

  // Desired order: with one factor per target, each factor keeps its own
  // target's position; otherwise the factor block replaces the first target
  // and the other targets vanish.
  std::vector<std::string> desired;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto it = std::find(tpos.begin(), tpos.end(), i);
    if (it == tpos.end()) {
      desired.push_back(layout[i].label);
    } else if (factors.size() == targets.size()) {
      desired.push_back(labels[static_cast<std::size_t>(it - tpos.begin())]);
    } else if (i == tpos.front()) {
      for (const std::string& l : labels) desired.push_back(l);
    }
  }
  std::vector<std::size_t> backperm;
  for (const std::string& l : desired) backperm.push_back(cur_layout.index_of(l));
  ComplexMatrix final_m = permute_matrix(acc, cur_layout.dims(), backperm);
  std::vector<Subsystem> final_subs;
  for (const std::size_t i : backperm) final_subs.push_back(cur_layout[i]);
  return ApplyResult{std::move(final_m), SystemLayout{std::move(final_subs)}};
}

}  // namespace

DensityOperator apply(const KrausChannel& ch, const DensityOperator& rho,
                      const std::vector<std::string>& targets,
                      const std::vector<std::string>& out_labels) {
  ApplyResult r = apply_raw(ch, rho.matrix, rho.layout, targets, out_labels);
  return DensityOperator::make(std::move(r.layout), std::move(r.matrix));
}

DensityOperator apply_controlled(const ControlledChannel& gamma, const DensityOperator& rho,
                                 const std::string& control,
                                 const std::vector<std::string>& targets,
                                 const std::vector<std::string>& out_labels) {
  const std::size_t cpos = rho.layout.index_of(control);
  require(rho.layout[cpos].classical, Errc::NotClassicalControl,
          "control register " + control + " is not classical");
  require(rho.layout[cpos].dim == gamma.control_dim, Errc::NotClassicalControl,
          "control dimension != branch count");
  require(std::find(targets.begin(), targets.end(), control) == targets.end(),
          Errc::NotClassicalControl, "control cannot be a target");

  // control to the front
  const std::vector<std::size_t> dims = rho.layout.dims();
  std::vector<std::size_t> perm{cpos};
  for (std::size_t i = 0; i < rho.layout.size(); ++i)
    if (i != cpos) perm.push_back(i);
  ComplexMatrix work = permute_matrix(rho.matrix, dims, perm);
  const std::size_t dc = gamma.control_dim;
  const std::size_t rest = rho.dim() / dc;

  for (std::size_t a = 0; a < dc; ++a)
    for (std::size_t b = 0; b < dc; ++b) {
      if (a == b) continue;
      for (std::size_t i = 0; i < rest; ++i)
        for (std::size_t j = 0; j < rest; ++j)
          require(std::abs(work.at(a * rest + i, b * rest + j)) <= kBlockTol, Errc::BlockLeakage,
                  "state is not block-diagonal in the control");
    }

  SystemLayout sub = rho.layout.drop({control});
  ComplexMatrix block(rest, rest);
  SystemLayout new_sub;
  std::vector<ComplexMatrix> out_blocks(dc);
  for (std::size_t a = 0; a < dc; ++a) {
    for (std::size_t i = 0; i < rest; ++i)
      for (std::size_t j = 0; j < rest; ++j) block.at(i, j) = work.at(a * rest + i, a * rest + j);
    ApplyResult r = apply_raw(gamma.branches[a], block, sub, targets, out_labels);
    new_sub = r.layout;
    out_blocks[a] = std::move(r.matrix);
  }

  const std::size_t nrest = out_blocks.front().rows;
  ComplexMatrix assembled(dc * nrest, dc * nrest);
  for (std::size_t a = 0; a < dc; ++a)
    for (std::size_t i = 0; i < nrest; ++i)
      for (std::size_t j = 0; j < nrest; ++j)
        assembled.at(a * nrest + i, a * nrest + j) = out_blocks[a].at(i, j);

  // reinsert the control at its original relative position
  SystemLayout cur = SystemLayout({rho.layout[cpos]});
  for (const Subsystem& s : new_sub.subsystems()) cur = cur.appended(s);
  // with empty out_labels, apply_raw only succeeds when labels == targets
  const std::vector<std::string>& resolved = out_labels.empty() ? targets : out_labels;
  const bool per_target = resolved.size() == targets.size();
  std::vector<std::string> desired;
  for (std::size_t i = 0; i < rho.layout.size(); ++i) {
    const std::string& l = rho.layout[i].label;
    const auto it = std::find(targets.begin(), targets.end(), l);
    if (i == cpos) {
      desired.push_back(control);
    } else if (it == targets.end()) {
      desired.push_back(l);
    } else if (per_target) {
      desired.push_back(resolved[static_cast<std::size_t>(it - targets.begin())]);
    } else if (l == targets.front()) {
      for (const std::string& f : resolved) desired.push_back(f);
    }
  }
  std::vector<std::size_t> backperm;
  for (const std::string& l : desired) backperm.push_back(cur.index_of(l));
  ComplexMatrix final_m = permute_matrix(assembled, cur.dims(), backperm);
  std::vector<Subsystem> final_subs;
  for (const std::size_t i : backperm) final_subs.push_back(cur[i]);
  return DensityOperator::make(SystemLayout{std::move(final_subs)}, std::move(final_m));
}

// ---------------------------------------------------------------------------
// dilation
// ---------------------------------------------------------------------------

std::size_t dilation_ancilla_dim(const KrausChannel& ch) {
  std::size_t k = 1;
  while (k < ch.kraus.size()) k *= 2;
  return k;
}

ComplexMatrix dilate(const KrausChannel& ch) {
  require(ch.input_dim == ch.output_dim, Errc::DimMismatch,
          "dilate: only square channels are dilated");
  const std::size_t d = ch.input_dim;
  const std::size_t ka = dilation_ancilla_dim(ch);
  const std::size_t n = d * ka;

  ComplexMatrix cols(n, d);
  for (std::size_t k = 0; k < ch.kraus.size(); ++k)
    for (std::size_t o = 0; o < d; ++o)
      for (std::size_t i = 0; i < d; ++i) cols.at(o * ka + k, i) = ch.kraus[k].at(o, i);
  ComplexMatrix full = complete_isometry(cols);

  // route column i of `cols` to position (i, anc=0) = i*ka
  ComplexMatrix v(n, n);
  std::size_t next = d;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t src;
    if (col % ka == 0) {
      src = col / ka;
    } else {
      src = next++;
    }
    for (std::size_t r = 0; r < n; ++r) v.at(r, col) = full.at(r, src);
  }
  return v;
}

// ---------------------------------------------------------------------------
// gates
// ---------------------------------------------------------------------------

namespace {

ComplexMatrix pauli_x() {
  ComplexMatrix m(2, 2);
  m.at(0, 1) = 1.0;
  m.at(1, 0) = 1.0;
  return m;
}

ComplexMatrix pauli_y() {
  ComplexMatrix m(2, 2);
  m.at(0, 1) = Cx{0.0, -1.0};
  m.at(1, 0) = Cx{0.0, 1.0};
  return m;
}

ComplexMatrix pauli_z() {
  ComplexMatrix m(2, 2);
  m.at(0, 0) = 1.0;
  m.at(1, 1) = -1.0;
  return m;
}

ComplexMatrix hadamard() {
  const double r = 1.0 / std::sqrt(2.0);
  ComplexMatrix m(2, 2);
  m.at(0, 0) = r;
  m.at(0, 1) = r;
  m.at(1, 0) = r;
  m.at(1, 1) = -r;
  return m;
}

ComplexMatrix phase_s() {
  ComplexMatrix m(2, 2);
  m.at(0, 0) = 1.0;
  m.at(1, 1) = Cx{0.0, 1.0};
  return m;
}

ComplexMatrix cnot() {
  ComplexMatrix m = ComplexMatrix::identity(4);
  m.at(2, 2) = 0.0;
  m.at(3, 3) = 0.0;
  m.at(2, 3) = 1.0;
  m.at(3, 2) = 1.0;
  return m;
}

ComplexMatrix swap_gate() {
  ComplexMatrix m(4, 4);
  m.at(0, 0) = 1.0;
  m.at(1, 2) = 1.0;
  m.at(2, 1) = 1.0;
  m.at(3, 3) = 1.0;
  return m;
}

ComplexMatrix pauli_encode(std::size_t a) {
  switch (a) {
    case 0: return ComplexMatrix::identity(2);
    case 1: return pauli_x();
    case 2: return pauli_z();
    case 3: return matmul(pauli_x(), pauli_z());
    default: fail(Errc::UnknownGate, "PAULI_ENCODE symbol out of range");
  }
}

// Bell basis ordered so that PAULI_ENCODE(a) on the first half of |Phi+>
// lands on basis state a.
std::vector<std::vector<Cx>> bell_basis() {
  const double r = 1.0 / std::sqrt(2.0);
  return {
      {r, 0, 0, r},    // Phi+
      {0, r, r, 0},    // Psi+
      {r, 0, 0, -r},   // Phi-
      {0, r, -r, 0},   // Psi-
  };
}

KrausChannel bell_measure() {
  std::vector<ComplexMatrix> ops;
  const auto basis = bell_basis();
  for (std::size_t k = 0; k < 4; ++k) {
    ComplexMatrix e(4, 4);
    for (std::size_t j = 0; j < 4; ++j) e.at(k, j) = std::conj(basis[k][j]);
    ops.push_back(std::move(e));
  }
  return KrausChannel::make(std::move(ops), {OutputFactor{4, true}});
}

KrausChannel computational_measure(std::size_t d) {
  std::vector<ComplexMatrix> ops;
  for (std::size_t k = 0; k < d; ++k) {
    ComplexMatrix e(d, d);
    e.at(k, k) = 1.0;
    ops.push_back(std::move(e));
  }
  return KrausChannel::make(std::move(ops), {OutputFactor{d, true}});
}

}  // namespace

bool is_standard_gate(const std::string& name) {
  if (name.rfind("PAULI_ENCODE", 0) == 0) return true;
  for (const char* g : {"I", "X", "Y", "Z", "H", "S", "CNOT", "SWAP", "BELL_MEASURE", "MEASURE"})
    if (name == g) return true;
  return false;
}

KrausChannel standard_gate(const std::string& name, std::size_t dim_hint) {
  if (name == "I") return KrausChannel::identity(dim_hint == 0 ? 2 : dim_hint);
  if (name == "X") return KrausChannel::from_unitary(pauli_x());
  if (name == "Y") return KrausChannel::from_unitary(pauli_y());
  if (name == "Z") return KrausChannel::from_unitary(pauli_z());
  if (name == "H") return KrausChannel::from_unitary(hadamard());
  if (name == "S") return KrausChannel::from_unitary(phase_s());
  if (name == "CNOT") return KrausChannel::from_unitary(cnot());
  if (name == "SWAP") return KrausChannel::from_unitary(swap_gate());
  if (name == "BELL_MEASURE") return bell_measure();
  if (name == "MEASURE") return computational_measure(dim_hint == 0 ? 2 : dim_hint);
  if (name.rfind("PAULI_ENCODE(", 0) == 0 && name.back() == ')') {
    const char c = name[13];
    require(name.size() == 15 && c >= '0' && c <= '3', Errc::UnknownGate, name);
    return KrausChannel::from_unitary(pauli_encode(static_cast<std::size_t>(c - '0')));
  }
  fail(Errc::UnknownGate, "unknown gate " + name);
}

ControlledChannel controlled_gate(const std::string& name, std::size_t control_dim,
                                  std::size_t dim_hint) {
  require(control_dim >= 2, Errc::NotClassicalControl, "control dim must be >= 2");
  if (name == "PAULI_ENCODE") {
    require(control_dim == 4, Errc::DimMismatch, "PAULI_ENCODE needs a 4-symbol control");
    std::vector<KrausChannel> branches;
    for (std::size_t a = 0; a < 4; ++a)
      branches.push_back(KrausChannel::from_unitary(pauli_encode(a)));
    return ControlledChannel::make(std::move(branches));
  }
  KrausChannel base = standard_gate(name, dim_hint);
  require(base.is_unitary(), Errc::NotClassicalControl,
          "controlled_gate: " + name + " is not unitary");
  std::vector<KrausChannel> branches;
  ComplexMatrix power = ComplexMatrix::identity(base.input_dim);
  for (std::size_t a = 0; a < control_dim; ++a) {
    branches.push_back(KrausChannel::from_unitary(power));
    power = matmul(base.kraus[0], power);
  }
  return ControlledChannel::make(std::move(branches));
}

}  // namespace qleak
