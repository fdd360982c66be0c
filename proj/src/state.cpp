#include "qleak/state.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace qleak {

namespace {
constexpr double kStateTol = 1e-9;
constexpr double kRankTol = 1e-9;

std::vector<std::size_t> layout_dims(const SystemLayout& l) { return l.dims(); }

// Index offsets of each subsystem digit combination within the flat index:
// returns per-subsystem strides.
std::vector<std::size_t> strides_of(const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> s(dims.size(), 1);
  for (std::size_t i = dims.size(); i-- > 1;) s[i - 1] = s[i] * dims[i];
  return s;
}

// Flat indices spanned by a subset of subsystems (others held at zero),
// enumerated row-major in layout order.
std::vector<std::size_t> subset_offsets(const std::vector<std::size_t>& dims,
                                        const std::vector<std::size_t>& strides,
                                        const std::vector<bool>& in_subset, bool subset_flag) {
  std::vector<std::size_t> out{0};
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (in_subset[i] != subset_flag) continue;
    const std::size_t d = dims[i];
    const std::size_t stride = strides[i];
    const std::size_t built = out.size();
    out.resize(built * d);
    for (std::size_t b = built; b-- > 0;)
      for (std::size_t v = d; v-- > 0;) out[b * d + v] = out[b] + v * stride;
  }
  return out;
}

// Square root of a (numerically) PSD matrix. Eigenvalues below a relative
// clamp are zeroed; without the clamp, eigenvalue noise epsilon at the origin
// turns into sqrt(epsilon)-sized spurious contributions.
ComplexMatrix psd_sqrt_clamped(const ComplexMatrix& m) {
  HermitianEig e = hermitian_eig(hermitize(m));
  const double lmax = e.eigenvalues.empty() ? 0.0 : std::max(0.0, e.eigenvalues.front());
  const double clamp = 1e-14 * std::max(lmax, 1e-300);
  ComplexMatrix vs = e.eigenvectors;
  for (std::size_t j = 0; j < vs.cols; ++j) {
    const double lam = e.eigenvalues[j];
    const double r = lam > clamp ? std::sqrt(lam) : 0.0;
    for (std::size_t i = 0; i < vs.rows; ++i) vs.at(i, j) *= r;
  }
  return matmul(vs, adjoint(e.eigenvectors));
}

// tr sqrt(m) for numerically-PSD m of unit-trace-state scale.
double sqrt_trace_of_psd(const ComplexMatrix& m) {
  HermitianEig e = hermitian_eig(hermitize(m));
  double s = 0.0;
  for (double lam : e.eigenvalues)
    if (lam > 1e-13) s += std::sqrt(lam);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// SystemLayout
// ---------------------------------------------------------------------------

SystemLayout::SystemLayout(std::vector<Subsystem> subs) : subs_(std::move(subs)) {
  std::set<std::string> seen;
  std::size_t total = 1;
  for (const Subsystem& s : subs_) {
    require(!s.label.empty(), Errc::UnknownLabel, "empty subsystem label");
    require(seen.insert(s.label).second, Errc::UnknownLabel, "duplicate label " + s.label);
    require(s.dim >= 2, Errc::BadDims, "subsystem dim must be >= 2: " + s.label);
    total *= s.dim;
    require(total <= kMaxTotalDim, Errc::DimensionOverflow, "total dimension exceeds 256");
  }
}

std::size_t SystemLayout::total_dim() const {
  std::size_t t = 1;
  for (const Subsystem& s : subs_) t *= s.dim;
  return t;
}

std::vector<std::size_t> SystemLayout::dims() const {
  std::vector<std::size_t> d(subs_.size());
  for (std::size_t i = 0; i < subs_.size(); ++i) d[i] = subs_[i].dim;
  return d;
}

bool SystemLayout::has(const std::string& label) const {
  for (const Subsystem& s : subs_)
    if (s.label == label) return true;
  return false;
}

std::size_t SystemLayout::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < subs_.size(); ++i)
    if (subs_[i].label == label) return i;
  fail(Errc::UnknownLabel, "no subsystem named " + label);
}

SystemLayout SystemLayout::keep(const std::vector<std::string>& labels) const {
  std::vector<Subsystem> out;
  for (const Subsystem& s : subs_)
    if (std::find(labels.begin(), labels.end(), s.label) != labels.end()) out.push_back(s);
  for (const std::string& l : labels) index_of(l);  // validate
  return SystemLayout(std::move(out));
}

SystemLayout SystemLayout::drop(const std::vector<std::string>& labels) const {
  std::vector<Subsystem> out;
  for (const Subsystem& s : subs_)
    if (std::find(labels.begin(), labels.end(), s.label) == labels.end()) out.push_back(s);
  return SystemLayout(std::move(out));
}

SystemLayout SystemLayout::appended(Subsystem s) const {
  std::vector<Subsystem> out = subs_;
  out.push_back(std::move(s));
  return SystemLayout(std::move(out));
}

// ---------------------------------------------------------------------------
// Raw index utilities
// ---------------------------------------------------------------------------

ComplexMatrix ptrace_matrix(const ComplexMatrix& m, const std::vector<std::size_t>& dims,
                            const std::vector<bool>& keep) {
  require(dims.size() == keep.size(), Errc::DimMismatch, "ptrace_matrix: dims/keep size");
  const std::vector<std::size_t> strides = strides_of(dims);
  const std::vector<std::size_t> kofs = subset_offsets(dims, strides, keep, true);
  const std::vector<std::size_t> tofs = subset_offsets(dims, strides, keep, false);
  const std::size_t dk = kofs.size();
  ComplexMatrix out(dk, dk);
  for (std::size_t i = 0; i < dk; ++i)
    for (std::size_t j = 0; j < dk; ++j) {
      Cx s{};
      for (const std::size_t t : tofs) s += m.at(kofs[i] + t, kofs[j] + t);
      out.at(i, j) = s;
    }
  return out;
}

namespace {

std::vector<std::size_t> permutation_index_map(const std::vector<std::size_t>& dims,
                                               const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> new_dims(perm.size());
  for (std::size_t p = 0; p < perm.size(); ++p) new_dims[p] = dims[perm[p]];
  const std::vector<std::size_t> old_strides = strides_of(dims);
  const std::vector<std::size_t> new_strides = strides_of(new_dims);
  std::size_t total = 1;
  for (std::size_t d : dims) total *= d;
  std::vector<std::size_t> map(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    std::size_t old_idx = 0;
    for (std::size_t p = 0; p < perm.size(); ++p) {
      const std::size_t digit = rest / new_strides[p];
      rest %= new_strides[p];
      old_idx += digit * old_strides[perm[p]];
    }
    map[idx] = old_idx;
  }
  return map;
}

}  // namespace

ComplexMatrix permute_matrix(const ComplexMatrix& m, const std::vector<std::size_t>& dims,
                             const std::vector<std::size_t>& perm) {
  const std::vector<std::size_t> map = permutation_index_map(dims, perm);
  const std::size_t n = map.size();
  require(m.rows == n && m.cols == n, Errc::DimMismatch, "permute_matrix: size");
  ComplexMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = m.at(map[i], map[j]);
  return out;
}

std::vector<Cx> permute_vector(const std::vector<Cx>& v, const std::vector<std::size_t>& dims,
                               const std::vector<std::size_t>& perm) {
  const std::vector<std::size_t> map = permutation_index_map(dims, perm);
  require(v.size() == map.size(), Errc::DimMismatch, "permute_vector: size");
  std::vector<Cx> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[map[i]];
  return out;
}

// ---------------------------------------------------------------------------
// DensityOperator / PureState
// ---------------------------------------------------------------------------

DensityOperator DensityOperator::make(SystemLayout layout, ComplexMatrix m) {
  const std::size_t n = layout.total_dim();
  require(m.rows == n && m.cols == n, Errc::LayoutMismatch, "state matrix size != layout dim");
  require(all_finite(m), Errc::NotFinite, "state has non-finite entries");
  require(hermitian_defect(m) <= kStateTol, Errc::NotHermitian, "state not Hermitian within 1e-9");
  ComplexMatrix h = hermitize(m);
  require(std::abs(trace(h).real() - 1.0) <= kStateTol && std::abs(trace(h).imag()) <= kStateTol,
          Errc::NotPSD, "state trace differs from 1");
  // PSD within -1e-9: a Cholesky of h + 1e-9*id succeeding certifies it.
  ComplexMatrix shifted = h;
  for (std::size_t i = 0; i < n; ++i) shifted.at(i, i) += kStateTol;
  if (!cholesky(shifted).has_value())
    require(min_eigenvalue(h) >= -kStateTol, Errc::NotPSD, "state has eigenvalue below -1e-9");

  // classical subsystems must be diagonal after tracing out the rest
  const std::vector<std::size_t> dims = layout.dims();
  for (std::size_t s = 0; s < layout.size(); ++s) {
    if (!layout[s].classical) continue;
    std::vector<bool> keep(layout.size(), false);
    keep[s] = true;
    ComplexMatrix red = ptrace_matrix(h, dims, keep);
    for (std::size_t i = 0; i < red.rows; ++i)
      for (std::size_t j = 0; j < red.cols; ++j)
        if (i != j)
          require(std::abs(red.at(i, j)) <= kStateTol, Errc::NotCQ,
                  "classical subsystem " + layout[s].label + " has off-diagonal mass");
  }
  return DensityOperator{std::move(layout), std::move(h)};
}

PureState PureState::make(SystemLayout layout, std::vector<Cx> amps) {
  require(amps.size() == layout.total_dim(), Errc::LayoutMismatch, "amplitude size != layout dim");
  const double n2 = kernels::active().nrm2sq(amps.size(), amps.data());
  require(std::abs(n2 - 1.0) <= 2e-10, Errc::NotPSD, "amplitudes not unit norm");
  return PureState{std::move(layout), std::move(amps)};
}

DensityOperator PureState::to_density() const {
  const std::size_t n = amplitudes.size();
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m.at(i, j) = amplitudes[i] * std::conj(amplitudes[j]);
  return DensityOperator::make(layout, std::move(m));
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

DensityOperator partial_trace(const DensityOperator& rho, const std::vector<std::string>& keep) {
  require(!keep.empty(), Errc::BadPartition, "partial_trace: empty keep set");
  for (const std::string& l : keep) rho.layout.index_of(l);
  std::vector<bool> mask(rho.layout.size(), false);
  for (std::size_t i = 0; i < rho.layout.size(); ++i)
    mask[i] = std::find(keep.begin(), keep.end(), rho.layout[i].label) != keep.end();
  ComplexMatrix red = ptrace_matrix(rho.matrix, layout_dims(rho.layout), mask);
  return DensityOperator::make(rho.layout.keep(keep), std::move(red));
}

DensityOperator make_cq(const std::string& classical_label, const std::vector<double>& weights,
                        const std::vector<DensityOperator>& conditionals) {
  require(!weights.empty() && weights.size() == conditionals.size(), Errc::WeightMismatch,
          "make_cq: weights/conditionals size mismatch");
  double sum = 0.0;
  for (double w : weights) {
    require(w >= -1e-12, Errc::WeightMismatch, "make_cq: negative weight");
    sum += w;
  }
  require(std::abs(sum - 1.0) <= 1e-12, Errc::WeightMismatch, "make_cq: weights must sum to 1");
  for (const DensityOperator& c : conditionals)
    require(c.layout == conditionals.front().layout, Errc::LayoutMismatch,
            "make_cq: conditional layouts differ");

  const std::size_t da = std::max<std::size_t>(2, weights.size());
  const std::size_t db = conditionals.front().dim();
  SystemLayout layout = SystemLayout({{classical_label, da, true}});
  for (const Subsystem& s : conditionals.front().layout.subsystems()) layout = layout.appended(s);

  ComplexMatrix m(da * db, da * db);
  for (std::size_t a = 0; a < weights.size(); ++a) {
    if (weights[a] == 0.0) continue;
    for (std::size_t i = 0; i < db; ++i)
      for (std::size_t j = 0; j < db; ++j)
        m.at(a * db + i, a * db + j) = weights[a] * conditionals[a].matrix.at(i, j);
  }
  return DensityOperator::make(std::move(layout), std::move(m));
}

PureState epr_pairs(std::size_t m) {
  require(m >= 1, Errc::BadDims, "epr_pairs: need at least one pair");
  std::size_t total = 1;
  for (std::size_t i = 0; i < m; ++i) {
    total *= 4;
    require(total <= SystemLayout::kMaxTotalDim, Errc::DimensionOverflow,
            "epr_pairs: 4^m exceeds 256");
  }
  std::vector<Subsystem> subs;
  for (std::size_t i = 1; i <= m; ++i) {
    subs.push_back({"A" + std::to_string(i), 2, false});
    subs.push_back({"B" + std::to_string(i), 2, false});
  }
  SystemLayout layout{std::move(subs)};
  std::vector<Cx> amps(total, Cx{});
  const double coef = std::pow(0.5, static_cast<double>(m) / 2.0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    bool diag = true;
    for (std::size_t p = 0; p < m; ++p) {
      const std::size_t shift = 2 * (m - p) - 2;
      if (((idx >> (shift + 1)) & 1) != ((idx >> shift) & 1)) {
        diag = false;
        break;
      }
    }
    if (diag) amps[idx] = coef;
  }
  return PureState::make(std::move(layout), std::move(amps));
}

PureState purify(const DensityOperator& rho) {
  HermitianEig e = hermitian_eig(rho.matrix);
  const std::size_t n = rho.dim();
  std::size_t rank = 0;
  for (double lam : e.eigenvalues)
    if (lam > kRankTol) ++rank;
  rank = std::max<std::size_t>(rank, 1);
  if (rank == 1) {
    std::vector<Cx> amps(n);
    for (std::size_t i = 0; i < n; ++i) amps[i] = e.eigenvectors.at(i, 0);
    return PureState::make(rho.layout, std::move(amps));
  }
  std::string env = "E";
  for (int k = 0; rho.layout.has(env); ++k) env = "E" + std::to_string(k);
  SystemLayout layout = rho.layout.appended({env, rank, false});
  std::vector<Cx> amps(n * rank, Cx{});
  for (std::size_t k = 0; k < rank; ++k) {
    const double r = std::sqrt(std::max(0.0, e.eigenvalues[k]));
    for (std::size_t i = 0; i < n; ++i) amps[i * rank + k] = r * e.eigenvectors.at(i, k);
  }
  // renormalize the tail truncation
  const double n2 = kernels::active().nrm2sq(amps.size(), amps.data());
  kernels::active().scal(amps.size(), Cx{1.0 / std::sqrt(n2), 0.0}, amps.data());
  return PureState::make(std::move(layout), std::move(amps));
}

SchmidtDecomposition schmidt(const PureState& psi, const std::vector<std::string>& cut) {
  require(!cut.empty(), Errc::BadCut, "schmidt: empty cut");
  require(cut.size() < psi.layout.size(), Errc::BadCut, "schmidt: cut must be a proper subset");
  for (const std::string& l : cut) psi.layout.index_of(l);

  const std::size_t ns = psi.layout.size();
  std::vector<std::size_t> perm;
  for (std::size_t i = 0; i < ns; ++i)
    if (std::find(cut.begin(), cut.end(), psi.layout[i].label) != cut.end()) perm.push_back(i);
  const std::size_t ncut = perm.size();
  for (std::size_t i = 0; i < ns; ++i)
    if (std::find(perm.begin(), perm.end(), i) == perm.end()) perm.push_back(i);

  const std::vector<std::size_t> dims = layout_dims(psi.layout);
  std::vector<Cx> v = permute_vector(psi.amplitudes, dims, perm);
  std::size_t dcut = 1;
  for (std::size_t i = 0; i < ncut; ++i) dcut *= dims[perm[i]];
  const std::size_t drest = psi.dim() / dcut;

  ComplexMatrix m(dcut, drest);
  std::copy(v.begin(), v.end(), m.a.begin());
  SVDResult s = svd(m);

  SchmidtDecomposition out;
  const std::size_t k = s.singular.size();
  out.coefficients = s.singular;
  out.left_vectors = ComplexMatrix(dcut, k);
  out.right_vectors = ComplexMatrix(drest, k);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < dcut; ++i) out.left_vectors.at(i, j) = s.left.at(i, j);
    for (std::size_t i = 0; i < drest; ++i)
      out.right_vectors.at(i, j) = std::conj(s.right.at(i, j));
  }
  for (double c : out.coefficients)
    if (c > kRankTol) ++out.rank;
  return out;
}

double fidelity(const DensityOperator& rho, const DensityOperator& sigma) {
  require(rho.layout == sigma.layout, Errc::LayoutMismatch, "fidelity: layouts differ");
  const ComplexMatrix r = psd_sqrt_clamped(rho.matrix);
  const double f = sqrt_trace_of_psd(matmul(matmul(r, sigma.matrix), r));
  return std::clamp(f, 0.0, 1.0);
}

double purified_distance(const DensityOperator& rho, const DensityOperator& sigma) {
  const double f = fidelity(rho, sigma);
  return std::sqrt(std::clamp(1.0 - f * f, 0.0, 1.0));
}

double trace_distance(const DensityOperator& rho, const DensityOperator& sigma) {
  require(rho.layout == sigma.layout, Errc::LayoutMismatch, "trace_distance: layouts differ");
  return trace_norm(sub(rho.matrix, sigma.matrix));
}

namespace {

// Splits a layout into (part, rest) with a permutation putting `part` labels
// (in their original relative order) in front.
struct SplitPlan {
  std::vector<std::size_t> perm;
  std::size_t n_front = 0;
  std::size_t d_front = 1;
  std::size_t d_back = 1;
};

SplitPlan split_plan(const SystemLayout& layout, const std::vector<std::string>& front_labels) {
  for (const std::string& l : front_labels) layout.index_of(l);
  SplitPlan plan;
  const std::size_t ns = layout.size();
  for (std::size_t i = 0; i < ns; ++i)
    if (std::find(front_labels.begin(), front_labels.end(), layout[i].label) !=
        front_labels.end()) {
      plan.perm.push_back(i);
      plan.d_front *= layout[i].dim;
    }
  plan.n_front = plan.perm.size();
  for (std::size_t i = 0; i < ns; ++i)
    if (std::find(plan.perm.begin(), plan.perm.end(), i) == plan.perm.end()) {
      plan.perm.push_back(i);
      plan.d_back *= layout[i].dim;
    }
  return plan;
}

std::vector<std::size_t> inverse_perm(const std::vector<std::size_t>& p) {
  std::vector<std::size_t> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = i;
  return inv;
}

}  // namespace

DensityOperator uhlmann_extension(const DensityOperator& rho_ab, const DensityOperator& sigma_a) {
  // sigma_a's labels must form a sublayout of rho_ab.
  std::vector<std::string> a_labels;
  for (const Subsystem& s : sigma_a.layout.subsystems()) a_labels.push_back(s.label);
  require(rho_ab.layout.keep(a_labels) == sigma_a.layout, Errc::LayoutMismatch,
          "uhlmann_extension: sigma_a layout is not a sublayout of rho_ab");
  if (a_labels.size() == rho_ab.layout.size()) return sigma_a;

  const SplitPlan plan = split_plan(rho_ab.layout, a_labels);
  const std::vector<std::size_t> dims = layout_dims(rho_ab.layout);
  ComplexMatrix rho_perm = permute_matrix(rho_ab.matrix, dims, plan.perm);
  const std::size_t da = plan.d_front;
  const std::size_t db = plan.d_back;

  // Purification |psi> of rho_ab over A (x) B (x) R.
  HermitianEig er = hermitian_eig(rho_perm);
  std::size_t rank_rho = 0;
  for (double lam : er.eigenvalues)
    if (lam > kRankTol) ++rank_rho;
  rank_rho = std::max<std::size_t>(rank_rho, 1);

  HermitianEig es = hermitian_eig(sigma_a.matrix);
  std::size_t rank_sig = 0;
  for (double lam : es.eigenvalues)
    if (lam > kRankTol) ++rank_sig;
  rank_sig = std::max<std::size_t>(rank_sig, 1);

  std::size_t dr = rank_rho;
  while (db * dr < rank_sig) ++dr;

  const std::size_t dbr = db * dr;
  // psi[(a,b),r]
  ComplexMatrix psi(da * db, dr);
  for (std::size_t k = 0; k < std::min(rank_rho, dr); ++k) {
    const double r = std::sqrt(std::max(0.0, er.eigenvalues[k]));
    for (std::size_t i = 0; i < da * db; ++i) psi.at(i, k) = r * er.eigenvectors.at(i, k);
  }
  // phi0[a, (b,r)]: canonical purification of sigma_a over the BR factor.
  ComplexMatrix phi0(da, dbr);
  for (std::size_t k = 0; k < rank_sig; ++k) {
    const double r = std::sqrt(std::max(0.0, es.eigenvalues[k]));
    for (std::size_t a = 0; a < da; ++a) phi0.at(a, k) = r * es.eigenvectors.at(a, k);
  }

  // K[v,u] = sum_a phi0[a,v] conj(psi[a,u]), indices u,v over BR.
  ComplexMatrix k(dbr, dbr);
  for (std::size_t a = 0; a < da; ++a)
    for (std::size_t v = 0; v < dbr; ++v) {
      const Cx pav = phi0.at(a, v);
      if (pav == Cx{}) continue;
      for (std::size_t u = 0; u < dbr; ++u) {
        const std::size_t b = u / dr;
        const std::size_t r = u % dr;
        k.at(v, u) += pav * std::conj(psi.at(a * db + b, r));
      }
    }
  SVDResult dec = svd(k);
  // W = Q P† maximizes Re tr(W K) over unitaries.
  ComplexMatrix w = matmul(dec.right, adjoint(dec.left));

  // |phi> = (id_A (x) W) |phi0>, then trace out R.
  ComplexMatrix phi(da, dbr);
  for (std::size_t a = 0; a < da; ++a)
    for (std::size_t u = 0; u < dbr; ++u) {
      Cx s{};
      for (std::size_t v = 0; v < dbr; ++v) s += w.at(u, v) * phi0.at(a, v);
      phi.at(a, u) = s;
    }
  ComplexMatrix out(da * db, da * db);
  for (std::size_t a1 = 0; a1 < da; ++a1)
    for (std::size_t b1 = 0; b1 < db; ++b1)
      for (std::size_t a2 = 0; a2 < da; ++a2)
        for (std::size_t b2 = 0; b2 < db; ++b2) {
          Cx s{};
          for (std::size_t r = 0; r < dr; ++r)
            s += phi.at(a1, b1 * dr + r) * std::conj(phi.at(a2, b2 * dr + r));
          out.at(a1 * db + b1, a2 * db + b2) = s;
        }

  // back to the original subsystem order
  std::vector<std::size_t> perm_dims(plan.perm.size());
  for (std::size_t p = 0; p < plan.perm.size(); ++p) perm_dims[p] = dims[plan.perm[p]];
  ComplexMatrix restored = permute_matrix(out, perm_dims, inverse_perm(plan.perm));
  return DensityOperator::make(rho_ab.layout, std::move(restored));
}

ComplexMatrix lo_attack_unitary(const PureState& phi, const PureState& psi,
                                const std::vector<std::string>& b_labels) {
  require(phi.layout == psi.layout, Errc::LayoutMismatch, "lo_attack_unitary: layouts differ");
  require(!b_labels.empty(), Errc::BadCut, "lo_attack_unitary: empty B part");
  const SplitPlan plan = split_plan(phi.layout, b_labels);  // B in front
  const std::vector<std::size_t> dims = layout_dims(phi.layout);
  // reorder to (A, B) = (rest, b) for row-major reshaping with B fastest
  std::vector<std::size_t> perm;
  perm.assign(plan.perm.begin() + static_cast<long>(plan.n_front), plan.perm.end());
  perm.insert(perm.end(), plan.perm.begin(), plan.perm.begin() + static_cast<long>(plan.n_front));
  std::vector<Cx> vphi = permute_vector(phi.amplitudes, dims, perm);
  std::vector<Cx> vpsi = permute_vector(psi.amplitudes, dims, perm);
  const std::size_t db = plan.d_front;
  const std::size_t da = plan.d_back;

  // K[v,u] = sum_a psi[a,v] conj(phi[a,u]); U = Q P† from K = P S Q†.
  ComplexMatrix k(db, db);
  for (std::size_t a = 0; a < da; ++a)
    for (std::size_t v = 0; v < db; ++v) {
      const Cx pav = vpsi[a * db + v];
      if (pav == Cx{}) continue;
      for (std::size_t u = 0; u < db; ++u) k.at(v, u) += pav * std::conj(vphi[a * db + u]);
    }
  SVDResult dec = svd(k);
  return matmul(dec.right, adjoint(dec.left));
}

PureState apply_local_unitary(const PureState& psi, const ComplexMatrix& u,
                              const std::vector<std::string>& b_labels) {
  const SplitPlan plan = split_plan(psi.layout, b_labels);
  const std::vector<std::size_t> dims = layout_dims(psi.layout);
  std::vector<std::size_t> perm;
  perm.assign(plan.perm.begin() + static_cast<long>(plan.n_front), plan.perm.end());
  perm.insert(perm.end(), plan.perm.begin(), plan.perm.begin() + static_cast<long>(plan.n_front));
  std::vector<Cx> v = permute_vector(psi.amplitudes, dims, perm);
  const std::size_t db = plan.d_front;
  const std::size_t da = plan.d_back;
  require(u.rows == db && u.cols == db, Errc::DimMismatch, "apply_local_unitary: size");
  std::vector<Cx> out(v.size());
  for (std::size_t a = 0; a < da; ++a)
    for (std::size_t i = 0; i < db; ++i) {
      Cx s{};
      for (std::size_t j = 0; j < db; ++j) s += u.at(i, j) * v[a * db + j];
      out[a * db + i] = s;
    }
  // restore original order
  std::vector<std::size_t> perm_dims(perm.size());
  for (std::size_t p = 0; p < perm.size(); ++p) perm_dims[p] = dims[perm[p]];
  std::vector<Cx> restored = permute_vector(out, perm_dims, inverse_perm(perm));
  return PureState::make(psi.layout, std::move(restored));
}

}  // namespace qleak
