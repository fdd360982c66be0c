#include "qleak/minentropy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <optional>

namespace qleak {

namespace {

constexpr double kGapCertBits = 1e-6;    // certificate requirement
constexpr double kGapTargetBits = 5e-9;  // what the solver actually aims for
constexpr std::size_t kIterCap = 500;

// ---------------------------------------------------------------------------
// Real coordinates on the Hermitian db x db space.
// Order: db diagonal entries, then (sym, asym) pairs for k < l row-major.
// ---------------------------------------------------------------------------

struct BasisEntry {
  std::size_t r, c;
  Cx v;
};

std::vector<std::array<BasisEntry, 2>> herm_basis(std::size_t db) {
  const double s = 1.0 / std::sqrt(2.0);
  std::vector<std::array<BasisEntry, 2>> basis;
  basis.reserve(db * db);
  for (std::size_t b = 0; b < db; ++b)
    basis.push_back({BasisEntry{b, b, Cx{1.0, 0.0}}, BasisEntry{b, b, Cx{}}});
  for (std::size_t k = 0; k < db; ++k)
    for (std::size_t l = k + 1; l < db; ++l) {
      basis.push_back({BasisEntry{k, l, Cx{s, 0.0}}, BasisEntry{l, k, Cx{s, 0.0}}});
      basis.push_back({BasisEntry{k, l, Cx{0.0, s}}, BasisEntry{l, k, Cx{0.0, -s}}});
    }
  return basis;
}

ComplexMatrix mat_from_coords(const std::vector<double>& c, std::size_t db) {
  const double s = 1.0 / std::sqrt(2.0);
  ComplexMatrix m(db, db);
  std::size_t p = 0;
  for (std::size_t b = 0; b < db; ++b) m.at(b, b) = c[p++];
  for (std::size_t k = 0; k < db; ++k)
    for (std::size_t l = k + 1; l < db; ++l) {
      const double cs = c[p++];
      const double ca = c[p++];
      m.at(k, l) = Cx{cs * s, ca * s};
      m.at(l, k) = Cx{cs * s, -ca * s};
    }
  return m;
}

std::vector<double> coords_from_mat(const ComplexMatrix& m) {
  const std::size_t db = m.rows;
  const double s = std::sqrt(2.0);
  std::vector<double> c(db * db);
  std::size_t p = 0;
  for (std::size_t b = 0; b < db; ++b) c[p++] = m.at(b, b).real();
  for (std::size_t k = 0; k < db; ++k)
    for (std::size_t l = k + 1; l < db; ++l) {
      c[p++] = s * m.at(k, l).real();
      c[p++] = s * m.at(k, l).imag();
    }
  return c;
}

// id_A (x) sigma
ComplexMatrix lift(const ComplexMatrix& sigma, std::size_t da) {
  const std::size_t db = sigma.rows;
  ComplexMatrix m(da * db, da * db);
  for (std::size_t a = 0; a < da; ++a)
    for (std::size_t i = 0; i < db; ++i)
      for (std::size_t j = 0; j < db; ++j) m.at(a * db + i, a * db + j) = sigma.at(i, j);
  return m;
}

ComplexMatrix trace_out_a(const ComplexMatrix& m, std::size_t da, std::size_t db) {
  ComplexMatrix out(db, db);
  for (std::size_t a = 0; a < da; ++a)
    for (std::size_t i = 0; i < db; ++i)
      for (std::size_t j = 0; j < db; ++j) out.at(i, j) += m.at(a * db + i, a * db + j);
  return out;
}

// Real SPD solve, a destroyed. Returns false if the factorization fails.
bool spd_solve(std::vector<double>& a, std::vector<double>& b, std::size_t q) {
  for (std::size_t j = 0; j < q; ++j) {
    double d = a[j * q + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * q + k] * a[j * q + k];
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double l = std::sqrt(d);
    a[j * q + j] = l;
    for (std::size_t i = j + 1; i < q; ++i) {
      double s = a[i * q + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * q + k] * a[j * q + k];
      a[i * q + j] = s / l;
    }
  }
  for (std::size_t i = 0; i < q; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * q + k] * b[k];
    b[i] = s / a[i * q + i];
  }
  for (std::size_t i = q; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < q; ++k) s -= a[k * q + i] * b[k];
    b[i] = s / a[i * q + i];
  }
  return true;
}

// Exact barrier Hessian H[p,q] = mu * Re tr(B_p TrA(T lift(B_q) T)) in the
// real Hermitian basis, via the contraction
//   Gc[(b1,b3),(b4,b2)] = sum_{a1,a2} T[(a1,b1),(a2,b3)] T[(a2,b4),(a1,b2)]
// computed as one (db^2 x da^2) x (da^2 x db^2) product.
std::vector<double> hessian_real(const ComplexMatrix& t, std::size_t da, std::size_t db,
                                 double mu,
                                 const std::vector<std::array<BasisEntry, 2>>& basis) {
  const std::size_t q = db * db;
  ComplexMatrix u(q, da * da);
  ComplexMatrix v(da * da, q);
  for (std::size_t a1 = 0; a1 < da; ++a1)
    for (std::size_t a2 = 0; a2 < da; ++a2)
      for (std::size_t b1 = 0; b1 < db; ++b1)
        for (std::size_t b2 = 0; b2 < db; ++b2) {
          u.at(b1 * db + b2, a1 * da + a2) = t.at(a1 * db + b1, a2 * db + b2);
          v.at(a1 * da + a2, b1 * db + b2) = t.at(a2 * db + b1, a1 * db + b2);
        }
  ComplexMatrix gc = matmul(u, v);

  std::vector<double> h(q * q);
  for (std::size_t p = 0; p < q; ++p)
    for (std::size_t r = 0; r < q; ++r) {
      Cx acc{};
      for (const BasisEntry& ep : basis[p]) {
        if (ep.v == Cx{}) continue;
        for (const BasisEntry& er : basis[r]) {
          if (er.v == Cx{}) continue;
          // B_p entry (b1,b2), B_r entry (b3,b4)
          acc += std::conj(ep.v) * er.v * gc.at(ep.r * db + er.r, er.c * db + ep.c);
        }
      }
      h[p * q + r] = mu * acc.real();
    }
  return h;
}

// Re tr(a b) for Hermitian a, b without forming the product.
double herm_trace_prod(const ComplexMatrix& a, const ComplexMatrix& b) {
  return kernels::active().dotc(a.size(), b.a.data(), a.a.data()).real();
}

struct DualCandidate {
  ComplexMatrix x;
  double value = 0.0;
  double min_eig = 0.0;  // lower bound; -1e-9 means "certified >= -1e-9"
};

// Shifts X to exact Tr_A feasibility, then evaluates it.
DualCandidate finish_dual(ComplexMatrix x, const ComplexMatrix& rho, std::size_t da,
                          std::size_t db) {
  const std::size_t n = da * db;
  ComplexMatrix defect = sub(ComplexMatrix::identity(db), trace_out_a(x, da, db));
  ComplexMatrix corr = lift(scale(defect, Cx{1.0 / static_cast<double>(da), 0.0}), da);
  x = hermitize(add(x, corr));
  DualCandidate out;
  // cheap PSD-within-tolerance certificate; fall back to the spectrum only
  // when the shifted factorization fails
  ComplexMatrix shifted = x;
  for (std::size_t i = 0; i < n; ++i) shifted.at(i, i) += 1e-9;
  if (cholesky(shifted).has_value()) {
    out.min_eig = -1e-9;
  } else {
    out.min_eig = min_eigenvalue(x);
    if (out.min_eig < -1e-9) {
      // mix toward id/da, which is strictly dual feasible
      const double lm = -out.min_eig;
      const double t = (lm + 1e-12) / (lm + 1.0 / static_cast<double>(da));
      ComplexMatrix center = scale(ComplexMatrix::identity(n),
                                   Cx{1.0 / static_cast<double>(da), 0.0});
      x = add(scale(x, Cx{1.0 - t, 0.0}), scale(center, Cx{t, 0.0}));
      out.min_eig = min_eigenvalue(x);
    }
  }
  out.value = herm_trace_prod(rho, x);
  out.x = std::move(x);
  return out;
}

struct PolishOutcome {
  ComplexMatrix sigma;
  double primal = 0.0;
  ComplexMatrix x;  // empty when no dual certificate was produced
  double dual = 0.0;
};

// Complementarity polish. Each round identifies the near-null face of the
// slack, solves the face equations for the primal in least squares, and
// projects the dual onto the face with Tr_A X = id_B re-imposed. The face
// estimate is rotated by O(mu) at the first round, so rounds iterate from the
// unshifted refined primal until the duality gap stops improving.
std::optional<PolishOutcome> try_polish(const ComplexMatrix& rho, const ComplexMatrix& sigma_in,
                                        const ComplexMatrix& x_barrier, std::size_t da,
                                        std::size_t db) {
  const bool trace_on = std::getenv("QLEAK_SDP_TRACE") != nullptr;
  const std::size_t n = da * db;
  std::optional<PolishOutcome> best;
  ComplexMatrix cur_sigma = sigma_in;
  ComplexMatrix cur_x = x_barrier;
  double prev_span = 1e300;

  for (int round = 0; round < 4; ++round) {
    ComplexMatrix s = hermitize(sub(lift(cur_sigma, da), rho));
    HermitianEig es = hermitian_eig(s);
    const double lmax = std::max(es.eigenvalues.front(), 1e-300);
    const double lmin = es.eigenvalues.back();
    if (lmin < -1e-3 * std::max(1.0, lmax)) break;  // face went badly wrong

    // feasible primal candidate from this round
    ComplexMatrix sigma_feas = cur_sigma;
    if (lmin < 0.0)
      for (std::size_t i = 0; i < db; ++i) sigma_feas.at(i, i) += -lmin + 1e-15;
    const double primal_val = trace(sigma_feas).real();
    if (!best || primal_val < best->primal) {
      if (!best) best = PolishOutcome{};
      best->primal = primal_val;
      best->sigma = sigma_feas;
    }

    // near-null cluster by |lambda|: largest ratio jump below 1e-2 * lmax
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::fabs(es.eigenvalues[a]) < std::fabs(es.eigenvalues[b]);
    });
    std::size_t r = 0;
    double best_ratio = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double lo = std::fabs(es.eigenvalues[order[i - 1]]);
      const double hi = std::max(std::fabs(es.eigenvalues[order[i]]), 1e-300);
      if (lo > 1e-2 * lmax) break;
      const double ratio = hi / std::max(lo, 1e-300);
      if (ratio >= best_ratio) {
        best_ratio = ratio;
        r = i;
      }
    }
    if (r == 0 || best_ratio < 50.0 || r > std::min(n - 1, 3 * db)) {
      if (trace_on)
        std::fprintf(stderr, "  polish stop: cluster r=%zu ratio=%.2e (round %d)\n", r,
                     best_ratio, round);
      break;
    }
    ComplexMatrix p(n, r);
    for (std::size_t j = 0; j < r; ++j)
      for (std::size_t i = 0; i < n; ++i) p.at(i, j) = es.eigenvectors.at(i, order[j]);

    // --- dual on this face: X = P W P+, Tr_A X = id_B in least squares ---
    {
      ComplexMatrix w0 = hermitize(matmul(adjoint(p), matmul(cur_x, p)));
      std::vector<ComplexMatrix> ckl(r * r, ComplexMatrix(db, db));
      for (std::size_t k = 0; k < r; ++k)
        for (std::size_t l = 0; l < r; ++l) {
          ComplexMatrix& c = ckl[k * r + l];
          for (std::size_t a = 0; a < da; ++a)
            for (std::size_t b = 0; b < db; ++b)
              for (std::size_t b2 = 0; b2 < db; ++b2)
                c.at(b, b2) += p.at(a * db + b, k) * std::conj(p.at(a * db + b2, l));
        }
      auto trace_a_of_w = [&](const ComplexMatrix& w) {
        ComplexMatrix t(db, db);
        for (std::size_t k = 0; k < r; ++k)
          for (std::size_t l = 0; l < r; ++l) {
            const Cx wkl = w.at(k, l);
            if (wkl == Cx{}) continue;
            kernels::active().axpy(db * db, wkl, ckl[k * r + l].a.data(), t.a.data());
          }
        return t;
      };
      const auto wbasis = herm_basis(r);
      const std::size_t qw = r * r;
      const std::size_t qb = db * db;
      std::vector<double> lmap(qb * qw);
      for (std::size_t t = 0; t < qw; ++t) {
        ComplexMatrix ft(r, r);
        for (const BasisEntry& e : wbasis[t])
          if (e.v != Cx{}) ft.at(e.r, e.c) += e.v;
        std::vector<double> col = coords_from_mat(trace_a_of_w(ft));
        for (std::size_t i = 0; i < qb; ++i) lmap[i * qw + t] = col[i];
      }
      std::vector<double> ata(qw * qw, 0.0);
      for (std::size_t i = 0; i < qb; ++i)
        for (std::size_t t1 = 0; t1 < qw; ++t1) {
          const double li = lmap[i * qw + t1];
          if (li == 0.0) continue;
          for (std::size_t t2 = 0; t2 < qw; ++t2) ata[t1 * qw + t2] += li * lmap[i * qw + t2];
        }
      auto ls_step = [&](ComplexMatrix& w) {
        std::vector<double> resid =
            coords_from_mat(sub(ComplexMatrix::identity(db), trace_a_of_w(w)));
        std::vector<double> atb(qw, 0.0);
        for (std::size_t i = 0; i < qb; ++i)
          for (std::size_t t1 = 0; t1 < qw; ++t1) atb[t1] += lmap[i * qw + t1] * resid[i];
        std::vector<double> a = ata;
        for (std::size_t t1 = 0; t1 < qw; ++t1) a[t1 * qw + t1] += 1e-13;
        if (!spd_solve(a, atb, qw)) return false;
        w = hermitize(add(w, mat_from_coords(atb, r)));
        return true;
      };
      auto floor_psd = [&](ComplexMatrix& w) {
        HermitianEig ew = hermitian_eig(w);
        if (ew.eigenvalues.back() >= 0.0) return;
        ComplexMatrix vs = ew.eigenvectors;
        for (std::size_t j = 0; j < r; ++j) {
          const double lam = std::max(0.0, ew.eigenvalues[j]);
          for (std::size_t i = 0; i < r; ++i) vs.at(i, j) *= lam;
        }
        w = matmul(vs, adjoint(ew.eigenvectors));
      };

      ComplexMatrix w = w0;
      bool dual_ok = ls_step(w);
      for (int pass = 0; pass < 2 && dual_ok; ++pass) {
        floor_psd(w);
        dual_ok = ls_step(w);
      }
      if (dual_ok &&
          fro_norm(sub(ComplexMatrix::identity(db), trace_a_of_w(w))) <= 1e-8) {
        ComplexMatrix x = matmul(matmul(p, w), adjoint(p));
        DualCandidate dc = finish_dual(std::move(x), rho, da, db);
        if (dc.min_eig >= -1e-9 && dc.value <= best->primal * (1.0 + 1e-9) + 1e-12 &&
            dc.value > best->dual) {
          best->dual = dc.value;
          best->x = dc.x;
          cur_x = std::move(dc.x);
        }
      } else if (trace_on) {
        std::fprintf(stderr, "  polish dual pending (round %d, r=%zu)\n", round, r);
      }
    }

    const double span = best->dual > 0.0 ? best->primal - best->dual : 1e299;
    if (best->x.rows > 0 && best->dual > 0.0 &&
        std::fabs(std::log2(best->primal) - std::log2(best->dual)) <= kGapTargetBits)
      break;
    if (span >= prev_span) break;  // rounds stopped paying
    prev_span = span;

    // --- primal refinement for the next round: solve sigma * M = N ---
    const std::size_t cols = r * da;
    ComplexMatrix m(db, cols), nn(db, cols);
    for (std::size_t j = 0; j < r; ++j) {
      std::vector<Cx> pj(n);
      for (std::size_t i = 0; i < n; ++i) pj[i] = p.at(i, j);
      std::vector<Cx> qj = matvec(rho, pj);
      for (std::size_t a = 0; a < da; ++a)
        for (std::size_t b = 0; b < db; ++b) {
          m.at(b, j * da + a) = pj[a * db + b];
          nn.at(b, j * da + a) = qj[a * db + b];
        }
    }
    ComplexMatrix rhs = sub(nn, matmul(cur_sigma, m));
    ComplexMatrix mmh = matmul(m, adjoint(m));
    const double ridge = 1e-12 * (trace(mmh).real() + 1.0);
    for (std::size_t i = 0; i < db; ++i) mmh.at(i, i) += ridge;
    auto lch = cholesky(mmh);
    if (!lch) break;
    ComplexMatrix delta = matmul(matmul(rhs, adjoint(m)), inverse_from_cholesky(*lch));
    cur_sigma = hermitize(add(cur_sigma, delta));
  }
  if (best && best->x.rows == 0) best->dual = 0.0;
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// solver
// ---------------------------------------------------------------------------

EntropySolution solve_hmin_sdp(const ComplexMatrix& rho_in, std::size_t da, std::size_t db) {
  const std::size_t n = da * db;
  require(rho_in.rows == n && rho_in.cols == n, Errc::DimMismatch, "solve_hmin_sdp: shape");
  const ComplexMatrix rho = hermitize(rho_in);
  const auto basis = herm_basis(db);
  const std::size_t q = db * db;

  // strictly feasible start: scaled marginal plus a ridge
  ComplexMatrix sigma = trace_out_a(rho, da, db);
  for (std::size_t i = 0; i < db; ++i) sigma.at(i, i) += 1e-3;
  sigma = scale(sigma, Cx{1.0 + 1e-3, 0.0});
  for (int guard = 0; guard < 80; ++guard) {
    ComplexMatrix s = sub(lift(sigma, da), rho);
    for (std::size_t i = 0; i < n; ++i) s.at(i, i) -= 1e-3;
    if (cholesky(s).has_value()) break;
    sigma = scale(sigma, Cx{2.0, 0.0});
    require(guard < 79, Errc::SolverDiverged, "could not find a strictly feasible start");
  }

  double mu = 1.0;
  std::size_t iterations = 0;
  bool stalled = false;

  double best_primal = trace(sigma).real();
  ComplexMatrix best_sigma = sigma;
  double best_dual = 0.0;
  ComplexMatrix best_x;
  ComplexMatrix last_t;  // S^{-1} at the last centered point

  // previous centered stage, for Richardson extrapolation along the path
  ComplexMatrix prev_sigma, prev_x;
  bool have_prev = false;
  int polish_budget = 2;  // face polish pays off at once or not at all
  double gap_prev_stage = 1e300;

  auto gap_bits = [](double p, double d) {
    if (!(p > 0.0) || !(d > 0.0)) return 1e9;
    return std::fabs(std::log2(p) - std::log2(d));
  };

  while (true) {
    // near the optimum (path gap below 5% of the value) the stage is centered
    // tightly so the dual estimate and the polish subspace are sharp
    const bool endgame =
        mu * static_cast<double>(n) <= 5e-2 * std::max(best_primal, 1e-300);
    const double stage_tol = endgame ? 1e-16 : 1e-2;

    // ---- center at the current mu ----
    std::optional<ComplexMatrix> carried_chol;
    double dec2_prev = 1e300;
    const int stage_cap = endgame ? 12 : 60;
    for (int newton = 0; newton < stage_cap; ++newton) {
      ComplexMatrix s = sub(lift(sigma, da), rho);
      auto lc = carried_chol ? std::move(carried_chol) : cholesky(s);
      carried_chol.reset();
      if (!lc) {  // numerical slip outside the cone; nudge back
        for (std::size_t i = 0; i < db; ++i) sigma.at(i, i) += 1e-12 + 1e-12 * best_primal;
        s = sub(lift(sigma, da), rho);
        lc = cholesky(s);
        if (!lc) {
          stalled = true;
          break;
        }
      }
      ComplexMatrix t = inverse_from_cholesky(*lc);
      last_t = t;
      ComplexMatrix grad_m = sub(ComplexMatrix::identity(db),
                                 scale(trace_out_a(t, da, db), Cx{mu, 0.0}));
      std::vector<double> g = coords_from_mat(grad_m);
      std::vector<double> h = hessian_real(t, da, db, mu, basis);
      const double hscale = [&] {
        double tr = 0.0;
        for (std::size_t i = 0; i < q; ++i) tr += h[i * q + i];
        return tr / static_cast<double>(q);
      }();
      for (std::size_t i = 0; i < q; ++i) h[i * q + i] += 1e-13 * (hscale + 1.0);
      std::vector<double> d = g;
      for (double& x : d) x = -x;
      if (!spd_solve(h, d, q)) {
        stalled = true;
        break;
      }
      double dec2 = 0.0;
      for (std::size_t i = 0; i < q; ++i) dec2 -= g[i] * d[i];
      if (!(dec2 > 0.0)) break;  // numerically centered
      if (dec2 < 1e-8 && dec2 > 0.25 * dec2_prev) break;  // at the numerical floor
      dec2_prev = dec2;

      ComplexMatrix delta = mat_from_coords(d, db);
      ComplexMatrix lifted = lift(delta, da);
      const double f0 = trace(sigma).real() - mu * logdet_from_cholesky(*lc);
      double gdotd = -dec2;
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        ComplexMatrix strial = add(s, scale(lifted, Cx{alpha, 0.0}));
        auto lt = cholesky(strial);
        if (lt) {
          ComplexMatrix sigtrial = add(sigma, scale(delta, Cx{alpha, 0.0}));
          const double ftrial = trace(sigtrial).real() - mu * logdet_from_cholesky(*lt);
          if (ftrial <= f0 + 0.25 * alpha * gdotd) {
            sigma = std::move(sigtrial);
            carried_chol = std::move(lt);  // next iteration reuses this factor
            moved = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      ++iterations;
      const char* tr = std::getenv("QLEAK_SDP_TRACE");
      if (tr != nullptr && tr[0] == '2')
        std::fprintf(stderr, "    newton %d: dec2=%.3e alpha=%.3e moved=%d\n", newton, dec2,
                     alpha, moved ? 1 : 0);
      if (iterations >= kIterCap || !moved) {
        stalled = true;
        break;
      }
      if (dec2 < stage_tol) break;  // centered enough for this stage
    }

    const double primal_now = trace(sigma).real();
    if (primal_now < best_primal) {
      best_primal = primal_now;
      best_sigma = sigma;
    }
    if (std::getenv("QLEAK_SDP_TRACE") != nullptr)
      std::fprintf(stderr, "stage mu=%.2e iters=%zu primal=%.9f dual=%.9f endgame=%d\n", mu,
                   iterations, primal_now, best_dual, endgame ? 1 : 0);

    if (endgame || stalled || mu < 1e-15) {
      // dual estimate from the (approximately centered) barrier point
      ComplexMatrix stage_x;
      if (last_t.rows == n) {
        DualCandidate dc = finish_dual(scale(last_t, Cx{mu, 0.0}), rho, da, db);
        stage_x = dc.x;
        if (dc.min_eig >= -1e-9 && dc.value > best_dual) {
          best_dual = dc.value;
          best_x = std::move(dc.x);
        }
      }

      // Richardson extrapolation of the mu -> mu/10 path step: the linear
      // term of the path expansion cancels, leaving O(mu^2) error.
      if (have_prev && !stalled && stage_x.rows == n) {
        ComplexMatrix sigma_ext =
            add(sigma, scale(sub(sigma, prev_sigma), Cx{1.0 / 9.0, 0.0}));
        ComplexMatrix s_ext = sub(lift(sigma_ext, da), rho);
        double shift = 0.0;
        if (!cholesky(s_ext).has_value()) {
          const double lmin = min_eigenvalue(hermitize(s_ext));
          if (lmin < 0.0) shift = -lmin + 1e-15;
        }
        if (shift < 1e-3) {
          for (std::size_t i = 0; i < db; ++i) sigma_ext.at(i, i) += shift;
          const double pval = trace(sigma_ext).real();
          if (pval < best_primal) {
            best_primal = pval;
            best_sigma = std::move(sigma_ext);
          }
        }
        ComplexMatrix x_ext = add(stage_x, scale(sub(stage_x, prev_x), Cx{1.0 / 9.0, 0.0}));
        DualCandidate de = finish_dual(std::move(x_ext), rho, da, db);
        if (de.min_eig >= -1e-9 && de.value > best_dual &&
            de.value <= best_primal * (1.0 + 1e-9) + 1e-12) {
          best_dual = de.value;
          best_x = std::move(de.x);
        }
      }
      if (stage_x.rows == n) {
        prev_sigma = sigma;
        prev_x = std::move(stage_x);
        have_prev = true;
      }
      if (gap_bits(best_primal, best_dual) <= kGapTargetBits) break;

      std::optional<PolishOutcome> polish;
      if (polish_budget > 0 || stalled) {
        --polish_budget;
        polish = try_polish(
            rho, sigma,
            best_x.rows == n
                ? best_x
                : lift(scale(ComplexMatrix::identity(db), Cx{1.0 / static_cast<double>(da), 0.0}),
                       da),
            da, db);
      }
      if (polish) {
        if (polish->primal < best_primal) {
          best_primal = polish->primal;
          best_sigma = polish->sigma;
        }
        if (polish->dual > best_dual) {
          best_dual = polish->dual;
          best_x = polish->x;
        }
        if (gap_bits(best_primal, best_dual) <= kGapTargetBits) break;
      }
    }

    // certified well below the requirement and no longer improving: stop
    const double gap_now = gap_bits(best_primal, best_dual);
    if (gap_now <= 1e-7 && gap_now >= 0.5 * gap_prev_stage) break;
    gap_prev_stage = gap_now;

    if (stalled || iterations >= kIterCap) break;
    if (mu < 1e-14) break;
    mu /= 10.0;
  }

  const double final_gap = gap_bits(best_primal, best_dual);
  require(final_gap <= kGapCertBits, Errc::SolverDiverged,
          "duality gap " + std::to_string(final_gap) + " bits not certified within budget");

  EntropySolution out;
  out.primal_bound = best_primal;
  out.dual_bound = best_dual;
  out.gap = final_gap;
  out.iterations = iterations;
  out.primal_sigma = std::move(best_sigma);
  out.dual_x = std::move(best_x);
  out.hmin = -0.5 * (std::log2(best_primal) + std::log2(best_dual));
  // exact range of the program
  const double top = std::log2(static_cast<double>(da));
  out.hmin = std::clamp(out.hmin, -top, top);
  return out;
}

// ---------------------------------------------------------------------------
// public wrappers
// ---------------------------------------------------------------------------

namespace {

struct Partition {
  ComplexMatrix reordered;
  std::size_t da = 1;
  std::size_t db = 1;
};

Partition partition_ab(const DensityOperator& rho, const std::vector<std::string>& a_labels,
                       const std::vector<std::string>& b_labels) {
  require(!a_labels.empty(), Errc::BadPartition, "hmin: empty A part");
  for (const std::string& l : a_labels) rho.layout.index_of(l);
  for (const std::string& l : b_labels) rho.layout.index_of(l);
  for (const std::string& l : a_labels)
    require(std::find(b_labels.begin(), b_labels.end(), l) == b_labels.end(), Errc::BadPartition,
            "hmin: label in both parts: " + l);
  require(a_labels.size() + b_labels.size() == rho.layout.size(), Errc::BadPartition,
          "hmin: partition must cover the layout");

  std::vector<std::size_t> perm;
  Partition out;
  for (std::size_t i = 0; i < rho.layout.size(); ++i)
    if (std::find(a_labels.begin(), a_labels.end(), rho.layout[i].label) != a_labels.end()) {
      perm.push_back(i);
      out.da *= rho.layout[i].dim;
    }
  for (std::size_t i = 0; i < rho.layout.size(); ++i)
    if (std::find(b_labels.begin(), b_labels.end(), rho.layout[i].label) != b_labels.end()) {
      perm.push_back(i);
      out.db *= rho.layout[i].dim;
    }
  out.reordered = permute_matrix(rho.matrix, rho.layout.dims(), perm);
  return out;
}

}  // namespace

EntropySolution hmin(const DensityOperator& rho, const std::vector<std::string>& a_labels,
                     const std::vector<std::string>& b_labels) {
  Partition part = partition_ab(rho, a_labels, b_labels);
  EntropySolution sol = solve_hmin_sdp(part.reordered, part.da, part.db);
  sol.b_layout = rho.layout.keep(b_labels);
  return sol;
}

EntropySolution hmin_smooth(const DensityOperator& rho, const std::vector<std::string>& a_labels,
                            const std::vector<std::string>& b_labels, double epsilon) {
  require(epsilon == 0.0, Errc::NotImplemented,
          "smooth min-entropy is reserved but not constructed; use epsilon = 0");
  return hmin(rho, a_labels, b_labels);
}

double hmin_cc(const std::vector<std::vector<double>>& joint) {
  require(!joint.empty() && !joint.front().empty(), Errc::BadDistribution, "empty table");
  const std::size_t cols = joint.front().size();
  double sum = 0.0;
  double acc = 0.0;
  for (const auto& row : joint) {
    require(row.size() == cols, Errc::BadDistribution, "ragged table");
    for (double v : row) {
      require(v >= 0.0 && std::isfinite(v), Errc::BadDistribution, "negative entry");
      sum += v;
    }
  }
  require(std::fabs(sum - 1.0) <= 1e-12, Errc::BadDistribution, "entries must sum to 1");
  for (std::size_t b = 0; b < cols; ++b) {
    double mx = 0.0;
    for (const auto& row : joint) mx = std::max(mx, row[b]);
    acc += mx;
  }
  return -std::log2(acc);
}

double pguess_cq(const DensityOperator& rho, const std::string& a_label,
                 const std::vector<std::string>& b_labels) {
  const std::size_t apos = rho.layout.index_of(a_label);
  require(rho.layout[apos].classical, Errc::NotCQ, "pguess_cq: register is not classical");
  EntropySolution sol = hmin(rho, {a_label}, b_labels);
  const double p = std::pow(2.0, -sol.hmin);

  if (rho.layout[apos].dim == 2) {
    // Helstrom cross-check: 1/2 + || p0 rho0 - p1 rho1 ||_tr (halved norm)
    std::vector<std::size_t> perm{apos};
    for (std::size_t i = 0; i < rho.layout.size(); ++i)
      if (i != apos) perm.push_back(i);
    ComplexMatrix work = permute_matrix(rho.matrix, rho.layout.dims(), perm);
    const std::size_t rest = rho.dim() / 2;
    ComplexMatrix diff(rest, rest);
    for (std::size_t i = 0; i < rest; ++i)
      for (std::size_t j = 0; j < rest; ++j)
        diff.at(i, j) = work.at(i, j) - work.at(rest + i, rest + j);
    const double helstrom = 0.5 + trace_norm(diff);
    require(std::fabs(p - helstrom) <= 1e-6, Errc::SolverDiverged,
            "pguess_cq: SDP and Helstrom disagree");
  }
  return p;
}

}  // namespace qleak
