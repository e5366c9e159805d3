#pragma once

// Linear programs over the latent simplex:
//   optimise c'q  s.t.  Bq = p,  1'q = 1,  q >= 0.
//
// Columns of [B; 1'] that coincide are merged before solving. For a fixed
// objective the optimum only uses the cheapest member of each group, so the
// merged problem keeps the same value and every solution maps back onto
// the original columns. One phase-1 basis per (B, p) is shared by every
// objective solved on that system.
//
// Dual convention: lambda has length d_p + 1 (last entry for the ones row).
// For a minimisation B~'lambda <= c, for a maximisation B~'lambda >= c; in
// both cases the optimal value equals p~'lambda.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynreg/errors.hpp"
#include "dynreg/lp/simplex.hpp"
#include "dynreg/matrices.hpp"
#include "dynreg/parallel.hpp"
#include "dynreg/sparse.hpp"

namespace dynreg {

struct Tolerances {
  double feas = 1e-8;
  double dual = 1e-6;
  double sign = 1e-7;
  double tie = 1e-9;

  void validate() const {
    if (!(feas > 0 && dual > 0 && sign > 0 && tie > 0))
      throw std::invalid_argument("tolerances must be positive");
  }
};

enum class Sense { min, max };
enum class SolveStatus { optimal, infeasible, numeric_failure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    default: return "numeric-failure";
  }
}

struct SolveResult {
  SolveStatus status = SolveStatus::numeric_failure;
  double value = 0.0;
  std::vector<double> q;       // over the system's columns
  std::vector<double> lambda;  // length d_p + 1
  double primal_residual = 0.0;
  double duality_gap = 0.0;
  double dual_infeasibility = 0.0;
  long iterations = 0;
  double seconds = 0.0;
};

// Extra equality rows appended below [B; 1'] (used for attainment checks).
struct ExtraRow {
  std::vector<double> coef;  // dense over columns
  double rhs = 0.0;
};

class LPSystem {
 public:
  LPSystem(const SparseRowMatrix& B, std::span<const double> p, Tolerances tol = {},
           std::vector<ExtraRow> extra = {})
      : tol_(tol), n_(B.cols()), d_p_(B.rows()) {
    tol_.validate();
    if (p.size() != B.rows()) throw std::invalid_argument("p length differs from rows of B");
    for (double v : p)
      if (!std::isfinite(v)) throw std::invalid_argument("p has a non-finite entry");
    m_ = static_cast<int>(d_p_ + 1 + extra.size());
    rhs_.assign(p.begin(), p.end());
    rhs_.push_back(1.0);
    for (const auto& e : extra) {
      if (e.coef.size() != n_) throw std::invalid_argument("extra row length differs");
      rhs_.push_back(e.rhs);
    }
    // column signatures
    std::vector<std::vector<std::pair<int, double>>> colent(n_);
    for (std::size_t r = 0; r < d_p_; ++r) {
      auto cs = B.row_cols(r);
      auto vs = B.row_vals(r);
      for (std::size_t i = 0; i < cs.size(); ++i) colent[cs[i]].push_back({static_cast<int>(r), vs[i]});
    }
    for (std::size_t j = 0; j < n_; ++j) {
      colent[j].push_back({static_cast<int>(d_p_), 1.0});
      for (std::size_t e = 0; e < extra.size(); ++e)
        if (extra[e].coef[j] != 0.0)
          colent[j].push_back({static_cast<int>(d_p_ + 1 + e), extra[e].coef[j]});
    }
    std::map<std::vector<std::pair<int, double>>, int> seen;
    group_of_.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      auto [it, inserted] = seen.emplace(colent[j], static_cast<int>(groups_.size()));
      if (inserted) {
        groups_.emplace_back();
        signature_.push_back(colent[j]);
      }
      groups_[it->second].push_back(static_cast<std::uint32_t>(j));
      group_of_[j] = it->second;
    }
    const int G = static_cast<int>(groups_.size());
    std::vector<double> a(static_cast<std::size_t>(m_) * static_cast<std::size_t>(G), 0.0);
    for (int g = 0; g < G; ++g)
      for (auto [r, v] : signature_[g]) a[static_cast<std::size_t>(g) * m_ + r] = v;
    simplex_.emplace(m_, G, std::move(a), rhs_);
    auto ph1 = simplex_->phase1();
    phase1_objective_ = ph1.objective;
    phase1_iterations_ = ph1.iterations;
    feasible_ = ph1.outcome == lp::Outcome::optimal;
    if (ph1.outcome != lp::Outcome::optimal && ph1.outcome != lp::Outcome::infeasible)
      throw std::runtime_error("phase 1 failed numerically");
    start_ = std::move(ph1.state);
  }

  bool feasible() const { return feasible_; }
  double phase1_objective() const { return phase1_objective_; }
  std::size_t n_cols() const { return n_; }
  std::size_t d_p() const { return d_p_; }
  int rows() const { return m_; }
  std::size_t group_count() const { return groups_.size(); }
  const std::vector<std::vector<std::uint32_t>>& groups() const { return groups_; }
  const std::vector<std::vector<std::pair<int, double>>>& signatures() const { return signature_; }
  const std::vector<double>& rhs() const { return rhs_; }
  const Tolerances& tolerances() const { return tol_; }

  SolveResult optimize(std::span<const double> c, Sense sense) const {
    if (c.size() != n_) throw std::invalid_argument("objective length differs from columns");
    const auto t0 = std::chrono::steady_clock::now();
    SolveResult res;
    res.q.assign(n_, 0.0);
    if (!feasible_) {
      res.status = SolveStatus::infeasible;
      return res;
    }
    const double sg = sense == Sense::min ? 1.0 : -1.0;
    const std::size_t G = groups_.size();
    std::vector<double> cg(G);
    std::vector<std::uint32_t> rep(G);
    for (std::size_t g = 0; g < G; ++g) {
      double best = 0.0;
      bool first = true;
      for (std::uint32_t j : groups_[g]) {
        const double v = sg * c[j];
        if (first || v < best) {
          best = v;
          rep[g] = j;
          first = false;
        }
      }
      cg[g] = best;
    }
    auto r = simplex_->optimize(cg, start_);
    res.iterations = r.iterations;
    if (r.outcome != lp::Outcome::optimal) {
      res.status = SolveStatus::numeric_failure;
      return res;
    }
    for (std::size_t g = 0; g < G; ++g)
      if (r.x[g] != 0.0) res.q[rep[g]] = r.x[g];
    res.lambda.assign(r.y.begin(), r.y.begin() + static_cast<std::ptrdiff_t>(d_p_ + 1));
    for (auto& v : res.lambda) v *= sg;
    std::vector<double> yfull = r.y;
    for (auto& v : yfull) v *= sg;
    // certificates on the original columns
    double primal = 0.0;
    for (std::size_t j = 0; j < n_; ++j) primal += c[j] * res.q[j];
    double dualv = 0.0;
    for (int i = 0; i < m_; ++i) dualv += rhs_[i] * yfull[i];
    res.value = primal;
    res.duality_gap = std::abs(primal - dualv);
    double dinf = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      double btl = 0.0;
      for (auto [row, v] : signature_[g]) btl += v * yfull[row];
      for (std::uint32_t j : groups_[g]) {
        const double slack = sg * (c[j] - btl);  // must be >= 0
        dinf = std::max(dinf, -slack);
      }
    }
    res.dual_infeasibility = dinf;
    std::vector<double> resid(rhs_.size(), 0.0);
    for (std::size_t g = 0; g < G; ++g)
      if (r.x[g] != 0.0)
        for (auto [row, v] : signature_[g]) resid[row] += v * r.x[g];
    double rmax = 0.0;
    for (std::size_t i = 0; i < resid.size(); ++i) rmax = std::max(rmax, std::abs(resid[i] - rhs_[i]));
    res.primal_residual = rmax;
    double qmin = 0.0;
    for (double v : r.x) qmin = std::min(qmin, v);
    const bool ok = rmax <= tol_.feas && qmin >= -tol_.feas && res.duality_gap <= tol_.dual &&
                    dinf <= tol_.dual;
    res.status = ok ? SolveStatus::optimal : SolveStatus::numeric_failure;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  }

 private:
  Tolerances tol_;
  std::size_t n_;
  std::size_t d_p_;
  int m_ = 0;
  std::vector<double> rhs_;
  std::vector<std::vector<std::uint32_t>> groups_;
  std::vector<std::vector<std::pair<int, double>>> signature_;
  std::vector<int> group_of_;
  std::optional<lp::DenseSimplex<double>> simplex_;
  lp::DenseSimplex<double>::State start_;
  bool feasible_ = false;
  double phase1_objective_ = 0.0;
  long phase1_iterations_ = 0;
};

// Self-contained LP description for one-off solves.
struct SimplexLP {
  std::vector<double> c;
  const SparseRowMatrix* B = nullptr;
  std::vector<double> p;
  Sense sense = Sense::min;
};

inline SolveResult solve(const SimplexLP& lp, Tolerances tol = {}) {
  if (!lp.B) throw std::invalid_argument("LP has no constraint matrix");
  LPSystem sys(*lp.B, lp.p, tol);
  return sys.optimize(lp.c, lp.sense);
}

struct FeasibilityResult {
  double gap = 0.0;               // min ||Bq - p||_1 over the simplex
  std::vector<double> q;          // minimiser
  std::vector<double> projected;  // B q
};

// L1 distance from p to the image of the simplex.
inline FeasibilityResult feasibility_gap(const SparseRowMatrix& B, std::span<const double> p) {
  if (p.size() != B.rows()) throw std::invalid_argument("p length differs from rows of B");
  const std::size_t dp = B.rows(), n = B.cols();
  // merge identical columns of B
  std::vector<std::vector<int>> colrows(n);
  for (std::size_t r = 0; r < dp; ++r)
    for (auto c : B.row_cols(r)) colrows[c].push_back(static_cast<int>(r));
  for (std::size_t r = 0; r < dp; ++r) {
    auto vs = B.row_vals(r);
    for (double v : vs)
      if (v != 1.0) throw std::invalid_argument("feasibility gap expects a 0/1 matrix");
  }
  std::map<std::vector<int>, int> seen;
  std::vector<std::uint32_t> rep;
  for (std::size_t j = 0; j < n; ++j)
    if (seen.emplace(colrows[j], static_cast<int>(rep.size())).second) rep.push_back(static_cast<std::uint32_t>(j));
  const int m = static_cast<int>(dp + 1);
  const int G = static_cast<int>(rep.size());
  const int ncols = G + 2 * static_cast<int>(dp);
  std::vector<double> a(static_cast<std::size_t>(m) * static_cast<std::size_t>(ncols), 0.0);
  for (int g = 0; g < G; ++g) {
    for (int r : colrows[rep[g]]) a[static_cast<std::size_t>(g) * m + r] = 1.0;
    a[static_cast<std::size_t>(g) * m + dp] = 1.0;
  }
  std::vector<double> cost(static_cast<std::size_t>(ncols), 0.0);
  for (std::size_t r = 0; r < dp; ++r) {
    a[static_cast<std::size_t>(G + 2 * r) * m + r] = 1.0;
    a[static_cast<std::size_t>(G + 2 * r + 1) * m + r] = -1.0;
    cost[G + 2 * r] = cost[G + 2 * r + 1] = 1.0;
  }
  std::vector<double> b(p.begin(), p.end());
  b.push_back(1.0);
  lp::DenseSimplex<double> sx(m, ncols, std::move(a), b);
  auto ph1 = sx.phase1();
  if (ph1.outcome != lp::Outcome::optimal) throw std::runtime_error("feasibility LP failed in phase 1");
  auto r = sx.optimize(cost, ph1.state);
  if (r.outcome != lp::Outcome::optimal) throw std::runtime_error("feasibility LP failed");
  FeasibilityResult out;
  out.q.assign(n, 0.0);
  for (int g = 0; g < G; ++g) out.q[rep[g]] = std::max(0.0, r.x[g]);
  double total = 0.0;
  for (double v : out.q) total += v;
  for (double& v : out.q) v /= total;
  out.projected = B.multiply(out.q);
  out.gap = 0.0;
  for (std::size_t i = 0; i < dp; ++i) out.gap += std::abs(out.projected[i] - p[i]);
  return out;
}

struct Bounds {
  double lower = 0.0;
  double upper = 0.0;
  SolveResult lower_result;
  SolveResult upper_result;
};

inline void require_feasible(const LPSystem& sys, const SparseRowMatrix& B, std::span<const double> p) {
  if (sys.feasible()) return;
  const double gap = feasibility_gap(B, p).gap;
  throw ModelRefutedError("observed distribution is not reproduced by any admissible latent "
                          "distribution (L1 gap " + std::to_string(gap) + ")", gap);
}

inline void require_optimal(const SolveResult& r, const std::string& what) {
  if (r.status != SolveStatus::optimal)
    throw std::runtime_error(what + ": solver status " + to_string(r.status) + ", residual " +
                             std::to_string(r.primal_residual) + ", duality gap " +
                             std::to_string(r.duality_gap));
}

inline Bounds bounds_for(const LPSystem& sys, std::span<const double> c, const std::string& what) {
  Bounds b;
  b.lower_result = sys.optimize(c, Sense::min);
  b.upper_result = sys.optimize(c, Sense::max);
  require_optimal(b.lower_result, what + " (min)");
  require_optimal(b.upper_result, what + " (max)");
  b.lower = b.lower_result.value;
  b.upper = b.upper_result.value;
  return b;
}

inline Bounds gap_bounds(const ProblemMatrices& pm, const LPSystem& sys, RegimeIndex k,
                         RegimeIndex kp) {
  const SparseRow delta = build_delta(pm.A, k, kp);
  return bounds_for(sys, delta.dense(), "gap " + std::to_string(k.k) + "," + std::to_string(kp.k));
}

inline Bounds gap_bounds(const ProblemMatrices& pm, RegimeIndex k, RegimeIndex kp,
                         std::span<const double> p, Tolerances tol = {}) {
  if (k.k == kp.k) throw std::invalid_argument("gap bounds need two distinct regimes");
  LPSystem sys(pm.B, p, tol);
  require_feasible(sys, pm.B, p);
  return gap_bounds(pm, sys, k, kp);
}

inline Bounds welfare_bounds(const ProblemMatrices& pm, const LPSystem& sys, RegimeIndex k) {
  if (k.k < 1 || static_cast<std::size_t>(k.k) > pm.regime_count())
    throw std::out_of_range("regime index outside 1..|K|");
  return bounds_for(sys, pm.A.row(static_cast<std::size_t>(k.k - 1)).dense(),
                    "welfare " + std::to_string(k.k));
}

inline Bounds welfare_bounds(const ProblemMatrices& pm, RegimeIndex k, std::span<const double> p,
                             Tolerances tol = {}) {
  LPSystem sys(pm.B, p, tol);
  require_feasible(sys, pm.B, p);
  return welfare_bounds(pm, sys, k);
}

// Whether some admissible q attains objective value v (the system plus c'q = v).
inline bool attains(const ProblemMatrices& pm, std::span<const double> p, std::span<const double> c,
                    double v, Tolerances tol = {}) {
  LPSystem sys(pm.B, p, tol, {ExtraRow{{c.begin(), c.end()}, v}});
  return sys.feasible();
}

struct GapMatrix {
  int K = 0;
  std::vector<double> L;  // K x K row-major, diagonal 0
  std::vector<double> U;
  double max_duality_gap = 0.0;
  double max_dual_infeasibility = 0.0;
  double max_primal_residual = 0.0;
  double max_lp_seconds = 0.0;
  double total_seconds = 0.0;
  std::size_t lp_count = 0;

  double l(int k, int kp) const { return L[static_cast<std::size_t>((k - 1) * K + (kp - 1))]; }
  double u(int k, int kp) const { return U[static_cast<std::size_t>((k - 1) * K + (kp - 1))]; }
  double& l(int k, int kp) { return L[static_cast<std::size_t>((k - 1) * K + (kp - 1))]; }
  double& u(int k, int kp) { return U[static_cast<std::size_t>((k - 1) * K + (kp - 1))]; }

  static GapMatrix from_lower(int K, std::vector<double> L) {
    GapMatrix g;
    g.K = K;
    g.L = std::move(L);
    if (g.L.size() != static_cast<std::size_t>(K * K)) throw std::invalid_argument("L must be K x K");
    g.U.assign(g.L.size(), 0.0);
    for (int a = 1; a <= K; ++a)
      for (int b = 1; b <= K; ++b)
        if (a != b) g.u(a, b) = -g.l(b, a);
    return g;
  }
};

// Solves min and max of A_a - A_b for every pair a < b (2 * C(K,2) LPs);
// the reversed pairs follow from U_{a,b} = -L_{b,a}.
inline GapMatrix compute_gaps(const ProblemMatrices& pm, const LPSystem& sys, unsigned threads = 0) {
  const int K = static_cast<int>(pm.regime_count());
  GapMatrix g;
  g.K = K;
  g.L.assign(static_cast<std::size_t>(K * K), 0.0);
  g.U.assign(static_cast<std::size_t>(K * K), 0.0);
  std::vector<std::pair<int, int>> pairs;
  for (int a = 1; a <= K; ++a)
    for (int b = a + 1; b <= K; ++b) pairs.push_back({a, b});
  std::vector<Bounds> out(pairs.size());
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(
      pairs.size(),
      [&](std::size_t i) { out[i] = gap_bounds(pm, sys, {pairs[i].first}, {pairs[i].second}); },
      threads);
  g.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [a, b] = pairs[i];
    g.l(a, b) = out[i].lower;
    g.u(a, b) = out[i].upper;
    g.l(b, a) = -out[i].upper;
    g.u(b, a) = -out[i].lower;
    for (const SolveResult* r : {&out[i].lower_result, &out[i].upper_result}) {
      g.max_duality_gap = std::max(g.max_duality_gap, r->duality_gap);
      g.max_dual_infeasibility = std::max(g.max_dual_infeasibility, r->dual_infeasibility);
      g.max_primal_residual = std::max(g.max_primal_residual, r->primal_residual);
      g.max_lp_seconds = std::max(g.max_lp_seconds, r->seconds);
      ++g.lp_count;
    }
  }
  return g;
}

inline GapMatrix compute_gaps(const ProblemMatrices& pm, std::span<const double> p,
                              Tolerances tol = {}, unsigned threads = 0) {
  LPSystem sys(pm.B, p, tol);
  require_feasible(sys, pm.B, p);
  return compute_gaps(pm, sys, threads);
}

}  // namespace dynreg
