#pragma once

// Confidence set for the set of maximal regimes by sequential elimination.
//
// The null for a candidate set K~ is that no ordered pair (k, k') in K~ has
// a positive sharp lower bound L_{k,k'}. By duality L_{k,k'} = -min p~'lambda
// over the vertices of {lambda : B~'lambda >= -Delta_{k,k'}'}, so the null is
// p~'lambda >= 0 on those vertices. A significantly negative p~'lambda is
// evidence that k beats k', and k' is the regime eliminated.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dynreg/data.hpp"
#include "dynreg/lpcore.hpp"
#include "dynreg/matrices.hpp"
#include "dynreg/parallel.hpp"

namespace dynreg {

enum class DualSide { upper, lower };

// {lambda : G lambda >= rhs}; row j of G is column j of B~ = [B; 1'].
// Identical columns are merged keeping the largest right side.
struct DualPolyhedron {
  int k = 0, kp = 0;
  DualSide side = DualSide::upper;
  std::size_t dim = 0;
  std::vector<std::vector<double>> G;
  std::vector<double> rhs;

  bool contains(const std::vector<double>& lambda, double tol = 1e-9) const {
    for (std::size_t j = 0; j < G.size(); ++j) {
      double v = 0.0;
      for (std::size_t i = 0; i < dim; ++i) v += G[j][i] * lambda[i];
      if (v < rhs[j] - tol) return false;
    }
    return true;
  }
};

inline double p_tilde_dot(std::span<const double> p, const std::vector<double>& lambda) {
  double v = lambda.back();
  for (std::size_t i = 0; i < p.size(); ++i) v += p[i] * lambda[i];
  return v;
}

// Upper side {B~'lambda >= Delta'} and lower side {B~'lambda >= -Delta'} for
// Delta = A_k - A_k'.
inline std::pair<DualPolyhedron, DualPolyhedron> dualize(const ProblemMatrices& pm, RegimeIndex k, RegimeIndex kp) {
  if (k.k == kp.k) throw std::invalid_argument("a dual problem needs two distinct regimes");
  const auto delta = build_delta(pm.A, k, kp).dense();
  const std::size_t m = pm.d_p() + 1;
  std::vector<std::vector<double>> cols(pm.n_cols(), std::vector<double>(m, 0.0));
  for (std::size_t r = 0; r < pm.B.rows(); ++r) {
    const auto c = pm.B.row_cols(r);
    const auto v = pm.B.row_vals(r);
    for (std::size_t i = 0; i < c.size(); ++i) cols[c[i]][r] = v[i];
  }
  for (auto& c : cols) c.back() = 1.0;
  std::map<std::vector<double>, std::pair<double, double>> merged;  // column -> (max delta, max -delta)
  for (std::size_t j = 0; j < cols.size(); ++j) {
    auto [it, fresh] = merged.try_emplace(cols[j], delta[j], -delta[j]);
    if (!fresh) {
      it->second.first = std::max(it->second.first, delta[j]);
      it->second.second = std::max(it->second.second, -delta[j]);
    }
  }
  DualPolyhedron up{k.k, kp.k, DualSide::upper, m, {}, {}};
  DualPolyhedron lo{k.k, kp.k, DualSide::lower, m, {}, {}};
  for (const auto& [col, r] : merged) {
    up.G.push_back(col);
    up.rhs.push_back(r.first);
    lo.G.push_back(col);
    lo.rhs.push_back(r.second);
  }
  return {std::move(up), std::move(lo)};
}

struct VertexSet {
  int k = 0, kp = 0;
  DualSide side = DualSide::upper;
  std::vector<std::vector<double>> vertices;
  std::vector<std::vector<double>> rays;
  std::size_t reduced_dim = 0;  // dimension after projecting out the lineality space
};

inline constexpr std::size_t kVertexDimCap = 8;
inline constexpr double kVertexCombinationCap = 2e7;

namespace detail {

// Solves M x = b (square, row-major) by partial pivoting; false if singular.
inline bool solve_square(std::vector<std::vector<double>> M, std::vector<double> b, std::vector<double>& x,
                         double piv_tol = 1e-10) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(M[r][c]) > std::abs(M[p][c])) p = r;
    if (std::abs(M[p][c]) < piv_tol) return false;
    std::swap(M[p], M[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = M[r][c] / M[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) M[r][k] -= f * M[c][k];
      b[r] -= f * b[c];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= M[i][k] * x[k];
    x[i] = s / M[i][i];
  }
  return true;
}

// Orthonormal basis (as columns) of the span of the rows of G.
inline std::vector<std::vector<double>> row_space_basis(const std::vector<std::vector<double>>& G, std::size_t dim,
                                                        double tol = 1e-10) {
  std::vector<std::vector<double>> basis;
  for (const auto& row : G) {
    auto v = row;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) {
        double d = 0.0;
        for (std::size_t i = 0; i < dim; ++i) d += v[i] * b[i];
        for (std::size_t i = 0; i < dim; ++i) v[i] -= d * b[i];
      }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm <= tol) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
    if (basis.size() == dim) break;
  }
  return basis;
}

inline double binomial(std::size_t n, std::size_t r) {
  double c = 1.0;
  for (std::size_t i = 0; i < r; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return c;
}

template <class Fn>
void for_each_subset(std::size_t n, std::size_t r, Fn&& fn) {
  if (r > n) return;
  std::vector<std::size_t> idx(r);
  for (std::size_t i = 0; i < r; ++i) idx[i] = i;
  for (;;) {
    fn(idx);
    std::size_t i = r;
    while (i > 0 && idx[i - 1] == n - r + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < r; ++j) idx[j] = idx[j - 1] + 1;
  }
}

inline bool contains_close(const std::vector<std::vector<double>>& set, const std::vector<double>& v, double tol) {
  for (const auto& w : set) {
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) d = std::max(d, std::abs(v[i] - w[i]));
    if (d <= tol) return true;
  }
  return false;
}

}  // namespace detail

// Vertices and extreme rays by enumerating every basis of active
// constraints. The polyhedron is first restricted to the row space of G,
// which removes its lineality space; p~ lies in that space, so p~'lambda is
// unchanged.
inline VertexSet enumerate_vertices(const DualPolyhedron& poly, std::size_t dim_cap = kVertexDimCap,
                                    double tol = 1e-9) {
  if (poly.dim > dim_cap)
    throw DimensionError("dual dimension " + std::to_string(poly.dim) + " exceeds the vertex enumeration cap of " +
                         std::to_string(dim_cap) + "; use the resolve mode");
  const auto Q = detail::row_space_basis(poly.G, poly.dim);
  const std::size_t r = Q.size();
  const std::size_t n = poly.G.size();
  if (detail::binomial(n, r) > kVertexCombinationCap)
    throw DimensionError("too many constraint subsets for vertex enumeration");
  // H = G Q
  std::vector<std::vector<double>> H(n, std::vector<double>(r, 0.0));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t a = 0; a < r; ++a)
      for (std::size_t i = 0; i < poly.dim; ++i) H[j][a] += poly.G[j][i] * Q[a][i];
  auto lift = [&](const std::vector<double>& mu) {
    std::vector<double> lambda(poly.dim, 0.0);
    for (std::size_t a = 0; a < r; ++a)
      for (std::size_t i = 0; i < poly.dim; ++i) lambda[i] += mu[a] * Q[a][i];
    return lambda;
  };

  VertexSet out{poly.k, poly.kp, poly.side, {}, {}, r};
  std::vector<std::vector<double>> mus;
  detail::for_each_subset(n, r, [&](const std::vector<std::size_t>& S) {
    std::vector<std::vector<double>> M;
    std::vector<double> b;
    for (auto j : S) {
      M.push_back(H[j]);
      b.push_back(poly.rhs[j]);
    }
    std::vector<double> mu;
    if (!detail::solve_square(M, b, mu)) return;
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0.0;
      for (std::size_t a = 0; a < r; ++a) v += H[j][a] * mu[a];
      if (v < poly.rhs[j] - tol) return;
    }
    if (!detail::contains_close(mus, mu, 1e-8)) mus.push_back(mu);
  });
  for (const auto& mu : mus) out.vertices.push_back(lift(mu));

  // extreme rays: one-dimensional solutions of r-1 active homogeneous rows
  if (r >= 1) {
    std::vector<std::vector<double>> dirs;
    detail::for_each_subset(n, r - 1, [&](const std::vector<std::size_t>& S) {
      // null vector of the (r-1) x r system via cofactors of an appended unit row
      for (std::size_t e = 0; e < r; ++e) {
        std::vector<std::vector<double>> M;
        std::vector<double> b(r, 0.0);
        for (auto j : S) M.push_back(H[j]);
        std::vector<double> unit(r, 0.0);
        unit[e] = 1.0;
        M.push_back(unit);
        b[r - 1] = 1.0;
        std::vector<double> d;
        if (!detail::solve_square(M, b, d)) continue;
        double norm = 0.0;
        for (double x : d) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : d) x /= norm;
        for (int sign : {1, -1}) {
          bool ok = true;
          for (std::size_t j = 0; j < n && ok; ++j) {
            double v = 0.0;
            for (std::size_t a = 0; a < r; ++a) v += H[j][a] * d[a] * sign;
            ok = v >= -tol;
          }
          if (!ok) continue;
          std::vector<double> sd(d);
          for (double& x : sd) x *= sign;
          if (!detail::contains_close(dirs, sd, 1e-8)) dirs.push_back(sd);
        }
        break;
      }
    });
    for (const auto& d : dirs) out.rays.push_back(lift(d));
  }
  if (out.vertices.empty()) throw ConsistencyError("dual polyhedron has no vertex");
  return out;
}

// Standard error of p~'lambda under independent multinomial sampling within
// instrument blocks (the ones-row entry is a constant).
inline double lambda_se(const EmpiricalDistribution& e, const std::vector<double>& lambda) {
  if (!e.has_counts()) return 0.0;
  double var = 0.0;
  for (int b = 0; b < e.blocks(); ++b) {
    double m1 = 0.0, m2 = 0.0;
    for (int c = 0; c + 1 < e.cells_per_z; ++c) {
      const double l = lambda[b_row_index(b, c, e.cells_per_z)];
      const double pc = e.full(b, c);
      m1 += l * pc;
      m2 += l * l * pc;
    }
    var += std::max(0.0, m2 - m1 * m1) / static_cast<double>(e.z_counts[static_cast<std::size_t>(b)]);
  }
  return std::sqrt(var);
}

inline constexpr double kInfiniteT = std::numeric_limits<double>::infinity();

// t = p~'lambda / se; with se = 0 the sign of the numerator decides (+inf, -inf, 0).
inline double t_value(double value, double se) {
  if (se > 0.0) return value / se;
  if (value > 1e-12) return kInfiniteT;
  if (value < -1e-12) return -kInfiniteT;
  return 0.0;
}

inline std::vector<double> t_statistics(const EmpiricalDistribution& e, const VertexSet& vs) {
  std::vector<double> t;
  for (const auto& l : vs.vertices) t.push_back(t_value(p_tilde_dot(e.p, l), lambda_se(e, l)));
  return t;
}

enum class InferenceMode { vertex, resolve };

inline std::string to_string(InferenceMode m) { return m == InferenceMode::vertex ? "vertex" : "resolve"; }

struct CSOptions {
  double alpha = 0.05;
  std::size_t reps = 199;
  InferenceMode mode = InferenceMode::resolve;
  std::uint64_t seed = 1;
  double kappa = -1.0;  // selection threshold; negative means sqrt(2 ln ln n)
  unsigned threads = 0;
  Tolerances tol{};
};

struct EliminationStep {
  int eliminated = 0;
  int beaten_by = 0;
  double statistic = 0.0;
  double critical = 0.0;
};

struct ConfidenceSet {
  std::vector<int> survivors;
  std::vector<EliminationStep> steps;
  double final_statistic = 0.0;
  double final_critical = 0.0;
  double alpha = 0.0;
  std::size_t reps = 0;
  InferenceMode mode = InferenceMode::resolve;
  std::uint64_t seed = 0;
  bool noiseless = false;
  bool projected = false;  // p-hat was moved onto the feasible set
  double kappa = 0.0;
};

namespace detail {

// Per ordered pair (k, k') a point statistic and its bootstrap draws; the
// elimination loop only needs these.
struct PairStats {
  int K = 0;
  std::vector<double> t;                    // K x K
  std::vector<std::vector<double>> boot;    // reps x (K x K)
  double at(int a, int b) const { return t[static_cast<std::size_t>((a - 1) * K + (b - 1))]; }
};

inline double lower_quantile(std::vector<double> v, double alpha) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return -kInfiniteT;
  auto i = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(v.size())));
  i = i == 0 ? 0 : i - 1;
  return v[std::min(i, v.size() - 1)];
}

inline ConfidenceSet eliminate(const PairStats& ps, double alpha) {
  ConfidenceSet cs;
  std::vector<int> alive;
  for (int k = 1; k <= ps.K; ++k) alive.push_back(k);
  while (alive.size() > 1) {
    double T = kInfiniteT;
    int win = 0, lose = 0;
    for (int a : alive)
      for (int b : alive)
        if (a != b && ps.at(a, b) < T) {
          T = ps.at(a, b);
          win = a;
          lose = b;
        }
    std::vector<double> draws;
    for (const auto& row : ps.boot) {
      double m = kInfiniteT;
      for (int a : alive)
        for (int b : alive)
          if (a != b) m = std::min(m, row[static_cast<std::size_t>((a - 1) * ps.K + (b - 1))]);
      draws.push_back(m);
    }
    const double c = ps.boot.empty() ? 0.0 : lower_quantile(draws, alpha);
    cs.final_statistic = T;
    cs.final_critical = c;
    if (!(T < c) || win == 0) break;
    cs.steps.push_back({lose, win, T, c});
    alive.erase(std::find(alive.begin(), alive.end(), lose));
  }
  cs.survivors = alive;
  return cs;
}

inline double recenter(double t_hat, double kappa) { return t_hat > kappa ? t_hat : 0.0; }

// Feasible version of p: p itself, or its L1 projection.
inline std::vector<double> feasible_p(const ProblemMatrices& pm, std::span<const double> p, const Tolerances& tol,
                                      bool& projected) {
  LPSystem sys(pm.B, p, tol);
  projected = false;
  if (sys.feasible()) return {p.begin(), p.end()};
  projected = true;
  return feasibility_gap(pm.B, p).projected;
}

}  // namespace detail

// Sequential elimination at level alpha. Without sample counts the
// distribution is treated as exact and the procedure reduces to removing
// regimes with a positive sharp lower bound against a survivor.
inline ConfidenceSet cs_procedure(const ProblemMatrices& pm, const EmpiricalDistribution& e, CSOptions opt = {}) {
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  const int K = static_cast<int>(pm.regime_count());
  detail::PairStats ps;
  ps.K = K;
  ps.t.assign(static_cast<std::size_t>(K * K), kInfiniteT);
  ConfidenceSet meta;
  meta.alpha = opt.alpha;
  meta.mode = opt.mode;
  meta.seed = opt.seed;

  if (!e.has_counts()) {
    // exact distribution: statistic is -L, any positive L beyond eps rejects
    meta.noiseless = true;
    const auto p = detail::feasible_p(pm, e.p, opt.tol, meta.projected);
    const auto g = compute_gaps(pm, p, opt.tol, opt.threads);
    for (int a = 1; a <= K; ++a)
      for (int b = 1; b <= K; ++b)
        if (a != b) ps.t[static_cast<std::size_t>((a - 1) * K + (b - 1))] = -g.l(a, b);
    std::vector<int> alive;
    for (int k = 1; k <= K; ++k) alive.push_back(k);
    auto cs = meta;
    for (;;) {
      double T = kInfiniteT;
      int win = 0, lose = 0;
      for (int a : alive)
        for (int b : alive)
          if (a != b && ps.at(a, b) < T) {
            T = ps.at(a, b);
            win = a;
            lose = b;
          }
      cs.final_statistic = T;
      cs.final_critical = -opt.tol.sign;
      if (alive.size() < 2 || !(T < -opt.tol.sign)) break;
      cs.steps.push_back({lose, win, T, -opt.tol.sign});
      alive.erase(std::find(alive.begin(), alive.end(), lose));
    }
    cs.survivors = alive;
    return cs;
  }

  if (opt.reps == 0) throw std::invalid_argument("the bootstrap needs at least one replicate");
  const double kappa = opt.kappa >= 0.0 ? opt.kappa : std::sqrt(2.0 * std::log(std::max(std::log(static_cast<double>(e.n)), 1.0)));
  meta.kappa = kappa;
  meta.reps = opt.reps;
  ps.boot.assign(opt.reps, std::vector<double>(static_cast<std::size_t>(K * K), kInfiniteT));
  auto rep_rng = [&](std::size_t r) {
    std::seed_seq seq{opt.seed, static_cast<std::uint64_t>(r)};
    return std::mt19937_64(seq);
  };

  if (opt.mode == InferenceMode::vertex) {
    // vertices depend on B and Delta only: computed once
    std::vector<VertexSet> sets;
    std::vector<std::vector<double>> se;
    for (int a = 1; a <= K; ++a)
      for (int b = 1; b <= K; ++b) {
        if (a == b) continue;
        auto vs = enumerate_vertices(dualize(pm, {a}, {b}).second);
        std::vector<double> s;
        for (const auto& l : vs.vertices) s.push_back(lambda_se(e, l));
        se.push_back(std::move(s));
        sets.push_back(std::move(vs));
      }
    std::vector<std::vector<double>> m_hat(sets.size()), t_hat(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
      for (std::size_t v = 0; v < sets[i].vertices.size(); ++v) {
        m_hat[i].push_back(p_tilde_dot(e.p, sets[i].vertices[v]));
        t_hat[i].push_back(t_value(m_hat[i].back(), se[i][v]));
      }
      const auto& vs = sets[i];
      ps.t[static_cast<std::size_t>((vs.k - 1) * K + (vs.kp - 1))] = *std::min_element(t_hat[i].begin(), t_hat[i].end());
    }
    parallel_for(
        opt.reps,
        [&](std::size_t r) {
          auto rng = rep_rng(r);
          const auto star = bootstrap_draw(e, rng);
          for (std::size_t i = 0; i < sets.size(); ++i) {
            double m = kInfiniteT;
            for (std::size_t v = 0; v < sets[i].vertices.size(); ++v) {
              const double s = se[i][v];
              const double shift = detail::recenter(t_hat[i][v], kappa);
              double t;
              if (s > 0.0) t = (p_tilde_dot(star.p, sets[i].vertices[v]) - m_hat[i][v]) / s + shift;
              else t = shift;
              m = std::min(m, t);
            }
            ps.boot[r][static_cast<std::size_t>((sets[i].k - 1) * K + (sets[i].kp - 1))] = m;
          }
        },
        opt.threads);
  } else {
    bool projected = false;
    const auto p = detail::feasible_p(pm, e.p, opt.tol, projected);
    meta.projected = projected;
    const auto g = compute_gaps(pm, p, opt.tol, 1);
    std::vector<std::vector<double>> Ls(opt.reps);
    parallel_for(
        opt.reps,
        [&](std::size_t r) {
          auto rng = rep_rng(r);
          const auto star = bootstrap_draw(e, rng);
          bool pr = false;
          const auto ps_star = detail::feasible_p(pm, star.p, opt.tol, pr);
          Ls[r] = compute_gaps(pm, ps_star, opt.tol, 1).L;
        },
        opt.threads);
    for (int a = 1; a <= K; ++a)
      for (int b = 1; b <= K; ++b) {
        if (a == b) continue;
        const auto idx = static_cast<std::size_t>((a - 1) * K + (b - 1));
        double mean = 0.0, sq = 0.0;
        for (const auto& L : Ls) mean += L[idx] / static_cast<double>(opt.reps);
        for (const auto& L : Ls) sq += (L[idx] - mean) * (L[idx] - mean);
        const double sd = std::sqrt(sq / static_cast<double>(std::max<std::size_t>(opt.reps - 1, 1)));
        const double th = t_value(-g.L[idx], sd);
        ps.t[idx] = th;
        for (std::size_t r = 0; r < opt.reps; ++r)
          ps.boot[r][idx] = (sd > 0.0 ? -(Ls[r][idx] - g.L[idx]) / sd : 0.0) + detail::recenter(th, kappa);
      }
  }
  auto cs = detail::eliminate(ps, opt.alpha);
  cs.alpha = meta.alpha;
  cs.reps = meta.reps;
  cs.mode = meta.mode;
  cs.seed = meta.seed;
  cs.projected = meta.projected;
  cs.kappa = meta.kappa;
  return cs;
}

}  // namespace dynreg
