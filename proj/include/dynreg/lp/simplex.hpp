#pragma once

// Dense revised simplex for   min c'x  s.t.  Ax = b, x >= 0.
//
// The basis inverse is kept explicitly and updated by row operations,
// refactored from scratch every few dozen pivots. Pricing is Dantzig's rule;
// after a run of pivots without objective progress the solver switches to
// Bland's rule for the rest of the solve, which rules out cycling.
//
// Phase 1 uses one artificial per row. Artificials never re-enter; those
// still basic after phase 1 sit on redundant rows at level zero and are
// treated as blocking in later ratio tests.
//
// Scalar may be double or an exact rational type (tolerances then zero).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

namespace dynreg::lp {

template <class S>
S scalar_abs(const S& x) {
  using std::abs;
  return abs(x);
}

enum class Outcome { optimal, infeasible, unbounded, iteration_limit, singular };

template <class S>
struct SimplexOptions {
  S pivot_tol{};   // smallest usable pivot magnitude
  S opt_tol{};     // reduced-cost tolerance
  S feas_tol{};    // phase-1 objective accepted as zero
  int refactor_every = 50;
  int stall_limit = 30;
  long max_iterations = 1000000;

  static SimplexOptions defaults() {
    SimplexOptions o;
    if constexpr (std::is_floating_point_v<S>) {
      o.pivot_tol = S(1e-9);
      o.opt_tol = S(1e-11);
      o.feas_tol = S(1e-9);
    }
    return o;
  }
};

template <class S>
class DenseSimplex {
 public:
  struct State {
    std::vector<int> basis;  // column per row; >= n means artificial
    std::vector<S> binv;     // m x m, row-major
    std::vector<S> xb;
  };

  struct Result {
    Outcome outcome = Outcome::singular;
    State state;
    std::vector<S> x;  // length n
    std::vector<S> y;  // duals for the original rows
    S objective{};
    long iterations = 0;
  };

  // a is column-major m x n.
  DenseSimplex(int m, int n, std::vector<S> a, std::vector<S> b,
               SimplexOptions<S> opt = SimplexOptions<S>::defaults())
      : m_(m), n_(n), a_(std::move(a)), b_(std::move(b)), opt_(opt), sign_(static_cast<std::size_t>(m), 1) {
    if (a_.size() != static_cast<std::size_t>(m) * static_cast<std::size_t>(n) ||
        b_.size() != static_cast<std::size_t>(m))
      throw std::invalid_argument("simplex dimensions disagree");
    for (int r = 0; r < m_; ++r) {
      if (b_[r] < S(0)) {
        sign_[r] = -1;
        b_[r] = -b_[r];
        for (int j = 0; j < n_; ++j) at(r, j) = -at(r, j);
      }
    }
  }

  int rows() const { return m_; }
  int cols() const { return n_; }

  // Feasible starting basis, or outcome infeasible with the phase-1 objective.
  Result phase1() const {
    State st;
    st.basis.resize(static_cast<std::size_t>(m_));
    st.binv.assign(static_cast<std::size_t>(m_) * static_cast<std::size_t>(m_), S(0));
    for (int r = 0; r < m_; ++r) {
      st.basis[r] = n_ + r;
      st.binv[idx(r, r)] = S(1);
    }
    st.xb = b_;
    std::vector<S> cost(static_cast<std::size_t>(n_ + m_), S(0));
    for (int r = 0; r < m_; ++r) cost[n_ + r] = S(1);
    Result res = iterate(std::move(st), cost, false);
    if (res.outcome != Outcome::optimal) return res;
    if (res.objective > opt_.feas_tol) {
      res.outcome = Outcome::infeasible;
      return res;
    }
    drive_out_artificials(res.state);
    return res;
  }

  Result optimize(const std::vector<S>& c, const State& start) const {
    if (c.size() != static_cast<std::size_t>(n_)) throw std::invalid_argument("cost length differs");
    std::vector<S> cost(static_cast<std::size_t>(n_ + m_), S(0));
    std::copy(c.begin(), c.end(), cost.begin());
    return iterate(start, cost, true);
  }

 private:
  int m_, n_;
  std::vector<S> a_;
  std::vector<S> b_;
  SimplexOptions<S> opt_;
  std::vector<int> sign_;

  std::size_t idx(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(c);
  }
  S& at(int r, int j) { return a_[static_cast<std::size_t>(j) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(r)]; }
  const S& at(int r, int j) const {
    return a_[static_cast<std::size_t>(j) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(r)];
  }

  // alpha = Binv * column j
  void ftran(const State& st, int j, std::vector<S>& alpha) const {
    alpha.assign(static_cast<std::size_t>(m_), S(0));
    if (j >= n_) {
      const int r0 = j - n_;
      for (int r = 0; r < m_; ++r) alpha[r] = st.binv[idx(r, r0)];
      return;
    }
    const S* col = a_.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(m_);
    for (int k = 0; k < m_; ++k) {
      if (col[k] == S(0)) continue;
      for (int r = 0; r < m_; ++r) alpha[r] += st.binv[idx(r, k)] * col[k];
    }
  }

  S column_dot(const std::vector<S>& y, int j) const {
    if (j >= n_) return y[j - n_];
    const S* col = a_.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(m_);
    S s(0);
    for (int k = 0; k < m_; ++k)
      if (col[k] != S(0)) s += y[k] * col[k];
    return s;
  }

  // Rebuild Binv from the basis columns by Gauss-Jordan; false if singular.
  bool refactor(State& st) const {
    const int m = m_;
    std::vector<S> mat(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), S(0));
    for (int r = 0; r < m; ++r) {
      const int j = st.basis[r];
      for (int k = 0; k < m; ++k) mat[idx(k, r)] = j >= n_ ? S(k == j - n_ ? 1 : 0) : at(k, j);
    }
    std::vector<S> inv(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), S(0));
    for (int r = 0; r < m; ++r) inv[idx(r, r)] = S(1);
    for (int c = 0; c < m; ++c) {
      int piv = c;
      for (int r = c + 1; r < m; ++r)
        if (scalar_abs(mat[idx(r, c)]) > scalar_abs(mat[idx(piv, c)])) piv = r;
      if constexpr (std::is_floating_point_v<S>) {
        if (std::abs(mat[idx(piv, c)]) < 1e-13) return false;
      } else {
        if (mat[idx(piv, c)] == S(0)) return false;
      }
      if (piv != c)
        for (int k = 0; k < m; ++k) {
          std::swap(mat[idx(piv, k)], mat[idx(c, k)]);
          std::swap(inv[idx(piv, k)], inv[idx(c, k)]);
        }
      const S d = mat[idx(c, c)];
      for (int k = 0; k < m; ++k) {
        mat[idx(c, k)] /= d;
        inv[idx(c, k)] /= d;
      }
      for (int r = 0; r < m; ++r) {
        if (r == c || mat[idx(r, c)] == S(0)) continue;
        const S f = mat[idx(r, c)];
        for (int k = 0; k < m; ++k) {
          mat[idx(r, k)] -= f * mat[idx(c, k)];
          inv[idx(r, k)] -= f * inv[idx(c, k)];
        }
      }
    }
    st.binv = std::move(inv);
    recompute_xb(st);
    return true;
  }

  void recompute_xb(State& st) const {
    for (int r = 0; r < m_; ++r) {
      S v(0);
      for (int k = 0; k < m_; ++k) v += st.binv[idx(r, k)] * b_[k];
      if constexpr (std::is_floating_point_v<S>)
        if (v < S(0) && v > -opt_.feas_tol) v = S(0);
      st.xb[r] = v;
    }
  }

  void pivot(State& st, int r, int q, const std::vector<S>& alpha) const {
    const S ar = alpha[r];
    for (int k = 0; k < m_; ++k) st.binv[idx(r, k)] /= ar;
    for (int i = 0; i < m_; ++i) {
      if (i == r || alpha[i] == S(0)) continue;
      const S f = alpha[i];
      for (int k = 0; k < m_; ++k) st.binv[idx(i, k)] -= f * st.binv[idx(r, k)];
    }
    const S theta = st.xb[r] / ar;
    for (int i = 0; i < m_; ++i)
      if (i != r) st.xb[i] -= theta * alpha[i];
    st.xb[r] = theta;
    st.basis[r] = q;
  }

  void duals(const State& st, const std::vector<S>& cost, std::vector<S>& y) const {
    y.assign(static_cast<std::size_t>(m_), S(0));
    for (int r = 0; r < m_; ++r) {
      const S cb = cost[st.basis[r]];
      if (cb == S(0)) continue;
      for (int k = 0; k < m_; ++k) y[k] += cb * st.binv[idx(r, k)];
    }
  }

  Result iterate(State st, const std::vector<S>& cost, bool lock_artificials) const {
    Result res;
    std::vector<char> basic(static_cast<std::size_t>(n_ + m_), 0);
    for (int j : st.basis) basic[j] = 1;
    std::vector<S> y, alpha;
    auto objective = [&] {
      S v(0);
      for (int r = 0; r < m_; ++r) v += cost[st.basis[r]] * st.xb[r];
      return v;
    };
    S best = objective();
    int stall = 0;
    bool bland = false;
    long it = 0;
    for (;; ++it) {
      if (it >= opt_.max_iterations) {
        res.outcome = Outcome::iteration_limit;
        break;
      }
      if (it > 0 && it % opt_.refactor_every == 0) {
        if (!refactor(st)) {
          res.outcome = Outcome::singular;
          break;
        }
      }
      duals(st, cost, y);
      int q = -1;
      S best_d(0);
      for (int j = 0; j < n_; ++j) {
        if (basic[j]) continue;
        const S d = cost[j] - column_dot(y, j);
        if (d < -opt_.opt_tol) {
          if (bland) {
            q = j;
            break;
          }
          if (q < 0 || d < best_d) {
            q = j;
            best_d = d;
          }
        }
      }
      if (q < 0) {
        res.outcome = Outcome::optimal;
        break;
      }
      ftran(st, q, alpha);
      int r = -1;
      S best_ratio(0);
      for (int i = 0; i < m_; ++i) {
        const bool art = lock_artificials && st.basis[i] >= n_;
        S ratio;
        if (art && scalar_abs(alpha[i]) > opt_.pivot_tol) {
          ratio = S(0);
        } else if (alpha[i] > opt_.pivot_tol) {
          ratio = st.xb[i] > S(0) ? st.xb[i] / alpha[i] : S(0);
        } else {
          continue;
        }
        bool take = r < 0 || ratio < best_ratio;
        if (!take && ratio == best_ratio) {
          take = bland ? st.basis[i] < st.basis[r] : scalar_abs(alpha[i]) > scalar_abs(alpha[r]);
        }
        if (take) {
          r = i;
          best_ratio = ratio;
        }
      }
      if (r < 0) {
        res.outcome = Outcome::unbounded;
        break;
      }
      basic[st.basis[r]] = 0;
      basic[q] = 1;
      pivot(st, r, q, alpha);
      if constexpr (std::is_floating_point_v<S>)
        for (auto& v : st.xb)
          if (v < S(0) && v > -opt_.feas_tol) v = S(0);
      const S now = objective();
      if (now < best - (std::is_floating_point_v<S> ? S(1e-12) : S(0))) {
        best = now;
        stall = 0;
      } else if (++stall > opt_.stall_limit) {
        bland = true;
      }
    }
    res.iterations = it;
    if (res.outcome == Outcome::optimal) {
      if (!refactor(st)) {
        res.outcome = Outcome::singular;
      } else {
        duals(st, cost, y);
      }
    }
    res.objective = objective();
    res.x.assign(static_cast<std::size_t>(n_), S(0));
    for (int i = 0; i < m_; ++i)
      if (st.basis[i] < n_) res.x[st.basis[i]] = st.xb[i];
    res.y.assign(static_cast<std::size_t>(m_), S(0));
    for (int i = 0; i < m_ && i < static_cast<int>(y.size()); ++i) res.y[i] = sign_[i] < 0 ? -y[i] : y[i];
    res.state = std::move(st);
    return res;
  }

  void drive_out_artificials(State& st) const {
    std::vector<char> basic(static_cast<std::size_t>(n_ + m_), 0);
    for (int j : st.basis) basic[j] = 1;
    std::vector<S> alpha;
    for (int r = 0; r < m_; ++r) {
      if (st.basis[r] < n_) continue;
      int q = -1;
      S best(0);
      for (int j = 0; j < n_; ++j) {
        if (basic[j]) continue;
        S v(0);
        const S* col = a_.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(m_);
        for (int k = 0; k < m_; ++k)
          if (col[k] != S(0)) v += st.binv[idx(r, k)] * col[k];
        if (scalar_abs(v) > opt_.pivot_tol && scalar_abs(v) > best) {
          best = scalar_abs(v);
          q = j;
          if constexpr (!std::is_floating_point_v<S>) break;
        }
      }
      if (q < 0) continue;  // redundant row
      ftran(st, q, alpha);
      st.xb[r] = S(0);
      basic[st.basis[r]] = 0;
      basic[q] = 1;
      pivot(st, r, q, alpha);
    }
    refactor(st);
  }
};

}  // namespace dynreg::lp
