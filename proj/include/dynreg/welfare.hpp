#pragma once

// Counterfactual welfare of regimes evaluated directly on a latent
// distribution q, plus the two optimal-regime oracles and the welfare of
// randomised rules. These are brute-force reference computations; the LP
// side works with matrices built from the same path evaluation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynreg/errors.hpp"
#include "dynreg/regimes.hpp"
#include "dynreg/statespace.hpp"

namespace dynreg {

inline constexpr double kSimplexTolerance = 1e-8;
inline constexpr double kTieTolerance = 1e-9;

inline void check_simplex(std::span<const double> q, std::uint64_t d_q,
                          double tol = kSimplexTolerance) {
  if (q.size() != d_q)
    throw std::invalid_argument("q has length " + std::to_string(q.size()) + ", expected " +
                                std::to_string(d_q));
  double total = 0.0;
  for (double v : q) {
    if (!(v >= -tol)) throw std::invalid_argument("q has a negative entry");
    total += v;
  }
  if (std::abs(total - 1.0) > tol * std::max<double>(1.0, std::sqrt(static_cast<double>(d_q))))
    throw std::invalid_argument("q does not sum to one (sum = " + std::to_string(total) + ")");
}

inline OutcomePath evaluate_outcome_path(const Regime& regime, const ResponseMaps& maps,
                                         const StateSpaceLayout& layout) {
  if (!(regime.horizon().periods == layout.periods()))
    throw std::invalid_argument("regime and layout horizons differ");
  const LatentState s = encode(maps, layout);
  const auto T = static_cast<std::size_t>(layout.periods());
  OutcomePath path{std::vector<int>(T), std::vector<int>(T)};
  layout.regime_path(s.s, regime, path.y.data(), path.d.data());
  return path;
}

// Welfare of regime k under state s.
inline double state_welfare(const Regime& r, std::uint64_t s, const WelfareSpec& w,
                            const StateSpaceLayout& layout) {
  int y[kMaxPeriods] = {};
  int d[kMaxPeriods] = {};
  layout.regime_path(s, r, y, d);
  return w.score({y, static_cast<std::size_t>(layout.periods())});
}

inline double welfare_from_q(RegimeIndex k, std::span<const double> q, const WelfareSpec& w,
                             const StateSpaceLayout& layout) {
  check_simplex(q, layout.d_q());
  w.validate(layout.periods());
  const Regime r = regime_from_index(k, layout.horizon());
  double total = 0.0;
  for (std::uint64_t s = 0; s < q.size(); ++s)
    if (q[s] != 0.0) total += q[s] * state_welfare(r, s, w, layout);
  return total;
}

inline std::vector<double> all_welfares(std::span<const double> q, const WelfareSpec& w,
                                        const StateSpaceLayout& layout) {
  check_simplex(q, layout.d_q());
  w.validate(layout.periods());
  const auto regimes = enumerate_regimes(layout.horizon());
  std::vector<double> out(regimes.size(), 0.0);
  for (std::uint64_t s = 0; s < q.size(); ++s) {
    if (q[s] == 0.0) continue;
    for (std::size_t k = 0; k < regimes.size(); ++k)
      out[k] += q[s] * state_welfare(regimes[k], s, w, layout);
  }
  return out;
}

inline RegimeIndex optimal_regime_oracle(std::span<const double> q, const WelfareSpec& w,
                                         const StateSpaceLayout& layout,
                                         double tie = kTieTolerance) {
  const auto welfare = all_welfares(q, w, layout);
  const auto best = std::max_element(welfare.begin(), welfare.end());
  std::vector<int> tied;
  for (std::size_t k = 0; k < welfare.size(); ++k)
    if (*best - welfare[k] <= tie) tied.push_back(static_cast<int>(k) + 1);
  if (tied.size() > 1) {
    std::string list;
    for (int k : tied) list += (list.empty() ? "" : ", ") + std::to_string(k);
    throw AmbiguityError("optimal regime is not unique: regimes " + list + " tie", tied);
  }
  return RegimeIndex{tied.front()};
}

// P[dcode][ycode] = Pr[Y(d) = y] for every static allocation sequence d.
// Both codes are binary with period 1 most significant.
inline std::vector<std::vector<double>> static_outcome_table(std::span<const double> q,
                                                             const StateSpaceLayout& layout) {
  check_simplex(q, layout.d_q());
  const int T = layout.periods();
  const std::size_t n = std::size_t{1} << T;
  std::vector<std::vector<double>> P(n, std::vector<double>(n, 0.0));
  int d[kMaxPeriods] = {};
  int y[kMaxPeriods] = {};
  for (std::size_t dc = 0; dc < n; ++dc) {
    for (int t = 0; t < T; ++t) d[t] = static_cast<int>((dc >> (T - 1 - t)) & 1u);
    for (std::uint64_t s = 0; s < q.size(); ++s) {
      if (q[s] == 0.0) continue;
      layout.static_path(s, d, y);
      std::size_t yc = 0;
      for (int t = 0; t < T; ++t) yc = (yc << 1) | static_cast<std::size_t>(y[t]);
      P[dc][yc] += q[s];
    }
  }
  return P;
}

namespace detail {

// Unnormalised continuation values on the tree of (y^i, d^i) histories.
struct InductionTree {
  int T;
  const std::vector<std::vector<double>>& P;
  const WelfareSpec& w;

  // Pr[Y^i(d^i) = y^i]: marginalise over later outcomes with later d = 0.
  double reach(int i, unsigned yh, unsigned dh) const {
    const int rest = T - i;
    const unsigned dc = dh << rest;
    double total = 0.0;
    for (unsigned tail = 0; tail < (1u << rest); ++tail) total += P[dc][(yh << rest) | tail];
    return total;
  }

  // Value after observing y^i under d^i, choosing optimally afterwards.
  double value(int i, unsigned yh, unsigned dh) const {
    if (i == T) {
      int y[kMaxPeriods] = {};
      for (int t = 0; t < T; ++t) y[t] = static_cast<int>((yh >> (T - 1 - t)) & 1u);
      return w.score({y, static_cast<std::size_t>(T)}) * P[dh][yh];
    }
    return std::max(choice(i, yh, dh, 0), choice(i, yh, dh, 1));
  }

  double choice(int i, unsigned yh, unsigned dh, int dnext) const {
    const unsigned d2 = (dh << 1) | static_cast<unsigned>(dnext);
    return value(i + 1, yh << 1, d2) + value(i + 1, (yh << 1) | 1u, d2);
  }
};

}  // namespace detail

// Backward induction over outcome histories (full adaptivity). Nodes reached
// with probability at most `tie` are unconstrained and allocated 0.
inline RegimeIndex backward_induction_oracle(std::span<const double> q,
                                             const StateSpaceLayout& layout,
                                             const WelfareSpec& w, double tie = kTieTolerance) {
  const Horizon& h = layout.horizon();
  if (h.adaptivity != Adaptivity::full)
    throw std::invalid_argument("backward induction oracle needs full adaptivity");
  w.validate(layout.periods());
  const auto P = static_outcome_table(q, layout);
  const int T = layout.periods();
  detail::InductionTree tree{T, P, w};

  std::vector<std::vector<std::uint8_t>> tables(static_cast<std::size_t>(T));
  for (int i = 0; i < T; ++i) tables[i].assign(static_cast<std::size_t>(h.rule_entries(i)), 0);

  // Walk the regime's own reachable nodes: period i, outcome history yh, own dh.
  struct Node {
    int i;
    unsigned yh, dh;
  };
  std::vector<Node> stack{{0, 0, 0}};
  while (!stack.empty()) {
    const Node n = stack.back();
    stack.pop_back();
    int pick = 0;
    if (n.i == 0 || tree.reach(n.i, n.yh, n.dh) > tie) {
      const double v0 = tree.choice(n.i, n.yh, n.dh, 0);
      const double v1 = tree.choice(n.i, n.yh, n.dh, 1);
      if (std::abs(v1 - v0) <= tie) {
        throw AmbiguityError("backward induction tie in period " + std::to_string(n.i + 1) +
                                 " at outcome history " + std::to_string(n.yh),
                             {n.i + 1, static_cast<int>(n.yh)});
      }
      pick = v1 > v0 ? 1 : 0;
    }
    tables[n.i][n.yh] = static_cast<std::uint8_t>(pick);
    if (n.i + 1 < T) {
      const unsigned dh = (n.dh << 1) | static_cast<unsigned>(pick);
      stack.push_back({n.i + 1, n.yh << 1, dh});
      stack.push_back({n.i + 1, (n.yh << 1) | 1u, dh});
    }
  }
  return index_from_regime(Regime(h, std::move(tables)));
}

inline RegimeIndex backward_induction_oracle(std::span<const double> q,
                                             const StateSpaceLayout& layout) {
  return backward_induction_oracle(q, layout, WelfareSpec::terminal(layout.periods()));
}

// E[score(Y(delta~))] with independent randomisation of every rule entry,
// given the static outcome table of q.
inline double stochastic_welfare(const StochasticRegime& r,
                                 const std::vector<std::vector<double>>& P, const WelfareSpec& w) {
  r.validate();
  const int T = r.periods;
  const unsigned n = 1u << T;
  if (P.size() != n) throw std::invalid_argument("outcome table does not match the horizon");
  for (int i = 0; i < T; ++i)
    if (r.tables[i].size() != (std::size_t{1} << (2 * i)))
      throw std::invalid_argument("stochastic rule table has wrong size");
  w.validate(T);
  double total = 0.0;
  int y[kMaxPeriods] = {};
  for (unsigned dc = 0; dc < n; ++dc) {
    for (unsigned yc = 0; yc < n; ++yc) {
      if (P[dc][yc] == 0.0) continue;
      double prob = 1.0;
      for (int i = 0; i < T && prob != 0.0; ++i) {
        // history (y_1..y_i, d_1..d_i) as a 2i-bit index, y first
        const unsigned yh = yc >> (T - i);
        const unsigned dh = dc >> (T - i);
        const double p1 = r.tables[i][(yh << i) | dh];
        prob *= ((dc >> (T - 1 - i)) & 1u) ? p1 : 1.0 - p1;
      }
      for (int t = 0; t < T; ++t) y[t] = static_cast<int>((yc >> (T - 1 - t)) & 1u);
      total += prob * P[dc][yc] * w.score({y, static_cast<std::size_t>(T)});
    }
  }
  return total;
}

inline double stochastic_welfare(const StochasticRegime& r, std::span<const double> q,
                                 const StateSpaceLayout& layout, const WelfareSpec& w) {
  if (r.periods != layout.periods())
    throw std::invalid_argument("stochastic regime horizon differs from layout");
  return stochastic_welfare(r, static_outcome_table(q, layout), w);
}

inline double stochastic_welfare(const StochasticRegime& r, std::span<const double> q,
                                 const StateSpaceLayout& layout) {
  return stochastic_welfare(r, q, layout, WelfareSpec::terminal(layout.periods()));
}

}  // namespace dynreg
