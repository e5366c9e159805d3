#pragma once

// Exact rational re-solve of an LPSystem objective. Input doubles are
// converted without rounding, so the result is the exact optimum of the
// floating-point instance. Needs gmpxx.

#include <gmpxx.h>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "dynreg/lp/simplex.hpp"
#include "dynreg/lpcore.hpp"

namespace dynreg {

inline constexpr std::size_t kExactColumnCap = 4096;

struct ExactResult {
  bool feasible = false;
  mpq_class value;
};

inline ExactResult exact_optimum(const LPSystem& sys, std::span<const double> c, Sense sense) {
  const std::size_t G = sys.group_count();
  if (G > kExactColumnCap)
    throw DimensionError("exact re-solve limited to " + std::to_string(kExactColumnCap) +
                         " distinct columns");
  if (c.size() != sys.n_cols()) throw std::invalid_argument("objective length differs from columns");
  const int m = sys.rows();
  std::vector<mpq_class> a(static_cast<std::size_t>(m) * G, mpq_class(0));
  for (std::size_t g = 0; g < G; ++g)
    for (auto [r, v] : sys.signatures()[g]) a[g * static_cast<std::size_t>(m) + r] = mpq_class(v);
  std::vector<mpq_class> b;
  for (double v : sys.rhs()) b.emplace_back(v);
  std::vector<mpq_class> cg(G);
  const int sg = sense == Sense::min ? 1 : -1;
  for (std::size_t g = 0; g < G; ++g) {
    bool first = true;
    for (std::uint32_t j : sys.groups()[g]) {
      mpq_class v(c[j]);
      if (sg < 0) v = -v;
      if (first || v < cg[g]) cg[g] = v;
      first = false;
    }
  }
  lp::DenseSimplex<mpq_class> sx(m, static_cast<int>(G), std::move(a), std::move(b));
  auto ph1 = sx.phase1();
  ExactResult out;
  if (ph1.outcome == lp::Outcome::infeasible) return out;
  if (ph1.outcome != lp::Outcome::optimal) throw std::runtime_error("exact phase 1 failed");
  auto r = sx.optimize(cg, ph1.state);
  if (r.outcome != lp::Outcome::optimal) throw std::runtime_error("exact solve failed");
  out.feasible = true;
  out.value = sg < 0 ? mpq_class(-r.objective) : r.objective;
  return out;
}

// Exact lower bounds L_{k,k'} for all ordered pairs; replaces gm.L and gm.U.
inline void certify_gaps_exact(const ProblemMatrices& pm, const LPSystem& sys, GapMatrix& gm) {
  const int K = gm.K;
  for (int a = 1; a <= K; ++a)
    for (int b = a + 1; b <= K; ++b) {
      const auto c = build_delta(pm.A, {a}, {b}).dense();
      const auto lo = exact_optimum(sys, c, Sense::min);
      const auto hi = exact_optimum(sys, c, Sense::max);
      if (!lo.feasible || !hi.feasible) throw std::runtime_error("exact re-solve found no feasible point");
      gm.l(a, b) = lo.value.get_d();
      gm.u(a, b) = hi.value.get_d();
      gm.l(b, a) = -gm.u(a, b);
      gm.u(b, a) = -gm.l(a, b);
    }
}

}  // namespace dynreg
