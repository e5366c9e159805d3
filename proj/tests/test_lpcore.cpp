#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "dynreg/lp/exact.hpp"
#include "dynreg/lpcore.hpp"
#include "iv_bounds.hpp"
#include "support.hpp"

using namespace dynreg;
using Catch::Approx;

namespace {

const ProblemMatrices& t1_problem() {
  static const ProblemMatrices pm = build_problem(testing::t1(), WelfareSpec::terminal(1));
  return pm;
}

const ProblemMatrices& t2_problem() {
  static const ProblemMatrices pm = build_problem(testing::t2k(), WelfareSpec::terminal(2));
  return pm;
}

// complier with Y1(d) = d at T=1: every potential outcome is revealed
std::uint64_t t1_complier() { return encode(ResponseMaps{{{0, 1}}, {{0, 1}}}, testing::t1()).s; }

}  // namespace

TEST_CASE("tolerances") {
  Tolerances t;
  CHECK(t.feas == 1e-8);
  CHECK(t.dual == 1e-6);
  CHECK(t.sign == 1e-7);
  CHECK(t.tie == 1e-9);
  t.sign = 0.0;
  CHECK_THROWS(t.validate());
}

TEST_CASE("a pinned q gives point bounds") {
  const auto& pm = t1_problem();
  const auto q = testing::point_mass(16, t1_complier());
  const auto p = pm.B.multiply(q);
  for (int k = 1; k <= 2; ++k) {
    const auto b = welfare_bounds(pm, {k}, p);
    const double truth = pm.A.row_dot(static_cast<std::size_t>(k - 1), q);
    CHECK(b.lower == Approx(truth).margin(1e-12));
    CHECK(b.upper == Approx(truth).margin(1e-12));
  }
  const SimplexLP lp{pm.A.row(0).dense(), &pm.B, p, Sense::max};
  const auto r = solve(lp);
  CHECK(r.status == SolveStatus::optimal);
  CHECK(r.lambda.size() == 7);
}

TEST_CASE("T=1 gap bounds equal the closed-form IV bounds") {
  const auto& pm = t1_problem();
  std::mt19937_64 rng(17);
  for (int draw = 0; draw < 100; ++draw) {
    const auto q = testing::dirichlet(16, rng, draw % 3 == 0 ? 0.3 : 1.0);
    const auto p = pm.B.multiply(q);
    const auto b = gap_bounds(pm, {2}, {1}, p);
    const auto iv = testing::iv_ate_bounds(p);
    CHECK(b.lower == Approx(iv.lower).margin(1e-8));
    CHECK(b.upper == Approx(iv.upper).margin(1e-8));
    const auto bf = testing::brute_force_bounds(pm.B, build_delta(pm.A, {2}, {1}).dense(), p);
    CHECK(b.lower == Approx(bf.lower).margin(1e-8));
    CHECK(b.upper == Approx(bf.upper).margin(1e-8));
  }
}

TEST_CASE("infeasible observed distributions") {
  const auto& pm = t1_problem();
  std::mt19937_64 rng(3);
  const auto q = testing::dirichlet(16, rng);
  auto p = pm.B.multiply(q);
  // retained cells of the z=1 block sum to 1.1: the block total exceeds one
  double block = 0.0;
  for (std::size_t i = 3; i < 6; ++i) block += p[i];
  for (std::size_t i = 3; i < 6; ++i) p[i] *= 1.1 / block;

  const SimplexLP lp{pm.A.row(0).dense(), &pm.B, p, Sense::min};
  CHECK(solve(lp).status == SolveStatus::infeasible);
  CHECK_THROWS_AS(gap_bounds(pm, {1}, {2}, p), ModelRefutedError);
  try {
    welfare_bounds(pm, {1}, p);
  } catch (const ModelRefutedError& e) {
    CHECK(e.gap() >= 0.1 - 1e-9);
  }
  CHECK(feasibility_gap(pm.B, p).gap >= 0.1 - 1e-9);

  // the z=0 block may leave mass on the dropped cell
  std::vector<double> ok(6, 0.0);
  ok[0] = 0.9;
  ok[3] = 1.0;
  CHECK(LPSystem(pm.B, ok).feasible());
  CHECK(feasibility_gap(pm.B, ok).gap <= 1e-12);
}

TEST_CASE("feasibility gap is zero on the image of the simplex") {
  const auto& pm = t2_problem();
  std::mt19937_64 rng(5);
  const auto q = testing::dirichlet(pm.n_cols(), rng);
  const auto p = pm.B.multiply(q);
  CHECK(feasibility_gap(pm.B, p).gap <= 1e-9);
}

TEST_CASE("T=2 gap bounds are valid, dual-certified and antisymmetric") {
  const auto& pm = t2_problem();
  std::mt19937_64 rng(21);
  const Tolerances tol;
  for (int draw = 0; draw < 5; ++draw) {
    const auto q = draw % 2 ? testing::dirichlet(pm.n_cols(), rng)
                            : testing::sparse_dirichlet(pm.n_cols(), 200, rng);
    const auto p = pm.B.multiply(q);
    LPSystem sys(pm.B, p, tol);
    REQUIRE(sys.feasible());
    CHECK(sys.group_count() < pm.n_cols());
    const auto g = compute_gaps(pm, sys, 1);
    CHECK(g.lp_count == 56);
    CHECK(g.max_duality_gap <= tol.dual);
    CHECK(g.max_dual_infeasibility <= tol.dual);
    CHECK(g.max_primal_residual <= tol.feas);
    for (int a = 1; a <= 8; ++a)
      for (int b = 1; b <= 8; ++b) {
        if (a == b) continue;
        const double truth = build_delta(pm.A, {a}, {b}).dot(q);
        CHECK(g.l(a, b) <= truth + 1e-9);
        CHECK(g.u(a, b) >= truth - 1e-9);
        CHECK(g.l(a, b) >= -1.0 - 1e-12);
        CHECK(g.u(a, b) <= 1.0 + 1e-12);
      }
    // reversed pairs solved directly
    for (int a = 1; a <= 8; ++a)
      for (int b = 1; b < a; ++b) {
        const auto direct = gap_bounds(pm, sys, {a}, {b});
        CHECK(std::abs(g.u(b, a) + direct.lower) <= 2 * tol.dual);
        CHECK(std::abs(direct.upper + g.l(b, a)) <= 2 * tol.dual);
        CHECK(direct.lower_result.duality_gap <= tol.dual);
      }
  }
}

TEST_CASE("dual vectors certify the optimum") {
  const auto& pm = t2_problem();
  std::mt19937_64 rng(8);
  const auto q = testing::sparse_dirichlet(pm.n_cols(), 300, rng);
  const auto p = pm.B.multiply(q);
  LPSystem sys(pm.B, p);
  const auto c = build_delta(pm.A, {4}, {7}).dense();
  for (Sense sense : {Sense::min, Sense::max}) {
    const auto r = sys.optimize(c, sense);
    REQUIRE(r.status == SolveStatus::optimal);
    double pl = r.lambda.back();
    for (std::size_t i = 0; i < p.size(); ++i) pl += p[i] * r.lambda[i];
    CHECK(pl == Approx(r.value).margin(1e-9));
    // B~' lambda <= c for a minimum, >= c for a maximum, on every column
    std::vector<double> btl(pm.n_cols(), r.lambda.back());
    for (std::size_t i = 0; i < pm.B.rows(); ++i)
      for (auto col : pm.B.row_cols(i)) btl[col] += r.lambda[i];
    double worst = 0.0;
    for (std::size_t j = 0; j < pm.n_cols(); ++j)
      worst = std::max(worst, sense == Sense::min ? btl[j] - c[j] : c[j] - btl[j]);
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("every value between the bounds is attained") {
  const auto& pm = t2_problem();
  std::mt19937_64 rng(31);
  const auto q = testing::sparse_dirichlet(pm.n_cols(), 400, rng);
  const auto p = pm.B.multiply(q);
  LPSystem sys(pm.B, p);
  for (auto [a, b] : {std::pair{2, 5}, std::pair{8, 1}}) {
    const auto c = build_delta(pm.A, {a}, {b}).dense();
    const auto bd = gap_bounds(pm, sys, {a}, {b});
    for (int i = 1; i <= 5; ++i) {
      const double v = bd.lower + (bd.upper - bd.lower) * i / 6.0;
      CHECK(attains(pm, p, c, v));
    }
    CHECK_FALSE(attains(pm, p, c, bd.upper + 1e-3));
  }
}

TEST_CASE("solves are deterministic across thread counts") {
  const auto& pm = t2_problem();
  std::mt19937_64 rng(77);
  const auto q = testing::sparse_dirichlet(pm.n_cols(), 500, rng);
  const auto p = pm.B.multiply(q);
  LPSystem sys(pm.B, p);
  const auto g1 = compute_gaps(pm, sys, 1);
  const auto g4 = compute_gaps(pm, sys, 4);
  CHECK(g1.L == g4.L);
  CHECK(g1.U == g4.U);
  const auto c = pm.A.row(2).dense();
  const auto r1 = sys.optimize(c, Sense::max);
  const auto r2 = sys.optimize(c, Sense::max);
  CHECK(r1.q == r2.q);
  CHECK(r1.lambda == r2.lambda);
}

TEST_CASE("welfare bounds") {
  const auto& pm = t2_problem();
  std::mt19937_64 rng(41);
  const auto q = testing::dirichlet(pm.n_cols(), rng);
  const auto p = pm.B.multiply(q);
  LPSystem sys(pm.B, p);
  for (int k = 1; k <= 8; ++k) {
    const auto b = welfare_bounds(pm, sys, {k});
    const double truth = pm.A.row_dot(static_cast<std::size_t>(k - 1), q);
    CHECK(b.lower >= -1e-12);
    CHECK(b.upper <= 1.0 + 1e-12);
    CHECK(b.lower <= truth + 1e-9);
    CHECK(b.upper >= truth - 1e-9);
  }
}

TEST_CASE("perfect compliance point-identifies welfare") {
  const auto& L = testing::t1();
  const auto& pm = t1_problem();
  // keep only compliers D1(z) = z
  std::vector<std::uint8_t> h(16, 0);
  for (std::uint64_t s = 0; s < 16; ++s) {
    const auto m = decode({s}, L);
    h[s] = m.d_maps[0][0] == 0 && m.d_maps[0][1] == 1;
  }
  const auto masked = apply_mask(pm, h);
  CHECK(masked.n_cols() == 4);
  std::mt19937_64 rng(2);
  for (int draw = 0; draw < 20; ++draw) {
    const auto w = testing::dirichlet(4, rng);
    std::vector<double> q(16, 0.0);
    for (std::size_t j = 0; j < 4; ++j) q[masked.states[j]] = w[j];
    const auto p = pm.B.multiply(q);
    // E[Y | Z = z] from the cell table: rows are (y,d) = 00, 01, 10 per z
    const double ey_z0 = p[2];
    const double ey_z1 = 1.0 - p[3] - p[4] - p[5];
    const auto b1 = welfare_bounds(masked, {1}, p);
    const auto b2 = welfare_bounds(masked, {2}, p);
    CHECK(b1.lower == Approx(ey_z0).margin(1e-9));
    CHECK(b1.upper == Approx(ey_z0).margin(1e-9));
    CHECK(b2.lower == Approx(ey_z1).margin(1e-9));
    CHECK(b2.upper == Approx(ey_z1).margin(1e-9));
  }
}

TEST_CASE("exact rational re-solve agrees with floating point") {
  const auto& pm = t1_problem();
  std::mt19937_64 rng(6);
  for (int draw = 0; draw < 10; ++draw) {
    const auto q = testing::dirichlet(16, rng);
    const auto p = pm.B.multiply(q);
    LPSystem sys(pm.B, p);
    auto g = compute_gaps(pm, sys, 1);
    const auto before = g.L;
    certify_gaps_exact(pm, sys, g);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(g.L[i] == Approx(before[i]).margin(1e-12));
  }
}
