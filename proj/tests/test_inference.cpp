#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "dynreg/assumptions.hpp"
#include "dynreg/inference.hpp"
#include "dynreg/ordering.hpp"
#include "dynreg/simulate.hpp"
#include "support.hpp"

using namespace dynreg;
using Catch::Approx;

namespace {

const ProblemMatrices& t1_problem() {
  static const ProblemMatrices pm = build_problem(testing::t1(), WelfareSpec::terminal(1));
  return pm;
}

double min_over(const std::vector<std::vector<double>>& vs, std::span<const double> p) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& l : vs) m = std::min(m, p_tilde_dot(p, l));
  return m;
}

// strong instrument and a large effect of treatment
DGPConfig strong() {
  DGPConfig c;
  c.pi1 = 3.0;
  c.mu1 = 2.0;
  return c;
}

EmpiricalDistribution t1_sample(const std::vector<double>& q, std::size_t n, std::uint64_t seed) {
  return estimate_p(sample_from_q(q, testing::t1(), n, seed), testing::t1());
}

}  // namespace

TEST_CASE("dual polyhedra") {
  const auto& pm = t1_problem();
  CHECK_THROWS(dualize(pm, {1}, {1}));
  const auto [up, lo] = dualize(pm, {1}, {2});
  CHECK(up.dim == pm.d_p() + 1);
  CHECK(up.G.size() <= pm.n_cols());
  // (0, ..., 0, max Delta) is always feasible
  const auto delta = build_delta(pm.A, {1}, {2}).dense();
  std::vector<double> l(up.dim, 0.0);
  l.back() = *std::max_element(delta.begin(), delta.end());
  CHECK(up.contains(l));
  l.back() = *std::max_element(delta.begin(), delta.end(), [](double a, double b) { return -a < -b; }) * -1.0;
  CHECK(lo.contains(l));
}

TEST_CASE("vertex minima equal the linear programming bounds") {
  const auto& L = testing::t1();
  std::mt19937_64 rng(31);
  std::vector<ProblemMatrices> problems{t1_problem()};
  problems.push_back(apply_mask(t1_problem(), build_mask(L, AssumptionConfig::uniform(L, Direction::up, Direction::off)).h));
  for (const auto& pm : problems) {
    std::vector<VertexSet> up, lo;
    for (int a = 1; a <= 2; ++a)
      for (int b = 1; b <= 2; ++b)
        if (a != b) {
          const auto [u, l] = dualize(pm, {a}, {b});
          up.push_back(enumerate_vertices(u));
          lo.push_back(enumerate_vertices(l));
          for (const auto& v : up.back().vertices) CHECK(u.contains(v, 1e-7));
        }
    for (int draw = 0; draw < 30; ++draw) {
      std::vector<double> q(L.d_q(), 0.0);
      const auto w = testing::dirichlet(pm.n_cols(), rng);
      for (std::size_t j = 0; j < pm.n_cols(); ++j) q[pm.states[j]] = w[j];
      const auto p = p_from_q(q, L);
      for (std::size_t i = 0; i < up.size(); ++i) {
        const auto bd = gap_bounds(pm, {up[i].k}, {up[i].kp}, p);
        CHECK(min_over(up[i].vertices, p) == Approx(bd.upper).margin(1e-6));
        CHECK(-min_over(lo[i].vertices, p) == Approx(bd.lower).margin(1e-6));
      }
    }
  }
}

TEST_CASE("vertex enumeration is capped by dimension") {
  const auto pm = build_problem(testing::t2k(), WelfareSpec::terminal(2));
  CHECK_THROWS_AS(enumerate_vertices(dualize(pm, {1}, {2}).first), DimensionError);
}

TEST_CASE("t statistics") {
  CHECK(t_value(1.0, 0.0) == kInfiniteT);
  CHECK(t_value(-1.0, 0.0) == -kInfiniteT);
  CHECK(t_value(0.0, 0.0) == 0.0);
  CHECK(t_value(1.0, 0.5) == 2.0);

  const auto q = true_q(strong(), testing::t1(), 200'000, 3);
  const auto ds = sample_from_q(q, testing::t1(), 1000, 5);
  Dataset big(1);
  big.set_has_z(0, true);
  for (int copy = 0; copy < 4; ++copy)
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const int y[1] = {ds.y(i, 0)}, d[1] = {ds.d(i, 0)}, z[1] = {ds.z(i, 0)};
      big.add(y, d, z);
    }
  const auto e1 = estimate_p(ds, testing::t1());
  const auto e4 = estimate_p(big, testing::t1());
  const auto vs = enumerate_vertices(dualize(t1_problem(), {1}, {2}).second);
  for (const auto& l : vs.vertices) CHECK(lambda_se(e4, l) == Approx(lambda_se(e1, l) / 2).margin(1e-12));
  CHECK(lambda_se(distribution_from_p(e1.p, testing::t1()), vs.vertices.front()) == 0.0);
  CHECK(t_statistics(e1, vs).size() == vs.vertices.size());
}

TEST_CASE("without sampling noise the confidence set is the identified set") {
  std::mt19937_64 rng(8);
  const auto& pm = t1_problem();
  for (int draw = 0; draw < 40; ++draw) {
    const auto p = p_from_q(testing::sparse_dirichlet(16, 3, rng), testing::t1());
    const auto cs = cs_procedure(pm, distribution_from_p(p, testing::t1()));
    CHECK(cs.noiseless);
    CHECK(cs.survivors == identified_set(build_partial_order(compute_gaps(pm, p))));
  }
  // two periods under both monotonicity assumptions
  const auto& L = testing::t2k();
  const auto p = p_from_q(true_q(preset("positive"), L, 300'000, 2), L);
  const auto masked = apply_mask(build_problem(L, WelfareSpec::terminal(2)),
                                 build_mask(L, AssumptionConfig::uniform(L, Direction::up, Direction::up)).h);
  const auto cs = cs_procedure(masked, distribution_from_p(p, L));
  CHECK(cs.survivors == identified_set(build_partial_order(compute_gaps(masked, p))));
  CHECK(cs.steps.size() + cs.survivors.size() == 8);
}

TEST_CASE("elimination with sampling noise") {
  const auto& pm = t1_problem();
  const auto q = true_q(strong(), testing::t1(), 200'000, 3);
  const int best = optimal_regime_oracle(q, WelfareSpec::terminal(1), testing::t1()).k;
  const auto e = t1_sample(q, 2000, 11);
  for (auto mode : {InferenceMode::vertex, InferenceMode::resolve}) {
    std::vector<int> previous{1, 2};
    for (double alpha : {0.001, 0.01, 0.05, 0.2, 0.5}) {
      CSOptions opt;
      opt.alpha = alpha;
      opt.reps = 199;
      opt.mode = mode;
      const auto cs = cs_procedure(pm, e, opt);
      CHECK_FALSE(cs.survivors.empty());
      CHECK(cs.steps.size() <= 1);
      CHECK(std::includes(previous.begin(), previous.end(), cs.survivors.begin(), cs.survivors.end()));
      CHECK(std::find(cs.survivors.begin(), cs.survivors.end(), best) != cs.survivors.end());
      previous = cs.survivors;
    }
    // the gap is large enough to be detected at n = 2000
    CHECK(previous == std::vector<int>{best});
    CSOptions loose;
    loose.alpha = 0.999;
    loose.mode = mode;
    CHECK_FALSE(cs_procedure(pm, e, loose).survivors.empty());
    // same seed, same answer
    CSOptions a;
    a.mode = mode;
    CHECK(cs_procedure(pm, e, a).survivors == cs_procedure(pm, e, a).survivors);
  }
  CSOptions bad;
  bad.alpha = 1.0;
  CHECK_THROWS(cs_procedure(pm, e, bad));
}

TEST_CASE("the optimal regime is covered in repeated samples") {
  const auto& pm = t1_problem();
  const auto q = true_q(strong(), testing::t1(), 200'000, 4);
  const int best = optimal_regime_oracle(q, WelfareSpec::terminal(1), testing::t1()).k;
  const int reps = 40;
  int covered = 0;
  for (int r = 0; r < reps; ++r) {
    CSOptions opt;
    opt.mode = InferenceMode::vertex;
    opt.reps = 99;
    opt.seed = static_cast<std::uint64_t>(100 + r);
    const auto cs = cs_procedure(pm, t1_sample(q, 2000, static_cast<std::uint64_t>(r)), opt);
    covered += std::find(cs.survivors.begin(), cs.survivors.end(), best) != cs.survivors.end();
  }
  CHECK(covered >= 36);
}
