#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "dynreg/ordering.hpp"
#include "support.hpp"

using namespace dynreg;

namespace {

// L matrix for a 4-regime toy: positive exactly on the listed pairs.
GapMatrix toy_gaps(const std::vector<std::pair<int, int>>& positive) {
  std::vector<double> L(16, -0.2);
  for (int k = 0; k < 4; ++k) L[static_cast<std::size_t>(5 * k)] = 0.0;
  for (auto [a, b] : positive) L[static_cast<std::size_t>((a - 1) * 4 + (b - 1))] = 0.1;
  return GapMatrix::from_lower(4, L);
}

const PartialOrder& fig_a() {
  static const PartialOrder po = build_partial_order(toy_gaps({{1, 2}, {4, 2}, {2, 3}}), 1e-7);
  return po;
}

const PartialOrder& fig_b() {
  static const PartialOrder po = PartialOrder::from_edges(4, {{1, 2}, {1, 3}, {2, 4}, {3, 4}});
  return po;
}

PartialOrder random_dag(int K, double density, std::mt19937_64& rng) {
  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 1);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::bernoulli_distribution coin(density);
  PartialOrder po(K);
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j)
      if (coin(rng)) po.set_edge(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  return transitive_closure(po);
}

// every permutation, filtered
std::vector<std::vector<int>> brute_sorts(const PartialOrder& po) {
  std::vector<int> perm(static_cast<std::size_t>(po.size()));
  std::iota(perm.begin(), perm.end(), 1);
  std::vector<std::vector<int>> out;
  do {
    bool ok = true;
    for (std::size_t i = 0; i < perm.size() && ok; ++i)
      for (std::size_t j = i + 1; j < perm.size() && ok; ++j) ok = !po.edge(perm[j], perm[i]);
    if (ok) out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace

TEST_CASE("edges from the gap matrix") {
  CHECK(fig_a().edges() == std::vector<std::pair<int, int>>{{1, 2}, {2, 3}, {4, 2}});
  CHECK(build_partial_order(toy_gaps({}), 1e-7).edge_count() == 0);
  // a positive lower bound below the sign tolerance is not an edge
  auto g = toy_gaps({});
  g.l(1, 2) = 5e-8;
  CHECK(build_partial_order(g, 1e-7).edge_count() == 0);
  g.l(1, 2) = 2e-7;
  CHECK(build_partial_order(g, 1e-7).edge(1, 2));
  // zero lower bound: equal welfare is not comparable
  g.l(1, 2) = 0.0;
  CHECK_FALSE(build_partial_order(g, 0.0).edge(1, 2));
}

TEST_CASE("a cycle is a consistency error carrying the cycle") {
  auto g = toy_gaps({{1, 2}, {2, 3}, {3, 1}});
  try {
    build_partial_order(g, 1e-7);
    FAIL("no error");
  } catch (const ConsistencyError& e) {
    const auto& c = e.witness();
    REQUIRE(c.size() == 4);
    CHECK(c.front() == c.back());
    CHECK(std::set<int>(c.begin(), c.end()) == std::set<int>{1, 2, 3});
  }
}

TEST_CASE("identified sets of the toy graphs") {
  CHECK(identified_set(fig_a()) == std::vector<int>{1, 4});
  CHECK(identified_set(fig_b()) == std::vector<int>{1});
  CHECK(identified_set(PartialOrder(8)) == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(identified_set_via_paths(fig_a()) == std::vector<int>{1, 4});
  CHECK(identified_set_via_paths(fig_b()) == std::vector<int>{1});
  CHECK(identified_set_via_paths(PartialOrder::from_edges(3, {{1, 2}, {2, 3}})) == std::vector<int>{1});
  CHECK(identified_set_via_paths(PartialOrder(5)).size() == 5);
  CHECK(maximal_paths(fig_a()) == std::vector<std::vector<int>>{{1, 2, 3}, {4, 2, 3}});
}

TEST_CASE("tiers") {
  CHECK(nth_best_tiers(fig_a()) == std::vector<std::vector<int>>{{1, 4}, {2}, {3}});
  CHECK(nth_best_tiers(fig_b()) == std::vector<std::vector<int>>{{1}, {2, 3}, {4}});
  CHECK(nth_best_tiers(PartialOrder(3)) == std::vector<std::vector<int>>{{1, 2, 3}});
}

TEST_CASE("topological sorts of the toy graphs") {
  const auto s = topological_sorts(fig_a());
  CHECK(s.sorts == std::vector<std::vector<int>>{{1, 4, 2, 3}, {4, 1, 2, 3}});
  CHECK_FALSE(s.truncated);
  CHECK(s.count_exact == 2u);
  CHECK(is_topological_sort(fig_a(), {1, 4, 2, 3}));
  CHECK_FALSE(is_topological_sort(fig_a(), {1, 2, 4, 3}));
  CHECK_FALSE(is_topological_sort(fig_a(), {1, 4, 2}));
  CHECK_FALSE(is_topological_sort(fig_a(), {1, 1, 2, 3}));

  const auto all = topological_sorts(PartialOrder(8));
  CHECK(all.count_exact == 40320u);
  CHECK(all.truncated);
  CHECK(all.sorts.size() == kDefaultSortCap);
}

TEST_CASE("transitive reduction") {
  const auto chain = PartialOrder::from_edges(3, {{1, 2}, {2, 3}, {1, 3}});
  CHECK(transitive_reduction(chain).edges() == std::vector<std::pair<int, int>>{{1, 2}, {2, 3}});
  CHECK(transitive_reduction(fig_a()) == fig_a());
  CHECK(transitive_reduction(PartialOrder(4)).edge_count() == 0);
}

TEST_CASE("DOT export") {
  const auto dot = to_dot(PartialOrder::from_edges(3, {{1, 2}, {2, 3}, {1, 3}}), {"(0, 0, 0)", "(0, 0, 1)", "(0, 1, 0)"});
  CHECK(dot.find("digraph") == 0);
  CHECK(dot.find("Regime 2: (0, 0, 1)") != std::string::npos);
  CHECK(dot.find("r1 -> r2;") != std::string::npos);
  CHECK(dot.find("r1 -> r3;") == std::string::npos);
}

TEST_CASE("characterisations agree on random DAGs") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int K = 2 + static_cast<int>(rng() % 6);
    const auto po = random_dag(K, (trial % 4) * 0.25, rng);
    const auto id = identified_set(po);
    CHECK(identified_set_via_paths(po) == id);

    const auto brute = brute_sorts(po);
    const auto ts = topological_sorts(po, 100000);
    CHECK(ts.sorts == brute);
    CHECK(ts.count_exact == brute.size());
    std::set<int> initials;
    for (const auto& s : brute) initials.insert(s.front());
    CHECK(std::vector<int>(initials.begin(), initials.end()) == id);

    const auto tiers = nth_best_tiers(po);
    REQUIRE_FALSE(tiers.empty());
    CHECK(tiers.front() == id);
    std::vector<int> flat;
    for (const auto& t : tiers) flat.insert(flat.end(), t.begin(), t.end());
    std::sort(flat.begin(), flat.end());
    std::vector<int> all(static_cast<std::size_t>(K));
    std::iota(all.begin(), all.end(), 1);
    CHECK(flat == all);
    // no edge inside a tier, and every later vertex is beaten by the previous tier
    for (std::size_t n = 0; n < tiers.size(); ++n) {
      for (int a : tiers[n])
        for (int b : tiers[n]) CHECK_FALSE(po.edge(a, b));
      if (n == 0) continue;
      for (int b : tiers[n]) {
        bool beaten = false;
        for (int a : tiers[n - 1]) beaten = beaten || po.edge(a, b);
        CHECK(beaten);
      }
    }

    const auto red = transitive_reduction(po);
    CHECK(transitive_closure(red) == po);
  }
}

TEST_CASE("edges from synthetic truth are valid, non-edges are attainable") {
  // T=2 with one instrument has 4,096 states
  const auto layout = build_layout(Horizon(2, {true, false}), true);
  const auto pm = build_problem(layout, WelfareSpec::terminal(2));
  std::mt19937_64 rng(12);
  for (int draw = 0; draw < 3; ++draw) {
    const auto q = testing::sparse_dirichlet(pm.n_cols(), 40, rng);
    const auto p = pm.B.multiply(q);
    LPSystem sys(pm.B, p);
    const auto g = compute_gaps(pm, sys, 1);
    const double eps = Tolerances{}.sign;
    const auto po = build_partial_order(g, eps);
    for (int a = 1; a <= 8; ++a)
      for (int b = 1; b <= 8; ++b) {
        if (a == b) continue;
        const auto delta = build_delta(pm.A, {a}, {b});
        if (po.edge(a, b)) {
          CHECK(delta.dot(q) > 0.0);
        } else if (g.u(a, b) >= eps) {
          // some q gives a non-positive gap, another a positive one
          const auto c = delta.dense();
          CHECK(attains(pm, p, c, std::clamp(0.0, g.l(a, b), g.u(a, b))));
          CHECK(attains(pm, p, c, g.u(a, b)));
        }
      }
  }
}
