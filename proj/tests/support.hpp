#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dynreg/regimes.hpp"
#include "dynreg/statespace.hpp"

namespace testing {

inline std::vector<double> dirichlet(std::size_t n, std::mt19937_64& rng, double alpha = 1.0) {
  std::gamma_distribution<double> g(alpha, 1.0);
  std::vector<double> q(n);
  double total = 0.0;
  for (auto& v : q) total += (v = g(rng));
  for (auto& v : q) v /= total;
  return q;
}

// Dirichlet weights on `support` states drawn uniformly from 0..n-1.
inline std::vector<double> sparse_dirichlet(std::size_t n, std::size_t support, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> q(n, 0.0);
  const auto w = dirichlet(support, rng);
  for (double v : w) q[pick(rng)] += v;
  return q;
}

inline std::vector<double> point_mass(std::size_t n, std::uint64_t s) {
  std::vector<double> q(n, 0.0);
  q[s] = 1.0;
  return q;
}

inline const dynreg::StateSpaceLayout& t2k() {
  static const dynreg::StateSpaceLayout layout(dynreg::Horizon(2), true);
  return layout;
}

inline const dynreg::StateSpaceLayout& t1() {
  static const dynreg::StateSpaceLayout layout(dynreg::Horizon(1), false);
  return layout;
}

}  // namespace testing
