#pragma once

// Reference bounds for the single-period instrumented model, computed
// without the library's LP code.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dynreg/sparse.hpp"

namespace testing {

struct Interval {
  double lower;
  double upper;
};

// Closed-form sharp bounds on E[Y(1)] - E[Y(0)] with binary Z, D, Y.
// p holds the retained cells per z: (y,d) = 00, 01, 10; 11 is implied.
inline Interval iv_ate_bounds(const std::vector<double>& p) {
  auto cell = [&](int y, int d, int z) {
    const int base = 3 * z;
    if (y == 1 && d == 1) return 1.0 - p[base] - p[base + 1] - p[base + 2];
    return p[static_cast<std::size_t>(base + 2 * y + d)];
  };
  const double p00_0 = cell(0, 0, 0), p01_0 = cell(0, 1, 0), p10_0 = cell(1, 0, 0), p11_0 = cell(1, 1, 0);
  const double p00_1 = cell(0, 0, 1), p01_1 = cell(0, 1, 1), p10_1 = cell(1, 0, 1), p11_1 = cell(1, 1, 1);
  const double lo = std::max({
      p11_1 + p00_0 - 1.0,
      p11_0 + p00_1 - 1.0,
      p11_0 - p11_1 - p10_1 - p01_0 - p10_0,
      p11_1 - p11_0 - p10_0 - p01_1 - p10_1,
      -p01_1 - p10_1,
      -p01_0 - p10_0,
      p00_1 - p01_1 - p10_1 - p01_0 - p00_0,
      p00_0 - p01_0 - p10_0 - p01_1 - p00_1,
  });
  const double hi = std::min({
      1.0 - p01_1 - p10_0,
      1.0 - p01_0 - p10_1,
      -p01_0 + p01_1 + p00_1 + p11_0 + p00_0,
      -p01_1 + p11_1 + p00_1 + p01_0 + p00_0,
      p11_1 + p00_1,
      p11_0 + p00_0,
      -p10_1 + p11_1 + p00_1 + p11_0 + p10_0,
      -p10_0 + p11_0 + p00_0 + p11_1 + p10_1,
  });
  return {lo, hi};
}

// min / max of c'q over {q >= 0, Bq = p, 1'q = 1} by enumerating every basis.
inline Interval brute_force_bounds(const dynreg::SparseRowMatrix& B, const std::vector<double>& c,
                                   const std::vector<double>& p) {
  const int m = static_cast<int>(B.rows()) + 1;
  const int n = static_cast<int>(B.cols());
  auto dense = B.dense();
  dense.emplace_back(static_cast<std::size_t>(n), 1.0);
  std::vector<double> rhs = p;
  rhs.push_back(1.0);
  Interval out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  std::vector<int> pick(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) pick[i] = i;
  for (;;) {
    // solve the square system on the picked columns
    std::vector<std::vector<double>> M(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(m) + 1));
    for (int r = 0; r < m; ++r) {
      for (int k = 0; k < m; ++k) M[r][k] = dense[r][pick[k]];
      M[r][m] = rhs[r];
    }
    bool singular = false;
    for (int col = 0; col < m && !singular; ++col) {
      int piv = col;
      for (int r = col + 1; r < m; ++r)
        if (std::abs(M[r][col]) > std::abs(M[piv][col])) piv = r;
      if (std::abs(M[piv][col]) < 1e-12) {
        singular = true;
        break;
      }
      std::swap(M[piv], M[col]);
      for (int r = 0; r < m; ++r) {
        if (r == col) continue;
        const double f = M[r][col] / M[col][col];
        for (int k = col; k <= m; ++k) M[r][k] -= f * M[col][k];
      }
    }
    if (!singular) {
      bool feasible = true;
      double value = 0.0;
      for (int k = 0; k < m; ++k) {
        const double x = M[k][m] / M[k][k];
        if (x < -1e-10) feasible = false;
        value += c[static_cast<std::size_t>(pick[k])] * x;
      }
      if (feasible) {
        out.lower = std::min(out.lower, value);
        out.upper = std::max(out.upper, value);
      }
    }
    // next combination
    int i = m - 1;
    while (i >= 0 && pick[i] == n - m + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < m; ++j) pick[j] = pick[j - 1] + 1;
  }
  return out;
}

}  // namespace testing
