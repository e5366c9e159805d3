#pragma once

// Linear representation of the model: welfare rows A (|K| x d_q), the
// data-consistency matrix B (d_p x d_q) and gap rows A_k - A_k'.
//
// Rows of B are the observable cells (y, d | z). Within each instrument
// block the cells are ordered by cell code and the last one (all outcomes
// and treatments equal to one) is dropped, since it is implied by the
// others and the simplex constraint. Row index = block * (cells - 1) + code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynreg/errors.hpp"
#include "dynreg/parallel.hpp"
#include "dynreg/regimes.hpp"
#include "dynreg/sparse.hpp"
#include "dynreg/statespace.hpp"
#include "dynreg/welfare.hpp"

namespace dynreg {

struct CellLabel {
  std::vector<int> y;
  std::vector<int> d;
  std::vector<int> z;

  std::string str() const {
    auto join = [](const std::vector<int>& v) {
      std::string s;
      for (int x : v) s += static_cast<char>('0' + x);
      return s;
    };
    return "y=" + join(y) + ",d=" + join(d) + "|z=" + join(z);
  }
  bool operator==(const CellLabel&) const = default;
};

// Cell code of every (column, z block): codes[col * z_count + block].
struct ObservedCodes {
  int z_count = 0;
  std::vector<std::uint16_t> codes;

  int at(std::size_t col, int block) const {
    return codes[col * static_cast<std::size_t>(z_count) + static_cast<std::size_t>(block)];
  }
};

inline ObservedCodes observed_codes(const StateSpaceLayout& layout) {
  ObservedCodes oc;
  oc.z_count = layout.z_count();
  const std::uint64_t dq = layout.d_q();
  oc.codes.assign(dq * static_cast<std::uint64_t>(oc.z_count), 0);
  std::vector<std::vector<int>> zs;
  for (int b = 0; b < oc.z_count; ++b) zs.push_back(layout.z_vector(b));
  const std::size_t chunk = 4096;
  const std::size_t chunks = static_cast<std::size_t>((dq + chunk - 1) / chunk);
  parallel_for(chunks, [&](std::size_t c) {
    const std::uint64_t end = std::min<std::uint64_t>(dq, (c + 1) * chunk);
    for (std::uint64_t s = c * chunk; s < end; ++s)
      for (int b = 0; b < oc.z_count; ++b)
        oc.codes[s * static_cast<std::uint64_t>(oc.z_count) + static_cast<std::uint64_t>(b)] =
            static_cast<std::uint16_t>(layout.observed_code(s, zs[b].data()));
  });
  return oc;
}

inline std::vector<CellLabel> b_row_labels(const StateSpaceLayout& layout) {
  const int cells = layout.cells_per_z();
  const auto T = static_cast<std::size_t>(layout.periods());
  std::vector<CellLabel> labels;
  for (int b = 0; b < layout.z_count(); ++b) {
    for (int c = 0; c + 1 < cells; ++c) {
      CellLabel l{std::vector<int>(T), std::vector<int>(T), layout.z_vector(b)};
      layout.cell_decode(c, l.y.data(), l.d.data());
      labels.push_back(std::move(l));
    }
  }
  return labels;
}

inline std::size_t b_row_index(int block, int code, int cells_per_z) {
  return static_cast<std::size_t>(block) * static_cast<std::size_t>(cells_per_z - 1) +
         static_cast<std::size_t>(code);
}

namespace detail {

inline SparseRowMatrix b_from_codes(const ObservedCodes& oc, int cells,
                                    std::span<const std::uint64_t> columns) {
  const std::size_t rows = static_cast<std::size_t>(oc.z_count) * static_cast<std::size_t>(cells - 1);
  std::vector<Triplet> t;
  t.reserve(columns.size() * static_cast<std::size_t>(oc.z_count));
  for (std::size_t j = 0; j < columns.size(); ++j)
    for (int b = 0; b < oc.z_count; ++b) {
      const int code = oc.at(columns[j], b);
      if (code != cells - 1) t.push_back({b_row_index(b, code, cells), j, 1.0});
    }
  return SparseRowMatrix::from_triplets(rows, columns.size(), std::move(t));
}

inline std::vector<std::uint64_t> iota_states(std::uint64_t n) {
  std::vector<std::uint64_t> v(n);
  for (std::uint64_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace detail

struct BMatrix {
  SparseRowMatrix B;
  std::vector<CellLabel> labels;
};

inline BMatrix build_B(const StateSpaceLayout& layout) {
  const auto oc = observed_codes(layout);
  const auto all = detail::iota_states(layout.d_q());
  return {detail::b_from_codes(oc, layout.cells_per_z(), all), b_row_labels(layout)};
}

inline SparseRowMatrix build_A(const StateSpaceLayout& layout, const std::vector<Regime>& regimes,
                               const WelfareSpec& w) {
  w.validate(layout.periods());
  for (const Regime& r : regimes)
    if (!(r.horizon() == layout.horizon()))
      throw std::invalid_argument("regime horizon differs from layout horizon");
  const std::uint64_t dq = layout.d_q();
  auto A = SparseRowMatrix::with_columns(dq);
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  for (const Regime& r : regimes) {
    cols.clear();
    vals.clear();
    for (std::uint64_t s = 0; s < dq; ++s) {
      const double v = state_welfare(r, s, w, layout);
      if (v != 0.0) {
        cols.push_back(static_cast<std::uint32_t>(s));
        vals.push_back(v);
      }
    }
    A.append_row(cols, vals);
  }
  return A;
}

// Row k minus row k' of A (1-based regime indices).
inline SparseRow build_delta(const SparseRowMatrix& A, RegimeIndex k, RegimeIndex kp) {
  if (k.k == kp.k) throw std::invalid_argument("gap row needs two distinct regimes");
  const auto n = static_cast<int>(A.rows());
  if (k.k < 1 || k.k > n || kp.k < 1 || kp.k > n) throw std::out_of_range("regime index outside A");
  auto ac = A.row_cols(static_cast<std::size_t>(k.k - 1));
  auto av = A.row_vals(static_cast<std::size_t>(k.k - 1));
  auto bc = A.row_cols(static_cast<std::size_t>(kp.k - 1));
  auto bv = A.row_vals(static_cast<std::size_t>(kp.k - 1));
  SparseRow out;
  out.n_cols = A.cols();
  std::size_t i = 0, j = 0;
  while (i < ac.size() || j < bc.size()) {
    std::uint32_t c;
    double v;
    if (j == bc.size() || (i < ac.size() && ac[i] < bc[j])) {
      c = ac[i];
      v = av[i++];
    } else if (i == ac.size() || bc[j] < ac[i]) {
      c = bc[j];
      v = -bv[j++];
    } else {
      c = ac[i];
      v = av[i++] - bv[j++];
    }
    if (v != 0.0) {
      out.cols.push_back(c);
      out.vals.push_back(v);
    }
  }
  return out;
}

struct ProblemMatrices {
  StateSpaceLayout layout;
  WelfareSpec welfare;
  SparseRowMatrix A;
  SparseRowMatrix B;
  std::vector<CellLabel> row_labels;
  ObservedCodes codes;                // indexed by state s
  std::vector<std::uint64_t> states;  // active column j -> state s
  bool masked = false;

  std::size_t d_p() const { return B.rows(); }
  std::size_t n_cols() const { return states.size(); }
  std::size_t regime_count() const { return A.rows(); }
  int column_code(std::size_t j, int block) const { return codes.at(states[j], block); }
};

inline ProblemMatrices build_problem(const StateSpaceLayout& layout, const WelfareSpec& w) {
  const auto regimes = enumerate_regimes(layout.horizon());
  ProblemMatrices pm{layout, w, build_A(layout, regimes, w), {}, b_row_labels(layout),
                     observed_codes(layout), detail::iota_states(layout.d_q()), false};
  pm.B = detail::b_from_codes(pm.codes, layout.cells_per_z(), pm.states);
  return pm;
}

// Removes every column whose state has h_s = 0.
inline ProblemMatrices apply_mask(const ProblemMatrices& pm, std::span<const std::uint8_t> h) {
  if (h.size() != pm.layout.d_q()) throw std::invalid_argument("mask length differs from d_q");
  std::vector<std::uint64_t> keep_cols;
  std::vector<std::uint64_t> keep_states;
  for (std::size_t j = 0; j < pm.states.size(); ++j) {
    const std::uint64_t s = pm.states[j];
    if (h[s] > 1) throw std::invalid_argument("mask entries must be 0 or 1");
    if (h[s]) {
      keep_cols.push_back(j);
      keep_states.push_back(s);
    }
  }
  if (keep_cols.empty())
    throw ConsistencyError("the assumptions exclude every latent state");
  ProblemMatrices out{pm.layout, pm.welfare, pm.A.select_columns(keep_cols),
                      pm.B.select_columns(keep_cols), pm.row_labels, pm.codes,
                      std::move(keep_states), true};
  out.masked = out.states.size() != pm.layout.d_q() || pm.masked;
  return out;
}

// Numerical rank by Gaussian elimination with partial pivoting.
inline std::size_t numerical_rank(const SparseRowMatrix& M, double tol = 1e-9) {
  // work on the transpose when it is smaller to keep the dense copy small
  auto dense = M.dense();
  std::size_t rows = M.rows(), cols = M.cols();
  std::size_t rank = 0;
  for (std::size_t c = 0; c < cols && rank < rows; ++c) {
    std::size_t piv = rank;
    for (std::size_t r = rank; r < rows; ++r)
      if (std::abs(dense[r][c]) > std::abs(dense[piv][c])) piv = r;
    if (std::abs(dense[piv][c]) <= tol) continue;
    std::swap(dense[piv], dense[rank]);
    for (std::size_t r = rank + 1; r < rows; ++r) {
      const double f = dense[r][c] / dense[rank][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < cols; ++k) dense[r][k] -= f * dense[rank][k];
    }
    ++rank;
  }
  return rank;
}

inline std::string to_triplet_text(const SparseRowMatrix& M) {
  std::ostringstream os;
  M.write_triplets(os);
  return os.str();
}

}  // namespace dynreg
