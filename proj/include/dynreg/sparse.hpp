#pragma once

// Compressed sparse row matrix and the triplet text format used to dump it.
//
// Triplet format: a header line "rows cols nnz" followed by one
// "row col value" line per stored entry, 0-based, rows in order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynreg {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

struct SparseRow {
  std::size_t n_cols = 0;
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;

  double dot(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < cols.size(); ++i) s += vals[i] * x[cols[i]];
    return s;
  }
  std::vector<double> dense() const {
    std::vector<double> out(n_cols, 0.0);
    for (std::size_t i = 0; i < cols.size(); ++i) out[cols[i]] = vals[i];
    return out;
  }
};

class SparseRowMatrix {
 public:
  SparseRowMatrix() : row_ptr_{0} {}
  SparseRowMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  // Duplicate entries are summed, zeros dropped.
  static SparseRowMatrix from_triplets(std::size_t rows, std::size_t cols,
                                       std::vector<Triplet> entries) {
    for (const Triplet& t : entries) {
      if (t.row >= rows || t.col >= cols) throw std::out_of_range("triplet outside matrix");
      if (!std::isfinite(t.value)) throw std::invalid_argument("non-finite matrix entry");
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseRowMatrix m(rows, cols);
    for (std::size_t i = 0; i < entries.size();) {
      std::size_t j = i;
      double v = 0.0;
      while (j < entries.size() && entries[j].row == entries[i].row && entries[j].col == entries[i].col)
        v += entries[j++].value;
      if (v != 0.0) {
        m.col_idx_.push_back(static_cast<std::uint32_t>(entries[i].col));
        m.values_.push_back(v);
        ++m.row_ptr_[entries[i].row + 1];
      }
      i = j;
    }
    for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
    return m;
  }

  // Rows appended in order; columns within a row must be strictly increasing.
  void append_row(std::span<const std::uint32_t> cols, std::span<const double> vals) {
    if (row_ptr_.size() != filled_ + 1) throw std::logic_error("append_row on a finished matrix");
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] >= cols_) throw std::out_of_range("column outside matrix");
      if (i > 0 && cols[i] <= cols[i - 1]) throw std::invalid_argument("columns must increase");
      if (vals[i] == 0.0) continue;
      col_idx_.push_back(cols[i]);
      values_.push_back(vals[i]);
    }
    row_ptr_.push_back(col_idx_.size());
    ++filled_;
    if (filled_ > rows_) rows_ = filled_;
  }

  static SparseRowMatrix with_columns(std::size_t cols) {
    SparseRowMatrix m;
    m.cols_ = cols;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::uint32_t> row_cols(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_vals(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  SparseRow row(std::size_t r) const {
    auto c = row_cols(r);
    auto v = row_vals(r);
    return SparseRow{cols_, {c.begin(), c.end()}, {v.begin(), v.end()}};
  }

  double at(std::size_t r, std::size_t c) const {
    auto cs = row_cols(r);
    auto it = std::lower_bound(cs.begin(), cs.end(), static_cast<std::uint32_t>(c));
    if (it == cs.end() || *it != c) return 0.0;
    return row_vals(r)[static_cast<std::size_t>(it - cs.begin())];
  }

  double row_dot(std::size_t r, std::span<const double> x) const {
    auto cs = row_cols(r);
    auto vs = row_vals(r);
    double s = 0.0;
    for (std::size_t i = 0; i < cs.size(); ++i) s += vs[i] * x[cs[i]];
    return s;
  }

  std::vector<double> multiply(std::span<const double> x) const {
    if (x.size() != cols_) throw std::invalid_argument("dimension mismatch in multiply");
    std::vector<double> y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) y[r] = row_dot(r, x);
    return y;
  }

  // Keeps the listed columns (in that order) and renumbers them 0..keep.size()-1.
  SparseRowMatrix select_columns(std::span<const std::uint64_t> keep) const {
    std::vector<std::int64_t> remap(cols_, -1);
    for (std::size_t j = 0; j < keep.size(); ++j) {
      if (keep[j] >= cols_) throw std::out_of_range("selected column outside matrix");
      remap[keep[j]] = static_cast<std::int64_t>(j);
    }
    std::vector<Triplet> t;
    for (std::size_t r = 0; r < rows_; ++r) {
      auto cs = row_cols(r);
      auto vs = row_vals(r);
      for (std::size_t i = 0; i < cs.size(); ++i)
        if (remap[cs[i]] >= 0) t.push_back({r, static_cast<std::size_t>(remap[cs[i]]), vs[i]});
    }
    return from_triplets(rows_, keep.size(), std::move(t));
  }

  std::vector<std::vector<double>> dense() const {
    std::vector<std::vector<double>> out(rows_, std::vector<double>(cols_, 0.0));
    for (std::size_t r = 0; r < rows_; ++r) {
      auto cs = row_cols(r);
      auto vs = row_vals(r);
      for (std::size_t i = 0; i < cs.size(); ++i) out[r][cs[i]] = vs[i];
    }
    return out;
  }

  void write_triplets(std::ostream& os) const {
    os << rows_ << ' ' << cols_ << ' ' << nnz() << '\n';
    os.precision(17);
    for (std::size_t r = 0; r < rows_; ++r) {
      auto cs = row_cols(r);
      auto vs = row_vals(r);
      for (std::size_t i = 0; i < cs.size(); ++i) os << r << ' ' << cs[i] << ' ' << vs[i] << '\n';
    }
  }

  static SparseRowMatrix read_triplets(std::istream& is) {
    std::size_t rows = 0, cols = 0, nnz = 0;
    if (!(is >> rows >> cols >> nnz)) throw std::runtime_error("bad triplet header");
    std::vector<Triplet> t(nnz);
    for (auto& e : t)
      if (!(is >> e.row >> e.col >> e.value)) throw std::runtime_error("truncated triplet file");
    return from_triplets(rows, cols, std::move(t));
  }

  bool operator==(const SparseRowMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && row_ptr_ == o.row_ptr_ &&
           col_idx_ == o.col_idx_ && values_ == o.values_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t filled_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace dynreg
