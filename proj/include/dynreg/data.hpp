#pragma once

// Panel data of binary outcomes, treatments and instruments, and the
// empirical cell distribution p-hat.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dynreg/errors.hpp"
#include "dynreg/matrices.hpp"
#include "dynreg/statespace.hpp"

namespace dynreg {

class Dataset {
 public:
  explicit Dataset(int periods = 2) : T_(periods), has_z_(static_cast<std::size_t>(periods), true) {
    if (periods < 1 || periods > kMaxPeriods) throw std::invalid_argument("periods out of range");
  }

  int periods() const { return T_; }
  std::size_t size() const { return y_.size() / static_cast<std::size_t>(T_); }
  bool empty() const { return y_.empty(); }

  // Whether the z_t column was present in the source.
  bool has_z(int t) const { return has_z_[static_cast<std::size_t>(t)]; }
  void set_has_z(int t, bool v) { has_z_[static_cast<std::size_t>(t)] = v; }

  void add(std::span<const int> y, std::span<const int> d, std::span<const int> z) {
    const auto T = static_cast<std::size_t>(T_);
    if (y.size() != T || d.size() != T || z.size() != T) throw DataError("row length differs from the number of periods");
    for (std::size_t t = 0; t < T; ++t)
      if ((y[t] | d[t] | z[t]) & ~1) throw DataError("values must be 0 or 1");
    for (std::size_t t = 0; t < T; ++t) y_.push_back(static_cast<std::uint8_t>(y[t]));
    for (std::size_t t = 0; t < T; ++t) d_.push_back(static_cast<std::uint8_t>(d[t]));
    for (std::size_t t = 0; t < T; ++t) z_.push_back(static_cast<std::uint8_t>(z[t]));
  }

  int y(std::size_t i, int t) const { return y_[i * static_cast<std::size_t>(T_) + static_cast<std::size_t>(t)]; }
  int d(std::size_t i, int t) const { return d_[i * static_cast<std::size_t>(T_) + static_cast<std::size_t>(t)]; }
  int z(std::size_t i, int t) const { return z_[i * static_cast<std::size_t>(T_) + static_cast<std::size_t>(t)]; }

 private:
  int T_;
  std::vector<bool> has_z_;
  std::vector<std::uint8_t> y_, d_, z_;
};

// CSV with header y1,d1,z1,y2,d2,z2,... Column order is free; a missing z_t
// column reads as z_t = 0.
inline Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::pair<char, int>> cols;
  int T = 0;
  {
    std::stringstream ss(line);
    std::string name;
    while (std::getline(ss, name, ',')) {
      while (!name.empty() && name.back() == ' ') name.pop_back();
      while (!name.empty() && name.front() == ' ') name.erase(0, 1);
      if (name.size() < 2 || (name[0] != 'y' && name[0] != 'd' && name[0] != 'z'))
        throw DataError("unknown CSV column '" + name + "'");
      int t = 0;
      try {
        t = std::stoi(name.substr(1));
      } catch (const std::exception&) {
        throw DataError("unknown CSV column '" + name + "'");
      }
      if (t < 1 || t > kMaxPeriods) throw DataError("period out of range in column '" + name + "'");
      cols.push_back({name[0], t - 1});
      T = std::max(T, t);
    }
  }
  Dataset ds(T);
  for (int t = 0; t < T; ++t) {
    bool hy = false, hd = false, hz = false;
    for (auto [v, p] : cols) {
      if (p != t) continue;
      (v == 'y' ? hy : v == 'd' ? hd : hz) = true;
    }
    if (!hy || !hd) throw DataError("CSV needs y" + std::to_string(t + 1) + " and d" + std::to_string(t + 1));
    ds.set_has_z(t, hz);
  }
  std::vector<int> y(static_cast<std::size_t>(T)), d(y.size()), z(y.size());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::fill(z.begin(), z.end(), 0);
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= cols.size()) throw DataError("too many fields on line " + std::to_string(lineno));
      if (cell != "0" && cell != "1") throw DataError("non-binary value '" + cell + "' on line " + std::to_string(lineno));
      const int v = cell[0] - '0';
      auto [var, t] = cols[c++];
      (var == 'y' ? y : var == 'd' ? d : z)[static_cast<std::size_t>(t)] = v;
    }
    if (c != cols.size()) throw DataError("too few fields on line " + std::to_string(lineno));
    ds.add(y, d, z);
  }
  return ds;
}

inline Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_csv(in);
}

inline void write_csv(const Dataset& ds, std::ostream& out) {
  const int T = ds.periods();
  for (int t = 0; t < T; ++t) out << (t ? "," : "") << 'y' << t + 1 << ",d" << t + 1 << ",z" << t + 1;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (int t = 0; t < T; ++t) out << (t ? "," : "") << ds.y(i, t) << ',' << ds.d(i, t) << ',' << ds.z(i, t);
    out << '\n';
  }
}

// Cell probabilities per instrument block. p follows the row layout of B
// (last cell of each block dropped); table keeps every cell. A distribution
// built from p alone has no counts and is treated as a population.
struct EmpiricalDistribution {
  std::vector<double> p;
  std::vector<CellLabel> labels;
  int cells_per_z = 0;
  std::vector<double> table;             // block * cells_per_z + code
  std::vector<std::size_t> z_counts;     // rows per block; empty for a population
  std::vector<std::size_t> cell_counts;  // same indexing as table
  std::size_t n = 0;

  int blocks() const { return cells_per_z ? static_cast<int>(table.size()) / cells_per_z : 0; }
  bool has_counts() const { return !z_counts.empty(); }
  double full(int block, int code) const { return table[static_cast<std::size_t>(block * cells_per_z + code)]; }
};

namespace detail {

inline void fill_from_counts(EmpiricalDistribution& e) {
  const int blocks = static_cast<int>(e.z_counts.size());
  e.table.assign(e.cell_counts.size(), 0.0);
  e.p.assign(static_cast<std::size_t>(blocks * (e.cells_per_z - 1)), 0.0);
  for (int b = 0; b < blocks; ++b) {
    const auto nz = e.z_counts[static_cast<std::size_t>(b)];
    if (nz == 0) continue;
    for (int c = 0; c < e.cells_per_z; ++c) {
      const auto i = static_cast<std::size_t>(b * e.cells_per_z + c);
      e.table[i] = static_cast<double>(e.cell_counts[i]) / static_cast<double>(nz);
      if (c + 1 < e.cells_per_z) e.p[b_row_index(b, c, e.cells_per_z)] = e.table[i];
    }
  }
}

}  // namespace detail

// Population distribution from a p vector in B's row layout; the dropped cell
// of each block is one minus the block's retained mass.
inline EmpiricalDistribution distribution_from_p(std::span<const double> p, const StateSpaceLayout& layout) {
  EmpiricalDistribution e;
  e.cells_per_z = layout.cells_per_z();
  const int blocks = layout.z_count();
  if (p.size() != static_cast<std::size_t>(blocks * (e.cells_per_z - 1)))
    throw DimensionError("p has " + std::to_string(p.size()) + " entries, expected " +
                         std::to_string(blocks * (e.cells_per_z - 1)));
  e.p.assign(p.begin(), p.end());
  e.labels = b_row_labels(layout);
  e.table.assign(static_cast<std::size_t>(blocks * e.cells_per_z), 0.0);
  for (int b = 0; b < blocks; ++b) {
    double rest = 1.0;
    for (int c = 0; c + 1 < e.cells_per_z; ++c) {
      const double v = p[b_row_index(b, c, e.cells_per_z)];
      e.table[static_cast<std::size_t>(b * e.cells_per_z + c)] = v;
      rest -= v;
    }
    e.table[static_cast<std::size_t>(b * e.cells_per_z + e.cells_per_z - 1)] = rest;
  }
  return e;
}

// Instrument values of non-instrumented periods are ignored.
inline EmpiricalDistribution estimate_p(const Dataset& ds, const StateSpaceLayout& layout) {
  const int T = layout.periods();
  if (ds.periods() != T) throw DataError("dataset has " + std::to_string(ds.periods()) + " periods, layout " + std::to_string(T));
  for (int t = 0; t < T; ++t)
    if (layout.horizon().instrumented[static_cast<std::size_t>(t)] && !ds.has_z(t))
      throw DataError("instrument z" + std::to_string(t + 1) + " is configured but missing from the data");
  EmpiricalDistribution e;
  e.cells_per_z = layout.cells_per_z();
  e.labels = b_row_labels(layout);
  e.z_counts.assign(static_cast<std::size_t>(layout.z_count()), 0);
  e.cell_counts.assign(static_cast<std::size_t>(layout.z_count() * e.cells_per_z), 0);
  int y[kMaxPeriods], d[kMaxPeriods], z[kMaxPeriods];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (int t = 0; t < T; ++t) {
      y[t] = ds.y(i, t);
      d[t] = ds.d(i, t);
      z[t] = layout.horizon().instrumented[static_cast<std::size_t>(t)] ? ds.z(i, t) : 0;
    }
    const std::size_t n = static_cast<std::size_t>(T);
    const int b = layout.z_block({z, n});
    ++e.z_counts[static_cast<std::size_t>(b)];
    ++e.cell_counts[static_cast<std::size_t>(b * e.cells_per_z + layout.cell_code({y, n}, {d, n}))];
  }
  e.n = ds.size();
  for (int b = 0; b < layout.z_count(); ++b) {
    if (e.z_counts[static_cast<std::size_t>(b)] == 0) {
      std::string zs;
      for (int v : layout.z_vector(b)) zs += static_cast<char>('0' + v);
      throw DataError("no observations with z=" + zs);
    }
  }
  detail::fill_from_counts(e);
  return e;
}

// Each block of the full cell table must be a probability vector.
inline void validate_full(const EmpiricalDistribution& e, double tol = 1e-12) {
  for (int b = 0; b < e.blocks(); ++b) {
    double s = 0.0;
    for (int c = 0; c < e.cells_per_z; ++c) {
      if (e.full(b, c) < -tol) throw DataError("negative cell probability in block " + std::to_string(b));
      s += e.full(b, c);
    }
    if (std::abs(s - 1.0) > tol) throw DataError("cell probabilities of block " + std::to_string(b) + " do not sum to one");
  }
}

// Stratified nonparametric bootstrap: rows are resampled with replacement
// within each instrument block, which amounts to a multinomial draw of the
// block's cell counts with the block size fixed.
inline EmpiricalDistribution bootstrap_draw(const EmpiricalDistribution& e, std::mt19937_64& rng) {
  if (!e.has_counts()) throw DataError("bootstrap needs sample counts");
  EmpiricalDistribution out = e;
  for (std::size_t b = 0; b < e.z_counts.size(); ++b) {
    std::size_t left = e.z_counts[b];
    double mass = 1.0;
    for (int c = 0; c < e.cells_per_z; ++c) {
      const auto idx = b * static_cast<std::size_t>(e.cells_per_z) + static_cast<std::size_t>(c);
      const double pc = e.full(static_cast<int>(b), c);
      std::size_t k = left;
      if (c + 1 < e.cells_per_z) {
        const double prob = mass > 0.0 ? std::clamp(pc / mass, 0.0, 1.0) : 0.0;
        k = left == 0 ? 0 : std::binomial_distribution<std::size_t>(left, prob)(rng);
      }
      out.cell_counts[idx] = k;
      left -= k;
      mass -= pc;
    }
  }
  detail::fill_from_counts(out);
  return out;
}

}  // namespace dynreg
