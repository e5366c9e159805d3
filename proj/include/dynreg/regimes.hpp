#pragma once

// Dynamic treatment regimes: horizons, decision tables, regime indexing and
// welfare weights.
//
// A regime allocates a binary treatment in every period as a function of the
// outcomes realised so far. Because earlier allocations are themselves fixed
// by the regime, the rule for period t only needs one entry per outcome
// history y^{t-1} (full adaptivity) or per lagged outcome y_{t-1} (lag1).
//
// Regimes are numbered 1..|K|. Bit 0 of k-1 is the period-1 allocation; the
// entries of each later period follow, period by period, with outcome
// histories taken in descending binary order. For T = 2 this is
//   k - 1 = d1 + 2 * d2(y1 = 1) + 4 * d2(y1 = 0).

#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynreg/errors.hpp"

namespace dynreg {

enum class Adaptivity { full, lag1 };

inline constexpr int kMaxPeriods = 8;
inline constexpr std::uint64_t kMaxRegimes = std::uint64_t{1} << 16;

struct Horizon {
  int periods = 1;
  std::vector<bool> instrumented;  // one flag per period
  Adaptivity adaptivity = Adaptivity::full;

  Horizon() : instrumented{true} {}

  explicit Horizon(int T, std::vector<bool> instr = {}, Adaptivity a = Adaptivity::full)
      : periods(T), instrumented(std::move(instr)), adaptivity(a) {
    if (T < 1 || T > kMaxPeriods)
      throw DimensionError("horizon must have between 1 and " + std::to_string(kMaxPeriods) +
                           " periods, got " + std::to_string(T));
    if (instrumented.empty()) instrumented.assign(static_cast<std::size_t>(T), true);
    if (static_cast<int>(instrumented.size()) != T)
      throw std::invalid_argument("instrument flags must have one entry per period");
    bool any = false;
    for (bool b : instrumented) any = any || b;
    if (!any) throw std::invalid_argument("at least one period must have an instrument");
  }

  int instrument_count() const {
    int n = 0;
    for (bool b : instrumented) n += b ? 1 : 0;
    return n;
  }

  // Entries in the decision table of period index i (0-based).
  int rule_entries(int i) const {
    if (i == 0) return 1;
    return adaptivity == Adaptivity::full ? (1 << i) : 2;
  }

  int regime_bits() const {
    int bits = 0;
    for (int i = 0; i < periods; ++i) bits += rule_entries(i);
    return bits;
  }

  // Throws DimensionError if |K| would exceed kMaxRegimes.
  std::uint64_t regime_count() const {
    const int bits = regime_bits();
    if (bits > 16)
      throw DimensionError("horizon yields 2^" + std::to_string(bits) +
                           " regimes, above the cap of 2^16; use lag1 adaptivity");
    return std::uint64_t{1} << bits;
  }

  bool operator==(const Horizon&) const = default;
};

struct RegimeIndex {
  int k = 1;  // 1-based
  auto operator<=>(const RegimeIndex&) const = default;
};

class Regime {
 public:
  Regime() = default;
  Regime(Horizon h, std::vector<std::vector<std::uint8_t>> tables)
      : horizon_(std::move(h)), tables_(std::move(tables)) {
    if (static_cast<int>(tables_.size()) != horizon_.periods)
      throw std::invalid_argument("regime needs one table per period");
    for (int i = 0; i < horizon_.periods; ++i) {
      if (static_cast<int>(tables_[i].size()) != horizon_.rule_entries(i))
        throw std::invalid_argument("regime table " + std::to_string(i + 1) + " has wrong size");
      for (auto v : tables_[i])
        if (v > 1) throw std::invalid_argument("regime table entries must be 0 or 1");
    }
  }

  const Horizon& horizon() const { return horizon_; }
  const std::vector<std::vector<std::uint8_t>>& tables() const { return tables_; }

  // Allocation in period index i given the outcomes y_1..y_i observed so far.
  int allocate(int i, std::span<const int> y_hist) const {
    if (i == 0) return tables_[0][0];
    if (horizon_.adaptivity == Adaptivity::lag1) return tables_[i][y_hist[i - 1]];
    int h = 0;
    for (int j = 0; j < i; ++j) h = (h << 1) | y_hist[j];
    return tables_[i][h];
  }

  bool operator==(const Regime&) const = default;

 private:
  Horizon horizon_;
  std::vector<std::vector<std::uint8_t>> tables_;
};

inline Regime regime_from_index(RegimeIndex index, const Horizon& h) {
  const std::uint64_t count = h.regime_count();
  if (index.k < 1 || static_cast<std::uint64_t>(index.k) > count)
    throw std::out_of_range("regime index " + std::to_string(index.k) + " outside 1.." +
                            std::to_string(count));
  std::uint64_t bits = static_cast<std::uint64_t>(index.k - 1);
  std::vector<std::vector<std::uint8_t>> tables(static_cast<std::size_t>(h.periods));
  int pos = 0;
  for (int i = 0; i < h.periods; ++i) {
    const int n = h.rule_entries(i);
    tables[i].assign(static_cast<std::size_t>(n), 0);
    for (int j = 0; j < n; ++j) {
      const int entry = n - 1 - j;  // descending history order
      tables[i][entry] = static_cast<std::uint8_t>((bits >> pos) & 1u);
      ++pos;
    }
  }
  return Regime(h, std::move(tables));
}

inline RegimeIndex index_from_regime(const Regime& r) {
  const Horizon& h = r.horizon();
  std::uint64_t bits = 0;
  int pos = 0;
  for (int i = 0; i < h.periods; ++i) {
    const int n = h.rule_entries(i);
    for (int j = 0; j < n; ++j) {
      bits |= std::uint64_t{r.tables()[i][n - 1 - j]} << pos;
      ++pos;
    }
  }
  return RegimeIndex{static_cast<int>(bits) + 1};
}

inline std::vector<Regime> enumerate_regimes(const Horizon& h) {
  const std::uint64_t count = h.regime_count();
  std::vector<Regime> out;
  out.reserve(count);
  for (std::uint64_t k = 1; k <= count; ++k)
    out.push_back(regime_from_index(RegimeIndex{static_cast<int>(k)}, h));
  return out;
}

inline bool is_static(const Regime& r) {
  for (const auto& table : r.tables())
    for (auto v : table)
      if (v != table.front()) return false;
  return true;
}

// "(d1, d2(1,.), d2(0,.))" for T = 2; generally the table entries in bit order.
inline std::string describe(const Regime& r) {
  std::string s = "(";
  bool first = true;
  for (const auto& table : r.tables()) {
    for (std::size_t j = table.size(); j-- > 0;) {
      if (!first) s += ", ";
      s += std::to_string(table[j]);
      first = false;
    }
  }
  return s + ")";
}

struct WelfareSpec {
  std::vector<double> weights;  // one per period

  static WelfareSpec terminal(int T) {
    WelfareSpec w;
    w.weights.assign(static_cast<std::size_t>(T), 0.0);
    w.weights.back() = 1.0;
    return w;
  }

  void validate(int T) const {
    if (static_cast<int>(weights.size()) != T)
      throw std::invalid_argument("welfare needs one weight per period");
    bool nonzero = false;
    for (double w : weights) nonzero = nonzero || w != 0.0;
    if (!nonzero) throw std::invalid_argument("welfare weights are all zero");
  }

  bool is_terminal() const {
    for (std::size_t t = 0; t + 1 < weights.size(); ++t)
      if (weights[t] != 0.0) return false;
    return weights.back() == 1.0;
  }

  double score(std::span<const int> y) const {
    double v = 0.0;
    for (std::size_t t = 0; t < weights.size(); ++t) v += weights[t] * y[t];
    return v;
  }
};

// Randomised rules. tables[i] has one probability per full history
// (y_1..y_i, d_1..d_i), indexed by that bit string with y_1 most significant.
struct StochasticRegime {
  int periods = 1;
  std::vector<std::vector<double>> tables;

  explicit StochasticRegime(int T = 1) : periods(T) {
    for (int i = 0; i < T; ++i) tables.emplace_back(std::size_t{1} << (2 * i), 0.0);
  }

  void validate() const {
    for (const auto& t : tables)
      for (double v : t)
        if (!(v >= 0.0 && v <= 1.0))
          throw std::invalid_argument("stochastic rule probabilities must lie in [0,1]");
  }

  static StochasticRegime from(const Regime& r) {
    StochasticRegime s(r.horizon().periods);
    std::vector<int> y(static_cast<std::size_t>(s.periods));
    for (int i = 0; i < s.periods; ++i) {
      for (std::size_t h = 0; h < s.tables[i].size(); ++h) {
        for (int j = 0; j < i; ++j) y[j] = static_cast<int>((h >> (2 * i - 1 - j)) & 1u);
        s.tables[i][h] = r.allocate(i, y);
      }
    }
    return s;
  }
};

struct OutcomePath {
  std::vector<int> y;
  std::vector<int> d;
  bool operator==(const OutcomePath&) const = default;
};

}  // namespace dynreg
