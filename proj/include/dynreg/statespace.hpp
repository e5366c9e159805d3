#pragma once

// Latent response types.
//
// A latent state fixes every counterfactual map of the model: for each period
// an outcome map (history, own treatment) -> y_t and a treatment map
// (history, instruments) -> d_t. Each map is stored as one bit per point of
// its argument grid, and the concatenated bit sequence, read as a binary
// numeral with the first bit most significant, is the state index s.
//
// Bit order: periods ascending; within a period the outcome map precedes the
// treatment map; within a map the grid is in lexicographic order with the
// earliest argument most significant. Argument lists:
//   outcome   Y_t: y_1..y_{t-1}, d_1..d_t          (Markov: y_{t-1}, d_t)
//   treatment D_t: y_1..y_{t-1}, d_1..d_{t-1}, z's  (Markov: y_{t-1}, d_{t-1}, z_t)
// where only instrumented periods contribute a z argument.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynreg/errors.hpp"
#include "dynreg/regimes.hpp"

namespace dynreg {

enum class Var : std::uint8_t { y, d, z };
enum class MapKind : std::uint8_t { outcome, treatment };

struct ArgRef {
  Var var;
  int period;  // 0-based
  bool operator==(const ArgRef&) const = default;
};

struct BitField {
  std::string name;
  MapKind kind;
  int period;  // 0-based
  std::vector<ArgRef> args;
  int offset;  // position of grid point 0 in the bit sequence
  int width;   // 2^args.size()

  // Grid position of the argument values read from full-length histories.
  int grid_index(const int* y, const int* d, const int* z) const {
    int g = 0;
    for (const ArgRef& a : args) {
      const int v = a.var == Var::y ? y[a.period] : a.var == Var::d ? d[a.period] : z[a.period];
      g = (g << 1) | v;
    }
    return g;
  }

  // Position of argument `a` within args, or -1.
  int arg_position(ArgRef a) const {
    for (std::size_t i = 0; i < args.size(); ++i)
      if (args[i] == a) return static_cast<int>(i);
    return -1;
  }

  std::string arg_name(std::size_t i) const {
    const char* v = args[i].var == Var::y ? "y" : args[i].var == Var::d ? "d" : "z";
    return v + std::to_string(args[i].period + 1);
  }
};

inline constexpr std::uint64_t kDefaultStateCap = std::uint64_t{1} << 20;

class StateSpaceLayout {
 public:
  StateSpaceLayout(Horizon horizon, bool markov, std::uint64_t cap = kDefaultStateCap)
      : horizon_(std::move(horizon)), markov_(markov) {
    const int T = horizon_.periods;
    int offset = 0;
    for (int t = 0; t < T; ++t) {
      BitField y{"Y" + std::to_string(t + 1), MapKind::outcome, t, {}, 0, 0};
      if (markov_) {
        if (t > 0) y.args.push_back({Var::y, t - 1});
        y.args.push_back({Var::d, t});
      } else {
        for (int j = 0; j < t; ++j) y.args.push_back({Var::y, j});
        for (int j = 0; j <= t; ++j) y.args.push_back({Var::d, j});
      }
      BitField d{"D" + std::to_string(t + 1), MapKind::treatment, t, {}, 0, 0};
      if (markov_) {
        if (t > 0) {
          d.args.push_back({Var::y, t - 1});
          d.args.push_back({Var::d, t - 1});
        }
        if (horizon_.instrumented[t]) d.args.push_back({Var::z, t});
      } else {
        for (int j = 0; j < t; ++j) d.args.push_back({Var::y, j});
        for (int j = 0; j < t; ++j) d.args.push_back({Var::d, j});
        for (int j = 0; j <= t; ++j)
          if (horizon_.instrumented[j]) d.args.push_back({Var::z, j});
      }
      for (BitField* f : {&y, &d}) {
        if (f->args.size() > 30) throw DimensionError("map argument grid too large");
        f->width = 1 << f->args.size();
        f->offset = offset;
        offset += f->width;
        fields_.push_back(*f);
      }
    }
    total_bits_ = offset;
    std::uint64_t cap_bits = 0;
    while ((std::uint64_t{1} << (cap_bits + 1)) <= cap && cap_bits < 62) ++cap_bits;
    if (total_bits_ > static_cast<int>(cap_bits)) {
      throw DimensionError("latent state space has 2^" + std::to_string(total_bits_) +
                           " states, above the cap of 2^" + std::to_string(cap_bits) +
                           (markov_ ? std::string("; drop instruments or raise the cap")
                                    : std::string("; enable the Markov assumption (K)")));
    }
    d_q_ = std::uint64_t{1} << total_bits_;
  }

  const Horizon& horizon() const { return horizon_; }
  int periods() const { return horizon_.periods; }
  bool markov() const { return markov_; }
  const std::vector<BitField>& fields() const { return fields_; }
  const BitField& y_field(int t) const { return fields_[2 * static_cast<std::size_t>(t)]; }
  const BitField& d_field(int t) const { return fields_[2 * static_cast<std::size_t>(t) + 1]; }
  int total_bits() const { return total_bits_; }
  std::uint64_t d_q() const { return d_q_; }

  // Number of observable cells (y, d) per instrument value, and instrument values.
  int cells_per_z() const { return 1 << (2 * horizon_.periods); }
  int z_count() const { return 1 << horizon_.instrument_count(); }

  int bit(std::uint64_t s, const BitField& f, int g) const {
    return static_cast<int>((s >> (total_bits_ - 1 - (f.offset + g))) & 1u);
  }
  std::uint64_t bit_mask(const BitField& f, int g) const {
    return std::uint64_t{1} << (total_bits_ - 1 - (f.offset + g));
  }

  // Full-length instrument vector (zeros for non-instrumented periods) of a z block.
  std::vector<int> z_vector(int block) const {
    std::vector<int> z(static_cast<std::size_t>(horizon_.periods), 0);
    int remaining = horizon_.instrument_count();
    for (int t = 0; t < horizon_.periods; ++t) {
      if (!horizon_.instrumented[t]) continue;
      --remaining;
      z[t] = (block >> remaining) & 1;
    }
    return z;
  }

  int z_block(std::span<const int> z) const {
    int b = 0;
    for (int t = 0; t < horizon_.periods; ++t) {
      if (!horizon_.instrumented[t]) {
        if (z[t] != 0) throw std::invalid_argument("non-instrumented period must have z = 0");
        continue;
      }
      b = (b << 1) | z[t];
    }
    return b;
  }

  // Cell code with bits (y_1..y_T, d_1..d_T), y_1 most significant.
  int cell_code(std::span<const int> y, std::span<const int> d) const {
    int c = 0;
    for (int t = 0; t < horizon_.periods; ++t) c = (c << 1) | y[t];
    for (int t = 0; t < horizon_.periods; ++t) c = (c << 1) | d[t];
    return c;
  }

  void cell_decode(int c, int* y, int* d) const {
    const int T = horizon_.periods;
    for (int t = 0; t < T; ++t) {
      y[t] = (c >> (2 * T - 1 - t)) & 1;
      d[t] = (c >> (T - 1 - t)) & 1;
    }
  }

  // Realised path of state s when the treatment in period i is choose(i, y, d).
  template <class Choose>
  void walk(std::uint64_t s, Choose&& choose, int* y, int* d, const int* z) const {
    for (int t = 0; t < horizon_.periods; ++t) {
      d[t] = choose(t, y, d);
      const BitField& yf = y_field(t);
      y[t] = bit(s, yf, yf.grid_index(y, d, z));
    }
  }

  // Observed cell code of state s under instrument vector z.
  int observed_code(std::uint64_t s, const int* z) const {
    int y[kMaxPeriods] = {};
    int d[kMaxPeriods] = {};
    walk(
        s,
        [&](int t, const int* yy, const int* dd) {
          const BitField& df = d_field(t);
          return bit(s, df, df.grid_index(yy, dd, z));
        },
        y, d, z);
    return cell_code({y, static_cast<std::size_t>(periods())},
                     {d, static_cast<std::size_t>(periods())});
  }

  // Outcome path of state s under a deterministic regime.
  void regime_path(std::uint64_t s, const Regime& r, int* y, int* d) const {
    const int z[kMaxPeriods] = {};
    walk(
        s,
        [&](int t, const int* yy, const int*) {
          return r.allocate(t, {yy, static_cast<std::size_t>(periods())});
        },
        y, d, z);
  }

  // Outcome path of state s under the static allocation d (length T).
  void static_path(std::uint64_t s, const int* d_fixed, int* y) const {
    int d[kMaxPeriods] = {};
    const int z[kMaxPeriods] = {};
    walk(s, [&](int t, const int*, const int*) { return d_fixed[t]; }, y, d, z);
  }

 private:
  Horizon horizon_;
  bool markov_;
  std::vector<BitField> fields_;
  int total_bits_ = 0;
  std::uint64_t d_q_ = 0;
};

inline StateSpaceLayout build_layout(const Horizon& h, bool markov,
                                     std::uint64_t cap = kDefaultStateCap) {
  return StateSpaceLayout(h, markov, cap);
}

struct ResponseMaps {
  std::vector<std::vector<std::uint8_t>> y_maps;  // [t][grid point]
  std::vector<std::vector<std::uint8_t>> d_maps;
  bool operator==(const ResponseMaps&) const = default;
};

struct LatentState {
  std::uint64_t s = 0;
  bool operator==(const LatentState&) const = default;
};

inline LatentState encode(const ResponseMaps& m, const StateSpaceLayout& layout) {
  const int T = layout.periods();
  if (static_cast<int>(m.y_maps.size()) != T || static_cast<int>(m.d_maps.size()) != T)
    throw std::invalid_argument("response maps do not match the layout horizon");
  std::uint64_t s = 0;
  for (int t = 0; t < T; ++t) {
    const std::vector<std::uint8_t>* maps[2] = {&m.y_maps[t], &m.d_maps[t]};
    const BitField* fields[2] = {&layout.y_field(t), &layout.d_field(t)};
    for (int k = 0; k < 2; ++k) {
      if (static_cast<int>(maps[k]->size()) != fields[k]->width)
        throw std::invalid_argument("map " + fields[k]->name + " has wrong grid size");
      for (int g = 0; g < fields[k]->width; ++g) {
        const auto v = (*maps[k])[g];
        if (v > 1) throw std::invalid_argument("map values must be 0 or 1");
        if (v) s |= layout.bit_mask(*fields[k], g);
      }
    }
  }
  return LatentState{s};
}

inline ResponseMaps decode(LatentState state, const StateSpaceLayout& layout) {
  if (state.s >= layout.d_q())
    throw std::out_of_range("latent state " + std::to_string(state.s) + " >= d_q");
  ResponseMaps m;
  for (int t = 0; t < layout.periods(); ++t) {
    for (const BitField* f : {&layout.y_field(t), &layout.d_field(t)}) {
      std::vector<std::uint8_t> v(static_cast<std::size_t>(f->width));
      for (int g = 0; g < f->width; ++g) v[g] = static_cast<std::uint8_t>(layout.bit(state.s, *f, g));
      (f->kind == MapKind::outcome ? m.y_maps : m.d_maps).push_back(std::move(v));
    }
  }
  return m;
}

struct ObservedCell {
  std::vector<int> y;
  std::vector<int> d;
  bool operator==(const ObservedCell&) const = default;
};

inline ObservedCell observed_cell(LatentState state, std::span<const int> z,
                                  const StateSpaceLayout& layout) {
  if (state.s >= layout.d_q()) throw std::out_of_range("latent state >= d_q");
  const int T = layout.periods();
  if (static_cast<int>(z.size()) != T) throw std::invalid_argument("z must have length T");
  layout.z_block(z);  // validates degenerate coordinates
  const int code = layout.observed_code(state.s, z.data());
  ObservedCell out{std::vector<int>(static_cast<std::size_t>(T)),
                   std::vector<int>(static_cast<std::size_t>(T))};
  layout.cell_decode(code, out.y.data(), out.d.data());
  return out;
}

}  // namespace dynreg
