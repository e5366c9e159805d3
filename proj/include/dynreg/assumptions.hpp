#pragma once

// Identifying assumptions as a 0/1 mask over latent states.
//
// Every restriction used here has the form "bit a set implies bit b set" for
// two grid points of one map, so a mask is a list of implications.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "dynreg/data.hpp"
#include "dynreg/errors.hpp"
#include "dynreg/parallel.hpp"
#include "dynreg/statespace.hpp"

namespace dynreg {

enum class Direction { off, up, down, detect };
enum class Learning { off, long_memory, short_memory };
enum class MonotoneKind { treatment, outcome };  // M1 and M2

inline std::string to_string(Direction d) {
  switch (d) {
    case Direction::off: return "off";
    case Direction::up: return "up";
    case Direction::down: return "down";
    case Direction::detect: return "auto";
  }
  return "?";
}

inline std::string to_string(Learning l) {
  return l == Learning::off ? "off" : l == Learning::long_memory ? "long" : "short";
}

// History cells of one monotonicity restriction: the grid of the map's
// arguments other than the varied one (z_t for M1, d_t for M2).
struct CellGrid {
  const BitField* field = nullptr;
  int varied = -1;  // position of the varied argument in field->args; -1 if absent

  bool applies() const { return varied >= 0; }
  int count() const { return applies() ? field->width / 2 : 0; }

  // Grid index of the map at history cell c with the varied argument set to v.
  int grid(int c, int v) const {
    const int n = static_cast<int>(field->args.size());
    const int low = n - 1 - varied;  // bit position of the varied argument
    const int hi = c >> low;
    const int lo = c & ((1 << low) - 1);
    return (hi << (low + 1)) | (v << low) | lo;
  }

  // Value of argument position a (a != varied) in cell c.
  int value(int c, int a) const {
    const int n = static_cast<int>(field->args.size());
    int pos = n - 1 - a;
    if (a < varied) --pos;
    return (c >> pos) & 1;
  }

  std::string label(int c) const {
    std::string s;
    for (int a = 0; a < static_cast<int>(field->args.size()); ++a) {
      if (a == varied) continue;
      if (!s.empty()) s += ',';
      s += field->arg_name(static_cast<std::size_t>(a)) + "=" + std::to_string(value(c, a));
    }
    return s.empty() ? "all" : s;
  }
};

inline CellGrid cell_grid(const StateSpaceLayout& layout, MonotoneKind kind, int t) {
  CellGrid g;
  if (kind == MonotoneKind::treatment) {
    g.field = &layout.d_field(t);
    g.varied = g.field->arg_position({Var::z, t});
  } else {
    g.field = &layout.y_field(t);
    g.varied = g.field->arg_position({Var::d, t});
  }
  return g;
}

struct AssumptionConfig {
  // m1[t][cell], m2[t][cell]; an empty vector means off for that period.
  std::vector<std::vector<Direction>> m1, m2;
  Learning learning = Learning::off;
  bool markov = true;

  // Same direction in every cell of every period where the restriction applies.
  static AssumptionConfig uniform(const StateSpaceLayout& layout, Direction m1, Direction m2,
                                  Learning learning = Learning::off) {
    AssumptionConfig c;
    c.markov = layout.markov();
    c.learning = learning;
    for (int t = 0; t < layout.periods(); ++t) {
      c.m1.emplace_back(static_cast<std::size_t>(cell_grid(layout, MonotoneKind::treatment, t).count()), m1);
      c.m2.emplace_back(static_cast<std::size_t>(cell_grid(layout, MonotoneKind::outcome, t).count()), m2);
    }
    return c;
  }

  std::vector<std::vector<Direction>>& of(MonotoneKind k) { return k == MonotoneKind::treatment ? m1 : m2; }
  const std::vector<std::vector<Direction>>& of(MonotoneKind k) const {
    return k == MonotoneKind::treatment ? m1 : m2;
  }

  Direction at(MonotoneKind k, int t, int cell) const {
    const auto& v = of(k);
    if (static_cast<std::size_t>(t) >= v.size() || v[static_cast<std::size_t>(t)].empty()) return Direction::off;
    return v[static_cast<std::size_t>(t)][static_cast<std::size_t>(cell)];
  }

  bool any(MonotoneKind k) const {
    for (const auto& v : of(k))
      for (Direction d : v)
        if (d != Direction::off) return true;
    return false;
  }

  void validate(const StateSpaceLayout& layout) const {
    if (markov != layout.markov()) throw std::invalid_argument("Markov setting differs from the layout");
    for (MonotoneKind k : {MonotoneKind::treatment, MonotoneKind::outcome}) {
      const auto& v = of(k);
      if (v.size() > static_cast<std::size_t>(layout.periods())) throw std::invalid_argument("more periods than the layout");
      for (std::size_t t = 0; t < v.size(); ++t) {
        const auto cells = static_cast<std::size_t>(cell_grid(layout, k, static_cast<int>(t)).count());
        if (!v[t].empty() && v[t].size() != cells)
          throw std::invalid_argument("period " + std::to_string(t + 1) + " needs " + std::to_string(cells) + " cell directions");
      }
    }
    // M2 maintains M1
    if (any(MonotoneKind::outcome))
      for (int t = 0; t < layout.periods(); ++t) {
        const auto g = cell_grid(layout, MonotoneKind::treatment, t);
        for (int c = 0; c < g.count(); ++c)
          if (at(MonotoneKind::treatment, t, c) == Direction::off)
            throw std::invalid_argument("M2 requires M1 in every instrumented period");
      }
    if (learning != Learning::off && layout.periods() != 2)
      throw std::invalid_argument("the learning restriction is implemented for two periods only");
  }
};

struct Implication {
  std::uint64_t a;  // bit that, when set,
  std::uint64_t b;  // requires this bit
};

struct MaskVector {
  std::vector<std::uint8_t> h;
  std::size_t active_count = 0;
};

inline std::vector<Implication> implications(const StateSpaceLayout& layout, const AssumptionConfig& cfg) {
  cfg.validate(layout);
  std::vector<Implication> out;
  for (MonotoneKind k : {MonotoneKind::treatment, MonotoneKind::outcome})
    for (int t = 0; t < layout.periods(); ++t) {
      const auto g = cell_grid(layout, k, t);
      for (int c = 0; c < g.count(); ++c) {
        const Direction d = cfg.at(k, t, c);
        if (d == Direction::off) continue;
        if (d == Direction::detect) throw std::invalid_argument("monotonicity direction not resolved");
        const auto m0 = layout.bit_mask(*g.field, g.grid(c, 0));
        const auto m1 = layout.bit_mask(*g.field, g.grid(c, 1));
        // up: map(0) = 1 forces map(1) = 1
        out.push_back(d == Direction::up ? Implication{m0, m1} : Implication{m1, m0});
      }
    }
  if (cfg.learning != Learning::off) {
    // D_2(y,d,z) >= D_2(y',d',z) when the history (y,d) ranks lower than (y',d')
    const BitField& f = layout.d_field(1);
    const int py = f.arg_position({Var::y, 0});
    const int pd = f.arg_position({Var::d, 0});
    const int n = static_cast<int>(f.args.size());
    auto arg = [&](int g, int pos) { return (g >> (n - 1 - pos)) & 1; };
    auto rank = [&](int g) {
      const int diff = arg(g, py) - arg(g, pd);
      return cfg.learning == Learning::long_memory ? std::abs(diff) : diff;
    };
    const int hist = (1 << (n - 1 - py)) | (1 << (n - 1 - pd));
    for (int g = 0; g < f.width; ++g)
      for (int h = 0; h < f.width; ++h) {
        if ((g & ~hist) != (h & ~hist) || rank(g) >= rank(h)) continue;
        out.push_back({layout.bit_mask(f, h), layout.bit_mask(f, g)});
      }
  }
  return out;
}

inline bool satisfies(std::uint64_t s, const std::vector<Implication>& imp) {
  for (const auto& i : imp)
    if ((s & i.a) && !(s & i.b)) return false;
  return true;
}

inline MaskVector build_mask(const StateSpaceLayout& layout, const AssumptionConfig& cfg) {
  const auto imp = implications(layout, cfg);
  MaskVector m;
  m.h.assign(layout.d_q(), 1);
  if (!imp.empty()) {
    const std::size_t chunk = 1 << 14;
    const std::size_t chunks = (m.h.size() + chunk - 1) / chunk;
    parallel_for(chunks, [&](std::size_t c) {
      const std::size_t end = std::min(m.h.size(), (c + 1) * chunk);
      for (std::size_t s = c * chunk; s < end; ++s) m.h[s] = satisfies(s, imp);
    });
  }
  for (auto v : m.h) m.active_count += v;
  if (m.active_count == 0) throw ConsistencyError("the assumptions exclude every latent state");
  return m;
}

enum class MaskRelation { equal, subset, superset, incomparable };

inline std::string to_string(MaskRelation r) {
  switch (r) {
    case MaskRelation::equal: return "equal";
    case MaskRelation::subset: return "subset";
    case MaskRelation::superset: return "superset";
    case MaskRelation::incomparable: return "incomparable";
  }
  return "?";
}

// Relation of the active set of h to the active set of h2.
inline MaskRelation compare_masks(const std::vector<std::uint8_t>& h, const std::vector<std::uint8_t>& h2) {
  if (h.size() != h2.size()) throw std::invalid_argument("masks differ in length");
  bool more = false, less = false;
  for (std::size_t i = 0; i < h.size(); ++i) {
    more |= h[i] && !h2[i];
    less |= !h[i] && h2[i];
  }
  if (more && less) return MaskRelation::incomparable;
  if (more) return MaskRelation::superset;
  if (less) return MaskRelation::subset;
  return MaskRelation::equal;
}

inline constexpr std::size_t kDirectionMinCount = 30;

struct DirectionEstimate {
  Direction direction = Direction::up;
  double contrast = 0.0;  // weighted, sign-corrected contrast
  std::size_t used = 0;   // observations in the cells that entered (0 for a population)
  std::string warning;
};

namespace detail {

// Probability mass, within instrument block b, of cells whose history agrees
// with treatment cell c of period t; split by the period-t treatment, or by
// the period-t outcome when outcome is true.
struct CellMass {
  double total = 0.0, ones = 0.0;
};

inline CellMass cell_mass(const EmpiricalDistribution& e, const StateSpaceLayout& layout, const CellGrid& g, int c,
                          int b, int t, bool outcome) {
  const auto z = layout.z_vector(b);
  CellMass m;
  int y[kMaxPeriods], d[kMaxPeriods];
  for (int code = 0; code < e.cells_per_z; ++code) {
    layout.cell_decode(code, y, d);
    bool match = true;
    for (int a = 0; a < static_cast<int>(g.field->args.size()) && match; ++a) {
      if (a == g.varied) continue;
      const ArgRef r = g.field->args[static_cast<std::size_t>(a)];
      const int v = r.var == Var::y ? y[r.period] : r.var == Var::d ? d[r.period] : z[static_cast<std::size_t>(r.period)];
      match = v == g.value(c, a);
    }
    if (!match) continue;
    const double w = e.full(b, code);
    m.total += w;
    if ((outcome ? y[t] : d[t]) == 1) m.ones += w;
  }
  return m;
}

}  // namespace detail

// Direction of monotonicity in one history cell, estimated from the cell
// table. The contrast compares z_t = 1 with z_t = 0 within each block of the
// other instruments. For the outcome restriction each treatment cell nested
// in the outcome cell contributes its reduced-form contrast times the sign of
// its first-stage contrast. Cells with fewer than n_min observations at
// either z_t value are skipped; an error is raised when none remain.
inline DirectionEstimate detect_direction(const EmpiricalDistribution& e, const StateSpaceLayout& layout,
                                          MonotoneKind kind, int t, int cell,
                                          std::size_t n_min = kDirectionMinCount) {
  const auto dg = cell_grid(layout, MonotoneKind::treatment, t);
  if (!dg.applies())
    throw DataError("period " + std::to_string(t + 1) + " has no instrument; give the direction explicitly");
  const auto target = cell_grid(layout, kind, t);
  if (cell < 0 || cell >= target.count()) throw std::out_of_range("history cell out of range");
  const int zpos = [&] {
    int pos = 0, k = 0;
    for (int j = layout.periods() - 1; j >= 0; --j)
      if (layout.horizon().instrumented[static_cast<std::size_t>(j)]) {
        if (j == t) pos = k;
        ++k;
      }
    return pos;
  }();

  DirectionEstimate est;
  double acc = 0.0;
  int contributing = 0;
  for (int dc = 0; dc < dg.count(); ++dc) {
    // treatment cell must agree with the outcome cell on shared arguments
    if (kind == MonotoneKind::outcome) {
      bool nested = true;
      for (int a = 0; a < static_cast<int>(target.field->args.size()) && nested; ++a) {
        if (a == target.varied) continue;
        const int pa = dg.field->arg_position(target.field->args[static_cast<std::size_t>(a)]);
        nested = pa >= 0 && dg.value(dc, pa) == target.value(cell, a);
      }
      if (!nested) continue;
    } else if (dc != cell) {
      continue;
    }
    for (int b0 = 0; b0 < e.blocks(); ++b0) {
      if ((b0 >> zpos) & 1) continue;
      const int b1 = b0 | (1 << zpos);
      const auto m0 = detail::cell_mass(e, layout, dg, dc, b0, t, false);
      const auto m1 = detail::cell_mass(e, layout, dg, dc, b1, t, false);
      double n0 = m0.total, n1 = m1.total;
      if (e.has_counts()) {
        n0 *= static_cast<double>(e.z_counts[static_cast<std::size_t>(b0)]);
        n1 *= static_cast<double>(e.z_counts[static_cast<std::size_t>(b1)]);
        if (std::llround(n0) < static_cast<long long>(n_min) || std::llround(n1) < static_cast<long long>(n_min)) continue;
      } else if (m0.total <= 0.0 || m1.total <= 0.0) {
        continue;
      }
      const double fs = m1.ones / m1.total - m0.ones / m0.total;
      double c = fs;
      if (kind == MonotoneKind::outcome) {
        const auto y0 = detail::cell_mass(e, layout, dg, dc, b0, t, true);
        const auto y1 = detail::cell_mass(e, layout, dg, dc, b1, t, true);
        const double rf = y1.ones / y1.total - y0.ones / y0.total;
        c = rf * (fs > 0 ? 1.0 : fs < 0 ? -1.0 : 0.0);
      }
      const double w = e.has_counts() ? n0 + n1 : m0.total + m1.total;
      acc += w * c;
      ++contributing;
      if (e.has_counts()) est.used += static_cast<std::size_t>(std::llround(n0 + n1));
    }
  }
  if (contributing == 0)
    throw DataError("too few observations to estimate the direction in period " + std::to_string(t + 1) + " cell " +
                    target.label(cell));
  est.contrast = acc;
  if (acc == 0.0) {
    est.direction = Direction::up;
    est.warning = "zero contrast in period " + std::to_string(t + 1) + " cell " + target.label(cell) + "; using up";
  } else {
    est.direction = acc > 0 ? Direction::up : Direction::down;
  }
  return est;
}

struct ResolvedDirection {
  MonotoneKind kind;
  int t;
  int cell;
  std::string label;
  DirectionEstimate estimate;
};

// Replaces every "auto" direction by its estimate; returns the estimates.
inline std::vector<ResolvedDirection> resolve_directions(AssumptionConfig& cfg, const EmpiricalDistribution& e,
                                                         const StateSpaceLayout& layout,
                                                         std::size_t n_min = kDirectionMinCount) {
  std::vector<ResolvedDirection> log;
  for (MonotoneKind k : {MonotoneKind::treatment, MonotoneKind::outcome}) {
    auto& v = cfg.of(k);
    for (std::size_t t = 0; t < v.size(); ++t) {
      const auto g = cell_grid(layout, k, static_cast<int>(t));
      for (std::size_t c = 0; c < v[t].size(); ++c) {
        if (v[t][c] != Direction::detect) continue;
        auto est = detect_direction(e, layout, k, static_cast<int>(t), static_cast<int>(c), n_min);
        v[t][c] = est.direction;
        log.push_back({k, static_cast<int>(t), static_cast<int>(c), g.label(static_cast<int>(c)), std::move(est)});
      }
    }
  }
  return log;
}

// Parses a comma-separated assumption list such as "M1,M2,L-long,K" or
// "M1:up,M2:down". Directions default to auto; K sets the Markov layout.
inline AssumptionConfig parse_assumptions(const std::string& list, const StateSpaceLayout& layout) {
  Direction m1 = Direction::off, m2 = Direction::off;
  Learning learning = Learning::off;
  bool markov = false;
  std::stringstream ss(list);
  std::string item;
  auto dir = [](const std::string& s) {
    if (s.empty() || s == "auto") return Direction::detect;
    if (s == "up") return Direction::up;
    if (s == "down") return Direction::down;
    throw std::invalid_argument("unknown direction '" + s + "'");
  };
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item == "none") continue;
    const auto colon = item.find(':');
    const std::string name = item.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : item.substr(colon + 1);
    if (name == "M1") m1 = dir(arg);
    else if (name == "M2") m2 = dir(arg);
    else if (name == "K") markov = true;
    else if (name == "L" || name == "L-long") learning = Learning::long_memory;
    else if (name == "L-short") learning = Learning::short_memory;
    else throw std::invalid_argument("unknown assumption '" + item + "'");
  }
  if (m2 != Direction::off && m1 == Direction::off) m1 = Direction::detect;
  if (markov != layout.markov() && layout.periods() > 1)
    throw std::invalid_argument(markov ? "K requested but the layout is not Markov" : "layout is Markov but K is not listed");
  auto cfg = AssumptionConfig::uniform(layout, m1, m2, learning);
  return cfg;
}

}  // namespace dynreg
