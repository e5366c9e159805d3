#pragma once

// Threshold-crossing data generating process with a shared individual effect:
//   D1 = 1{pi1 z1 + a + v1 >= 0}
//   Y1 = 1{mu1 d1 + a + e1 >= 0}
//   D2 = 1{pi21 y1 + pi22 d1 + pi23 z2 + a + v2 >= 0}
//   Y2 = 1{mu21 y1 + mu22 d2 + a + e2 >= 0}
// with a, v_t, e_t independent normals.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dynreg/data.hpp"
#include "dynreg/parallel.hpp"
#include "dynreg/statespace.hpp"

namespace dynreg {

struct DGPConfig {
  double pi1 = 0.5, mu1 = 0.5;
  double pi21 = 0.5, pi22 = 0.5, pi23 = 0.5;
  double mu21 = 0.5, mu22 = 0.5;
  double sd_alpha = 1.0, sd_v = 1.0, sd_e = 1.0;
  double z1_prob = 0.5, z2_prob = 0.5;
  bool z2_present = true;

  void validate() const {
    if (!(sd_alpha > 0 && sd_v > 0 && sd_e > 0)) throw std::invalid_argument("standard deviations must be positive");
    if (!(z1_prob > 0 && z1_prob < 1 && z2_prob > 0 && z2_prob < 1))
      throw std::invalid_argument("instrument probabilities must lie in (0,1)");
  }

  // Layout the DGP lives in: two periods, Markov, z2 instrumented if present.
  StateSpaceLayout layout() const { return StateSpaceLayout(Horizon(2, {true, z2_present}), true); }
};

inline DGPConfig preset(const std::string& name) {
  DGPConfig c;
  if (name == "positive") return c;
  if (name == "neg-mu22") {
    c.mu22 = -0.5;
    return c;
  }
  if (name == "no-z2") {
    c.z2_present = false;
    return c;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (positive, neg-mu22, no-z2)");
}

struct LatentDraw {
  double alpha, v1, e1, v2, e2;
};

namespace detail {

inline LatentDraw draw_latent(const DGPConfig& c, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  return {c.sd_alpha * n01(rng), c.sd_v * n01(rng), c.sd_e * n01(rng), c.sd_v * n01(rng), c.sd_e * n01(rng)};
}

// Value of one map at its arguments; arguments outside the DGP's own
// dependence are ignored.
inline int dgp_value(const DGPConfig& c, const LatentDraw& u, const BitField& f, const int* y, const int* d,
                     const int* z) {
  const int t = f.period;
  double index = u.alpha;
  if (f.kind == MapKind::treatment) {
    if (t == 0) index += c.pi1 * z[0] + u.v1;
    else index += c.pi21 * y[0] + c.pi22 * d[0] + (c.z2_present ? c.pi23 * z[1] : 0.0) + u.v2;
  } else {
    if (t == 0) index += c.mu1 * d[0] + u.e1;
    else index += c.mu21 * y[0] + c.mu22 * d[1] + u.e2;
  }
  return index >= 0.0;
}

inline void check_layout(const DGPConfig& c, const StateSpaceLayout& layout) {
  if (layout.periods() > 2) throw DimensionError("the simulation model has two periods");
  if (!layout.horizon().instrumented[0]) throw std::invalid_argument("the simulation model needs z1");
  if (layout.periods() == 2 && layout.horizon().instrumented[1] != c.z2_present)
    throw std::invalid_argument("layout and configuration disagree on z2");
}

}  // namespace detail

// Latent state of one draw: every map evaluated on its full argument grid.
inline std::uint64_t state_of(const DGPConfig& c, const LatentDraw& u, const StateSpaceLayout& layout) {
  std::uint64_t s = 0;
  int y[kMaxPeriods] = {}, d[kMaxPeriods] = {}, z[kMaxPeriods] = {};
  for (const BitField& f : layout.fields()) {
    for (int g = 0; g < f.width; ++g) {
      const int n = static_cast<int>(f.args.size());
      for (int a = 0; a < n; ++a) {
        const ArgRef r = f.args[static_cast<std::size_t>(a)];
        const int v = (g >> (n - 1 - a)) & 1;
        (r.var == Var::y ? y : r.var == Var::d ? d : z)[r.period] = v;
      }
      if (detail::dgp_value(c, u, f, y, d, z)) s |= layout.bit_mask(f, g);
    }
  }
  return s;
}

inline constexpr std::size_t kDefaultTrueQDraws = 1'000'000;
inline constexpr std::size_t kDrawChunk = 100'000;

// Monte Carlo frequencies of latent states. Chunks use their own seeded
// streams, so the result does not depend on the thread count.
inline std::vector<double> true_q(const DGPConfig& c, const StateSpaceLayout& layout,
                                  std::size_t draws = kDefaultTrueQDraws, std::uint64_t seed = 1) {
  c.validate();
  detail::check_layout(c, layout);
  const std::size_t chunks = (draws + kDrawChunk - 1) / kDrawChunk;
  std::vector<std::vector<std::uint32_t>> counts(chunks);
  parallel_for(chunks, [&](std::size_t k) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(k)};
    std::mt19937_64 rng(seq);
    auto& cnt = counts[k];
    cnt.assign(layout.d_q(), 0);
    const std::size_t end = std::min(draws, (k + 1) * kDrawChunk);
    for (std::size_t i = k * kDrawChunk; i < end; ++i) ++cnt[state_of(c, detail::draw_latent(c, rng), layout)];
  });
  std::vector<double> q(layout.d_q(), 0.0);
  for (const auto& cnt : counts)
    for (std::size_t s = 0; s < q.size(); ++s) q[s] += cnt[s];
  for (auto& v : q) v /= static_cast<double>(draws);
  return q;
}

// Observed distribution implied by q: p_{cell|z} = sum of q over states
// whose realised path under z is the cell. Row layout as in B.
inline std::vector<double> p_from_q(std::span<const double> q, const StateSpaceLayout& layout) {
  const int cells = layout.cells_per_z();
  std::vector<double> p(static_cast<std::size_t>(layout.z_count() * (cells - 1)), 0.0);
  for (int b = 0; b < layout.z_count(); ++b) {
    const auto z = layout.z_vector(b);
    for (std::uint64_t s = 0; s < q.size(); ++s) {
      if (q[s] == 0.0) continue;
      const int code = layout.observed_code(s, z.data());
      if (code != cells - 1) p[b_row_index(b, code, cells)] += q[s];
    }
  }
  return p;
}

inline std::vector<double> exact_p(const DGPConfig& c, const StateSpaceLayout& layout,
                                   std::size_t draws = kDefaultTrueQDraws, std::uint64_t seed = 1) {
  return p_from_q(true_q(c, layout, draws, seed), layout);
}

// i.i.d. rows from the DGP.
inline Dataset sample_data(const DGPConfig& c, std::size_t n, std::uint64_t seed) {
  c.validate();
  Dataset ds(2);
  ds.set_has_z(1, c.z2_present);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution z1d(c.z1_prob), z2d(c.z2_prob);
  for (std::size_t i = 0; i < n; ++i) {
    const int z1 = z1d(rng);
    const int z2 = c.z2_present ? static_cast<int>(z2d(rng)) : 0;
    const auto u = detail::draw_latent(c, rng);
    const int d1 = c.pi1 * z1 + u.alpha + u.v1 >= 0.0;
    const int y1 = c.mu1 * d1 + u.alpha + u.e1 >= 0.0;
    const int d2 = c.pi21 * y1 + c.pi22 * d1 + (c.z2_present ? c.pi23 * z2 : 0.0) + u.alpha + u.v2 >= 0.0;
    const int y2 = c.mu21 * y1 + c.mu22 * d2 + u.alpha + u.e2 >= 0.0;
    const int y[2] = {y1, y2}, d[2] = {d1, d2}, z[2] = {z1, z2};
    ds.add(y, d, z);
  }
  return ds;
}

// Rows drawn from an arbitrary latent distribution q: a state is drawn from
// q, instruments independently with the given probabilities.
inline Dataset sample_from_q(std::span<const double> q, const StateSpaceLayout& layout, std::size_t n,
                             std::uint64_t seed, std::vector<double> z_probs = {}) {
  const int T = layout.periods();
  if (z_probs.empty()) z_probs.assign(static_cast<std::size_t>(T), 0.5);
  Dataset ds(T);
  for (int t = 0; t < T; ++t) ds.set_has_z(t, layout.horizon().instrumented[static_cast<std::size_t>(t)]);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::uint64_t> pick(q.begin(), q.end());
  std::vector<int> y(static_cast<std::size_t>(T)), d(y.size()), z(y.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (int t = 0; t < T; ++t)
      z[static_cast<std::size_t>(t)] = layout.horizon().instrumented[static_cast<std::size_t>(t)]
                                           ? std::bernoulli_distribution(z_probs[static_cast<std::size_t>(t)])(rng)
                                           : 0;
    const std::uint64_t s = pick(rng);
    layout.cell_decode(layout.observed_code(s, z.data()), y.data(), d.data());
    ds.add(y, d, z);
  }
  return ds;
}

}  // namespace dynreg
