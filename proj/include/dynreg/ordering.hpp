#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dynreg/errors.hpp"
#include "dynreg/lpcore.hpp"

namespace dynreg {

// Strict partial order on regimes 1..K; adj is row-major, adj[a][b] means a beats b.
class PartialOrder {
 public:
  PartialOrder() = default;
  explicit PartialOrder(int K, double eps = 0.0) : K_(K), eps_(eps), adj_(static_cast<std::size_t>(K * K), 0) {}

  int size() const { return K_; }
  double epsilon() const { return eps_; }
  bool edge(int a, int b) const { return adj_[idx(a, b)] != 0; }
  void set_edge(int a, int b, bool on = true) { adj_[idx(a, b)] = on; }

  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int a = 1; a <= K_; ++a)
      for (int b = 1; b <= K_; ++b)
        if (edge(a, b)) out.push_back({a, b});
    return out;
  }
  std::size_t edge_count() const { return static_cast<std::size_t>(std::count(adj_.begin(), adj_.end(), 1)); }

  static PartialOrder from_edges(int K, const std::vector<std::pair<int, int>>& e) {
    PartialOrder po(K);
    for (auto [a, b] : e) po.set_edge(a, b);
    return po;
  }

  bool operator==(const PartialOrder& o) const { return K_ == o.K_ && adj_ == o.adj_; }

 private:
  std::size_t idx(int a, int b) const {
    if (a < 1 || b < 1 || a > K_ || b > K_) throw std::out_of_range("regime index out of range");
    return static_cast<std::size_t>((a - 1) * K_ + (b - 1));
  }
  int K_ = 0;
  double eps_ = 0.0;
  std::vector<std::uint8_t> adj_;
};

// Returns a directed cycle (1-based, first vertex repeated at the end) or empty.
inline std::vector<int> find_cycle(const PartialOrder& po) {
  const int K = po.size();
  std::vector<int> color(static_cast<std::size_t>(K + 1), 0), parent(static_cast<std::size_t>(K + 1), 0);
  std::vector<int> cycle;
  std::function<bool(int)> dfs = [&](int v) {
    color[v] = 1;
    for (int w = 1; w <= K; ++w) {
      if (!po.edge(v, w)) continue;
      if (color[w] == 1) {
        cycle.push_back(w);
        for (int x = v; x != w; x = parent[x]) cycle.push_back(x);
        cycle.push_back(w);
        std::reverse(cycle.begin(), cycle.end());
        return true;
      }
      if (color[w] == 0) {
        parent[w] = v;
        if (dfs(w)) return true;
      }
    }
    color[v] = 2;
    return false;
  };
  for (int v = 1; v <= K; ++v)
    if (color[v] == 0 && dfs(v)) break;
  return cycle;
}

inline PartialOrder build_partial_order(const GapMatrix& g, double eps_sign = Tolerances{}.sign) {
  PartialOrder po(g.K, eps_sign);
  for (int a = 1; a <= g.K; ++a)
    for (int b = 1; b <= g.K; ++b)
      if (a != b && g.l(a, b) > eps_sign) po.set_edge(a, b);
  if (auto c = find_cycle(po); !c.empty()) {
    std::ostringstream os;
    os << "welfare order contains a cycle:";
    for (int v : c) os << ' ' << v;
    throw ConsistencyError(os.str(), c);
  }
  return po;
}

namespace detail {

inline std::vector<int> maximal_among(const PartialOrder& po, const std::vector<char>& alive) {
  std::vector<int> out;
  for (int b = 1; b <= po.size(); ++b) {
    if (!alive[b]) continue;
    bool beaten = false;
    for (int a = 1; a <= po.size() && !beaten; ++a) beaten = alive[a] && po.edge(a, b);
    if (!beaten) out.push_back(b);
  }
  return out;
}

}  // namespace detail

// Regimes with no incoming edge.
inline std::vector<int> identified_set(const PartialOrder& po) {
  return detail::maximal_among(po, std::vector<char>(static_cast<std::size_t>(po.size() + 1), 1));
}

inline std::vector<std::vector<int>> nth_best_tiers(const PartialOrder& po) {
  std::vector<char> alive(static_cast<std::size_t>(po.size() + 1), 1);
  alive[0] = 0;
  std::vector<std::vector<int>> tiers;
  int left = po.size();
  while (left > 0) {
    auto tier = detail::maximal_among(po, alive);
    if (tier.empty()) throw ConsistencyError("no maximal element among remaining regimes");
    for (int v : tier) alive[v] = 0;
    left -= static_cast<int>(tier.size());
    tiers.push_back(std::move(tier));
  }
  return tiers;
}

inline bool is_topological_sort(const PartialOrder& po, const std::vector<int>& order) {
  const int K = po.size();
  if (static_cast<int>(order.size()) != K) return false;
  std::vector<int> pos(static_cast<std::size_t>(K + 1), -1);
  for (int i = 0; i < K; ++i) {
    const int v = order[static_cast<std::size_t>(i)];
    if (v < 1 || v > K || pos[v] != -1) return false;
    pos[v] = i;
  }
  for (auto [a, b] : po.edges())
    if (pos[a] > pos[b]) return false;
  return true;
}

struct TopoSortList {
  std::vector<std::vector<int>> sorts;
  bool truncated = false;
  std::optional<std::uint64_t> count_exact;
};

inline constexpr std::size_t kDefaultSortCap = 1000;
inline constexpr int kExactCountMaxVertices = 20;

// Number of linear extensions by DP over the set of already placed vertices.
inline std::uint64_t count_linear_extensions(const PartialOrder& po) {
  const int K = po.size();
  if (K > kExactCountMaxVertices) throw DimensionError("exact sort count is limited to 20 regimes");
  std::vector<std::uint32_t> pred(static_cast<std::size_t>(K), 0);
  for (auto [a, b] : po.edges()) pred[static_cast<std::size_t>(b - 1)] |= 1u << (a - 1);
  std::vector<std::uint64_t> ways(std::size_t{1} << K, 0);
  ways[0] = 1;
  for (std::uint32_t S = 0; S < ways.size(); ++S) {
    if (ways[S] == 0) continue;
    for (int v = 0; v < K; ++v) {
      const std::uint32_t bit = 1u << v;
      if ((S & bit) || (pred[static_cast<std::size_t>(v)] & ~S)) continue;
      ways[S | bit] += ways[S];
    }
  }
  return ways.back();
}

// Enumerates sorts in lexicographic order by repeatedly choosing a source.
inline TopoSortList topological_sorts(const PartialOrder& po, std::size_t cap = kDefaultSortCap) {
  const int K = po.size();
  TopoSortList out;
  std::vector<int> indeg(static_cast<std::size_t>(K + 1), 0);
  for (auto [a, b] : po.edges()) ++indeg[b];
  std::vector<char> used(static_cast<std::size_t>(K + 1), 0);
  std::vector<int> cur;
  std::function<void()> rec = [&] {
    if (out.truncated) return;
    if (static_cast<int>(cur.size()) == K) {
      if (out.sorts.size() >= cap) {
        out.truncated = true;
        return;
      }
      out.sorts.push_back(cur);
      return;
    }
    for (int v = 1; v <= K && !out.truncated; ++v) {
      if (used[v] || indeg[v] != 0) continue;
      used[v] = 1;
      cur.push_back(v);
      for (int w = 1; w <= K; ++w)
        if (po.edge(v, w)) --indeg[w];
      rec();
      for (int w = 1; w <= K; ++w)
        if (po.edge(v, w)) ++indeg[w];
      cur.pop_back();
      used[v] = 0;
    }
  };
  rec();
  if (K <= kExactCountMaxVertices) out.count_exact = count_linear_extensions(po);
  return out;
}

// Initial vertices of the maximal directed paths. Every vertex lies on some
// maximal path; walking backwards from it reaches that path's initial
// vertex. A vertex with no edges is a path of length zero.
inline std::vector<int> identified_set_via_paths(const PartialOrder& po) {
  const int K = po.size();
  std::vector<char> initial(static_cast<std::size_t>(K + 1), 0);
  auto pred = [&](int v) {
    for (int w = 1; w <= K; ++w)
      if (po.edge(w, v)) return w;
    return 0;
  };
  for (int v = 1; v <= K; ++v) {
    int head = v;
    for (int guard = 0, u; (u = pred(head)) != 0; head = u)
      if (++guard > K) throw ConsistencyError("cycle while walking a path");
    initial[head] = 1;
  }
  std::vector<int> out;
  for (int v = 1; v <= K; ++v)
    if (initial[v]) out.push_back(v);
  if (out != identified_set(po)) throw ConsistencyError("path characterisation disagrees with maximal elements", out);
  return out;
}

// All maximal directed paths, up to cap (for reporting small graphs).
inline std::vector<std::vector<int>> maximal_paths(const PartialOrder& po, std::size_t cap = kDefaultSortCap) {
  const int K = po.size();
  std::vector<std::vector<int>> out;
  std::vector<int> path;
  std::function<void(int)> walk = [&](int v) {
    if (out.size() >= cap) return;
    path.push_back(v);
    bool extended = false;
    for (int w = 1; w <= K; ++w)
      if (po.edge(v, w)) {
        extended = true;
        walk(w);
      }
    if (!extended && out.size() < cap) out.push_back(path);
    path.pop_back();
  };
  for (int v : identified_set(po)) walk(v);
  return out;
}

inline std::vector<std::vector<char>> reachability(const PartialOrder& po) {
  const int K = po.size();
  std::vector<std::vector<char>> r(static_cast<std::size_t>(K + 1), std::vector<char>(static_cast<std::size_t>(K + 1), 0));
  for (auto [a, b] : po.edges()) r[a][b] = 1;
  for (int m = 1; m <= K; ++m)
    for (int a = 1; a <= K; ++a)
      if (r[a][m])
        for (int b = 1; b <= K; ++b)
          if (r[m][b]) r[a][b] = 1;
  return r;
}

inline PartialOrder transitive_closure(const PartialOrder& po) {
  const auto r = reachability(po);
  PartialOrder out(po.size(), po.epsilon());
  for (int a = 1; a <= po.size(); ++a)
    for (int b = 1; b <= po.size(); ++b)
      if (r[a][b]) out.set_edge(a, b);
  return out;
}

inline PartialOrder transitive_reduction(const PartialOrder& po) {
  const int K = po.size();
  const auto r = reachability(po);
  PartialOrder out(K, po.epsilon());
  for (int a = 1; a <= K; ++a)
    for (int b = 1; b <= K; ++b) {
      if (!r[a][b]) continue;
      bool implied = false;
      for (int m = 1; m <= K && !implied; ++m) implied = m != a && m != b && r[a][m] && r[m][b];
      if (!implied) out.set_edge(a, b);
    }
  return out;
}

// Graphviz rendering of the reduced order. labels[k-1] is shown after "Regime k: ".
inline std::string to_dot(const PartialOrder& po, const std::vector<std::string>& labels = {}) {
  const auto red = transitive_reduction(po);
  std::ostringstream os;
  os << "digraph regimes {\n  rankdir=TB;\n";
  for (int k = 1; k <= po.size(); ++k) {
    os << "  r" << k << " [label=\"Regime " << k;
    if (static_cast<std::size_t>(k) <= labels.size()) os << ": " << labels[static_cast<std::size_t>(k - 1)];
    os << "\"];\n";
  }
  for (auto [a, b] : red.edges()) os << "  r" << a << " -> r" << b << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace dynreg
