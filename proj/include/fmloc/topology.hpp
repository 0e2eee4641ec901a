#ifndef FMLOC_TOPOLOGY_HPP
#define FMLOC_TOPOLOGY_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "fmloc/core/error.hpp"

namespace fmloc {

using Vertex = std::size_t;

/// Returned by `distance` for vertices in different components.
inline constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

/// Finite graph of bounded degree. Vertices are 0..N-1; lattice coordinates,
/// when present, are stored alongside so general graphs share the same
/// adjacency representation. Immutable after construction.
class GraphTopology {
 public:
  GraphTopology() = default;

  /// Build from an undirected edge list. Throws on self-loops or
  /// out-of-range endpoints; duplicate edges are merged.
  static GraphTopology from_edges(std::size_t n,
                                  std::span<const std::pair<Vertex, Vertex>> edges) {
    GraphTopology g;
    g.adj_.assign(n, {});
    for (auto [x, y] : edges) {
      if (x >= n || y >= n) throw ConfigError("edge endpoint out of range");
      if (x == y) throw ConfigError("self-loops are not allowed");
      g.adj_[x].push_back(y);
      g.adj_[y].push_back(x);
    }
    g.finalize();
    return g;
  }

  std::size_t size() const noexcept { return adj_.size(); }
  std::size_t kappa() const noexcept { return kappa_; }
  std::size_t dimension() const noexcept { return sides_.size(); }
  bool has_coords() const noexcept { return !coords_.empty(); }
  bool periodic() const noexcept { return periodic_; }
  std::span<const std::size_t> sides() const noexcept { return sides_; }

  std::span<const Vertex> neighbors(Vertex x) const {
    check_vertex(x);
    return adj_[x];
  }

  std::span<const std::int64_t> coords(Vertex x) const {
    check_vertex(x);
    if (!has_coords()) throw ConfigError("topology has no lattice coordinates");
    return {coords_.data() + x * dimension(), dimension()};
  }

  /// Vertex at lattice coordinates `c`, wrapping on periodic boxes.
  std::optional<Vertex> vertex_at(std::span<const std::int64_t> c) const {
    if (!has_coords() || c.size() != dimension()) return std::nullopt;
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (std::size_t i = 0; i < dimension(); ++i) {
      const auto side = static_cast<std::int64_t>(sides_[i]);
      std::int64_t ci = c[i];
      if (periodic_) {
        ci %= side;
        if (ci < 0) ci += side;
      } else if (ci < 0 || ci >= side) {
        return std::nullopt;
      }
      idx += static_cast<std::size_t>(ci) * stride;
      stride *= sides_[i];
    }
    return idx;
  }

  /// Lattice displacement y - x, taken as the shortest image on periodic axes.
  std::vector<std::int64_t> offset(Vertex x, Vertex y) const {
    auto cx = coords(x);
    auto cy = coords(y);
    std::vector<std::int64_t> o(dimension());
    for (std::size_t i = 0; i < dimension(); ++i) {
      std::int64_t d = cy[i] - cx[i];
      if (periodic_) {
        const auto side = static_cast<std::int64_t>(sides_[i]);
        d %= side;
        if (d > side / 2) d -= side;
        if (d < -side / 2) d += side;
      }
      o[i] = d;
    }
    return o;
  }

  std::size_t edge_count() const noexcept {
    std::size_t s = 0;
    for (const auto& a : adj_) s += a.size();
    return s / 2;
  }

  friend GraphTopology make_lattice_box(std::size_t d, std::span<const std::size_t> sides,
                                        bool periodic);
  friend struct SubBox;
  friend struct SubBox sub_box(const GraphTopology& g, Vertex center, std::int64_t radius);

 private:
  void check_vertex(Vertex x) const {
    if (x >= size()) throw ConfigError("vertex out of range");
  }

  void finalize() {
    kappa_ = 0;
    for (auto& a : adj_) {
      std::sort(a.begin(), a.end());
      a.erase(std::unique(a.begin(), a.end()), a.end());
      kappa_ = std::max(kappa_, a.size());
    }
  }

  std::vector<std::vector<Vertex>> adj_;
  std::size_t kappa_ = 0;
  std::vector<std::size_t> sides_;
  std::vector<std::int64_t> coords_;  // size() * dimension(), row-major
  bool periodic_ = false;
};

/// Box {0..sides_i-1}^d in Z^d with nearest-neighbour edges. Vertex index is
/// the mixed-radix number of its coordinates, first axis fastest.
inline GraphTopology make_lattice_box(std::size_t d, std::span<const std::size_t> sides,
                                      bool periodic) {
  if (d < 1) throw ConfigError("lattice dimension must be >= 1");
  if (sides.size() != d) throw ConfigError("sides must have d entries");
  std::size_t n = 1;
  for (std::size_t s : sides) {
    if (s < 1) throw ConfigError("lattice sides must be >= 1");
    if (periodic && s < 3) throw ConfigError("periodic boxes need all sides >= 3");
    n *= s;
  }

  GraphTopology g;
  g.sides_.assign(sides.begin(), sides.end());
  g.periodic_ = periodic;
  g.coords_.resize(n * d);
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t rem = v;
    for (std::size_t i = 0; i < d; ++i) {
      g.coords_[v * d + i] = static_cast<std::int64_t>(rem % sides[i]);
      rem /= sides[i];
    }
  }
  g.adj_.assign(n, {});
  std::vector<std::int64_t> c(d);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t i = 0; i < d; ++i) {
      std::copy_n(g.coords_.begin() + static_cast<std::ptrdiff_t>(v * d), d, c.begin());
      c[i] += 1;
      if (auto w = g.vertex_at(c); w && *w != v) {
        g.adj_[v].push_back(*w);
        g.adj_[*w].push_back(v);
      }
    }
  }
  g.finalize();
  return g;
}

/// Breadth-first graph distance; kUnreachable when no path exists.
inline std::size_t distance(const GraphTopology& g, Vertex x, Vertex y) {
  if (x >= g.size() || y >= g.size()) throw ConfigError("vertex out of range");
  if (x == y) return 0;
  std::vector<std::size_t> dist(g.size(), kUnreachable);
  std::queue<Vertex> frontier;
  dist[x] = 0;
  frontier.push(x);
  while (!frontier.empty()) {
    const Vertex u = frontier.front();
    frontier.pop();
    for (Vertex w : g.neighbors(u)) {
      if (dist[w] != kUnreachable) continue;
      dist[w] = dist[u] + 1;
      if (w == y) return dist[w];
      frontier.push(w);
    }
  }
  return kUnreachable;
}

/// Distances from x to every vertex (single BFS).
inline std::vector<std::size_t> distances_from(const GraphTopology& g, Vertex x) {
  if (x >= g.size()) throw ConfigError("vertex out of range");
  std::vector<std::size_t> dist(g.size(), kUnreachable);
  std::queue<Vertex> frontier;
  dist[x] = 0;
  frontier.push(x);
  while (!frontier.empty()) {
    const Vertex u = frontier.front();
    frontier.pop();
    for (Vertex w : g.neighbors(u)) {
      if (dist[w] != kUnreachable) continue;
      dist[w] = dist[u] + 1;
      frontier.push(w);
    }
  }
  return dist;
}

inline std::span<const Vertex> neighbors(const GraphTopology& g, Vertex x) {
  return g.neighbors(x);
}

/// Induced subgraph on an l-infinity ball, with the map back to the parent.
struct SubBox {
  GraphTopology graph;
  std::vector<Vertex> to_parent;  // sub vertex -> parent vertex
};

/// Induced subgraph on {y : ||y - center||_inf <= radius}. Distances are
/// measured in lattice coordinates (shortest image on periodic boxes). The
/// result is an open box: coordinates are relative to the ball's lower
/// corner, vertices are in mixed-radix order, and wrap edges are dropped.
inline SubBox sub_box(const GraphTopology& g, Vertex center, std::int64_t radius) {
  if (radius < 0) throw ConfigError("sub_box radius must be >= 0");
  if (!g.has_coords()) throw ConfigError("sub_box needs lattice coordinates");
  const std::size_t d = g.dimension();

  SubBox out;
  std::vector<std::vector<std::int64_t>> rel;
  for (Vertex v = 0; v < g.size(); ++v) {
    auto o = g.offset(center, v);
    bool inside = true;
    for (auto oi : o) inside = inside && std::llabs(oi) <= radius;
    if (inside) {
      out.to_parent.push_back(v);
      rel.push_back(std::move(o));
    }
  }

  std::vector<std::int64_t> lo(d, std::numeric_limits<std::int64_t>::max());
  std::vector<std::int64_t> hi(d, std::numeric_limits<std::int64_t>::min());
  for (const auto& r : rel)
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], r[i]);
      hi[i] = std::max(hi[i], r[i]);
    }
  auto& sg = out.graph;
  sg.sides_.resize(d);
  for (std::size_t i = 0; i < d; ++i) sg.sides_[i] = static_cast<std::size_t>(hi[i] - lo[i] + 1);

  // Order sub vertices by their mixed-radix index inside the ball so that
  // vertex_at() on the sub-box agrees with the stored coordinates.
  auto key = [&](const std::vector<std::int64_t>& r) {
    std::size_t idx = 0, stride = 1;
    for (std::size_t i = 0; i < d; ++i) {
      idx += static_cast<std::size_t>(r[i] - lo[i]) * stride;
      stride *= sg.sides_[i];
    }
    return idx;
  };
  std::vector<std::size_t> order(rel.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return key(rel[a]) < key(rel[b]); });
  {
    std::vector<Vertex> tp;
    std::vector<std::vector<std::int64_t>> rl;
    for (auto i : order) {
      tp.push_back(out.to_parent[i]);
      rl.push_back(rel[i]);
    }
    out.to_parent = std::move(tp);
    rel = std::move(rl);
  }

  std::vector<std::size_t> parent_to_sub(g.size(), kUnreachable);
  for (std::size_t i = 0; i < out.to_parent.size(); ++i) parent_to_sub[out.to_parent[i]] = i;

  // Induced edges, minus periodic wrap edges that would close the ball on itself.
  sg.adj_.assign(out.to_parent.size(), {});
  for (std::size_t i = 0; i < out.to_parent.size(); ++i)
    for (Vertex w : g.neighbors(out.to_parent[i])) {
      const std::size_t j = parent_to_sub[w];
      if (j == kUnreachable) continue;
      std::int64_t l1 = 0;
      for (std::size_t a = 0; a < d; ++a) l1 += std::llabs(rel[i][a] - rel[j][a]);
      if (l1 == 1) sg.adj_[i].push_back(j);
    }

  sg.coords_.reserve(out.to_parent.size() * d);
  for (const auto& r : rel)
    for (std::size_t i = 0; i < d; ++i) sg.coords_.push_back(r[i] - lo[i]);
  sg.periodic_ = false;
  sg.finalize();
  return out;
}

}  // namespace fmloc

#endif  // FMLOC_TOPOLOGY_HPP
