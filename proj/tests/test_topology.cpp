#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <random>
#include <set>

#include "fmloc/topology.hpp"

using namespace fmloc;

namespace {
GraphTopology chain(std::size_t n, bool periodic = false) {
  const std::array<std::size_t, 1> sides{n};
  return make_lattice_box(1, sides, periodic);
}
GraphTopology square(std::size_t a, std::size_t b, bool periodic = false) {
  const std::array<std::size_t, 2> sides{a, b};
  return make_lattice_box(2, sides, periodic);
}
}  // namespace

TEST_CASE("make_lattice_box: small boxes", "[topology]") {
  SECTION("chain of three") {
    const auto g = chain(3);
    REQUIRE(g.size() == 3);
    REQUIRE(g.edge_count() == 2);
    REQUIRE(g.kappa() == 2);
    REQUIRE(std::vector<Vertex>(g.neighbors(0).begin(), g.neighbors(0).end()) ==
            std::vector<Vertex>{1});
    REQUIRE(std::vector<Vertex>(g.neighbors(1).begin(), g.neighbors(1).end()) ==
            std::vector<Vertex>{0, 2});
  }
  SECTION("unit square") {
    const auto g = square(2, 2);
    REQUIRE(g.size() == 4);
    REQUIRE(g.edge_count() == 4);
    REQUIRE(g.kappa() == 2);
  }
  SECTION("3x3 centre has degree 2d") {
    const auto g = square(3, 3);
    const std::array<std::int64_t, 2> c{1, 1};
    REQUIRE(g.neighbors(*g.vertex_at(c)).size() == 4);
    REQUIRE(g.kappa() == 4);
    const std::array<std::int64_t, 2> corner{0, 0};
    REQUIRE(neighbors(g, *g.vertex_at(corner)).size() == 2);
  }
}

TEST_CASE("make_lattice_box: invalid dimensions", "[topology]") {
  const std::array<std::size_t, 1> zero{0};
  REQUIRE_THROWS_AS(make_lattice_box(1, zero, false), ConfigError);
  const std::array<std::size_t, 1> two{2};
  REQUIRE_THROWS_AS(make_lattice_box(1, two, true), ConfigError);
  REQUIRE_THROWS_AS(make_lattice_box(0, {}, false), ConfigError);
  const std::array<std::size_t, 2> mismatch{3, 3};
  REQUIRE_THROWS_AS(make_lattice_box(1, mismatch, false), ConfigError);
}

TEST_CASE("degree census", "[topology][property]") {
  for (std::size_t d = 1; d <= 3; ++d) {
    std::vector<std::size_t> sides(d, 4);
    const auto open = make_lattice_box(d, sides, false);
    const auto per = make_lattice_box(d, sides, true);
    for (Vertex v = 0; v < open.size(); ++v) {
      REQUIRE(open.neighbors(v).size() >= d);
      REQUIRE(open.neighbors(v).size() <= 2 * d);
      REQUIRE(per.neighbors(v).size() == 2 * d);
    }
    REQUIRE(open.kappa() == 2 * d);
  }
}

TEST_CASE("adjacency invariants", "[topology][property]") {
  const std::array<std::size_t, 3> sides{3, 4, 2};
  const auto g = make_lattice_box(3, sides, false);
  for (Vertex x = 0; x < g.size(); ++x) {
    for (Vertex y : g.neighbors(x)) {
      REQUIRE(x != y);
      const auto back = g.neighbors(y);
      REQUIRE(std::find(back.begin(), back.end(), x) != back.end());
    }
    for (Vertex y = 0; y < g.size(); ++y) {
      std::int64_t l1 = 0;
      for (std::size_t i = 0; i < 3; ++i) l1 += std::llabs(g.coords(x)[i] - g.coords(y)[i]);
      const auto nb = g.neighbors(x);
      const bool adjacent = std::find(nb.begin(), nb.end(), y) != nb.end();
      REQUIRE(adjacent == (l1 == 1));
    }
  }
}

TEST_CASE("distance", "[topology]") {
  REQUIRE(distance(chain(5), 0, 4) == 4);
  const auto g = square(3, 3);
  const std::array<std::int64_t, 2> a{0, 0}, b{2, 2};
  REQUIRE(distance(g, *g.vertex_at(a), *g.vertex_at(b)) == 4);
  for (Vertex x = 0; x < g.size(); ++x) REQUIRE(distance(g, x, x) == 0);

  SECTION("disconnected pair gives the sentinel") {
    const std::array<std::pair<Vertex, Vertex>, 1> edges{{{0, 1}}};
    const auto two_parts = GraphTopology::from_edges(3, edges);
    REQUIRE(distance(two_parts, 0, 2) == kUnreachable);
    REQUIRE(distance(two_parts, 0, 1) == 1);
  }
  SECTION("periodic ring wraps") {
    REQUIRE(distance(chain(6, true), 0, 5) == 1);
    REQUIRE(distance(chain(6, true), 0, 3) == 3);
  }
}

TEST_CASE("distance is a metric on sampled triples", "[topology][property]") {
  const std::array<std::size_t, 2> sides{5, 4};
  const auto g = make_lattice_box(2, sides, false);
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
  for (int trial = 0; trial < 300; ++trial) {
    const Vertex x = pick(gen), y = pick(gen), z = pick(gen);
    REQUIRE(distance(g, x, y) == distance(g, y, x));
    REQUIRE(distance(g, x, z) <= distance(g, x, y) + distance(g, y, z));
    std::int64_t l1 = 0;
    for (std::size_t i = 0; i < 2; ++i) l1 += std::llabs(g.coords(x)[i] - g.coords(y)[i]);
    REQUIRE(distance(g, x, y) == static_cast<std::size_t>(l1));
  }
  const auto all = distances_from(g, 3);
  for (Vertex y = 0; y < g.size(); ++y) REQUIRE(all[y] == distance(g, 3, y));
}

TEST_CASE("sub_box", "[topology]") {
  SECTION("chain of 9, radius 2 around 4") {
    const auto sb = sub_box(chain(9), 4, 2);
    REQUIRE(sb.graph.size() == 5);
    REQUIRE(sb.graph.edge_count() == 4);
    REQUIRE(sb.to_parent == std::vector<Vertex>{2, 3, 4, 5, 6});
  }
  SECTION("radius 0 is a single vertex") {
    const auto sb = sub_box(square(3, 3), 4, 0);
    REQUIRE(sb.graph.size() == 1);
    REQUIRE(sb.graph.edge_count() == 0);
    REQUIRE(sb.to_parent == std::vector<Vertex>{4});
  }
  SECTION("large radius returns the whole graph with identity relabeling") {
    const auto g = square(3, 4);
    const auto sb = sub_box(g, 5, 10);
    REQUIRE(sb.graph.size() == g.size());
    for (Vertex v = 0; v < g.size(); ++v) REQUIRE(sb.to_parent[v] == v);
    REQUIRE(sb.graph.edge_count() == g.edge_count());
  }
  SECTION("negative radius") { REQUIRE_THROWS_AS(sub_box(chain(3), 1, -1), ConfigError); }
  SECTION("needs coordinates") {
    const std::array<std::pair<Vertex, Vertex>, 1> edges{{{0, 1}}};
    REQUIRE_THROWS_AS(sub_box(GraphTopology::from_edges(2, edges), 0, 1), ConfigError);
  }
}

TEST_CASE("sub_box relabeling is an isomorphism onto its image", "[topology][property]") {
  for (bool periodic : {false, true}) {
    // 2r + 1 < side on every axis, so no ball closes on itself.
    const std::array<std::size_t, 2> sides{7, 6};
    const auto g = make_lattice_box(2, sides, periodic);
    for (Vertex c = 0; c < g.size(); c += 3)
      for (std::int64_t r = 0; r <= 2; ++r) {
        const auto sb = sub_box(g, c, r);
        for (Vertex a = 0; a < sb.graph.size(); ++a) {
          // Sub coordinates agree with vertex_at.
          REQUIRE(sb.graph.vertex_at(sb.graph.coords(a)) == a);
          for (Vertex b = 0; b < sb.graph.size(); ++b) {
            const auto nb = sb.graph.neighbors(a);
            const bool sub_edge = std::find(nb.begin(), nb.end(), b) != nb.end();
            const auto pn = g.neighbors(sb.to_parent[a]);
            const bool parent_edge =
                std::find(pn.begin(), pn.end(), sb.to_parent[b]) != pn.end();
            REQUIRE(sub_edge == parent_edge);
          }
        }
      }
  }
}
