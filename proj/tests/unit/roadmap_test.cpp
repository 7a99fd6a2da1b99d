#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <filesystem>
#include <random>

#include "sharednav/error.hpp"
#include "sharednav/roadmap.hpp"
#include "support/maps.hpp"
#include "support/oracles.hpp"

using namespace sharednav;

namespace {

std::vector<oracle::Edge> graph_edges(const Roadmap& rm) {
  std::vector<oracle::Edge> edges;
  for (std::size_t i = 0; i < rm.adjacency.size(); ++i)
    for (const auto& e : rm.adjacency[i]) edges.push_back({i, e.to, distance(rm.nodes[i], rm.nodes[e.to])});
  return edges;
}

OccupancyGrid cluttered(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::array<double, 4>> boxes;
  for (int i = 0; i < 4; ++i) {
    const double x = 1 + 4 * u(rng), y = 1 + 4 * u(rng);
    boxes.push_back({x, y, x + 0.3 + 0.8 * u(rng), y + 0.3 + 0.8 * u(rng)});
  }
  return testmaps::make(6.5, 6.5, 0.05, {}, [boxes](double x, double y) {
    for (const auto& b : boxes)
      if (x > b[0] && x < b[2] && y > b[1] && y < b[3]) return true;
    return false;
  });
}

}  // namespace

TEST(BuildPrm, EmptyFiveByFiveRoomHasAboutOneHundredNodes) {
  const auto g = testmaps::empty_room(5, 5);
  const auto rm = build_prm(g, 0.3, 0);
  EXPECT_GE(rm.nodes.size(), 90u);
  EXPECT_LE(rm.nodes.size(), 110u);
  EXPECT_EQ(rm.nodes.size(), 100u);
}

TEST(BuildPrm, FullyOccupiedMapIsRejected) {
  const auto g = testmaps::make(3, 3, 0.05, {}, [](double, double) { return true; });
  EXPECT_THROW(build_prm(g, 0.3, 0), InvalidArgument);
}

TEST(BuildPrm, NodesAndEdgesAreCollisionFree) {
  const auto g = testmaps::two_rooms();
  const auto rm = build_prm(g, 0.3, 4);
  for (const auto& p : rm.nodes) ASSERT_TRUE(is_free(g, p, 0.3));
  for (std::size_t i = 0; i < rm.nodes.size(); ++i) {
    for (const auto& e : rm.adjacency[i]) {
      ASSERT_NE(e.to, i);
      ASSERT_DOUBLE_EQ(e.length, distance(rm.nodes[i], rm.nodes[e.to]));
      for (int k = 0; k <= 200; ++k) {
        const double t = k / 200.0;
        const Point2 a = rm.nodes[i], b = rm.nodes[e.to];
        ASSERT_TRUE(is_free(g, {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}, 0.3));
      }
    }
  }
}

TEST(BuildPrm, DensityIsFourPerSquareMetreOfFreeSpace) {
  const auto g = testmaps::two_rooms();
  const auto rm = build_prm(g, 0.3, 1);
  const double expected = 4.0 * g.free_area();
  EXPECT_NEAR(static_cast<double>(rm.nodes.size()), expected, 0.1 * expected);
}

TEST(BuildPrm, TwoRoomsAreConnectedForSeedsZeroToNine) {
  const auto g = testmaps::two_rooms();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto rm = build_prm(g, 0.3, seed);
    EXPECT_EQ(oracle::component_count(rm.nodes.size(), graph_edges(rm)), 1u) << "seed " << seed;
  }
}

TEST(BuildPrm, SameSeedSameRoadmap) {
  const auto g = testmaps::two_rooms();
  const auto a = build_prm(g, 0.3, 42);
  const auto b = build_prm(g, 0.3, 42);
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.nodes[i].x), std::bit_cast<std::uint64_t>(b.nodes[i].x));
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.nodes[i].y), std::bit_cast<std::uint64_t>(b.nodes[i].y));
  }
  EXPECT_EQ(a, b);
  EXPECT_NE(a.nodes, build_prm(g, 0.3, 43).nodes);
}

TEST(ShortestPath, SamePointGivesSinglePoint) {
  const auto g = testmaps::empty_room(5, 5);
  const auto rm = build_prm(g, 0.3, 0);
  const auto path = shortest_path(rm, g, {2, 2}, {2, 2});
  ASSERT_EQ(path.size(), 1u);
  EXPECT_EQ(polyline_length(path), 0.0);
}

TEST(ShortestPath, MutuallyVisiblePointsGiveDirectPath) {
  const auto g = testmaps::empty_room(5, 5);
  const auto rm = build_prm(g, 0.3, 0);
  const auto path = shortest_path(rm, g, {1, 1}, {4, 3.5});
  ASSERT_EQ(path.size(), 2u);
  EXPECT_EQ(path.front(), (Point2{1, 1}));
  EXPECT_EQ(path.back(), (Point2{4, 3.5}));
}

TEST(ShortestPath, MatchesBellmanFordOnRandomMaps) {
  for (std::uint64_t m = 0; m < 6; ++m) {
    const auto g = cluttered(m);
    const auto rm = build_prm(g, 0.3, m);
    ASSERT_LE(rm.nodes.size(), 200u);
    std::mt19937_64 rng(100 + m);
    std::uniform_real_distribution<double> u(0.4, 6.1);
    for (int q = 0; q < 10; ++q) {
      Point2 p0, pf;
      do p0 = {u(rng), u(rng)};
      while (!is_free(g, p0, 0.3));
      do pf = {u(rng), u(rng)};
      while (!is_free(g, pf, 0.3));

      // Same augmented graph: nodes, then p0 (n) and pf (n + 1).
      const std::size_t n = rm.nodes.size();
      auto edges = graph_edges(rm);
      auto link = [&](std::size_t id, Point2 p) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return distance(rm.nodes[a], p) < distance(rm.nodes[b], p);
        });
        int links = 0;
        for (std::size_t j : order) {
          if (links == 5) break;
          if (!segment_is_free(g, p, rm.nodes[j], 0.3)) continue;
          edges.push_back({id, j, distance(p, rm.nodes[j])});
          edges.push_back({j, id, distance(p, rm.nodes[j])});
          ++links;
        }
      };
      link(n, p0);
      link(n + 1, pf);
      if (segment_is_free(g, p0, pf, 0.3)) edges.push_back({n, n + 1, distance(p0, pf)});
      const double expected = oracle::bellman_ford(n + 2, edges, n)[n + 1];

      if (!std::isfinite(expected)) {
        EXPECT_THROW(shortest_path(rm, g, p0, pf), NoPathError);
        continue;
      }
      const auto path = shortest_path(rm, g, p0, pf);
      EXPECT_NEAR(polyline_length(path), expected, 1e-9) << m << " " << q;
      EXPECT_GE(polyline_length(path), distance(p0, pf) - 1e-12);
      for (const auto& p : path) EXPECT_TRUE(is_free(g, p, 0.3));
    }
  }
}

TEST(ShortestPath, DisconnectedComponentsThrow) {
  // A full-height wall splits the map in two.
  const auto g = testmaps::make(6, 3, 0.05, {}, [](double x, double) { return x > 2.9 && x < 3.1; });
  const auto rm = build_prm(g, 0.3, 2);
  EXPECT_THROW(shortest_path(rm, g, {1, 1.5}, {5, 1.5}), NoPathError);
  EXPECT_THROW(shortest_path(rm, g, {3, 1.5}, {5, 1.5}), NoPathError);  // start inside the wall
}

TEST(ShortestPath, CrossesBetweenRooms) {
  const auto g = testmaps::two_rooms();
  const auto rm = build_prm(g, 0.3, 0);
  const auto path = shortest_path(rm, g, {1, 1}, {9.4, 0.8});
  EXPECT_GT(path.size(), 2u);
  EXPECT_GT(polyline_length(path), distance({1, 1}, {9.4, 0.8}));
  for (std::size_t i = 1; i < path.size(); ++i) EXPECT_TRUE(segment_is_free(g, path[i - 1], path[i], 0.3));
}

TEST(RoadmapFile, JsonRoundTripIsExact) {
  const auto g = testmaps::two_rooms();
  const auto rm = build_prm(g, 0.3, 8);
  const auto path = std::filesystem::temp_directory_path() / "sharednav_roadmap_test.json";
  save_roadmap(path, rm);
  EXPECT_EQ(load_roadmap(path), rm);
  EXPECT_THROW(roadmap_from_json("{\"format\":\"sharednav-roadmap\",\"version\":99}"), FormatError);
  EXPECT_THROW(roadmap_from_json("not json"), FormatError);
}
