#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sharednav/geometry.hpp"
#include "sharednav/worldmap.hpp"

namespace sharednav {

struct RoadmapEdge {
  std::size_t to = 0;
  double length = 0.0;

  friend bool operator==(const RoadmapEdge&, const RoadmapEdge&) = default;
};

struct PrmOptions {
  double density = 4.0;  // nodes per square metre of free space
  int neighbours = 8;    // k in the k-nearest connection rule
  // Only the `candidate_factor * k` nearest nodes are tried when looking for k visible ones.
  int candidate_factor = 3;
};

/// Undirected probabilistic roadmap. Adjacency lists are sorted by target index.
struct Roadmap {
  std::vector<Point2> nodes;
  std::vector<std::vector<RoadmapEdge>> adjacency;
  std::uint64_t seed = 0;
  double clearance = 0.0;

  std::size_t edge_count() const;
  friend bool operator==(const Roadmap&, const Roadmap&) = default;
};

/// Samples round(density x free area) collision-free nodes uniformly over the free cells
/// and links each node to its nearest visible neighbours. Deterministic given `seed`.
/// Throws InvalidArgument when the free space cannot host two nodes.
Roadmap build_prm(const OccupancyGrid& grid, double clearance, std::uint64_t seed, const PrmOptions& options = {});

/// Shortest polyline p0, nodes..., pf through the roadmap. Each query point is linked to
/// up to five nearest visible nodes, and p0-pf directly when that segment is free.
/// Throws NoPathError when the query points cannot be linked or lie in different components.
std::vector<Point2> shortest_path(const Roadmap& rm, const OccupancyGrid& grid, Point2 p0, Point2 pf);

double polyline_length(const std::vector<Point2>& points);

std::string roadmap_to_json(const Roadmap& rm);
Roadmap roadmap_from_json(const std::string& text);
void save_roadmap(const std::filesystem::path& path, const Roadmap& rm);
Roadmap load_roadmap(const std::filesystem::path& path);

}  // namespace sharednav
