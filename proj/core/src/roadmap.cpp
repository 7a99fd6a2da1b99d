#include "sharednav/roadmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

#include <json.hpp>

#include "sharednav/error.hpp"

namespace sharednav {

namespace {

constexpr int kFormatVersion = 1;
constexpr int kQueryLinks = 5;

// Node indices sorted by (distance to p, index).
std::vector<std::size_t> by_distance(const std::vector<Point2>& nodes, Point2 p) {
  std::vector<double> d(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) d[i] = distance(nodes[i], p);
  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  return order;
}

}  // namespace

std::size_t Roadmap::edge_count() const {
  std::size_t n = 0;
  for (const auto& adj : adjacency) n += adj.size();
  return n / 2;
}

Roadmap build_prm(const OccupancyGrid& grid, double clearance, std::uint64_t seed, const PrmOptions& options) {
  if (!(clearance >= 0.0)) throw InvalidArgument("build_prm: clearance must be non-negative");
  if (!(options.density > 0.0) || options.neighbours < 1 || options.candidate_factor < 1)
    throw InvalidArgument("build_prm: bad options");

  std::vector<std::pair<int, int>> free_cells;
  for (int iy = 0; iy < grid.height(); ++iy)
    for (int ix = 0; ix < grid.width(); ++ix)
      if (grid.at(ix, iy) == Occupancy::Free) free_cells.emplace_back(ix, iy);
  const auto target = static_cast<std::size_t>(std::llround(options.density * grid.free_area()));
  if (target < 2) throw InvalidArgument("build_prm: free space too small to host two nodes");

  Roadmap rm;
  rm.seed = seed;
  rm.clearance = clearance;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, free_cells.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = grid.resolution();
  const std::size_t max_attempts = 1000 * target;
  std::size_t attempts = 0;
  while (rm.nodes.size() < target) {
    if (++attempts > max_attempts)
      throw InvalidArgument("build_prm: could not place nodes; clearance too large for the free space");
    const auto [ix, iy] = free_cells[pick(rng)];
    const double gx = (ix + unit(rng)) * r;
    const double gy = (iy + unit(rng)) * r;
    const Point2 p = grid.to_world({gx, gy});
    if (is_free(grid, p, clearance)) rm.nodes.push_back(p);
  }

  const std::size_t n = rm.nodes.size();
  rm.adjacency.assign(n, {});
  const auto k = static_cast<std::size_t>(options.neighbours);
  const std::size_t candidates = k * static_cast<std::size_t>(options.candidate_factor);
  auto linked = [&](std::size_t a, std::size_t b) {
    return std::any_of(rm.adjacency[a].begin(), rm.adjacency[a].end(), [&](const RoadmapEdge& e) { return e.to == b; });
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto order = by_distance(rm.nodes, rm.nodes[i]);
    std::size_t found = 0;
    for (std::size_t c = 1; c < order.size() && c <= candidates && found < k; ++c) {
      const std::size_t j = order[c];
      if (linked(i, j)) {
        ++found;
        continue;
      }
      if (!segment_is_free(grid, rm.nodes[i], rm.nodes[j], clearance)) continue;
      const double len = distance(rm.nodes[i], rm.nodes[j]);
      rm.adjacency[i].push_back({j, len});
      rm.adjacency[j].push_back({i, len});
      ++found;
    }
  }

  // Narrow passages can leave the k-nearest graph split even though the free space is
  // connected. Each node tries to reach the nearest nodes of other components.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = n;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& e : rm.adjacency[i])
      if (find(i) != find(e.to)) {
        parent[find(i)] = find(e.to);
        --components;
      }
  for (std::size_t i = 0; i < n && components > 1; ++i) {
    std::size_t tried = 0;
    for (std::size_t j : by_distance(rm.nodes, rm.nodes[i])) {
      if (tried == candidates || components == 1) break;
      if (find(i) == find(j)) continue;
      ++tried;
      if (!segment_is_free(grid, rm.nodes[i], rm.nodes[j], clearance)) continue;
      const double len = distance(rm.nodes[i], rm.nodes[j]);
      rm.adjacency[i].push_back({j, len});
      rm.adjacency[j].push_back({i, len});
      parent[find(i)] = find(j);
      --components;
    }
  }

  for (auto& adj : rm.adjacency)
    std::sort(adj.begin(), adj.end(), [](const RoadmapEdge& a, const RoadmapEdge& b) { return a.to < b.to; });
  return rm;
}

std::vector<Point2> shortest_path(const Roadmap& rm, const OccupancyGrid& grid, Point2 p0, Point2 pf) {
  if (p0 == pf) return {p0};
  if (!is_free(grid, p0, rm.clearance)) throw NoPathError("shortest_path: start point is not free");
  if (!is_free(grid, pf, rm.clearance)) throw NoPathError("shortest_path: goal point is not free");

  const std::size_t n = rm.nodes.size();
  const std::size_t src = n;
  const std::size_t dst = n + 1;
  std::vector<std::vector<RoadmapEdge>> extra(n + 2);
  auto link_query = [&](std::size_t q, Point2 p) {
    int links = 0;
    for (std::size_t j : by_distance(rm.nodes, p)) {
      if (links == kQueryLinks) break;
      if (!segment_is_free(grid, p, rm.nodes[j], rm.clearance)) continue;
      const double len = distance(p, rm.nodes[j]);
      extra[q].push_back({j, len});
      extra[j].push_back({q, len});
      ++links;
    }
  };
  link_query(src, p0);
  link_query(dst, pf);
  if (segment_is_free(grid, p0, pf, rm.clearance)) {
    extra[src].push_back({dst, distance(p0, pf)});
    extra[dst].push_back({src, distance(p0, pf)});
  }
  if (extra[src].empty()) throw NoPathError("shortest_path: start point cannot reach the roadmap");
  if (extra[dst].empty()) throw NoPathError("shortest_path: goal point cannot reach the roadmap");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  std::vector<double> dist(n + 2, kInf);
  std::vector<std::size_t> prev(n + 2, kNone);
  std::vector<bool> done(n + 2, false);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[src] = 0.0;
  queue.push({0.0, src});
  auto relax = [&](std::size_t u, const RoadmapEdge& e) {
    const double nd = dist[u] + e.length;
    if (nd < dist[e.to] || (nd == dist[e.to] && u < prev[e.to])) {
      dist[e.to] = nd;
      prev[e.to] = u;
      queue.push({nd, e.to});
    }
  };
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (done[u]) continue;
    done[u] = true;
    if (u == dst) break;
    if (u < n)
      for (const auto& e : rm.adjacency[u])
        if (!done[e.to]) relax(u, e);
    for (const auto& e : extra[u])
      if (!done[e.to]) relax(u, e);
  }
  if (dist[dst] == kInf) throw NoPathError("shortest_path: start and goal lie in different roadmap components");

  std::vector<Point2> path;
  for (std::size_t v = dst; v != kNone; v = prev[v]) {
    if (v == src)
      path.push_back(p0);
    else if (v == dst)
      path.push_back(pf);
    else
      path.push_back(rm.nodes[v]);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

double polyline_length(const std::vector<Point2>& points) {
  double len = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) len += distance(points[i - 1], points[i]);
  return len;
}

std::string roadmap_to_json(const Roadmap& rm) {
  nlohmann::json j;
  j["format"] = "sharednav-roadmap";
  j["version"] = kFormatVersion;
  j["seed"] = rm.seed;
  j["clearance"] = rm.clearance;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& p : rm.nodes) nodes.push_back({p.x, p.y});
  auto& edges = j["edges"] = nlohmann::json::array();
  for (std::size_t i = 0; i < rm.adjacency.size(); ++i)
    for (const auto& e : rm.adjacency[i])
      if (i < e.to) edges.push_back({i, e.to});
  return j.dump();
}

Roadmap roadmap_from_json(const std::string& text) {
  Roadmap rm;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "sharednav-roadmap") throw FormatError("roadmap: unexpected format tag");
    if (j.at("version").get<int>() != kFormatVersion)
      throw FormatError("roadmap: unsupported version " + j.at("version").dump());
    rm.seed = j.at("seed").get<std::uint64_t>();
    rm.clearance = j.at("clearance").get<double>();
    for (const auto& p : j.at("nodes")) rm.nodes.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    rm.adjacency.assign(rm.nodes.size(), {});
    for (const auto& e : j.at("edges")) {
      const auto a = e.at(0).get<std::size_t>();
      const auto b = e.at(1).get<std::size_t>();
      if (a >= rm.nodes.size() || b >= rm.nodes.size() || a == b) throw FormatError("roadmap: bad edge");
      const double len = distance(rm.nodes[a], rm.nodes[b]);
      rm.adjacency[a].push_back({b, len});
      rm.adjacency[b].push_back({a, len});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("roadmap: ") + e.what());
  }
  for (auto& adj : rm.adjacency)
    std::sort(adj.begin(), adj.end(), [](const RoadmapEdge& a, const RoadmapEdge& b) { return a.to < b.to; });
  return rm;
}

void save_roadmap(const std::filesystem::path& path, const Roadmap& rm) {
  std::ofstream out(path);
  if (!out) throw FormatError("roadmap: cannot write " + path.string());
  out << roadmap_to_json(rm) << '\n';
}

Roadmap load_roadmap(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("roadmap: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return roadmap_from_json(ss.str());
}

}  // namespace sharednav
