#include "sharednav/behmap.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <tuple>
#include <sstream>

#include <json.hpp>

#include "sharednav/error.hpp"
#include "sharednav/random.hpp"

namespace sharednav {

namespace {

constexpr int kMapFormatVersion = 1;
constexpr int kTrajectoryFormatVersion = 1;

// Neumaier summation; exact enough for centroids to be independent of grouping.
struct CompensatedSum {
  double sum = 0.0;
  double c = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      c += (sum - t) + x;
    else
      c += (x - t) + sum;
    sum = t;
  }
  void add(const CompensatedSum& o) {
    add(o.sum);
    add(o.c);
  }
  double value() const { return sum + c; }
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16) throw FormatError("expected a 16-digit hex fingerprint, got '" + s + "'");
  std::uint64_t v = 0;
  for (char ch : s) {
    v <<= 4;
    if (ch >= '0' && ch <= '9')
      v |= static_cast<std::uint64_t>(ch - '0');
    else if (ch >= 'a' && ch <= 'f')
      v |= static_cast<std::uint64_t>(ch - 'a' + 10);
    else
      throw FormatError("bad hex digit in fingerprint '" + s + "'");
  }
  return v;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

// Uniform samples; the ragged final sample that sample_path appends is dropped.
std::vector<PathSample> uniform_samples(const ClothoidPath& path, double spacing) {
  auto samples = sample_path(path, spacing);
  if (samples.size() >= 2) {
    const double gap = samples.back().s - samples[samples.size() - 2].s;
    if (std::abs(gap - spacing) > 0.01 * spacing) samples.pop_back();
  }
  return samples;
}

double heading_of_column(const FeatureWindow& w, Eigen::Index j) { return std::atan2(w(3, j), w(2, j)); }

Behaviour label_from_change(double dtheta, double threshold) {
  if (dtheta > threshold) return Behaviour::Left;
  if (dtheta < -threshold) return Behaviour::Right;
  return Behaviour::Straight;
}

Point2 random_free_point(const OccupancyGrid& grid, const std::vector<std::pair<int, int>>& free_cells,
                         double clearance, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const auto [ix, iy] = free_cells[static_cast<std::size_t>(rng() % free_cells.size())];
    const double r = grid.resolution();
    const Point2 p = grid.to_world({(ix + uniform01(rng)) * r, (iy + uniform01(rng)) * r});
    if (is_free(grid, p, clearance)) return p;
  }
  throw NoPathError("generate_trajectories: no free point with the requested clearance");
}

std::vector<Point2> without_duplicates(const std::vector<Point2>& points) {
  std::vector<Point2> out;
  for (const auto& p : points)
    if (out.empty() || distance(out.back(), p) > 1e-6) out.push_back(p);
  return out;
}

// Drops interior points closer than `spacing` to the previous kept point.
std::vector<Point2> thin_waypoints(const std::vector<Point2>& points, double spacing) {
  if (points.size() <= 2 || !(spacing > 0.0)) return points;
  std::vector<Point2> out{points.front()};
  for (std::size_t i = 1; i + 1 < points.size(); ++i)
    if (distance(out.back(), points[i]) >= spacing) out.push_back(points[i]);
  while (out.size() > 1 && distance(out.back(), points.back()) < spacing) out.pop_back();
  out.push_back(points.back());
  return out;
}

std::vector<Point2> densify(const std::vector<Point2>& points) {
  std::vector<Point2> out{points.front()};
  for (std::size_t i = 1; i < points.size(); ++i) {
    out.push_back({0.5 * (points[i - 1].x + points[i].x), 0.5 * (points[i - 1].y + points[i].y)});
    out.push_back(points[i]);
  }
  return out;
}

}  // namespace

Behaviour label_window(const FeatureWindow& w, double turn_threshold) {
  if (w.cols() < 2) throw InvalidArgument("label_window: need at least two samples");
  const double dtheta = wrap_angle(heading_of_column(w, w.cols() - 1) - heading_of_column(w, 0));
  return label_from_change(dtheta, turn_threshold);
}

Behaviour label_span(std::span<const PathSample> samples, std::size_t first, std::size_t last, double turn_threshold) {
  if (last >= samples.size() || first > last) throw InvalidArgument("label_span: bad range");
  // Accumulate wrapped increments so spans turning more than pi keep their sign.
  double dtheta = 0.0;
  for (std::size_t i = first + 1; i <= last; ++i) dtheta += wrap_angle(samples[i].theta - samples[i - 1].theta);
  return label_from_change(dtheta, turn_threshold);
}

double mean_heading(std::span<const PathSample> samples, std::size_t first, std::size_t last) {
  if (last >= samples.size() || first > last) throw InvalidArgument("mean_heading: bad range");
  double c = 0.0, s = 0.0;
  for (std::size_t i = first; i <= last; ++i) {
    c += std::cos(samples[i].theta);
    s += std::sin(samples[i].theta);
  }
  return wrap_angle(std::atan2(s, c));
}

std::vector<CellVisit> cell_visits(const BehaviourGrid& bg, std::span<const PathSample> samples) {
  std::vector<CellVisit> visits;
  bool open = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Point2 p{samples[i].x, samples[i].y};
    if (!bg.contains(p)) {
      open = false;
      continue;
    }
    const CellIndex c = bg.cell_of(p);
    if (open && visits.back().cell == c) {
      visits.back().last = i;
    } else {
      visits.push_back({c, i, i, i, 0.0});
      open = true;
    }
  }
  for (auto& v : visits) {
    const Point2 centre = bg.cell_center(v.cell);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = v.first; i <= v.last; ++i) {
      const double d = distance({samples[i].x, samples[i].y}, centre);
      if (d < best) {
        best = d;
        v.anchor = i;
      }
    }
    v.direction = mean_heading(samples, v.first, v.last);
  }
  return visits;
}

std::vector<Point2> shortcut_polyline(const OccupancyGrid& grid, const std::vector<Point2>& points, double clearance) {
  if (points.size() <= 2) return points;
  std::vector<Point2> out{points.front()};
  std::size_t i = 0;
  while (i + 1 < points.size()) {
    std::size_t next = i + 1;
    for (std::size_t j = points.size() - 1; j > i + 1; --j) {
      if (segment_is_free(grid, points[i], points[j], clearance)) {
        next = j;
        break;
      }
    }
    out.push_back(points[next]);
    i = next;
  }
  return out;
}

ClothoidPath plan_route(const OccupancyGrid& grid, const Roadmap& rm, Point2 p0, Point2 pf,
                        const RouteOptions& options) {
  const auto raw = without_duplicates(shortest_path(rm, grid, p0, pf));
  if (raw.size() < 2) throw NoPathError("plan_route: start and goal coincide");
  const double step = grid.resolution();
  auto attempt = [&](std::vector<Point2> points) -> std::optional<ClothoidPath> {
    for (int round = 0; round <= options.densify_rounds; ++round) {
      ClothoidPath path;
      try {
        path = fit_spline(std::span<const Point2>(points), options.spline);
      } catch (const ConvergenceError&) {
        points = densify(points);
        continue;
      }
      // A looping fit is never a usable route (and would be expensive to sample).
      if (path.length() > 2.0 * polyline_length(points)) {
        points = densify(points);
        continue;
      }
      std::vector<bool> bad(path.segments().size(), false);
      bool any = false;
      for (const auto& s : sample_path(path, step)) {
        if (!is_free(grid, {s.x, s.y}, options.clearance)) {
          bad[path.segment_at(s.s)] = true;
          any = true;
        }
      }
      if (!any) return path;
      // Split only the waypoint intervals whose segment collides.
      std::vector<Point2> next{points.front()};
      for (std::size_t i = 1; i < points.size(); ++i) {
        if (bad[i - 1])
          next.push_back({0.5 * (points[i - 1].x + points[i].x), 0.5 * (points[i - 1].y + points[i].y)});
        next.push_back(points[i]);
      }
      points = std::move(next);
    }
    return std::nullopt;
  };
  const auto thinned = thin_waypoints(raw, options.min_spacing);
  const auto first =
      options.shortcut ? shortcut_polyline(grid, thinned, options.clearance + options.shortcut_margin) : thinned;
  if (auto path = attempt(first)) return *path;
  if (first.size() != raw.size())
    if (auto path = attempt(raw)) return *path;
  throw NoPathError("plan_route: no collision-free smooth path");
}

std::vector<Trajectory> generate_trajectories(const OccupancyGrid& grid, const Roadmap& rm, std::size_t count,
                                              std::uint64_t seed, const TrajectoryOptions& options) {
  const auto& ws = options.window;
  if (ws.length < 2 || !(ws.spacing > 0.0)) throw InvalidArgument("generate_trajectories: bad window spec");
  std::vector<std::pair<int, int>> free_cells;
  for (int iy = 0; iy < grid.height(); ++iy)
    for (int ix = 0; ix < grid.width(); ++ix)
      if (grid.at(ix, iy) == Occupancy::Free) free_cells.emplace_back(ix, iy);
  if (free_cells.empty()) throw NoPathError("generate_trajectories: map has no free space");

  const auto bg = BehaviourGrid::covering(grid);
  const auto n = static_cast<std::size_t>(ws.length);
  const double min_length = ws.length * ws.spacing;
  const std::size_t quota = (count + 2) / 3;
  std::array<std::size_t, 3> accepted{};
  std::mt19937_64 rng(derive_seed(seed, 11));
  std::vector<Trajectory> out;
  out.reserve(count);
  const std::size_t budget = std::max<std::size_t>(1, count) * static_cast<std::size_t>(options.attempts_per_path);
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > budget)
      throw NoPathError("generate_trajectories: only " + std::to_string(out.size()) + " of " + std::to_string(count) +
                        " paths found within the attempt budget");
    Trajectory t;
    t.p0 = random_free_point(grid, free_cells, rm.clearance, rng);
    t.pf = random_free_point(grid, free_cells, rm.clearance, rng);
    if (distance(t.p0, t.pf) < min_length) continue;
    try {
      t.path = plan_route(grid, rm, t.p0, t.pf, options.route);
    } catch (const NoPathError&) {
      continue;
    }
    t.samples = uniform_samples(t.path, ws.spacing);
    if (std::any_of(t.samples.begin(), t.samples.end(),
                    [&](const PathSample& p) { return std::abs(p.kappa) > options.max_curvature; }))
      continue;

    std::array<std::vector<std::size_t>, 3> candidates;
    for (const auto& v : cell_visits(bg, t.samples)) {
      if (v.anchor + 1 < n) continue;
      const auto label = label_window(make_window(t.samples, v.anchor, n), ws.turn_threshold);
      candidates[static_cast<std::size_t>(label)].push_back(v.anchor);
    }
    int chosen = -1;
    if (options.balance) {
      // The open class with the most room left, so scarce turn windows are kept.
      std::size_t room = 0;
      for (int c = 0; c < 3; ++c) {
        if (candidates[c].empty() || accepted[c] >= quota) continue;
        if (quota - accepted[c] > room) {
          room = quota - accepted[c];
          chosen = c;
        }
      }
    } else {
      std::size_t total = 0;
      for (const auto& c : candidates) total += c.size();
      if (total > 0) {
        std::size_t pick = static_cast<std::size_t>(rng() % total);
        for (int c = 0; c < 3 && chosen < 0; ++c) {
          if (pick < candidates[c].size()) {
            chosen = c;
            t.window_end = candidates[c][pick];
          } else {
            pick -= candidates[c].size();
          }
        }
      }
    }
    if (chosen < 0) continue;
    if (options.balance) {
      const auto& cs = candidates[static_cast<std::size_t>(chosen)];
      t.window_end = cs[static_cast<std::size_t>(rng() % cs.size())];
    }
    t.label = static_cast<Behaviour>(chosen);
    ++accepted[static_cast<std::size_t>(chosen)];
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<FeatureWindow> training_windows(std::span<const Trajectory> trajectories, const WindowSpec& window) {
  std::vector<FeatureWindow> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories)
    out.push_back(make_window(t.samples, t.window_end, static_cast<std::size_t>(window.length)));
  return out;
}

std::vector<Behaviour> training_labels(std::span<const Trajectory> trajectories) {
  std::vector<Behaviour> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) out.push_back(t.label);
  return out;
}

void save_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories,
                       std::uint64_t seed, const WindowSpec& window) {
  nlohmann::json j;
  j["format"] = "sharednav-trajectories";
  j["version"] = kTrajectoryFormatVersion;
  j["seed"] = seed;
  j["window"] = {{"length", window.length}, {"spacing", window.spacing}, {"turn_threshold", window.turn_threshold}};
  auto& arr = j["trajectories"] = nlohmann::json::array();
  for (const auto& t : trajectories) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : t.path.segments())
      segs.push_back({s.start().x, s.start().y, s.start().theta, s.kappa0(), s.kappa_rate(), s.length()});
    arr.push_back({{"p0", {t.p0.x, t.p0.y}},
                   {"pf", {t.pf.x, t.pf.y}},
                   {"segments", std::move(segs)},
                   {"window_end", t.window_end},
                   {"label", behaviour_name(t.label)}});
  }
  write_text(path, j.dump() + "\n");
}

TrajectorySet load_trajectories(const std::filesystem::path& path) {
  TrajectorySet set;
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    if (j.at("format") != "sharednav-trajectories") throw FormatError("not a trajectory file: " + path.string());
    if (j.at("version") != kTrajectoryFormatVersion)
      throw FormatError("unsupported trajectory file version in " + path.string());
    set.seed = j.at("seed").get<std::uint64_t>();
    set.window.length = j.at("window").at("length").get<int>();
    set.window.spacing = j.at("window").at("spacing").get<double>();
    set.window.turn_threshold = j.at("window").at("turn_threshold").get<double>();
    for (const auto& jt : j.at("trajectories")) {
      Trajectory t;
      t.p0 = {jt.at("p0").at(0).get<double>(), jt.at("p0").at(1).get<double>()};
      t.pf = {jt.at("pf").at(0).get<double>(), jt.at("pf").at(1).get<double>()};
      std::vector<ClothoidSegment> segs;
      for (const auto& s : jt.at("segments"))
        segs.emplace_back(Pose2{s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()},
                          s.at(3).get<double>(), s.at(4).get<double>(), s.at(5).get<double>());
      t.path = ClothoidPath(std::move(segs));
      t.samples = uniform_samples(t.path, set.window.spacing);
      t.window_end = jt.at("window_end").get<std::size_t>();
      t.label = parse_behaviour(jt.at("label").get<std::string>());
      if (t.window_end >= t.samples.size() || t.window_end + 1 < static_cast<std::size_t>(set.window.length))
        throw FormatError("trajectory window out of range in " + path.string());
      set.trajectories.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed trajectory file " + path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError("invalid trajectory in " + path.string() + ": " + e.what());
  }
  return set;
}

BehaviouralMap::BehaviouralMap(BehaviourGrid grid, MapProvenance provenance, double merge_threshold)
    : grid_(grid), provenance_(provenance), merge_threshold_(merge_threshold) {}

std::span<const CellBehaviour> BehaviouralMap::clusters(CellIndex c) const {
  const auto it = cells_.find(c);
  if (it == cells_.end()) return {};
  return it->second;
}

const CellBehaviour* BehaviouralMap::nearest(CellIndex c, Behaviour b, double direction, double max_difference) const {
  const CellBehaviour* best = nullptr;
  double best_d = max_difference;
  for (const auto& cl : clusters(c)) {
    if (cl.behaviour != b) continue;
    const double d = angle_distance(cl.direction, direction);
    if (d <= best_d && (best == nullptr || d < best_d)) {
      best = &cl;
      best_d = d;
    }
  }
  return best;
}

std::size_t BehaviouralMap::cluster_count() const {
  std::size_t n = 0;
  for (const auto& [c, v] : cells_) n += v.size();
  return n;
}

std::size_t BehaviouralMap::member_total() const {
  std::size_t n = 0;
  for (const auto& [c, v] : cells_)
    for (const auto& cl : v) n += cl.member_count;
  return n;
}

void BehaviouralMap::set_clusters(CellIndex c, std::vector<CellBehaviour> clusters) {
  if (!grid_.contains(c)) throw InvalidArgument("BehaviouralMap: cell outside the grid");
  for (const auto& cl : clusters)
    if (cl.member_count < 1 || !(cl.cell == c)) throw InvalidArgument("BehaviouralMap: malformed cluster");
  if (clusters.empty())
    cells_.erase(c);
  else
    cells_[c] = std::move(clusters);
}

std::vector<Crossing> classify_crossings(std::span<const Trajectory> trajectories, const Encoder& encoder,
                                         const ClassifierHead& head, const BehaviourGrid& bg,
                                         const WindowSpec& window) {
  const auto n = static_cast<std::size_t>(window.length);
  std::vector<Crossing> out;
  for (const auto& t : trajectories) {
    for (const auto& v : cell_visits(bg, t.samples)) {
      if (v.anchor + 1 < n) continue;
      const Vector z = encoder.encode(make_window(t.samples, v.anchor, n));
      if (z.size() != 5) throw InvalidArgument("classify_crossings: latent size must be 5");
      Crossing c;
      c.cell = v.cell;
      c.behaviour = head.classify(z).argmax();
      c.direction = v.direction;
      for (int i = 0; i < 5; ++i) c.latent[static_cast<std::size_t>(i)] = z(i);
      out.push_back(c);
    }
  }
  return out;
}

BehaviouralMap cluster_crossings(std::vector<Crossing> crossings, const BehaviourGrid& bg, MapProvenance provenance,
                                 double merge_threshold) {
  auto key = [](const Crossing& c) { return std::tie(c.cell, c.behaviour, c.direction, c.latent); };
  std::sort(crossings.begin(), crossings.end(), [&](const Crossing& a, const Crossing& b) { return key(a) < key(b); });

  struct Acc {
    CompensatedSum c, s;
    std::array<CompensatedSum, 5> z;
    std::size_t count = 0;
    double direction() const { return wrap_angle(std::atan2(s.value(), c.value())); }
    void add(const Acc& o) {
      c.add(o.c);
      s.add(o.s);
      for (std::size_t i = 0; i < 5; ++i) z[i].add(o.z[i]);
      count += o.count;
    }
  };

  BehaviouralMap bm(bg, provenance, merge_threshold);
  std::size_t i = 0;
  while (i < crossings.size()) {
    const CellIndex cell = crossings[i].cell;
    std::vector<CellBehaviour> clusters;
    while (i < crossings.size() && crossings[i].cell == cell) {
      const Behaviour b = crossings[i].behaviour;
      std::vector<Acc> accs;
      for (; i < crossings.size() && crossings[i].cell == cell && crossings[i].behaviour == b; ++i) {
        const auto& x = crossings[i];
        Acc one;
        one.c.add(std::cos(x.direction));
        one.s.add(std::sin(x.direction));
        for (std::size_t k = 0; k < 5; ++k) one.z[k].add(x.latent[k]);
        one.count = 1;
        Acc* target = nullptr;
        double best = merge_threshold;
        for (auto& a : accs) {
          const double d = angle_distance(a.direction(), x.direction);
          if (d < best) {
            best = d;
            target = &a;
          }
        }
        if (target)
          target->add(one);
        else
          accs.push_back(one);
      }
      // Means move as members join; merge clusters that ended up too close.
      for (;;) {
        std::size_t ba = 0, bb = 0;
        double best = merge_threshold;
        for (std::size_t a = 0; a < accs.size(); ++a)
          for (std::size_t c = a + 1; c < accs.size(); ++c) {
            const double d = angle_distance(accs[a].direction(), accs[c].direction());
            if (d < best) {
              best = d;
              ba = a;
              bb = c;
            }
          }
        if (best >= merge_threshold) break;
        accs[ba].add(accs[bb]);
        accs.erase(accs.begin() + static_cast<std::ptrdiff_t>(bb));
      }
      for (const auto& a : accs) {
        CellBehaviour cb;
        cb.cell = cell;
        cb.behaviour = b;
        cb.direction = a.direction();
        cb.member_count = a.count;
        for (std::size_t k = 0; k < 5; ++k) cb.centroid[k] = a.z[k].value() / static_cast<double>(a.count);
        clusters.push_back(cb);
      }
    }
    std::sort(clusters.begin(), clusters.end(), [](const CellBehaviour& a, const CellBehaviour& b) {
      return std::tie(a.behaviour, a.direction) < std::tie(b.behaviour, b.direction);
    });
    bm.set_clusters(cell, std::move(clusters));
  }
  return bm;
}

BehaviouralMap build_behavioural_map(std::span<const Trajectory> trajectories, const Encoder& encoder,
                                     const ClassifierHead& head, const BehaviourGrid& bg, const WindowSpec& window,
                                     std::uint64_t seed, double merge_threshold) {
  MapProvenance prov{seed, trajectories.size(), fingerprint(encoder), fingerprint(head)};
  return cluster_crossings(classify_crossings(trajectories, encoder, head, bg, window), bg, prov, merge_threshold);
}

void save_behavioural_map(const std::filesystem::path& path, const BehaviouralMap& bm) {
  nlohmann::json j;
  j["format"] = "sharednav-behaviour-map";
  j["version"] = kMapFormatVersion;
  const auto& p = bm.provenance();
  j["provenance"] = {{"seed", p.seed},
                     {"trajectory_count", p.trajectory_count},
                     {"encoder", hex64(p.encoder)},
                     {"head", hex64(p.head)}};
  const auto& g = bm.grid();
  j["grid"] = {{"origin", {g.origin().x, g.origin().y}}, {"nx", g.nx()}, {"ny", g.ny()}, {"cell_size", g.cell_size()}};
  j["merge_threshold"] = bm.merge_threshold();
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const auto& [c, clusters] : bm.cells()) {
    nlohmann::json jc = nlohmann::json::array();
    for (const auto& cl : clusters)
      jc.push_back({{"class", behaviour_name(cl.behaviour)},
                    {"direction", cl.direction},
                    {"centroid", cl.centroid},
                    {"members", cl.member_count}});
    cells.push_back({{"ix", c.ix}, {"iy", c.iy}, {"clusters", std::move(jc)}});
  }
  write_text(path, j.dump(1) + "\n");
}

BehaviouralMap load_behavioural_map(const std::filesystem::path& path) {
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    if (j.at("format") != "sharednav-behaviour-map") throw FormatError("not a behaviour map: " + path.string());
    if (j.at("version") != kMapFormatVersion)
      throw FormatError("behaviour map " + path.string() + " has version " + j.at("version").dump() +
                        ", expected " + std::to_string(kMapFormatVersion));
    const auto& jp = j.at("provenance");
    MapProvenance prov{jp.at("seed").get<std::uint64_t>(), jp.at("trajectory_count").get<std::size_t>(),
                       parse_hex64(jp.at("encoder").get<std::string>()), parse_hex64(jp.at("head").get<std::string>())};
    const auto& jg = j.at("grid");
    BehaviourGrid grid({jg.at("origin").at(0).get<double>(), jg.at("origin").at(1).get<double>()},
                       jg.at("nx").get<int>(), jg.at("ny").get<int>());
    BehaviouralMap bm(grid, prov, j.at("merge_threshold").get<double>());
    for (const auto& jc : j.at("cells")) {
      const CellIndex c{jc.at("ix").get<int>(), jc.at("iy").get<int>()};
      std::vector<CellBehaviour> clusters;
      for (const auto& jl : jc.at("clusters")) {
        CellBehaviour cb;
        cb.cell = c;
        cb.behaviour = parse_behaviour(jl.at("class").get<std::string>());
        cb.direction = jl.at("direction").get<double>();
        cb.centroid = jl.at("centroid").get<std::array<double, 5>>();
        cb.member_count = jl.at("members").get<std::size_t>();
        clusters.push_back(cb);
      }
      bm.set_clusters(c, std::move(clusters));
    }
    return bm;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed behaviour map " + path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError("invalid behaviour map " + path.string() + ": " + e.what());
  }
}

void check_provenance(const BehaviouralMap& bm, const Encoder& encoder, const ClassifierHead& head) {
  const auto enc = fingerprint(encoder);
  const auto hd = fingerprint(head);
  if (bm.provenance().encoder != enc || bm.provenance().head != hd)
    throw ProvenanceError("behaviour map was built with models " + hex64(bm.provenance().encoder) + "/" +
                          hex64(bm.provenance().head) + " but the loaded models are " + hex64(enc) + "/" + hex64(hd));
}

BehaviouralMap load_behavioural_map(const std::filesystem::path& path, const Encoder& encoder,
                                    const ClassifierHead& head) {
  auto bm = load_behavioural_map(path);
  check_provenance(bm, encoder, head);
  return bm;
}

void write_behavioural_map_csv(const std::filesystem::path& path, const BehaviouralMap& bm) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "ix,iy,center_x,center_y,class,direction_rad,members,z0,z1,z2,z3,z4\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& [c, clusters] : bm.cells()) {
    const Point2 centre = bm.grid().cell_center(c);
    for (const auto& cl : clusters) {
      out << c.ix << ',' << c.iy << ',' << num(centre.x) << ',' << num(centre.y) << ','
          << behaviour_name(cl.behaviour) << ',' << num(cl.direction) << ',' << cl.member_count;
      for (double z : cl.centroid) out << ',' << num(z);
      out << '\n';
    }
  }
}

void write_behavioural_map_svg(const std::filesystem::path& path, const BehaviouralMap& bm, const OccupancyGrid& grid) {
  const auto& bg = bm.grid();
  constexpr double px = 48.0;  // pixels per metre
  const double w = bg.nx() * px, h = bg.ny() * px;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  auto sx = [&](double x) { return (x - bg.origin().x) * px; };
  auto sy = [&](double y) { return h - (y - bg.origin().y) * px; };
  // Obstacles at map resolution, one rectangle per occupied run of a row.
  const double r = grid.resolution();
  for (int iy = 0; iy < grid.height(); ++iy) {
    int ix = 0;
    while (ix < grid.width()) {
      if (grid.at(ix, iy) == Occupancy::Free) {
        ++ix;
        continue;
      }
      const int start = ix;
      while (ix < grid.width() && grid.at(ix, iy) != Occupancy::Free) ++ix;
      const Point2 a = grid.to_world({start * r, iy * r});
      out << "<rect x=\"" << sx(a.x) << "\" y=\"" << sy(a.y + r) << "\" width=\"" << (ix - start) * r * px
          << "\" height=\"" << r * px << "\" fill=\"#555555\"/>\n";
    }
  }
  static const char* colours[3] = {"#1f77b4", "#d62728", "#2ca02c"};
  for (const auto& [c, clusters] : bm.cells()) {
    const Point2 corner = bg.cell_corner(c);
    out << "<rect x=\"" << sx(corner.x) << "\" y=\"" << sy(corner.y + 1.0) << "\" width=\"" << px << "\" height=\""
        << px << "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
    const Point2 centre = bg.cell_center(c);
    for (const auto& cl : clusters) {
      const double len = 0.4;
      const double x1 = centre.x + len * std::cos(cl.direction), y1 = centre.y + len * std::sin(cl.direction);
      out << "<line x1=\"" << sx(centre.x) << "\" y1=\"" << sy(centre.y) << "\" x2=\"" << sx(x1) << "\" y2=\""
          << sy(y1) << "\" stroke=\"" << colours[static_cast<int>(cl.behaviour)] << "\" stroke-width=\"3\"/>\n";
    }
  }
  out << "</svg>\n";
}

std::size_t Mission::cell_at(double s) const {
  if (cells.empty()) throw InvalidArgument("Mission: no cells");
  const auto it = std::upper_bound(cells.begin(), cells.end(), s,
                                   [](double v, const MissionCell& c) { return v < c.s_begin; });
  if (it == cells.begin()) return 0;
  return static_cast<std::size_t>(it - cells.begin()) - 1;
}

Mission plan_mission(const OccupancyGrid& grid, const Roadmap& rm, const BehaviouralMap& bm, Point2 p0, Point2 pf,
                     const MissionOptions& options) {
  Mission m;
  m.p0 = p0;
  m.pf = pf;
  m.window = options.window;
  m.path = plan_route(grid, rm, p0, pf, options.route);
  m.samples = uniform_samples(m.path, options.window.spacing);
  const auto n = static_cast<std::size_t>(options.window.length);
  for (const auto& v : cell_visits(bm.grid(), m.samples)) {
    MissionCell mc;
    mc.cell = v.cell;
    mc.s_begin = m.cells.empty() ? 0.0 : m.samples[v.first].s;
    mc.s_end = m.samples[v.last].s;
    const std::size_t first = v.anchor + 1 >= n ? v.anchor + 1 - n : 0;
    mc.own = label_span(m.samples, first, v.anchor, options.window.turn_threshold);
    mc.own_direction = v.direction;
    mc.reference = mc.own;
    mc.reference_direction = mc.own_direction;
    if (const auto* cl = bm.nearest(v.cell, mc.own, mc.own_direction, options.direction_match)) {
      mc.reference_direction = cl->direction;
      mc.from_map = true;
    }
    m.cells.push_back(mc);
  }
  if (m.cells.empty()) throw NoPathError("plan_mission: path does not cross the behaviour grid");
  return m;
}

Confidence confidence(const Mission& mission, std::size_t cell, const FeatureWindow& live, const Encoder& encoder,
                      const ClassifierHead& head) {
  if (cell >= mission.cells.size()) throw InvalidArgument("confidence: cell index out of range");
  const auto& mc = mission.cells[cell];
  const double offset = wrap_angle(mc.reference_direction - mc.own_direction);
  const FeatureWindow w = offset == 0.0 ? live : rotate_window(live, offset);
  Confidence out;
  out.reference = mc.reference;
  out.p = head.classify(encoder.encode(w));
  out.value = out.p[mc.reference];
  return out;
}

std::optional<Confidence> confidence(const Mission& mission, std::size_t cell, const SampleHistory& history,
                                     const Encoder& encoder, const ClassifierHead& head) {
  if (!history.full()) return std::nullopt;
  return confidence(mission, cell, history.window(), encoder, head);
}

}  // namespace sharednav
