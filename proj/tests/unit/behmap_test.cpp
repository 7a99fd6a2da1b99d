#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sharednav/behmap.hpp"
#include "sharednav/error.hpp"
#include "sharednav/random.hpp"
#include "sharednav/scenario.hpp"
#include "support/fixture.hpp"
#include "support/maps.hpp"

using namespace sharednav;

namespace {

// Window whose headings turn uniformly by `total` radians.
FeatureWindow turning_window(double total, int n = 12) {
  std::vector<PathSample> samples;
  double x = 0, y = 0;
  for (int i = 0; i < n; ++i) {
    const double th = total * i / (n - 1);
    samples.push_back({0.1 * i, x, y, th, 0.0});
    x += 0.1 * std::cos(th);
    y += 0.1 * std::sin(th);
  }
  return make_window(samples, samples.size() - 1, samples.size());
}

const OccupancyGrid& cross() {
  static const OccupancyGrid g = cross_grid();
  return g;
}

const Roadmap& cross_roadmap() {
  static const Roadmap rm = build_prm(cross(), 0.35, 4);
  return rm;
}

Crossing random_crossing(std::mt19937_64& rng) {
  Crossing c;
  c.cell = {static_cast<int>(rng() % 3), static_cast<int>(rng() % 3)};
  c.behaviour = static_cast<Behaviour>(rng() % 3);
  c.direction = wrap_angle(uniform01(rng) * 2 * M_PI);
  for (auto& z : c.latent) z = uniform01(rng);
  return c;
}

}  // namespace

TEST(Labels, ThresholdRule) {
  const double th = deg2rad(15.0);
  for (double deg : {-90.0, -30.0, -15.5, -14.5, 0.0, 14.5, 15.5, 30.0, 90.0}) {
    const auto b = label_window(turning_window(deg2rad(deg)), th);
    const Behaviour want = deg > 15.0 ? Behaviour::Left : (deg < -15.0 ? Behaviour::Right : Behaviour::Straight);
    EXPECT_EQ(b, want) << deg;
  }
}

TEST(Labels, SpanKeepsSignBeyondHalfTurn) {
  std::vector<PathSample> samples;
  for (int i = 0; i < 40; ++i) samples.push_back({0.1 * i, 0, 0, wrap_angle(deg2rad(7.0) * i), 0});
  EXPECT_EQ(label_span(samples, 0, 39, deg2rad(15.0)), Behaviour::Left);
}

TEST(Labels, RotationDoesNotChangeTheLabel) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const double turn = deg2rad(-60.0 + 120.0 * uniform01(rng));
    const auto w = turning_window(turn);
    EXPECT_EQ(label_window(rotate_window(w, 6.0 * uniform01(rng) - 3.0), deg2rad(15.0)),
              label_window(w, deg2rad(15.0)));
  }
}

TEST(CellVisits, PartitionInGridSamples) {
  const BehaviourGrid bg({-2.0, -2.0}, 4, 4);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PathSample> samples;
    double x = -2.5 + uniform01(rng), y = -2.5 + uniform01(rng), th = uniform01(rng) * 6;
    for (int i = 0; i < 120; ++i) {
      samples.push_back({0.1 * i, x, y, th, 0});
      th += 0.3 * (uniform01(rng) - 0.5);
      x += 0.1 * std::cos(th);
      y += 0.1 * std::sin(th);
    }
    const auto visits = cell_visits(bg, samples);
    std::size_t covered = 0;
    for (std::size_t k = 0; k < visits.size(); ++k) {
      const auto& v = visits[k];
      ASSERT_LE(v.first, v.anchor);
      ASSERT_LE(v.anchor, v.last);
      if (k) EXPECT_GT(v.first, visits[k - 1].last);
      for (std::size_t i = v.first; i <= v.last; ++i) {
        ASSERT_TRUE(bg.contains(Point2{samples[i].x, samples[i].y}));
        EXPECT_EQ(bg.cell_of({samples[i].x, samples[i].y}), v.cell);
      }
      if (v.first > 0 && bg.contains(Point2{samples[v.first - 1].x, samples[v.first - 1].y}))
        EXPECT_NE(bg.cell_of({samples[v.first - 1].x, samples[v.first - 1].y}), v.cell);
      const Point2 c = bg.cell_center(v.cell);
      for (std::size_t i = v.first; i <= v.last; ++i)
        EXPECT_LE(distance({samples[v.anchor].x, samples[v.anchor].y}, c),
                  distance({samples[i].x, samples[i].y}, c) + 1e-12);
      covered += v.last - v.first + 1;
    }
    const auto inside = std::count_if(samples.begin(), samples.end(),
                                      [&](const PathSample& s) { return bg.contains(Point2{s.x, s.y}); });
    EXPECT_EQ(covered, static_cast<std::size_t>(inside));
  }
}

TEST(Clustering, IndependentOfInputOrder) {
  const BehaviourGrid bg({0, 0}, 3, 3);
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Crossing> xs;
    for (int i = 0; i < 80; ++i) xs.push_back(random_crossing(rng));
    const auto a = cluster_crossings(xs, bg, {});
    shuffle(xs, rng);
    EXPECT_EQ(cluster_crossings(xs, bg, {}), a);
  }
}

TEST(Clustering, ClustersAreSeparatedAndCountEveryCrossing) {
  const BehaviourGrid bg({0, 0}, 3, 3);
  std::mt19937_64 rng(17);
  const double threshold = deg2rad(45.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Crossing> xs;
    for (int i = 0; i < 100; ++i) xs.push_back(random_crossing(rng));
    const auto bm = cluster_crossings(xs, bg, {}, threshold);
    EXPECT_EQ(bm.member_total(), xs.size());
    for (const auto& [cell, clusters] : bm.cells())
      for (std::size_t i = 0; i < clusters.size(); ++i)
        for (std::size_t j = i + 1; j < clusters.size(); ++j)
          if (clusters[i].behaviour == clusters[j].behaviour)
            EXPECT_GE(std::abs(wrap_angle(clusters[i].direction - clusters[j].direction)), threshold);
  }
}

TEST(Clustering, NearestHonoursClassAndGap) {
  const BehaviourGrid bg({0, 0}, 1, 1);
  std::vector<Crossing> xs(2);
  xs[0].behaviour = Behaviour::Left;
  xs[0].direction = 0.0;
  xs[1].behaviour = Behaviour::Left;
  xs[1].direction = M_PI / 2;
  const auto bm = cluster_crossings(xs, bg, {});
  const auto* n = bm.nearest({0, 0}, Behaviour::Left, 1.2, deg2rad(90));
  ASSERT_NE(n, nullptr);
  EXPECT_NEAR(n->direction, M_PI / 2, 1e-12);
  EXPECT_EQ(bm.nearest({0, 0}, Behaviour::Right, 0.0, M_PI), nullptr);
  EXPECT_EQ(bm.nearest({0, 0}, Behaviour::Left, M_PI, deg2rad(30)), nullptr);
  EXPECT_TRUE(bm.clusters({0, 5}).empty());
}

TEST(BehaviourMapFile, RoundTripAndProvenance) {
  const auto& a = fixture::artifacts();
  const auto dir = fixture::scratch_dir("bm");
  save_behavioural_map(dir / "bm.json", a.behaviour_map);
  EXPECT_EQ(load_behavioural_map(dir / "bm.json", a.encoder, a.head), a.behaviour_map);

  ClassifierHead other = a.head;
  other.bias[0] += 1e-3;
  EXPECT_THROW(load_behavioural_map(dir / "bm.json", a.encoder, other), ProvenanceError);
  write_behavioural_map_csv(dir / "bm.csv", a.behaviour_map);
  write_behavioural_map_svg(dir / "bm.svg", a.behaviour_map, a.grid);
  EXPECT_GT(std::filesystem::file_size(dir / "bm.csv"), 0u);
  EXPECT_GT(std::filesystem::file_size(dir / "bm.svg"), 0u);
  std::filesystem::remove_all(dir);
}

TEST(Routes, ShortcutKeepsEndpointsAndClearance) {
  const auto& g = cross();
  const auto nodes = shortest_path(cross_roadmap(), g, {0.0, -4.5}, {-4.5, 0.0});
  ASSERT_GE(nodes.size(), 2u);
  const auto cut = shortcut_polyline(g, nodes, 0.35);
  EXPECT_EQ(cut.front(), nodes.front());
  EXPECT_EQ(cut.back(), nodes.back());
  EXPECT_LE(cut.size(), nodes.size());
  for (std::size_t i = 1; i < cut.size(); ++i) EXPECT_TRUE(segment_is_free(g, cut[i - 1], cut[i], 0.35));
  for (const auto& p : cut) EXPECT_NE(std::find(nodes.begin(), nodes.end(), p), nodes.end());
}

TEST(Routes, PlannedPathIsCollisionFreeBetweenEndpoints) {
  const auto& g = cross();
  const std::pair<Point2, Point2> pairs[] = {
      {{0.0, -4.5}, {-4.5, 0.0}}, {{0.0, -4.5}, {0.0, 4.5}}, {{4.5, 0.0}, {0.0, 4.5}}, {{-4.5, 0.2}, {4.5, -0.2}}};
  for (const auto& [p0, pf] : pairs) {
    const auto path = plan_route(g, cross_roadmap(), p0, pf);
    EXPECT_TRUE(path_is_free(g, path, 0.35, 0.02));
    const auto a = path.eval(0.0).pose, b = path.eval(path.length()).pose;
    EXPECT_NEAR(distance(a.point(), p0), 0.0, 1e-9);
    EXPECT_NEAR(distance(b.point(), pf), 0.0, 1e-9);
  }
  EXPECT_THROW(plan_route(g, cross_roadmap(), {5.9, 5.9}, {0, 0}), NoPathError);
}

TEST(Dataset, DeterministicBalancedAndConsistentlyLabelled) {
  TrajectoryOptions opts;
  const auto a = generate_trajectories(cross(), cross_roadmap(), 60, 21, opts);
  const auto b = generate_trajectories(cross(), cross_roadmap(), 60, 21, opts);
  ASSERT_EQ(a.size(), 60u);
  std::array<int, 3> per_class{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].window_end, b[i].window_end);
    EXPECT_EQ(a[i].path.segments().size(), b[i].path.segments().size());
    const auto w = make_window(a[i].samples, a[i].window_end, opts.window.length);
    EXPECT_EQ(label_window(w, opts.window.turn_threshold), a[i].label);
    EXPECT_TRUE(path_is_free(cross(), a[i].path, opts.route.clearance, 0.05));
    ++per_class[static_cast<int>(a[i].label)];
  }
  for (int c : per_class) EXPECT_LE(c, 20);
  EXPECT_EQ(training_windows(a, opts.window).size(), a.size());
  EXPECT_EQ(training_labels(a).size(), a.size());

  const auto dir = fixture::scratch_dir("traj");
  save_trajectories(dir / "t.json", a, 21, opts.window);
  const auto set = load_trajectories(dir / "t.json");
  EXPECT_EQ(set.seed, 21u);
  ASSERT_EQ(set.trajectories.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(set.trajectories[i].label, a[i].label);
    EXPECT_EQ(set.trajectories[i].window_end, a[i].window_end);
    EXPECT_EQ(set.trajectories[i].samples.size(), a[i].samples.size());
  }
  std::filesystem::remove_all(dir);
}

TEST(Mission, CellsCoverThePathInOrder) {
  const auto& a = fixture::artifacts();
  const auto m = plan_mission(a.grid, a.roadmap, a.behaviour_map, {0.0, -4.5}, {-4.5, 0.0});
  ASSERT_FALSE(m.cells.empty());
  for (std::size_t i = 1; i < m.cells.size(); ++i) EXPECT_GT(m.cells[i].s_begin, m.cells[i - 1].s_begin);
  std::size_t prev = 0;
  for (double s = 0; s <= m.path.length(); s += 0.05) {
    const auto c = m.cell_at(s);
    EXPECT_GE(c, prev);
    prev = c;
  }
  EXPECT_EQ(m.cell_at(-1.0), 0u);
  EXPECT_EQ(m.cell_at(1e9), m.cells.size() - 1);
  EXPECT_TRUE(std::any_of(m.cells.begin(), m.cells.end(), [](const MissionCell& c) { return c.from_map; }));
  EXPECT_TRUE(std::any_of(m.cells.begin(), m.cells.end(),
                          [](const MissionCell& c) { return c.reference == Behaviour::Left; }));
}

TEST(Mission, ConfidenceIsADistributionOverClasses) {
  const auto& a = fixture::artifacts();
  const auto m = plan_mission(a.grid, a.roadmap, a.behaviour_map, {0.0, -4.5}, {-4.5, 0.0});
  const auto n = static_cast<std::size_t>(m.window.length);
  for (std::size_t k = n - 1; k < m.samples.size(); k += 5) {
    const auto w = make_window(m.samples, k, n);
    const auto cell = m.cell_at(m.samples[k].s);
    const auto c = confidence(m, cell, w, a.encoder, a.head);
    EXPECT_NEAR(c.p.p[0] + c.p.p[1] + c.p.p[2], 1.0, 1e-12);
    EXPECT_EQ(c.value, c.p[m.cells[cell].reference]);
  }
  EXPECT_THROW(confidence(m, m.cells.size(), make_window(m.samples, n - 1, n), a.encoder, a.head), InvalidArgument);
}
