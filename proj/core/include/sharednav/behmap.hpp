#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sharednav/angles.hpp"
#include "sharednav/error.hpp"
#include "sharednav/features.hpp"
#include "sharednav/geometry.hpp"
#include "sharednav/neural.hpp"
#include "sharednav/roadmap.hpp"
#include "sharednav/worldmap.hpp"

namespace sharednav {

/// Settings shared by dataset synthesis, map construction and mission planning.
struct WindowSpec {
  int length = 12;                           // samples per window
  double spacing = 0.1;                      // metres between samples
  double turn_threshold = deg2rad(15.0);     // |heading change| over a window that counts as a turn
};

/// Geometric label of a window: heading change between its first and last sample above
/// the threshold is Left, below minus the threshold Right, otherwise Straight.
Behaviour label_window(const FeatureWindow& w, double turn_threshold);
/// Same rule on samples[first..last] (used where fewer than a full window exist).
Behaviour label_span(std::span<const PathSample> samples, std::size_t first, std::size_t last, double turn_threshold);

/// Circular mean of the sample headings in [first, last].
double mean_heading(std::span<const PathSample> samples, std::size_t first, std::size_t last);

/// One maximal run of consecutive samples inside the same behaviour cell.
struct CellVisit {
  CellIndex cell;
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t anchor = 0;  // sample of the run nearest the cell centre
  double direction = 0.0;  // mean travel direction over the run
};

/// Splits a sampled path into cell visits (a cell re-entered later is a new visit).
/// Samples outside the grid end the current visit and are skipped.
std::vector<CellVisit> cell_visits(const BehaviourGrid& bg, std::span<const PathSample> samples);

/// Greedy shortcutting: from each kept point jump to the farthest later point whose
/// segment stays `clearance` away from obstacles.
std::vector<Point2> shortcut_polyline(const OccupancyGrid& grid, const std::vector<Point2>& points, double clearance);

struct RouteOptions {
  double clearance = 0.35;        // checked on the smoothed path
  bool shortcut = true;           // replace the node sequence by its farthest visible hops
  double shortcut_margin = 0.25;  // extra clearance used while shortcutting
  double min_spacing = 0.5;       // roadmap nodes closer than this to the previous one are skipped
  int densify_rounds = 6;
  SplineOptions spline{1e-4, 20, 0.1};
};

/// Roadmap route from p0 to pf smoothed into a collision-free clothoid spline: shortest
/// path, thinning (and optional shortcutting), then fitting; segments of a colliding fit are split at their
/// midpoints and refitted. Throws NoPathError when no collision-free fit is found.
ClothoidPath plan_route(const OccupancyGrid& grid, const Roadmap& rm, Point2 p0, Point2 pf,
                        const RouteOptions& options = {});

struct Trajectory {
  Point2 p0;
  Point2 pf;
  ClothoidPath path;
  std::vector<PathSample> samples;
  std::size_t window_end = 0;  // the labelled training window ends at this sample
  Behaviour label = Behaviour::Straight;
};

struct TrajectoryOptions {
  WindowSpec window;
  RouteOptions route;
  double max_curvature = std::numeric_limits<double>::infinity();  // 1/m; sharper paths are rejected
  int attempts_per_path = 50;  // bound on rejected pairs, relative to the requested count
  bool balance = true;         // keep at most ceil(count / 3) windows per class
};

/// Synthesises `count` human-like paths between random free pairs. Each path carries one
/// labelled window anchored at a cell crossing; with balancing on, windows are accepted
/// only for classes whose quota is not yet full. Throws NoPathError when the attempt
/// budget runs out.
std::vector<Trajectory> generate_trajectories(const OccupancyGrid& grid, const Roadmap& rm, std::size_t count,
                                              std::uint64_t seed, const TrajectoryOptions& options = {});

std::vector<FeatureWindow> training_windows(std::span<const Trajectory> trajectories, const WindowSpec& window);
std::vector<Behaviour> training_labels(std::span<const Trajectory> trajectories);

/// Dataset file: JSON holding the clothoid segments of every path plus its labelled
/// window; samples are regenerated on load.
void save_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories,
                       std::uint64_t seed, const WindowSpec& window);
struct TrajectorySet {
  std::vector<Trajectory> trajectories;
  std::uint64_t seed = 0;
  WindowSpec window;
};
TrajectorySet load_trajectories(const std::filesystem::path& path);

struct CellBehaviour {
  CellIndex cell;
  Behaviour behaviour = Behaviour::Straight;
  double direction = 0.0;  // (-pi, pi], map frame
  std::array<double, 5> centroid{};
  std::size_t member_count = 0;

  friend bool operator==(const CellBehaviour&, const CellBehaviour&) = default;
};

struct MapProvenance {
  std::uint64_t seed = 0;
  std::size_t trajectory_count = 0;
  std::uint64_t encoder = 0;  // model fingerprints
  std::uint64_t head = 0;

  friend bool operator==(const MapProvenance&, const MapProvenance&) = default;
};

class BehaviouralMap {
 public:
  BehaviouralMap() = default;
  BehaviouralMap(BehaviourGrid grid, MapProvenance provenance, double merge_threshold);

  const BehaviourGrid& grid() const { return grid_; }
  const MapProvenance& provenance() const { return provenance_; }
  double merge_threshold() const { return merge_threshold_; }
  const std::map<CellIndex, std::vector<CellBehaviour>>& cells() const { return cells_; }

  /// Clusters of a cell (empty when the cell was never crossed).
  std::span<const CellBehaviour> clusters(CellIndex c) const;
  /// Same-class cluster whose direction is nearest `direction`, if within `max_difference`.
  const CellBehaviour* nearest(CellIndex c, Behaviour b, double direction, double max_difference) const;

  std::size_t cluster_count() const;
  std::size_t member_total() const;

  void set_clusters(CellIndex c, std::vector<CellBehaviour> clusters);

  friend bool operator==(const BehaviouralMap&, const BehaviouralMap&) = default;

 private:
  BehaviourGrid grid_;
  MapProvenance provenance_;
  double merge_threshold_ = deg2rad(45.0);
  std::map<CellIndex, std::vector<CellBehaviour>> cells_;
};

/// A classified cell crossing.
struct Crossing {
  CellIndex cell;
  Behaviour behaviour = Behaviour::Straight;
  double direction = 0.0;
  std::array<double, 5> latent{};
};

/// Classifies every cell visit that has a full window behind its anchor.
std::vector<Crossing> classify_crossings(std::span<const Trajectory> trajectories, const Encoder& encoder,
                                         const ClassifierHead& head, const BehaviourGrid& bg,
                                         const WindowSpec& window);

/// Clusters crossings per (cell, class): a crossing joins the nearest cluster closer than
/// the threshold, and clusters that drift closer than the threshold are merged
/// afterwards. Crossings are put in a canonical order first, so the result does not
/// depend on the input order.
BehaviouralMap cluster_crossings(std::vector<Crossing> crossings, const BehaviourGrid& bg, MapProvenance provenance,
                                 double merge_threshold = deg2rad(45.0));

BehaviouralMap build_behavioural_map(std::span<const Trajectory> trajectories, const Encoder& encoder,
                                     const ClassifierHead& head, const BehaviourGrid& bg, const WindowSpec& window,
                                     std::uint64_t seed, double merge_threshold = deg2rad(45.0));

/// Raised when a behavioural map does not belong to the loaded models.
class ProvenanceError : public FormatError {
 public:
  using FormatError::FormatError;
};

void save_behavioural_map(const std::filesystem::path& path, const BehaviouralMap& bm);
BehaviouralMap load_behavioural_map(const std::filesystem::path& path);
/// Loads and checks that the map was built with these models.
BehaviouralMap load_behavioural_map(const std::filesystem::path& path, const Encoder& encoder,
                                    const ClassifierHead& head);
void check_provenance(const BehaviouralMap& bm, const Encoder& encoder, const ClassifierHead& head);

/// One row per cluster: cell, centre, class, direction, members, centroid.
void write_behavioural_map_csv(const std::filesystem::path& path, const BehaviouralMap& bm);
/// Top-down picture of the map: cells coloured by class with a tick per cluster direction.
void write_behavioural_map_svg(const std::filesystem::path& path, const BehaviouralMap& bm, const OccupancyGrid& grid);

struct MissionCell {
  CellIndex cell;
  double s_begin = 0.0;  // the visit covers [s_begin, next visit's s_begin)
  double s_end = 0.0;    // abscissa of the visit's last sample
  Behaviour own = Behaviour::Straight;
  double own_direction = 0.0;
  Behaviour reference = Behaviour::Straight;
  double reference_direction = 0.0;
  bool from_map = false;
};

struct Mission {
  Point2 p0;
  Point2 pf;
  ClothoidPath path;
  std::vector<PathSample> samples;
  std::vector<MissionCell> cells;
  WindowSpec window;

  /// Index of the cell visit covering abscissa s (clamped to the path).
  std::size_t cell_at(double s) const;
};

struct MissionOptions {
  WindowSpec window;
  RouteOptions route;
  double direction_match = deg2rad(90.0);  // largest accepted cluster/path direction gap
};

/// Plans the reference path and picks, for every crossed cell, the behavioural-map cluster
/// of the path's own class nearest in direction; falls back to the path's own pair.
Mission plan_mission(const OccupancyGrid& grid, const Roadmap& rm, const BehaviouralMap& bm, Point2 p0, Point2 pf,
                     const MissionOptions& options = {});

struct Confidence {
  Behaviour reference = Behaviour::Straight;
  double value = 0.0;  // softmax probability of the reference class
  ConfidenceVector p;
};

/// Confidence of the live window against the reference of mission cell `cell`. The window
/// is first rotated by the cluster/path direction offset of that cell.
Confidence confidence(const Mission& mission, std::size_t cell, const FeatureWindow& live, const Encoder& encoder,
                      const ClassifierHead& head);
/// Empty until the history holds a full window.
std::optional<Confidence> confidence(const Mission& mission, std::size_t cell, const SampleHistory& history,
                                     const Encoder& encoder, const ClassifierHead& head);

}  // namespace sharednav
