#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "sharednav/geometry.hpp"

namespace sharednav {

inline constexpr int kFeatureRows = 5;

/// Rows: x - x_first, y - y_first, cos(theta), sin(theta), kappa; one column per sample.
using FeatureWindow = Eigen::Matrix<double, kFeatureRows, Eigen::Dynamic>;

/// Window over samples[k-n+1 .. k]. Throws InvalidArgument if k < n-1, k is out of
/// range, or the abscissa spacing varies by more than `spacing_tolerance` (relative).
FeatureWindow make_window(std::span<const PathSample> samples, std::size_t k, std::size_t n,
                          double spacing_tolerance = 0.05);

/// Rotates the position rows and the heading rows of a window by phi.
FeatureWindow rotate_window(const FeatureWindow& w, double phi);

/// Dead-reckons a path from odometry (or consumes a pose stream) and emits samples every
/// `ds` metres of travelled arc length.
class PathReconstructor {
 public:
  PathReconstructor(double ds, Pose2 start);

  /// Integrates one step of the unicycle model with constant v and omega over dt
  /// (exact arc) and returns the samples emitted during it.
  std::vector<PathSample> push_odometry(double v, double omega, double dt);
  /// Appends a measured pose; the travelled distance is the chord from the previous pose.
  std::vector<PathSample> push_pose(const Pose2& pose);

  const Pose2& pose() const { return pose_; }
  double travelled() const { return s_; }
  double spacing() const { return ds_; }

 private:
  std::vector<PathSample> advance(const Pose2& next, double length);

  double ds_;
  Pose2 pose_;  // heading kept unwrapped so interpolation never jumps
  double s_ = 0.0;
  std::size_t emitted_ = 0;
  double last_theta_ = 0.0;
};

/// The last n emitted samples.
class SampleHistory {
 public:
  explicit SampleHistory(std::size_t n);

  void push(const PathSample& s);
  void clear() { samples_.clear(); }
  bool full() const { return samples_.size() == n_; }
  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return n_; }
  const PathSample& back() const { return samples_.back(); }
  const PathSample& front() const { return samples_.front(); }

  /// Throws InvalidArgument until the history is full.
  FeatureWindow window() const;

 private:
  std::size_t n_;
  std::deque<PathSample> samples_;
};

}  // namespace sharednav
