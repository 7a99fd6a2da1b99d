#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace sharednav {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Planar pose: position in metres, heading in radians w.r.t. the world X axis.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Point2 point() const { return {x, y}; }
  friend bool operator==(const Pose2&, const Pose2&) = default;
};

/// Pose plus the curvature of the curve at that pose.
struct CurvePoint {
  Pose2 pose;
  double kappa = 0.0;
};

/// Arc-length sample of a path.
struct PathSample {
  double s = 0.0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double kappa = 0.0;
};

double distance(Point2 a, Point2 b);

struct FresnelPair {
  double c = 0.0;
  double s = 0.0;
};

/// Normalised Fresnel integrals C(x) = int_0^x cos(pi t^2 / 2) dt and S(x) likewise with sin.
FresnelPair fresnel(double x);

namespace detail {

/// Moments int_0^1 t^k exp(i (a t^2 / 2 + b t)) dt for k = 0, 1, 2.
/// Splits the unit interval so that each piece has a bounded phase and evaluates
/// each piece with either a Fresnel closed form or a series in `a`.
std::array<std::complex<double>, 3> phase_moments(double a, double b);

}  // namespace detail

/// Curve whose curvature varies linearly with arc length:
/// theta(s) = theta0 + kappa0 s + kappa_rate s^2 / 2.
class ClothoidSegment {
 public:
  ClothoidSegment() = default;
  ClothoidSegment(Pose2 start, double kappa0, double kappa_rate, double length);

  const Pose2& start() const { return start_; }
  double kappa0() const { return kappa0_; }
  double kappa_rate() const { return kappa_rate_; }
  double length() const { return length_; }

  double curvature(double s) const { return kappa0_ + kappa_rate_ * s; }
  /// Unwrapped heading at abscissa s.
  double heading(double s) const;

  /// Evaluates the curve at abscissa s in [0, length]; throws InvalidArgument otherwise.
  CurvePoint eval(double s) const;
  Pose2 end_pose() const { return eval(length_).pose; }

  /// int_0^L (d kappa / ds)^2 ds.
  double jerk_cost() const { return kappa_rate_ * kappa_rate_ * length_; }

 private:
  Pose2 start_;
  double kappa0_ = 0.0;
  double kappa_rate_ = 0.0;
  double length_ = 0.0;
};

CurvePoint eval_clothoid(const ClothoidSegment& seg, double s);

/// Solves the G1 Hermite problem: the unique clothoid leaving `a` with heading a.theta
/// and reaching `b` with heading b.theta. Throws InvalidArgument when a and b coincide
/// and ConvergenceError if the root finder fails.
ClothoidSegment fit_g1(const Pose2& a, const Pose2& b);

/// G1-continuous sequence of clothoid segments.
class ClothoidPath {
 public:
  ClothoidPath() = default;
  explicit ClothoidPath(std::vector<ClothoidSegment> segments);

  const std::vector<ClothoidSegment>& segments() const { return segments_; }
  bool empty() const { return segments_.empty(); }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

  /// Evaluates the path at global abscissa s in [0, length()].
  CurvePoint eval(double s) const;
  /// Index of the segment containing global abscissa s.
  std::size_t segment_at(double s) const;

  double jerk_cost() const;

 private:
  std::vector<ClothoidSegment> segments_;
  std::vector<double> cumulative_;  // end abscissa of each segment
};

struct Waypoint {
  Point2 p;
  std::optional<double> heading;
};

struct SplineOptions {
  double tolerance = 1e-6;  // stop when a sweep improves the objective by less than this
  int max_sweeps = 50;
  // When positive, a curvature jump at a joint adds jump^2 / joint_ramp to the objective,
  // as if it were spread linearly over that length; zero leaves joints free.
  double joint_ramp = 0.0;
};

/// Fits a G1 clothoid spline through `waypoints`. Unspecified headings are chosen by
/// coordinate descent to reduce the integral of (d kappa / ds)^2 over the path (see
/// SplineOptions::joint_ramp for the curvature jumps between segments).
/// Throws InvalidArgument for fewer than two waypoints and ConvergenceError (naming the
/// offending waypoint index) if a segment cannot be fitted.
ClothoidPath fit_spline(std::span<const Waypoint> waypoints, const SplineOptions& options = {});
ClothoidPath fit_spline(std::span<const Point2> points, const SplineOptions& options = {});

/// Samples the path every `step` metres of arc length, always including both ends.
std::vector<PathSample> sample_path(const ClothoidPath& path, double step);

}  // namespace sharednav
