#include "sharednav/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sharednav/angles.hpp"
#include "sharednav/error.hpp"

namespace sharednav {

FeatureWindow make_window(std::span<const PathSample> samples, std::size_t k, std::size_t n,
                          double spacing_tolerance) {
  if (n < 2) throw InvalidArgument("make_window: need at least two samples per window");
  if (k >= samples.size()) throw InvalidArgument("make_window: index past the end of the samples");
  if (k + 1 < n) throw InvalidArgument("make_window: insufficient history at index " + std::to_string(k));
  const std::size_t first = k + 1 - n;
  const double ds0 = samples[first + 1].s - samples[first].s;
  if (!(ds0 > 0.0)) throw InvalidArgument("make_window: abscissae must increase");
  for (std::size_t i = first + 1; i <= k; ++i) {
    const double ds = samples[i].s - samples[i - 1].s;
    if (!(std::abs(ds - ds0) <= spacing_tolerance * ds0))
      throw InvalidArgument("make_window: non-uniform spacing at sample " + std::to_string(i));
  }
  FeatureWindow w(kFeatureRows, static_cast<Eigen::Index>(n));
  const double x1 = samples[first].x;
  const double y1 = samples[first].y;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& p = samples[first + j];
    const auto c = static_cast<Eigen::Index>(j);
    w(0, c) = p.x - x1;
    w(1, c) = p.y - y1;
    w(2, c) = std::cos(p.theta);
    w(3, c) = std::sin(p.theta);
    w(4, c) = p.kappa;
  }
  return w;
}

FeatureWindow rotate_window(const FeatureWindow& w, double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  FeatureWindow out = w;
  for (int pair = 0; pair < 4; pair += 2) {
    out.row(pair) = c * w.row(pair) - s * w.row(pair + 1);
    out.row(pair + 1) = s * w.row(pair) + c * w.row(pair + 1);
  }
  return out;
}

PathReconstructor::PathReconstructor(double ds, Pose2 start) : ds_(ds), pose_(start) {
  if (!(ds > 0.0)) throw InvalidArgument("PathReconstructor: spacing must be positive");
}

std::vector<PathSample> PathReconstructor::push_odometry(double v, double omega, double dt) {
  if (!(dt >= 0.0)) throw InvalidArgument("PathReconstructor: time must not run backwards");
  if (!(v >= 0.0)) throw InvalidArgument("PathReconstructor: negative speed");
  const double length = v * dt;
  const double dtheta = omega * dt;
  Pose2 next = pose_;
  if (std::abs(dtheta) < 1e-9) {
    const double mid = pose_.theta + 0.5 * dtheta;
    next.x += length * std::cos(mid);
    next.y += length * std::sin(mid);
  } else {
    const double radius = length / dtheta;
    next.x += radius * (std::sin(pose_.theta + dtheta) - std::sin(pose_.theta));
    next.y -= radius * (std::cos(pose_.theta + dtheta) - std::cos(pose_.theta));
  }
  next.theta = pose_.theta + dtheta;
  return advance(next, length);
}

std::vector<PathSample> PathReconstructor::push_pose(const Pose2& pose) {
  Pose2 next = pose;
  next.theta = pose_.theta + wrap_angle(pose.theta - pose_.theta);
  return advance(next, distance(pose_.point(), pose.point()));
}

std::vector<PathSample> PathReconstructor::advance(const Pose2& next, double length) {
  std::vector<PathSample> out;
  const double s0 = s_;
  const double s1 = s_ + length;
  constexpr double kFuzz = 1e-9;
  while (length > 0.0 && static_cast<double>(emitted_ + 1) * ds_ <= s1 + kFuzz) {
    const double target = static_cast<double>(emitted_ + 1) * ds_;
    const double t = std::clamp((target - s0) / length, 0.0, 1.0);
    PathSample p;
    p.s = target;
    p.x = pose_.x + t * (next.x - pose_.x);
    p.y = pose_.y + t * (next.y - pose_.y);
    const double theta = pose_.theta + t * (next.theta - pose_.theta);
    p.theta = wrap_angle(theta);
    p.kappa = emitted_ == 0 ? 0.0 : (theta - last_theta_) / ds_;
    last_theta_ = theta;
    ++emitted_;
    out.push_back(p);
  }
  pose_ = next;
  s_ = s1;
  return out;
}

SampleHistory::SampleHistory(std::size_t n) : n_(n) {
  if (n < 2) throw InvalidArgument("SampleHistory: capacity must be at least two");
}

void SampleHistory::push(const PathSample& s) {
  samples_.push_back(s);
  if (samples_.size() > n_) samples_.pop_front();
}

FeatureWindow SampleHistory::window() const {
  if (!full()) throw InvalidArgument("SampleHistory: history not yet full");
  const std::vector<PathSample> v(samples_.begin(), samples_.end());
  return make_window(v, n_ - 1, n_);
}

}  // namespace sharednav
