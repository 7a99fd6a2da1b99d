#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <optional>
#include <vector>

#include "sharednav/angles.hpp"
#include "sharednav/behmap.hpp"
#include "sharednav/geometry.hpp"
#include "sharednav/neural.hpp"

namespace sharednav {

/// Rollator geometry and steering dynamics. Each front wheel obeys
///   J alpha'' = tau_robot + tau_human - c alpha' - k alpha,
/// clamped to |alpha| <= alpha_max.
struct VehicleParams {
  double wheelbase = 0.6;            // l, metres
  double track = 0.55;               // w_t, metres
  double alpha_max = deg2rad(45.0);
  double v_max = 1.2;                // m/s
  double inertia = 4.0;              // J, N m s^2 / rad
  double damping = 8.0;              // c, N m s / rad
  double alignment = 2.0;            // k, N m / rad (caster self-alignment)
};

struct WalkerState {
  Pose2 pose;
  double v = 0.0;
  double omega = 0.0;
  double alpha_r = 0.0;
  double alpha_l = 0.0;
  double alpha_dot_r = 0.0;
  double alpha_dot_l = 0.0;

  double alpha_mean() const { return 0.5 * (alpha_r + alpha_l); }
};

struct HumanInput {
  double v = 0.0;
  double tau_r = 0.0;
  double tau_l = 0.0;
};

struct TorqueCommand {
  double tau_r = 0.0;
  double tau_l = 0.0;
  double tau_alpha_r = 0.0;
  double tau_alpha_l = 0.0;
  double tau_beta_r = 0.0;
  double tau_beta_l = 0.0;
  bool engaged = false;
};

/// Exact unicycle update with v and omega held over dt.
Pose2 advance_pose(const Pose2& pose, double v, double omega, double dt);

/// Yaw rate of the bicycle-equivalent steering angle: v tan(alpha) / l.
double yaw_rate(double v, double alpha, const VehicleParams& params);

/// Per-wheel steering angles realising curvature kappa (inverse Ackermann),
/// tan(alpha_l) = l kappa / (1 - kappa w / 2), tan(alpha_r) = l kappa / (1 + kappa w / 2).
/// Returns {alpha_r, alpha_l}; angles are not clamped.
std::array<double, 2> inverse_ackermann(double kappa, const VehicleParams& params);

/// Advances steering (semi-implicit Euler) then pose (exact arc). v is clamped to
/// [0, v_max]. Throws InvalidArgument if dt <= 0.
WalkerState step_plant(const WalkerState& state, const HumanInput& human, const TorqueCommand& robot, double dt,
                       const VehicleParams& params = {});

struct GainSchedule {
  double a0 = 0.0;
  double a1 = 0.0;
  double b0 = 0.0;
  double b1 = 0.0;
};

struct ControllerGains {
  double a0 = 0.0;
  double a1 = 0.0;
  double b0 = 0.0;
  double b1 = 0.0;
  double lambda = 0.0;
  double a = 0.0;
  double b = 0.0;
};

/// lambda = 1 - confidence (clamped to [0, 1]), a = a0 + a1 lambda, b = b0 + b1 lambda.
ControllerGains make_gains(const GainSchedule& schedule, double confidence);

/// tau = a e + b e_dot.
double viscoelastic(double e, double e_dot, const ControllerGains& gains);

struct DesiredRefs {
  double kappa = 0.0;
  double omega = 0.0;
  double theta = 0.0;
  double alpha_mean = 0.0;  // atan(l kappa)
  double alpha_r = 0.0;
  double alpha_l = 0.0;
};

/// References from the path curvature and heading at the tracked abscissa.
DesiredRefs desired_refs(double kappa_ref, double theta_ref, double v, const VehicleParams& params);

/// Follows the walker's nearest abscissa on a sampled path. The search is local to the
/// previous match so the projection does not jump to distant parts of the path.
class PathTracker {
 public:
  PathTracker() = default;
  PathTracker(const std::vector<PathSample>* samples, double back = 0.5, double ahead = 3.0);

  /// Nearest abscissa of p; the first call searches the whole path.
  double update(Point2 p);
  double abscissa() const { return s_; }
  /// Signed lateral offset of the last query point (left of the path is positive).
  double cross_track() const { return cross_; }

 private:
  const std::vector<PathSample>* samples_ = nullptr;
  double back_ = 0.5;
  double ahead_ = 3.0;
  bool started_ = false;
  double s_ = 0.0;
  double cross_ = 0.0;
};

/// Backward difference over `lag` steps: (e_k - e_{k-lag}) / (lag dt), using the oldest
/// available value while the history fills.
class ErrorDifferentiator {
 public:
  explicit ErrorDifferentiator(int lag = 5) : lag_(lag) {}
  double push(double e, double dt);
  void reset() { history_.clear(); }

 private:
  int lag_;
  std::deque<double> history_;
};

struct DangerZone {
  Point2 min;
  Point2 max;

  bool contains(Point2 p) const { return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y; }
};

struct DisengageConfig {
  bool enabled = true;
  double threshold = 2.0;  // T_opp, N m s
  double duration = 10.0;  // s
  double leak = 0.5;       // 1/s, decay of the opposition integral while not opposing
};

struct DisengageState {
  bool active = false;
  double remaining = 0.0;
  double opposition_integral = 0.0;
  bool danger_zone = false;
  int events = 0;  // number of disengagements so far
};

/// Human and robot torques are compared through their wheel means. Opposition (negative
/// product) accumulates |tau_human| dt; otherwise, and while suspended, the integral leaks. Crossing the
/// threshold outside a danger zone disengages for `duration`; inside one the guidance is
/// never suspended (and an active suspension is cancelled).
DisengageState update_disengage(const DisengageState& ds, double tau_human, double tau_robot, double dt,
                                bool danger_zone, const DisengageConfig& config);

struct ControlConfig {
  VehicleParams vehicle;
  GainSchedule alpha{25.0, 15.0, 15.0, 10.0};
  GainSchedule beta{25.0, 0.0, 25.0, 0.0};
  int derivative_lag = 5;
  double rate = 50.0;  // Hz
  DisengageConfig disengage;
  std::vector<DangerZone> danger_zones;
};

struct ControlOutput {
  TorqueCommand command;
  std::optional<Confidence> confidence;
  ControllerGains alpha_gains;
  ControllerGains beta_gains;
  DesiredRefs refs;
  std::size_t cell = 0;  // mission cell index
  double abscissa = 0.0;
  double cross_track = 0.0;
  double e_alpha_r = 0.0, e_alpha_l = 0.0;
  double e_beta_r = 0.0, e_beta_l = 0.0;
  DisengageState disengage;
};

/// Shared-authority controller. Confidence is re-evaluated whenever a new feature sample
/// arrives and held in between.
class SharedController {
 public:
  SharedController(const Mission& mission, const Encoder& encoder, const ClassifierHead& head,
                   ControlConfig config = {});

  /// One control period. `new_sample` tells whether the history changed since the last
  /// call; `human` is the torque the user applies during the same period (used only for
  /// the disengagement logic); `override_release` forces an immediate disengagement.
  ControlOutput step(const WalkerState& state, const SampleHistory& history, bool new_sample, const HumanInput& human,
                     double dt, bool override_release = false);

  const ControlConfig& config() const { return config_; }
  const DisengageState& disengage() const { return disengage_; }

 private:
  const Mission* mission_;
  const Encoder* encoder_;
  const ClassifierHead* head_;
  ControlConfig config_;
  PathTracker tracker_;
  std::optional<Confidence> confidence_;
  std::size_t confidence_cell_ = 0;
  ErrorDifferentiator d_alpha_r_, d_alpha_l_, d_beta_r_, d_beta_l_;
  DisengageState disengage_;
};

}  // namespace sharednav
