#include "sharednav/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sharednav/error.hpp"

namespace sharednav {

Pose2 advance_pose(const Pose2& pose, double v, double omega, double dt) {
  const double length = v * dt;
  const double dtheta = omega * dt;
  Pose2 next = pose;
  if (std::abs(dtheta) < 1e-9) {
    const double mid = pose.theta + 0.5 * dtheta;
    next.x += length * std::cos(mid);
    next.y += length * std::sin(mid);
  } else {
    const double radius = length / dtheta;
    next.x += radius * (std::sin(pose.theta + dtheta) - std::sin(pose.theta));
    next.y -= radius * (std::cos(pose.theta + dtheta) - std::cos(pose.theta));
  }
  next.theta = wrap_angle(pose.theta + dtheta);
  return next;
}

double yaw_rate(double v, double alpha, const VehicleParams& params) { return v * std::tan(alpha) / params.wheelbase; }

std::array<double, 2> inverse_ackermann(double kappa, const VehicleParams& params) {
  const double l = params.wheelbase;
  const double half = 0.5 * params.track;
  return {std::atan(l * kappa / (1.0 + kappa * half)), std::atan(l * kappa / (1.0 - kappa * half))};
}

namespace {

void integrate_wheel(double& alpha, double& rate, double torque, double dt, const VehicleParams& p) {
  const double acc = (torque - p.damping * rate - p.alignment * alpha) / p.inertia;
  rate += dt * acc;
  alpha += dt * rate;
  if (alpha > p.alpha_max) {
    alpha = p.alpha_max;
    rate = std::min(rate, 0.0);
  } else if (alpha < -p.alpha_max) {
    alpha = -p.alpha_max;
    rate = std::max(rate, 0.0);
  }
}

}  // namespace

WalkerState step_plant(const WalkerState& state, const HumanInput& human, const TorqueCommand& robot, double dt,
                       const VehicleParams& params) {
  if (!(dt > 0.0)) throw InvalidArgument("step_plant: dt must be positive");
  WalkerState next = state;
  integrate_wheel(next.alpha_r, next.alpha_dot_r, robot.tau_r + human.tau_r, dt, params);
  integrate_wheel(next.alpha_l, next.alpha_dot_l, robot.tau_l + human.tau_l, dt, params);
  next.v = std::clamp(human.v, 0.0, params.v_max);
  next.omega = yaw_rate(next.v, next.alpha_mean(), params);
  next.pose = advance_pose(state.pose, next.v, next.omega, dt);
  return next;
}

ControllerGains make_gains(const GainSchedule& schedule, double confidence) {
  ControllerGains g;
  g.a0 = schedule.a0;
  g.a1 = schedule.a1;
  g.b0 = schedule.b0;
  g.b1 = schedule.b1;
  g.lambda = std::clamp(1.0 - confidence, 0.0, 1.0);
  g.a = g.a0 + g.a1 * g.lambda;
  g.b = g.b0 + g.b1 * g.lambda;
  return g;
}

double viscoelastic(double e, double e_dot, const ControllerGains& gains) { return gains.a * e + gains.b * e_dot; }

DesiredRefs desired_refs(double kappa_ref, double theta_ref, double v, const VehicleParams& params) {
  DesiredRefs r;
  r.kappa = kappa_ref;
  r.omega = v * kappa_ref;
  r.theta = theta_ref;
  r.alpha_mean = std::atan(params.wheelbase * kappa_ref);
  const auto [ar, al] = inverse_ackermann(kappa_ref, params);
  r.alpha_r = std::clamp(ar, -params.alpha_max, params.alpha_max);
  r.alpha_l = std::clamp(al, -params.alpha_max, params.alpha_max);
  return r;
}

PathTracker::PathTracker(const std::vector<PathSample>* samples, double back, double ahead)
    : samples_(samples), back_(back), ahead_(ahead) {
  if (samples_ == nullptr || samples_->size() < 2) throw InvalidArgument("PathTracker: need at least two samples");
}

double PathTracker::update(Point2 p) {
  const auto& v = *samples_;
  std::size_t lo = 0, hi = v.size() - 1;
  if (started_) {
    const auto first = std::lower_bound(v.begin(), v.end(), s_ - back_,
                                        [](const PathSample& a, double s) { return a.s < s; });
    const auto last = std::upper_bound(v.begin(), v.end(), s_ + ahead_,
                                       [](double s, const PathSample& a) { return s < a.s; });
    lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, first - v.begin() - 1));
    hi = std::min(v.size() - 1, static_cast<std::size_t>(last - v.begin()));
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = lo; i < hi; ++i) {
    const double ax = v[i].x, ay = v[i].y;
    const double dx = v[i + 1].x - ax, dy = v[i + 1].y - ay;
    const double len2 = dx * dx + dy * dy;
    const double t = len2 > 0.0 ? std::clamp(((p.x - ax) * dx + (p.y - ay) * dy) / len2, 0.0, 1.0) : 0.0;
    const double qx = ax + t * dx, qy = ay + t * dy;
    const double d = std::hypot(p.x - qx, p.y - qy);
    if (d < best) {
      best = d;
      s_ = v[i].s + t * (v[i + 1].s - v[i].s);
      const double len = std::sqrt(len2);
      cross_ = len > 0.0 ? (dx * (p.y - ay) - dy * (p.x - ax)) / len : 0.0;
    }
  }
  started_ = true;
  return s_;
}

double ErrorDifferentiator::push(double e, double dt) {
  history_.push_back(e);
  if (history_.size() > static_cast<std::size_t>(lag_) + 1) history_.pop_front();
  const auto steps = static_cast<double>(history_.size() - 1);
  if (steps == 0.0) return 0.0;
  return (history_.back() - history_.front()) / (steps * dt);
}

DisengageState update_disengage(const DisengageState& ds, double tau_human, double tau_robot, double dt,
                                bool danger_zone, const DisengageConfig& config) {
  DisengageState next = ds;
  next.danger_zone = danger_zone;
  if (!config.enabled) {
    next.active = false;
    next.remaining = 0.0;
    next.opposition_integral = 0.0;
    return next;
  }
  if (next.active) {
    next.remaining -= dt;
    if (next.remaining <= 0.0) {
      next.active = false;
      next.remaining = 0.0;
    }
  }
  // While suspended the robot applies nothing, so there is nothing to oppose.
  if (tau_human * tau_robot < 0.0 && !next.active)
    next.opposition_integral += std::abs(tau_human) * dt;
  else
    next.opposition_integral *= std::exp(-config.leak * dt);
  if (danger_zone) {
    next.active = false;
    next.remaining = 0.0;
    return next;
  }
  if (!next.active && next.opposition_integral >= config.threshold) {
    next.active = true;
    next.remaining = config.duration;
    next.opposition_integral = 0.0;
    ++next.events;
  }
  return next;
}

SharedController::SharedController(const Mission& mission, const Encoder& encoder, const ClassifierHead& head,
                                   ControlConfig config)
    : mission_(&mission),
      encoder_(&encoder),
      head_(&head),
      config_(std::move(config)),
      tracker_(&mission.samples),
      d_alpha_r_(config_.derivative_lag),
      d_alpha_l_(config_.derivative_lag),
      d_beta_r_(config_.derivative_lag),
      d_beta_l_(config_.derivative_lag) {}

ControlOutput SharedController::step(const WalkerState& state, const SampleHistory& history, bool new_sample,
                                     const HumanInput& human, double dt, bool override_release) {
  const auto& vp = config_.vehicle;
  ControlOutput out;
  out.abscissa = tracker_.update(state.pose.point());
  out.cross_track = tracker_.cross_track();
  out.cell = mission_->cell_at(out.abscissa);

  const CurvePoint ref = mission_->path.eval(std::clamp(out.abscissa, 0.0, mission_->path.length()));
  out.refs = desired_refs(ref.kappa, wrap_angle(ref.pose.theta), state.v, vp);

  if (history.full() && (new_sample || !confidence_ || confidence_cell_ != out.cell)) {
    confidence_ = confidence(*mission_, out.cell, history, *encoder_, *head_);
    confidence_cell_ = out.cell;
  } else if (!history.full()) {
    confidence_.reset();
  }
  out.confidence = confidence_;

  out.e_alpha_r = out.refs.alpha_r - state.alpha_r;
  out.e_alpha_l = out.refs.alpha_l - state.alpha_l;
  const double heading_error = wrap_angle(out.refs.theta - state.pose.theta);
  out.e_beta_r = heading_error + out.e_alpha_r;
  out.e_beta_l = heading_error + out.e_alpha_l;
  const double de_ar = d_alpha_r_.push(out.e_alpha_r, dt);
  const double de_al = d_alpha_l_.push(out.e_alpha_l, dt);
  const double de_br = d_beta_r_.push(out.e_beta_r, dt);
  const double de_bl = d_beta_l_.push(out.e_beta_l, dt);

  TorqueCommand cmd;
  if (confidence_) {
    out.alpha_gains = make_gains(config_.alpha, confidence_->value);
    out.beta_gains = make_gains(config_.beta, confidence_->value);
    cmd.tau_alpha_r = viscoelastic(out.e_alpha_r, de_ar, out.alpha_gains);
    cmd.tau_alpha_l = viscoelastic(out.e_alpha_l, de_al, out.alpha_gains);
    cmd.tau_beta_r = viscoelastic(out.e_beta_r, de_br, out.beta_gains);
    cmd.tau_beta_l = viscoelastic(out.e_beta_l, de_bl, out.beta_gains);
    const double lambda = out.alpha_gains.lambda;
    cmd.tau_r = lambda * cmd.tau_alpha_r + cmd.tau_beta_r;
    cmd.tau_l = lambda * cmd.tau_alpha_l + cmd.tau_beta_l;
    cmd.engaged = true;
  } else {
    out.alpha_gains = make_gains(config_.alpha, 1.0);
    out.beta_gains = make_gains(config_.beta, 1.0);
  }

  const Point2 p = state.pose.point();
  const bool danger = std::any_of(config_.danger_zones.begin(), config_.danger_zones.end(),
                                  [&](const DangerZone& z) { return z.contains(p); });
  disengage_ = update_disengage(disengage_, 0.5 * (human.tau_r + human.tau_l), 0.5 * (cmd.tau_r + cmd.tau_l), dt,
                                danger, config_.disengage);
  if (override_release && !danger && config_.disengage.enabled && !disengage_.active) {
    disengage_.active = true;
    disengage_.remaining = config_.disengage.duration;
    disengage_.opposition_integral = 0.0;
    ++disengage_.events;
  }
  if (disengage_.active) {
    cmd.tau_r = 0.0;
    cmd.tau_l = 0.0;
    cmd.engaged = false;
  }
  out.command = cmd;
  out.disengage = disengage_;
  return out;
}

}  // namespace sharednav
