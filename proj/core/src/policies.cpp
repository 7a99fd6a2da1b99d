#include "sharednav/policies.hpp"

#include <algorithm>
#include <cmath>

#include "sharednav/error.hpp"
#include "sharednav/random.hpp"
#include "sharednav/simulation.hpp"

namespace sharednav {

const char* policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Compliant: return "compliant";
    case PolicyKind::Rough: return "rough";
    case PolicyKind::Adversarial: return "adversarial";
    case PolicyKind::Replay: return "replay";
    case PolicyKind::External: return "external";
  }
  return "?";
}

PolicyKind parse_policy(const std::string& name) {
  for (auto k : {PolicyKind::Compliant, PolicyKind::Rough, PolicyKind::Adversarial, PolicyKind::Replay,
                 PolicyKind::External})
    if (name == policy_name(k)) return k;
  throw InvalidArgument("unknown policy '" + name + "'");
}

HumanInput CompliantPolicy::steer(const PolicyContext& ctx, double kappa) const {
  const auto& vp = *ctx.vehicle;
  const auto [ar, al] = inverse_ackermann(kappa, vp);
  const auto& s = *ctx.state;
  HumanInput in;
  in.v = p_.speed;
  in.tau_r = p_.stiffness * (std::clamp(ar, -vp.alpha_max, vp.alpha_max) - s.alpha_r) - p_.arm_damping * s.alpha_dot_r;
  in.tau_l = p_.stiffness * (std::clamp(al, -vp.alpha_max, vp.alpha_max) - s.alpha_l) - p_.arm_damping * s.alpha_dot_l;
  return in;
}

double CompliantPolicy::noise(const PolicyContext& ctx) {
  if (p_.heading_noise > 0.0 && ctx.t + 1e-9 >= next_draw_) {
    noise_ = p_.heading_noise * standard_normal(*ctx.rng);
    next_draw_ = ctx.t + p_.noise_interval;
  }
  return noise_;
}

double CompliantPolicy::pursuit_curvature(const PolicyContext& ctx, double heading_offset) {
  const auto& m = *ctx.mission;
  const double target_s = std::min(ctx.abscissa + p_.lookahead, m.path.length());
  const Pose2 target = m.path.eval(target_s).pose;
  const Pose2& pose = ctx.state->pose;
  const double dx = target.x - pose.x, dy = target.y - pose.y;
  const double d = std::hypot(dx, dy);
  if (d < 1e-6) return 0.0;
  const double perceived = pose.theta + heading_offset;
  const double eta = wrap_angle(std::atan2(dy, dx) - perceived);
  return 2.0 * std::sin(eta) / std::max(d, 0.5 * p_.lookahead);
}

HumanAction CompliantPolicy::act(const PolicyContext& ctx) {
  HumanAction a;
  a.input = steer(ctx, pursuit_curvature(ctx, noise(ctx)));
  return a;
}

HumanAction RoughPolicy::act(const PolicyContext& ctx) {
  const double wobble = p_.rough_amplitude * std::sin(kTwoPi * ctx.t / p_.rough_period);
  HumanAction a;
  a.input = steer(ctx, pursuit_curvature(ctx, noise(ctx) + wobble));
  return a;
}

HumanAction AdversarialPolicy::act(const PolicyContext& ctx) {
  if (!trigger_) {
    trigger_ = std::numeric_limits<double>::infinity();
    for (const auto& c : ctx.mission->cells) {
      if (c.reference == p_.hold_class) {
        trigger_ = c.s_begin - p_.hold_lead;
        break;
      }
    }
  }
  const double n = noise(ctx);
  if (phase_ == 0 && ctx.abscissa >= *trigger_) {
    phase_ = 1;
    hold_heading_ = ctx.state->pose.theta;
    held_ = 0.0;
  }
  HumanAction a;
  if (phase_ == 1) {
    const auto& vp = *ctx.vehicle;
    const double alpha = std::clamp(p_.hold_gain * wrap_angle(hold_heading_ - ctx.state->pose.theta), -vp.alpha_max,
                                    vp.alpha_max);
    a.input = steer(ctx, std::tan(alpha) / vp.wheelbase);
    held_ += ctx.state->v * ctx.dt;
    if (held_ >= p_.hold_distance) phase_ = 2;
  } else {
    a.input = steer(ctx, pursuit_curvature(ctx, n));
  }
  a.phase = phase_;
  return a;
}

HumanAction ReplayPolicy::act(const PolicyContext& ctx) {
  if (ctx.step < actions_.size()) return actions_[ctx.step];
  return {};
}

void CommandQueue::push(const Event& e) {
  std::lock_guard lock(mutex_);
  events_.push_back(e);
}

std::vector<CommandQueue::Event> CommandQueue::drain() {
  std::lock_guard lock(mutex_);
  std::vector<Event> out(events_.begin(), events_.end());
  events_.clear();
  return out;
}

HumanAction ExternalPolicy::act(const PolicyContext&) {
  bool clamped = false, release = false;
  for (const auto& e : queue_->drain()) {
    if (e.kind == CommandQueue::Event::Kind::DriverLeft) {
      current_ = {0.0, default_speed_, false, false};
    } else {
      current_ = e.command;
      clamped = clamped || e.command.clamped;
      release = release || e.command.override_release;
    }
  }
  HumanAction a;
  a.input = {current_.speed, current_.torque, current_.torque};
  a.command_clamped = clamped;
  a.override_release = release;
  return a;
}

std::unique_ptr<HumanPolicy> make_policy(const PolicyParams& params, std::shared_ptr<CommandQueue> queue) {
  switch (params.kind) {
    case PolicyKind::Compliant: return std::make_unique<CompliantPolicy>(params);
    case PolicyKind::Rough: return std::make_unique<RoughPolicy>(params);
    case PolicyKind::Adversarial: return std::make_unique<AdversarialPolicy>(params);
    case PolicyKind::Replay: {
      if (params.replay_file.empty()) throw InvalidArgument("replay policy needs a telemetry file");
      std::vector<HumanAction> actions;
      for (const auto& r : read_telemetry_csv(params.replay_file)) {
        HumanAction a;
        a.input = {r.human_v, r.human_tau_r, r.human_tau_l};
        a.phase = r.human_phase;
        actions.push_back(a);
      }
      return std::make_unique<ReplayPolicy>(std::move(actions));
    }
    case PolicyKind::External:
      if (!queue) throw InvalidArgument("external policy needs a command queue");
      return std::make_unique<ExternalPolicy>(std::move(queue), params.speed);
  }
  throw InvalidArgument("make_policy: unknown kind");
}

}  // namespace sharednav
