#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "sharednav/behmap.hpp"
#include "sharednav/control.hpp"

namespace sharednav {

enum class PolicyKind { Compliant, Rough, Adversarial, Replay, External };

const char* policy_name(PolicyKind k);
/// "compliant", "rough", "adversarial", "replay" or "external"; throws InvalidArgument.
PolicyKind parse_policy(const std::string& name);

struct PolicyParams {
  PolicyKind kind = PolicyKind::Compliant;
  double speed = 0.8;                       // m/s
  double lookahead = 1.0;                   // pure-pursuit distance along the path, m
  double heading_noise = deg2rad(1.0);      // std-dev of the perceived-heading error
  double noise_interval = 0.5;              // s between noise redraws
  double rough_amplitude = deg2rad(10.0);
  double rough_period = 4.0;                // s
  Behaviour hold_class = Behaviour::Left;   // adversarial: first cell referencing this class
  double hold_lead = 1.0;                   // start holding this far (m) before that cell
  double hold_distance = 3.0;               // m walked while holding straight
  double hold_gain = 2.0;                   // steering angle per rad of heading drift while holding
  double stiffness = 200.0;                 // N m / rad, the user's grip on the steering
  double arm_damping = 20.0;                // N m s / rad
  std::string replay_file;                  // telemetry CSV for the replay policy
};

/// What the user does during one control period.
struct HumanAction {
  HumanInput input;
  int phase = 0;                 // adversarial: 0 before, 1 holding, 2 released
  bool command_clamped = false;  // external: the applied command was clamped
  bool override_release = false; // external: disengage request
};

struct PolicyContext {
  double t = 0.0;
  double dt = 0.0;
  std::size_t step = 0;
  const WalkerState* state = nullptr;
  const Mission* mission = nullptr;
  double abscissa = 0.0;     // user's own nearest abscissa on the mission path
  std::size_t cell = 0;      // mission cell at that abscissa
  const VehicleParams* vehicle = nullptr;
  std::mt19937_64* rng = nullptr;  // the run's single random stream
};

class HumanPolicy {
 public:
  virtual ~HumanPolicy() = default;
  virtual HumanAction act(const PolicyContext& ctx) = 0;
};

/// Pure pursuit of the mission path with a noisy (and optionally perturbed) heading.
class CompliantPolicy : public HumanPolicy {
 public:
  explicit CompliantPolicy(PolicyParams params) : p_(std::move(params)) {}
  HumanAction act(const PolicyContext& ctx) override;

 protected:
  /// Steering torques that drive the wheels towards curvature kappa.
  HumanInput steer(const PolicyContext& ctx, double kappa) const;
  double pursuit_curvature(const PolicyContext& ctx, double heading_offset);
  double noise(const PolicyContext& ctx);

  PolicyParams p_;
  double noise_ = 0.0;
  double next_draw_ = 0.0;
};

/// Compliant plus a sinusoidal heading perturbation.
class RoughPolicy : public CompliantPolicy {
 public:
  using CompliantPolicy::CompliantPolicy;
  HumanAction act(const PolicyContext& ctx) override;
};

/// Compliant until shortly before the first cell that references `hold_class`, then holds
/// the current heading for `hold_distance` metres, then compliant again.
class AdversarialPolicy : public CompliantPolicy {
 public:
  using CompliantPolicy::CompliantPolicy;
  HumanAction act(const PolicyContext& ctx) override;

 private:
  int phase_ = 0;
  double hold_heading_ = 0.0;
  double held_ = 0.0;
  std::optional<double> trigger_;
};

/// Replays recorded human inputs step by step; zero torque and speed after the end.
class ReplayPolicy : public HumanPolicy {
 public:
  explicit ReplayPolicy(std::vector<HumanAction> actions) : actions_(std::move(actions)) {}
  HumanAction act(const PolicyContext& ctx) override;

 private:
  std::vector<HumanAction> actions_;
};

/// Inbound live command: steering torque applied to both wheels and walking speed.
struct DriveCommand {
  double torque = 0.0;
  double speed = 0.0;
  bool override_release = false;
  bool clamped = false;
};

/// Thread-safe queue between the service (producer) and the simulation loop (consumer).
class CommandQueue {
 public:
  struct Event {
    enum class Kind { Command, DriverLeft } kind = Kind::Command;
    DriveCommand command;
  };

  void push(const Event& e);
  std::vector<Event> drain();

 private:
  std::mutex mutex_;
  std::deque<Event> events_;
};

/// Applies the most recent live command; with no driver the user applies no torque and
/// keeps walking at the default speed.
class ExternalPolicy : public HumanPolicy {
 public:
  ExternalPolicy(std::shared_ptr<CommandQueue> queue, double default_speed)
      : queue_(std::move(queue)), default_speed_(default_speed), current_{0.0, default_speed, false, false} {}
  HumanAction act(const PolicyContext& ctx) override;

 private:
  std::shared_ptr<CommandQueue> queue_;
  double default_speed_;
  DriveCommand current_;
};

std::unique_ptr<HumanPolicy> make_policy(const PolicyParams& params, std::shared_ptr<CommandQueue> queue = nullptr);

}  // namespace sharednav
