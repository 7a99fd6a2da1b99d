#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sharednav/behmap.hpp"
#include "sharednav/control.hpp"
#include "sharednav/policies.hpp"
#include "sharednav/roadmap.hpp"
#include "sharednav/worldmap.hpp"

namespace sharednav {

struct ExperimentConfig {
  std::string name = "run";
  std::filesystem::path map;            // map metadata (.yaml)
  std::filesystem::path roadmap;
  std::filesystem::path behaviour_map;
  std::filesystem::path autoencoder;
  std::filesystem::path head;
  Point2 p0{0.0, -4.5};
  Point2 pf{-4.5, 0.0};
  PolicyParams policy;
  double duration = 30.0;      // s, simulated
  double dt = 0.02;            // s
  double goal_radius = 0.5;    // m
  double localisation_noise = 0.0;  // std-dev (m) of the position fed to the features
  std::uint64_t seed = 1;
  ControlConfig control;
  std::filesystem::path output_dir;
};

/// Reads a YAML experiment file; relative paths resolve against the file's directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

struct Artifacts {
  OccupancyGrid grid;
  Roadmap roadmap;
  BehaviouralMap behaviour_map;
  Encoder encoder;
  ClassifierHead head;
};

/// Loads every file named by the config; throws FormatError (or ProvenanceError) when a
/// file is missing or does not match the models.
Artifacts load_artifacts(const ExperimentConfig& cfg);

/// One control period. Units are SI; angles in radians.
struct TelemetryRecord {
  std::size_t step = 0;
  double t = 0.0;
  double x = 0.0, y = 0.0, theta = 0.0;
  double v = 0.0, omega = 0.0;
  double alpha_r = 0.0, alpha_l = 0.0;
  double alpha_dot_r = 0.0, alpha_dot_l = 0.0;
  double s_ref = 0.0;
  double cross_track = 0.0;
  int cell_ix = 0, cell_iy = 0;
  int ref_class = 0;
  double theta_ref = 0.0;
  double alpha_ref_r = 0.0, alpha_ref_l = 0.0;
  double heading_error = 0.0;
  int confidence_valid = 0;
  double eps_left = 0.0, eps_right = 0.0, eps_straight = 0.0;
  double eps_hat = 0.0;
  double lambda = 0.0, a = 0.0, b = 0.0;
  double tau_alpha_r = 0.0, tau_alpha_l = 0.0;
  double tau_beta_r = 0.0, tau_beta_l = 0.0;
  double tau_r = 0.0, tau_l = 0.0;
  int engaged = 0;
  int disengaged = 0;
  double opposition = 0.0;
  double human_v = 0.0, human_tau_r = 0.0, human_tau_l = 0.0;
  int human_phase = 0;
  int human_override = 0;
  int command_clamped = 0;

  friend bool operator==(const TelemetryRecord&, const TelemetryRecord&) = default;
};

/// Column names of the telemetry CSV, in order.
const std::vector<std::string>& telemetry_columns();
void write_telemetry_csv(const std::filesystem::path& path, const std::vector<TelemetryRecord>& records);
std::vector<TelemetryRecord> read_telemetry_csv(const std::filesystem::path& path);
/// Visits the fields in column order; `integral` marks integer columns.
void for_each_telemetry_field(const TelemetryRecord& r,
                              const std::function<void(const std::string& name, double value, bool integral)>& fn);

struct EpisodeMarkers {
  bool present = false;          // the run had a holding phase
  double hold_start = 0.0;       // s
  double release = 0.0;          // s
  double left_min_during_hold = 1.0;  // min eps_left while holding where Left is the reference
  double left_max_after_release = 0.0;
  double left_min_time = 0.0;
  double left_recovery_time = 0.0;
  std::optional<double> heading_settle;  // s after release until |heading error| < 0.1 rad
};

struct RunReport {
  std::string name;
  std::string policy;
  std::size_t steps = 0;
  double duration = 0.0;
  bool goal_reached = false;
  double final_goal_distance = 0.0;
  double mean_abs_torque = 0.0;  // mean over steps of (|tau_r| + |tau_l|) / 2
  double max_abs_torque = 0.0;
  double mean_eps_hat = 0.0;     // time-weighted over steps with a confidence
  double mean_abs_cross_track = 0.0;
  double max_abs_cross_track = 0.0;
  double mean_abs_heading_error = 0.0;
  int disengagements = 0;
  EpisodeMarkers episode;
  std::string telemetry;  // file name of the telemetry CSV
};

/// Aggregates a run from its telemetry; sums run in step order.
RunReport summarize(const std::vector<TelemetryRecord>& records, Point2 goal, double goal_radius);
std::string report_to_json(const RunReport& report);
void write_report_json(const std::filesystem::path& path, const RunReport& report);

/// Closed loop: policy -> controller -> plant -> feature reconstruction, one step per call.
class Simulation {
 public:
  Simulation(const Artifacts& artifacts, const ExperimentConfig& cfg, std::unique_ptr<HumanPolicy> policy);
  /// Uses an already planned mission (the planner is deterministic, so this is only a
  /// time saving).
  Simulation(const Artifacts& artifacts, const ExperimentConfig& cfg, std::unique_ptr<HumanPolicy> policy,
             Mission mission);

  const Mission& mission() const { return mission_; }
  const WalkerState& state() const { return state_; }
  bool finished() const { return finished_; }
  bool goal_reached() const { return goal_reached_; }

  /// Advances one period and returns its record; throws Error once finished.
  const TelemetryRecord& step();
  const std::vector<TelemetryRecord>& records() const { return records_; }

 private:
  void init();

  const Artifacts* artifacts_;
  ExperimentConfig cfg_;
  std::unique_ptr<HumanPolicy> policy_;
  Mission mission_;
  std::mt19937_64 rng_;
  WalkerState state_;
  std::optional<SharedController> controller_;
  PathTracker human_tracker_;
  PathReconstructor reconstructor_;
  SampleHistory history_;
  std::vector<TelemetryRecord> records_;
  std::size_t k_ = 0;
  std::size_t max_steps_ = 0;
  bool finished_ = false;
  bool goal_reached_ = false;
  bool new_sample_ = false;
};

/// Runs to the goal or the duration limit.
RunReport run_simulation(const Artifacts& artifacts, const ExperimentConfig& cfg, std::vector<TelemetryRecord>* out,
                         std::shared_ptr<CommandQueue> queue = nullptr);

/// Loads artefacts, runs, and writes <output_dir>/<name>.csv and <name>.json.
RunReport run_experiment(const ExperimentConfig& cfg);

}  // namespace sharednav
