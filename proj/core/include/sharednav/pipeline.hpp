#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sharednav/behmap.hpp"
#include "sharednav/neural.hpp"
#include "sharednav/roadmap.hpp"
#include "sharednav/simulation.hpp"

namespace sharednav {

/// Environment variable naming the default artefact directory.
inline constexpr const char* kHomeVariable = "SHAREDNAV_HOME";

/// $SHAREDNAV_HOME if set, otherwise ./sharednav-data.
std::filesystem::path default_home();

struct PipelineConfig {
  std::filesystem::path home;       // artefact directory
  std::filesystem::path map;        // map metadata; empty means <home>/maps/cross.yaml (generated)
  std::uint64_t seed = 1;
  double clearance = 0.35;          // m, walker half-width used for the roadmap and routes
  PrmOptions prm;
  std::size_t trajectory_count = 1800;
  TrajectoryOptions trajectories;
  AutoencoderConfig autoencoder;
  TrainConfig autoencoder_train;
  TrainConfig head_train;
  int head_seeds = 5;               // Net2 is trained once per seed; the first is deployed
  double merge_threshold = deg2rad(45.0);
};

/// YAML; keys that are absent keep their defaults. Relative paths resolve against the file.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// File layout inside the artefact directory.
struct ArtifactPaths {
  std::filesystem::path map;
  std::filesystem::path roadmap;
  std::filesystem::path trajectories;
  std::filesystem::path autoencoder;
  std::filesystem::path autoencoder_metrics;
  std::filesystem::path head;
  std::filesystem::path train_summary;
  std::filesystem::path behaviour_map;
  std::filesystem::path behaviour_map_csv;
  std::filesystem::path behaviour_map_svg;
  std::filesystem::path runs;

  std::filesystem::path head_metrics(int seed_index) const;
};

ArtifactPaths artifact_paths(const PipelineConfig& cfg);

/// Seeds of the individual stages, all derived from cfg.seed.
struct StageSeeds {
  std::uint64_t prm;
  std::uint64_t trajectories;
  std::uint64_t autoencoder;
  std::vector<std::uint64_t> heads;
};
StageSeeds stage_seeds(const PipelineConfig& cfg);

/// Writes the bundled cross map into <home>/maps unless a map is configured.
std::filesystem::path ensure_map(const PipelineConfig& cfg, std::ostream& log);

Roadmap run_map_build(const PipelineConfig& cfg, std::ostream& log);
std::vector<Trajectory> run_synth(const PipelineConfig& cfg, std::ostream& log);

struct HeadRun {
  std::uint64_t seed = 0;
  int best_epoch = 0;
  ClassifierMetrics validation;
};

struct TrainSummary {
  std::size_t windows = 0;
  int best_epoch = 0;
  std::array<double, 5> rmse{};  // x, y, cos, sin, kappa on the validation split
  double autoencoder_seconds = 0.0;
  std::vector<HeadRun> heads;
  double head_seconds = 0.0;

  double mean_accuracy() const;
  /// Seeds (out of heads.size()) whose lowest per-class accuracy is Straight's.
  int straight_weakest() const;
};

TrainSummary run_train(const PipelineConfig& cfg, std::ostream& log);
/// Net1 RMSE row and a per-seed Net2 accuracy table.
std::string format_train_summary(const TrainSummary& s);
void save_train_summary(const std::filesystem::path& path, const TrainSummary& s);
TrainSummary load_train_summary(const std::filesystem::path& path);

BehaviouralMap run_behmap(const PipelineConfig& cfg, std::ostream& log);

/// Experiment on the pipeline's artefacts with the reference cross mission.
ExperimentConfig experiment_config(const PipelineConfig& cfg, PolicyKind policy, const std::string& name);

}  // namespace sharednav
