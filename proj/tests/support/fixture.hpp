#pragma once

// A reduced pipeline (few paths, short training) built once per test binary. The
// networks are weak but real, which is all the loop, replay and service tests need.

#include <unistd.h>

#include <filesystem>
#include <sstream>
#include <string>

#include "sharednav/pipeline.hpp"
#include "sharednav/simulation.hpp"

namespace fixture {

inline sharednav::PipelineConfig small_config(const std::filesystem::path& home) {
  sharednav::PipelineConfig cfg;
  cfg.home = home;
  cfg.seed = 7;
  cfg.trajectory_count = 240;
  cfg.autoencoder_train.epochs = 25;
  cfg.head_train.epochs = 40;
  cfg.head_seeds = 1;
  return cfg;
}

inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("sharednav-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void build_all(const sharednav::PipelineConfig& cfg) {
  std::ostringstream log;
  sharednav::run_map_build(cfg, log);
  sharednav::run_synth(cfg, log);
  sharednav::run_train(cfg, log);
  sharednav::run_behmap(cfg, log);
}

/// Pipeline home shared by every test of the binary; removed at exit.
inline const sharednav::PipelineConfig& pipeline() {
  struct Home {
    sharednav::PipelineConfig cfg;
    Home() : cfg(small_config(scratch_dir("fixture"))) { build_all(cfg); }
    ~Home() {
      std::error_code ec;
      std::filesystem::remove_all(cfg.home, ec);
    }
  };
  static Home home;
  return home.cfg;
}

inline sharednav::ExperimentConfig experiment(sharednav::PolicyKind kind, const std::string& name) {
  auto e = sharednav::experiment_config(pipeline(), kind, name);
  e.duration = 20.0;
  return e;
}

inline const sharednav::Artifacts& artifacts() {
  static const sharednav::Artifacts a = sharednav::load_artifacts(experiment(sharednav::PolicyKind::Compliant, "x"));
  return a;
}

}  // namespace fixture
