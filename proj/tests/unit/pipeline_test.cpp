#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "sharednav/error.hpp"
#include "sharednav/pipeline.hpp"
#include "support/fixture.hpp"

using namespace sharednav;

TEST(PipelineConfig, YamlOverridesAndRelativePaths) {
  const auto dir = fixture::scratch_dir("pcfg");
  std::ofstream(dir / "p.yaml") << "home: data\n"
                                   "seed: 9\n"
                                   "synth:\n  count: 300\n  balance: false\n  turn_threshold_deg: 20\n"
                                   "autoencoder:\n  epochs: 12\n  learning_rate: 0.002\n"
                                   "classifier:\n  seeds: 3\n"
                                   "merge_threshold_deg: 30\n";
  const auto cfg = load_pipeline_config(dir / "p.yaml");
  EXPECT_EQ(cfg.home, dir / "data");
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.trajectory_count, 300u);
  EXPECT_FALSE(cfg.trajectories.balance);
  EXPECT_NEAR(cfg.trajectories.window.turn_threshold, deg2rad(20.0), 1e-12);
  EXPECT_EQ(cfg.autoencoder_train.epochs, 12);
  EXPECT_EQ(cfg.autoencoder_train.learning_rate, 0.002);
  EXPECT_EQ(cfg.head_seeds, 3);
  EXPECT_NEAR(cfg.merge_threshold, deg2rad(30.0), 1e-12);
  EXPECT_EQ(cfg.clearance, PipelineConfig{}.clearance);

  std::ofstream(dir / "bad.yaml") << "synth:\n  count: 0\n";
  EXPECT_THROW(load_pipeline_config(dir / "bad.yaml"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST(PipelineConfig, StageSeedsAreDistinctAndSeedDependent) {
  PipelineConfig cfg;
  cfg.head_seeds = 5;
  const auto a = stage_seeds(cfg);
  std::set<std::uint64_t> all{a.prm, a.trajectories, a.autoencoder};
  all.insert(a.heads.begin(), a.heads.end());
  EXPECT_EQ(all.size(), 8u);
  cfg.seed = 2;
  const auto b = stage_seeds(cfg);
  EXPECT_NE(a.prm, b.prm);
  EXPECT_NE(a.heads[0], b.heads[0]);
  EXPECT_EQ(stage_seeds(cfg).autoencoder, b.autoencoder);
}

TEST(PipelineConfig, HomeFromEnvironment) {
  ::setenv(kHomeVariable, "/tmp/elsewhere", 1);
  EXPECT_EQ(default_home(), std::filesystem::path("/tmp/elsewhere"));
  ::unsetenv(kHomeVariable);
  EXPECT_EQ(default_home(), std::filesystem::path("sharednav-data"));
}

TEST(Pipeline, StagesRequireTheirInputs) {
  const auto dir = fixture::scratch_dir("empty");
  auto cfg = fixture::small_config(dir);
  std::ostringstream log;
  EXPECT_THROW(run_train(cfg, log), FormatError);
  EXPECT_THROW(run_behmap(cfg, log), FormatError);
  std::filesystem::remove_all(dir);
}

TEST(Pipeline, ArtefactsAndSummary) {
  const auto& cfg = fixture::pipeline();
  const auto paths = artifact_paths(cfg);
  for (const auto& p : {paths.map, paths.roadmap, paths.trajectories, paths.autoencoder, paths.autoencoder_metrics,
                        paths.head, paths.head_metrics(0), paths.train_summary, paths.behaviour_map,
                        paths.behaviour_map_csv, paths.behaviour_map_svg})
    EXPECT_TRUE(std::filesystem::exists(p)) << p;

  const auto s = load_train_summary(paths.train_summary);
  EXPECT_EQ(s.heads.size(), static_cast<std::size_t>(cfg.head_seeds));
  EXPECT_GT(s.windows, 0u);
  for (double r : s.rmse) EXPECT_GT(r, 0.0);
  EXPECT_EQ(s.heads[0].seed, stage_seeds(cfg).heads[0]);

  const auto dir = fixture::scratch_dir("summary");
  save_train_summary(dir / "s.json", s);
  const auto back = load_train_summary(dir / "s.json");
  EXPECT_EQ(back.rmse, s.rmse);
  EXPECT_EQ(back.mean_accuracy(), s.mean_accuracy());
  EXPECT_EQ(back.straight_weakest(), s.straight_weakest());
  EXPECT_NE(format_train_summary(s).find("RMSE"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(Pipeline, SummaryAggregates) {
  TrainSummary s;
  HeadRun a, b;
  a.validation.accuracy = 0.8;
  a.validation.class_accuracy = {0.9, 0.85, 0.7};
  b.validation.accuracy = 0.9;
  b.validation.class_accuracy = {0.8, 0.95, 0.9};
  s.heads = {a, b};
  EXPECT_NEAR(s.mean_accuracy(), 0.85, 1e-12);
  EXPECT_EQ(s.straight_weakest(), 1);
}

TEST(Pipeline, ExperimentConfigPointsAtTheArtefacts) {
  const auto& cfg = fixture::pipeline();
  const auto e = experiment_config(cfg, PolicyKind::Rough, "r");
  const auto paths = artifact_paths(cfg);
  EXPECT_EQ(e.map, paths.map);
  EXPECT_EQ(e.head, paths.head);
  EXPECT_EQ(e.output_dir, paths.runs);
  EXPECT_EQ(e.policy.kind, PolicyKind::Rough);
  EXPECT_EQ(e.seed, cfg.seed);
  EXPECT_NO_THROW(load_artifacts(e));
}

TEST(BundledConfigs, MatchTheLibraryDefaults) {
  const std::filesystem::path root = SHAREDNAV_SOURCE_DIR;
  const auto cfg = load_pipeline_config(root / "configs/pipeline.yaml");
  const PipelineConfig def;
  EXPECT_EQ(cfg.seed, def.seed);
  EXPECT_EQ(cfg.trajectory_count, def.trajectory_count);
  EXPECT_EQ(cfg.autoencoder_train.epochs, def.autoencoder_train.epochs);
  EXPECT_EQ(cfg.head_seeds, def.head_seeds);
  EXPECT_NEAR(cfg.trajectories.window.turn_threshold, def.trajectories.window.turn_threshold, 1e-12);
  EXPECT_EQ(std::filesystem::weakly_canonical(cfg.map), std::filesystem::weakly_canonical(root / "data/maps/cross.yaml"));
  EXPECT_NO_THROW(load_map(cfg.map));

  for (const char* name : {"compliant", "rough", "adversarial"}) {
    const auto e = load_experiment_config(root / "configs" / (std::string(name) + ".yaml"));
    EXPECT_EQ(policy_name(e.policy.kind), std::string(name));
    EXPECT_FALSE(e.control.disengage.enabled);
    EXPECT_EQ(e.duration, 30.0);
  }
  const auto live = load_experiment_config(root / "configs/live.yaml");
  EXPECT_EQ(live.policy.kind, PolicyKind::External);
  EXPECT_TRUE(live.control.disengage.enabled);
  ASSERT_EQ(live.control.danger_zones.size(), 1u);
  EXPECT_TRUE(live.control.danger_zones[0].contains({0, 0}));
}

TEST(BundledConfigs, MapMatchesTheGenerator) {
  const std::filesystem::path root = SHAREDNAV_SOURCE_DIR;
  const auto dir = fixture::scratch_dir("gen");
  PipelineConfig cfg;
  cfg.home = dir;
  std::ostringstream log;
  const auto generated = ensure_map(cfg, log);
  const auto a = load_map(generated), b = load_map(root / "data/maps/cross.yaml");
  EXPECT_EQ(a.cells(), b.cells());
  EXPECT_EQ(a.resolution(), b.resolution());
  std::filesystem::remove_all(dir);
}
