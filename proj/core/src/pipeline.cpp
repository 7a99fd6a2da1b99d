#include "sharednav/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "sharednav/error.hpp"
#include "sharednav/random.hpp"
#include "sharednav/scenario.hpp"

namespace sharednav {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class T>
void read(const YAML::Node& n, const char* key, T& out) {
  if (n && n[key]) out = n[key].as<T>();
}

void read_train(const YAML::Node& n, TrainConfig& t) {
  if (!n) return;
  read(n, "learning_rate", t.learning_rate);
  read(n, "batch_size", t.batch_size);
  read(n, "epochs", t.epochs);
  read(n, "train_fraction", t.train_fraction);
}

void require(const std::filesystem::path& p, const char* what, const char* verb) {
  if (!std::filesystem::exists(p))
    throw FormatError(std::string(what) + " not found at " + p.string() + " (run `" + verb + "` first)");
}

}  // namespace

std::filesystem::path default_home() {
  if (const char* env = std::getenv(kHomeVariable); env && *env) return env;
  return "sharednav-data";
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  PipelineConfig cfg;
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base / p;
  };
  try {
    const YAML::Node root = YAML::LoadFile(path.string());
    if (root["home"]) cfg.home = resolve(root["home"].as<std::string>());
    if (root["map"]) cfg.map = resolve(root["map"].as<std::string>());
    read(root, "seed", cfg.seed);
    read(root, "clearance", cfg.clearance);
    if (const auto p = root["prm"]) {
      read(p, "density", cfg.prm.density);
      read(p, "neighbours", cfg.prm.neighbours);
    }
    if (const auto s = root["synth"]) {
      read(s, "count", cfg.trajectory_count);
      read(s, "max_curvature", cfg.trajectories.max_curvature);
      read(s, "attempts_per_path", cfg.trajectories.attempts_per_path);
      read(s, "balance", cfg.trajectories.balance);
      read(s, "shortcut", cfg.trajectories.route.shortcut);
      read(s, "window", cfg.trajectories.window.length);
      read(s, "spacing", cfg.trajectories.window.spacing);
      if (s["turn_threshold_deg"]) cfg.trajectories.window.turn_threshold = deg2rad(s["turn_threshold_deg"].as<double>());
    }
    read_train(root["autoencoder"], cfg.autoencoder_train);
    read_train(root["classifier"], cfg.head_train);
    if (root["classifier"]) read(root["classifier"], "seeds", cfg.head_seeds);
    if (root["merge_threshold_deg"]) cfg.merge_threshold = deg2rad(root["merge_threshold_deg"].as<double>());
  } catch (const YAML::Exception& e) {
    throw FormatError("bad pipeline config " + path.string() + ": " + e.what());
  }
  if (cfg.head_seeds < 1) throw FormatError("pipeline config: classifier.seeds must be at least 1");
  if (cfg.trajectory_count == 0) throw FormatError("pipeline config: synth.count must be positive");
  cfg.autoencoder.window = cfg.trajectories.window.length;
  return cfg;
}

std::filesystem::path ArtifactPaths::head_metrics(int seed_index) const {
  return head.parent_path() / ("classifier_metrics_" + std::to_string(seed_index + 1) + ".csv");
}

ArtifactPaths artifact_paths(const PipelineConfig& cfg) {
  const auto home = cfg.home.empty() ? default_home() : cfg.home;
  ArtifactPaths p;
  p.map = cfg.map.empty() ? home / "maps" / "cross.yaml" : cfg.map;
  p.roadmap = home / "roadmap.json";
  p.trajectories = home / "trajectories.json";
  p.autoencoder = home / "autoencoder.bin";
  p.autoencoder_metrics = home / "autoencoder_metrics.csv";
  p.head = home / "classifier.bin";
  p.train_summary = home / "train_summary.json";
  p.behaviour_map = home / "behaviour_map.json";
  p.behaviour_map_csv = home / "behaviour_map.csv";
  p.behaviour_map_svg = home / "behaviour_map.svg";
  p.runs = home / "runs";
  return p;
}

StageSeeds stage_seeds(const PipelineConfig& cfg) {
  StageSeeds s;
  s.prm = derive_seed(cfg.seed, 101);
  s.trajectories = derive_seed(cfg.seed, 102);
  s.autoencoder = derive_seed(cfg.seed, 103);
  for (int i = 0; i < cfg.head_seeds; ++i) s.heads.push_back(derive_seed(cfg.seed, 200 + static_cast<std::uint64_t>(i)));
  return s;
}

std::filesystem::path ensure_map(const PipelineConfig& cfg, std::ostream& log) {
  const auto paths = artifact_paths(cfg);
  if (!cfg.map.empty()) {
    require(paths.map, "map", "map-build");
    return paths.map;
  }
  // Regenerated every time so the bundled map cannot drift from the generator.
  write_map_files(paths.map.parent_path(), "cross", make_cross_map());
  log << "map: wrote " << paths.map.string() << '\n';
  return paths.map;
}

Roadmap run_map_build(const PipelineConfig& cfg, std::ostream& log) {
  const auto paths = artifact_paths(cfg);
  std::filesystem::create_directories(paths.roadmap.parent_path());
  const auto map_path = ensure_map(cfg, log);
  const OccupancyGrid grid = load_map(map_path);
  const auto t0 = Clock::now();
  Roadmap rm = build_prm(grid, cfg.clearance, stage_seeds(cfg).prm, cfg.prm);
  save_roadmap(paths.roadmap, rm);
  log << "map-build: " << rm.nodes.size() << " nodes, " << rm.edge_count() << " edges in " << seconds_since(t0)
      << " s -> " << paths.roadmap.string() << '\n';
  return rm;
}

std::vector<Trajectory> run_synth(const PipelineConfig& cfg, std::ostream& log) {
  const auto paths = artifact_paths(cfg);
  require(paths.roadmap, "roadmap", "map-build");
  const OccupancyGrid grid = load_map(paths.map);
  const Roadmap rm = load_roadmap(paths.roadmap);
  TrajectoryOptions opts = cfg.trajectories;
  opts.route.clearance = cfg.clearance;
  const auto t0 = Clock::now();
  const auto seed = stage_seeds(cfg).trajectories;
  auto trajs = generate_trajectories(grid, rm, cfg.trajectory_count, seed, opts);
  save_trajectories(paths.trajectories, trajs, seed, opts.window);
  std::array<std::size_t, 3> hist{};
  for (const auto& t : trajs) ++hist[static_cast<std::size_t>(t.label)];
  log << "synth: " << trajs.size() << " paths (Left " << hist[0] << ", Right " << hist[1] << ", Straight "
      << hist[2] << ") in " << seconds_since(t0) << " s -> " << paths.trajectories.string() << '\n';
  return trajs;
}

double TrainSummary::mean_accuracy() const {
  if (heads.empty()) return 0.0;
  double s = 0.0;
  for (const auto& h : heads) s += h.validation.accuracy;
  return s / static_cast<double>(heads.size());
}

int TrainSummary::straight_weakest() const {
  int n = 0;
  for (const auto& h : heads) {
    const auto& a = h.validation.class_accuracy;
    const double straight = a[static_cast<std::size_t>(Behaviour::Straight)];
    if (straight < a[static_cast<std::size_t>(Behaviour::Left)] &&
        straight < a[static_cast<std::size_t>(Behaviour::Right)])
      ++n;
  }
  return n;
}

TrainSummary run_train(const PipelineConfig& cfg, std::ostream& log) {
  const auto paths = artifact_paths(cfg);
  require(paths.trajectories, "trajectories", "synth");
  const auto set = load_trajectories(paths.trajectories);
  const auto windows = training_windows(set.trajectories, set.window);
  const auto labels = training_labels(set.trajectories);
  const auto seeds = stage_seeds(cfg);

  TrainSummary s;
  s.windows = windows.size();
  AutoencoderConfig ac = cfg.autoencoder;
  ac.window = set.window.length;
  TrainConfig at = cfg.autoencoder_train;
  at.seed = seeds.autoencoder;
  auto t0 = Clock::now();
  const auto ae = train_autoencoder(windows, ac, at, [&](int epoch, double train, double val) {
    if (epoch % 50 == 0) log << "  net1 epoch " << epoch << " train " << train << " val " << val << '\n';
  });
  s.autoencoder_seconds = seconds_since(t0);
  s.best_epoch = ae.best_epoch;
  s.rmse = ae.val_rmse;
  save_autoencoder(paths.autoencoder, ae.encoder, ae.decoder);
  write_autoencoder_metrics_csv(paths.autoencoder_metrics, ae.history);

  t0 = Clock::now();
  for (std::size_t i = 0; i < seeds.heads.size(); ++i) {
    TrainConfig ht = cfg.head_train;
    ht.seed = seeds.heads[i];
    const auto r = train_classifier(ae.encoder, windows, labels, ht);
    s.heads.push_back({ht.seed, r.best_epoch, r.validation});
    write_classifier_metrics_csv(paths.head_metrics(static_cast<int>(i)), r.history);
    if (i == 0) save_head(paths.head, r.head);
  }
  s.head_seconds = seconds_since(t0);
  save_train_summary(paths.train_summary, s);
  log << format_train_summary(s);
  return s;
}

std::string format_train_summary(const TrainSummary& s) {
  std::ostringstream o;
  char buf[256];
  o << "Net1 validation RMSE (" << s.windows << " windows, best epoch " << s.best_epoch << ", "
    << static_cast<int>(s.autoencoder_seconds + 0.5) << " s)\n";
  std::snprintf(buf, sizeof buf, "  %10s %10s %10s %10s %10s\n", "x (m)", "y (m)", "cos(th)", "sin(th)", "kappa");
  o << buf;
  std::snprintf(buf, sizeof buf, "  %10.4f %10.4f %10.4f %10.4f %10.4f\n", s.rmse[0], s.rmse[1], s.rmse[2], s.rmse[3],
                s.rmse[4]);
  o << buf;
  o << "Net2 validation accuracy\n";
  std::snprintf(buf, sizeof buf, "  %4s %8s %8s %8s %8s\n", "seed", "Left", "Right", "Straight", "overall");
  o << buf;
  for (std::size_t i = 0; i < s.heads.size(); ++i) {
    const auto& v = s.heads[i].validation;
    std::snprintf(buf, sizeof buf, "  %4zu %7.1f%% %7.1f%% %7.1f%% %7.1f%%\n", i + 1, 100 * v.class_accuracy[0],
                  100 * v.class_accuracy[1], 100 * v.class_accuracy[2], 100 * v.accuracy);
    o << buf;
  }
  std::snprintf(buf, sizeof buf, "  mean overall %.1f%%, Straight weakest in %d of %zu seeds\n",
                100 * s.mean_accuracy(), s.straight_weakest(), s.heads.size());
  o << buf;
  return o.str();
}

void save_train_summary(const std::filesystem::path& path, const TrainSummary& s) {
  nlohmann::json j;
  j["format"] = "sharednav-train-summary";
  j["version"] = 1;
  j["windows"] = s.windows;
  j["best_epoch"] = s.best_epoch;
  j["rmse"] = s.rmse;
  j["autoencoder_seconds"] = s.autoencoder_seconds;
  j["head_seconds"] = s.head_seconds;
  j["heads"] = nlohmann::json::array();
  for (const auto& h : s.heads) {
    j["heads"].push_back({{"seed", h.seed},
                          {"best_epoch", h.best_epoch},
                          {"accuracy", h.validation.accuracy},
                          {"class_accuracy", h.validation.class_accuracy},
                          {"confusion", h.validation.confusion}});
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

TrainSummary load_train_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "sharednav-train-summary" || j.at("version") != 1)
      throw FormatError(path.string() + ": not a version 1 training summary");
    TrainSummary s;
    s.windows = j.at("windows").get<std::size_t>();
    s.best_epoch = j.at("best_epoch").get<int>();
    s.rmse = j.at("rmse").get<std::array<double, 5>>();
    s.autoencoder_seconds = j.at("autoencoder_seconds").get<double>();
    s.head_seconds = j.at("head_seconds").get<double>();
    for (const auto& h : j.at("heads")) {
      HeadRun r;
      r.seed = h.at("seed").get<std::uint64_t>();
      r.best_epoch = h.at("best_epoch").get<int>();
      r.validation.accuracy = h.at("accuracy").get<double>();
      r.validation.class_accuracy = h.at("class_accuracy").get<std::array<double, 3>>();
      r.validation.confusion = h.at("confusion").get<std::array<std::array<int, 3>, 3>>();
      s.heads.push_back(r);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

BehaviouralMap run_behmap(const PipelineConfig& cfg, std::ostream& log) {
  const auto paths = artifact_paths(cfg);
  require(paths.trajectories, "trajectories", "synth");
  require(paths.autoencoder, "autoencoder", "train");
  require(paths.head, "classifier", "train");
  const OccupancyGrid grid = load_map(paths.map);
  const auto set = load_trajectories(paths.trajectories);
  const Encoder enc = load_autoencoder(paths.autoencoder).first;
  const ClassifierHead head = load_head(paths.head);
  const auto t0 = Clock::now();
  auto bm = build_behavioural_map(set.trajectories, enc, head, BehaviourGrid::covering(grid), set.window, set.seed,
                                  cfg.merge_threshold);
  save_behavioural_map(paths.behaviour_map, bm);
  write_behavioural_map_csv(paths.behaviour_map_csv, bm);
  write_behavioural_map_svg(paths.behaviour_map_svg, bm, grid);
  log << "behmap: " << bm.cluster_count() << " clusters from " << bm.member_total() << " crossings in "
      << seconds_since(t0) << " s -> " << paths.behaviour_map.string() << '\n';
  return bm;
}

ExperimentConfig experiment_config(const PipelineConfig& cfg, PolicyKind policy, const std::string& name) {
  const auto paths = artifact_paths(cfg);
  ExperimentConfig e;
  e.name = name;
  e.map = paths.map;
  e.roadmap = paths.roadmap;
  e.behaviour_map = paths.behaviour_map;
  e.autoencoder = paths.autoencoder;
  e.head = paths.head;
  e.output_dir = paths.runs;
  const CrossMission mission;
  e.p0 = mission.p0;
  e.pf = mission.pf;
  e.policy.kind = policy;
  e.seed = cfg.seed;
  // The reference scenarios study the assistance itself; disengagement has its own tests.
  e.control.disengage.enabled = false;
  return e;
}

}  // namespace sharednav
