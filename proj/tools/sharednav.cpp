// Command line front end: one verb per pipeline stage.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "sharednav/error.hpp"
#include "sharednav/pipeline.hpp"
#include "sharednav/service.hpp"
#include "sharednav/simulation.hpp"

using namespace sharednav;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kFailure = 1;      // unexpected error
constexpr int kBadInput = 2;     // invalid config, missing or mismatched artefacts
constexpr int kGoalMissed = 3;   // run finished without reaching the goal
constexpr int kNoPath = 4;       // mission or dataset planning failed

struct Common {
  std::string config;
  std::string home;
  std::optional<std::uint64_t> seed;
};

PipelineConfig pipeline_config(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_pipeline_config(c.config);
  if (!c.home.empty()) cfg.home = c.home;
  if (cfg.home.empty()) cfg.home = default_home();
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

void print_report(const RunReport& r) {
  std::printf("%s (%s): %zu steps, %.2f s, goal %s (%.3f m)\n", r.name.c_str(), r.policy.c_str(), r.steps, r.duration,
              r.goal_reached ? "reached" : "missed", r.final_goal_distance);
  std::printf("  mean |tau| %.4f N m, max |tau| %.3f N m, mean confidence %.3f\n", r.mean_abs_torque,
              r.max_abs_torque, r.mean_eps_hat);
  std::printf("  cross-track mean %.3f m max %.3f m, heading error mean %.3f rad, disengagements %d\n",
              r.mean_abs_cross_track, r.max_abs_cross_track, r.mean_abs_heading_error, r.disengagements);
  if (r.episode.present) {
    const auto& e = r.episode;
    std::printf("  hold %.2f-%.2f s: Left confidence min %.3f at %.2f s, max after release %.3f at %.2f s",
                e.hold_start, e.release, e.left_min_during_hold, e.left_min_time, e.left_max_after_release,
                e.left_recovery_time);
    if (e.heading_settle)
      std::printf(", heading settled %.2f s after release\n", *e.heading_settle);
    else
      std::printf(", heading never settled\n");
  }
}

SessionService* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared-authority navigation simulator"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "pipeline config (YAML)")->check(CLI::ExistingFile);
    sub->add_option("--home", common.home, std::string("artefact directory (default $") + kHomeVariable + ")");
    sub->add_option("--seed", common.seed, "master seed");
  };

  auto* map_build = app.add_subcommand("map-build", "write the map, build and cache the roadmap");
  add_common(map_build);
  auto* synth = app.add_subcommand("synth", "generate the labelled trajectory dataset");
  add_common(synth);
  std::optional<std::size_t> synth_count;
  synth->add_option("--count", synth_count, "number of paths");
  auto* train = app.add_subcommand("train", "train Net1 (autoencoder) then Net2 (classifier)");
  add_common(train);
  std::optional<int> epochs;
  train->add_option("--epochs", epochs, "epochs for both networks");
  auto* behmap = app.add_subcommand("behmap", "build and export the behavioural map");
  add_common(behmap);
  auto* all = app.add_subcommand("all", "map-build, synth, train and behmap in sequence");
  add_common(all);

  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run);
  std::string experiment, policy, name, output;
  std::optional<double> duration, noise;
  run->add_option("-e,--experiment", experiment, "experiment config (YAML); otherwise the cross mission")
      ->check(CLI::ExistingFile);
  run->add_option("--policy", policy, "compliant, rough, adversarial or replay");
  run->add_option("--name", name, "run name (file stem of the outputs)");
  run->add_option("--duration", duration, "simulated seconds");
  run->add_option("--noise", noise, "localisation noise std-dev (m)");
  run->add_option("--output", output, "output directory");
  std::string replay;
  run->add_option("--replay", replay, "telemetry CSV for the replay policy")->check(CLI::ExistingFile);
  bool no_disengage = false;
  run->add_flag("--no-disengage", no_disengage, "disable the disengagement logic");

  auto* report = app.add_subcommand("report", "re-aggregate a telemetry CSV");
  std::string telemetry, report_json;
  double goal_radius = 0.5;
  std::vector<double> goal{-4.5, 0.0};
  report->add_option("telemetry", telemetry, "telemetry CSV")->required()->check(CLI::ExistingFile);
  report->add_option("--goal", goal, "goal point x y")->expected(2);
  report->add_option("--goal-radius", goal_radius, "goal radius (m)");
  report->add_option("--json", report_json, "also write the report JSON here");

  auto* serve = app.add_subcommand("serve", "live session endpoint for the cockpit");
  add_common(serve);
  ServiceOptions sopt;
  std::string serve_experiment;
  serve->add_option("-e,--experiment", serve_experiment, "experiment config (YAML)")->check(CLI::ExistingFile);
  serve->add_option("--host", sopt.host, "bind address");
  serve->add_option("--port", sopt.port, "TCP port (0 = any)");
  std::string assets;
  serve->add_option("--assets", assets, "static cockpit assets")->check(CLI::ExistingDirectory);
  serve->add_flag("--stepped", sopt.stepped, "advance only on POST /api/step");
  std::string serve_replay;
  serve->add_option("--replay", serve_replay, "view-only session replaying a telemetry CSV")
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (map_build->parsed()) {
      run_map_build(pipeline_config(common), std::cout);
    } else if (synth->parsed()) {
      auto cfg = pipeline_config(common);
      if (synth_count) cfg.trajectory_count = *synth_count;
      run_synth(cfg, std::cout);
    } else if (train->parsed()) {
      auto cfg = pipeline_config(common);
      if (epochs) cfg.autoencoder_train.epochs = cfg.head_train.epochs = *epochs;
      run_train(cfg, std::cout);
    } else if (behmap->parsed()) {
      run_behmap(pipeline_config(common), std::cout);
    } else if (all->parsed()) {
      const auto cfg = pipeline_config(common);
      run_map_build(cfg, std::cout);
      run_synth(cfg, std::cout);
      run_train(cfg, std::cout);
      run_behmap(cfg, std::cout);
    } else if (run->parsed()) {
      ExperimentConfig e;
      if (!experiment.empty()) {
        e = load_experiment_config(experiment);
        if (common.seed) e.seed = *common.seed;
      } else {
        const PolicyKind kind = policy.empty() ? PolicyKind::Compliant : parse_policy(policy);
        e = experiment_config(pipeline_config(common), kind, name.empty() ? policy_name(kind) : name);
      }
      if (!policy.empty()) e.policy.kind = parse_policy(policy);
      if (!name.empty()) e.name = name;
      if (duration) e.duration = *duration;
      if (noise) e.localisation_noise = *noise;
      if (!output.empty()) e.output_dir = output;
      if (!replay.empty()) {
        e.policy.kind = PolicyKind::Replay;
        e.policy.replay_file = replay;
      }
      if (no_disengage) e.control.disengage.enabled = false;
      const auto rep = run_experiment(e);
      print_report(rep);
      std::printf("  telemetry %s\n", (e.output_dir / (e.name + ".csv")).string().c_str());
      return rep.goal_reached ? kOk : kGoalMissed;
    } else if (report->parsed()) {
      const auto records = read_telemetry_csv(telemetry);
      auto rep = summarize(records, {goal[0], goal[1]}, goal_radius);
      rep.name = std::filesystem::path(telemetry).stem().string();
      rep.telemetry = std::filesystem::path(telemetry).filename().string();
      print_report(rep);
      if (!report_json.empty()) write_report_json(report_json, rep);
    } else if (serve->parsed()) {
      ExperimentConfig e = serve_experiment.empty()
                               ? experiment_config(pipeline_config(common), PolicyKind::External, "live")
                               : load_experiment_config(serve_experiment);
      if (!serve_replay.empty()) {
        e.policy.kind = PolicyKind::Replay;
        e.policy.replay_file = serve_replay;
      } else {
        e.duration = std::max(e.duration, 600.0);
      }
      if (!assets.empty()) sopt.assets = assets;
      const Artifacts artifacts = load_artifacts(e);
      SessionService service(artifacts, e, sopt);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int port = service.start();
      std::printf("serving on http://%s:%d (schema version %d)\n", sopt.host.c_str(), port, kFrameSchemaVersion);
      std::fflush(stdout);
      service.wait();
      g_service = nullptr;
    }
  } catch (const NoPathError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNoPath;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
