#include <benchmark/benchmark.h>

#include <random>

#include "sharednav/behmap.hpp"
#include "sharednav/control.hpp"
#include "sharednav/scenario.hpp"

using namespace sharednav;

static void BM_Fresnel(benchmark::State& state) {
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fresnel(x));
    x += 0.37;
    if (x > 20.0) x = -20.0;
  }
}
BENCHMARK(BM_Fresnel);

static void BM_FitG1(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pos(-5.0, 5.0), ang(-2.5, 2.5);
  std::vector<std::pair<Pose2, Pose2>> problems;
  while (problems.size() < 256) {
    const Pose2 a{pos(rng), pos(rng), 0}, b{pos(rng), pos(rng), 0};
    if (distance(a.point(), b.point()) < 0.1) continue;
    const double chord = std::atan2(b.y - a.y, b.x - a.x);
    problems.push_back({{a.x, a.y, chord + ang(rng)}, {b.x, b.y, chord + ang(rng)}});
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& [a, b] = problems[i++ % problems.size()];
    benchmark::DoNotOptimize(fit_g1(a, b));
  }
}
BENCHMARK(BM_FitG1);

static void BM_Encode(benchmark::State& state) {
  const Encoder enc(AutoencoderConfig{}, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 0.3);
  FeatureWindow w(kFeatureRows, 12);
  for (int k = 0; k < w.size(); ++k) w.data()[k] = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(enc.encode(w));
}
BENCHMARK(BM_Encode);

// One controller period on the cross mission, including a confidence evaluation.
static void BM_ControlStep(benchmark::State& state) {
  const auto grid = cross_grid();
  const auto rm = build_prm(grid, 0.35, 1);
  const BehaviouralMap bm(BehaviourGrid::covering(grid), {}, deg2rad(45.0));
  const auto mission = plan_mission(grid, rm, bm, {0.0, -4.5}, {-4.5, 0.0});
  const Encoder enc(AutoencoderConfig{}, 5);
  ClassifierHead head;
  head.weights.setConstant(0.1);
  SharedController controller(mission, enc, head);
  SampleHistory history(static_cast<std::size_t>(mission.window.length));
  for (std::size_t i = 0; i < history.capacity(); ++i) history.push(mission.samples[i]);
  WalkerState w;
  w.pose = mission.path.eval(mission.samples[history.capacity() - 1].s).pose;
  w.v = 0.8;
  for (auto _ : state) benchmark::DoNotOptimize(controller.step(w, history, true, {}, 0.02));
}
BENCHMARK(BM_ControlStep);
BENCHMARK_MAIN();
