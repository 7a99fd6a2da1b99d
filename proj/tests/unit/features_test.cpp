#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sharednav/angles.hpp"
#include "sharednav/error.hpp"
#include "sharednav/features.hpp"
#include "sharednav/geometry.hpp"

using namespace sharednav;

namespace {

std::vector<PathSample> straight(double heading, std::size_t count, double ds = 0.1) {
  std::vector<PathSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double s = i * ds;
    out.push_back({s, 3.0 + s * std::cos(heading), -2.0 + s * std::sin(heading), heading, 0.0});
  }
  return out;
}

}  // namespace

TEST(Window, StraightAlongX) {
  const auto samples = straight(0.0, 20);
  const auto w = make_window(samples, 15, 12);
  ASSERT_EQ(w.cols(), 12);
  for (int j = 0; j < 12; ++j) {
    EXPECT_NEAR(w(0, j), 0.1 * j, 1e-12);
    EXPECT_EQ(w(1, j), 0.0);
    EXPECT_EQ(w(2, j), 1.0);
    EXPECT_EQ(w(3, j), 0.0);
    EXPECT_EQ(w(4, j), 0.0);
  }
}

TEST(Window, StraightAlongY) {
  const auto samples = straight(kPi / 2, 12);
  const auto w = make_window(samples, 11, 12);
  for (int j = 0; j < 12; ++j) {
    EXPECT_NEAR(w(0, j), 0.0, 1e-12);
    EXPECT_NEAR(w(1, j), 0.1 * j, 1e-12);
    EXPECT_NEAR(w(2, j), 0.0, 1e-15);
    EXPECT_EQ(w(3, j), 1.0);
  }
}

TEST(Window, CircularArcMatchesClothoidSamples) {
  const ClothoidSegment arc({1.0, 2.0, 0.3}, 0.5, 0.0, 3.0);
  const auto samples = sample_path(ClothoidPath({arc}), 0.1);
  const auto w = make_window(samples, 20, 12);
  const auto first = arc.eval(0.9).pose;
  for (int j = 0; j < 12; ++j) {
    const auto p = arc.eval(0.9 + 0.1 * j);
    EXPECT_NEAR(w(4, j), 0.5, 1e-12);
    EXPECT_NEAR(w(0, j), p.pose.x - first.x, 1e-12);
    EXPECT_NEAR(w(1, j), p.pose.y - first.y, 1e-12);
    EXPECT_NEAR(w(2, j), std::cos(p.pose.theta), 1e-12);
    EXPECT_NEAR(w(3, j), std::sin(p.pose.theta), 1e-12);
  }
}

TEST(Window, NormalisationAndUnitHeadingInvariants) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 50; ++t) {
    const ClothoidSegment seg({5 * u(rng), 5 * u(rng), kPi * u(rng)}, u(rng), 0.3 * u(rng), 4.0);
    const auto samples = sample_path(ClothoidPath({seg}), 0.1);
    const auto w = make_window(samples, 30, 12);
    EXPECT_EQ(w(0, 0), 0.0);
    EXPECT_EQ(w(1, 0), 0.0);
    for (int j = 0; j < 12; ++j) EXPECT_NEAR(w(2, j) * w(2, j) + w(3, j) * w(3, j), 1.0, 1e-9);
  }
}

TEST(Window, TranslationInvarianceIsExact) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 50; ++t) {
    const ClothoidSegment seg({0, 0, kPi * u(rng)}, u(rng), 0.3 * u(rng), 3.0);
    auto a = sample_path(ClothoidPath({seg}), 0.1);
    auto b = a;
    // Power-of-two offsets keep the subtraction exact.
    const double dx = std::ldexp(std::round(64 * u(rng)), -2);
    const double dy = std::ldexp(std::round(64 * u(rng)), -2);
    for (auto& s : b) {
      s.x += dx;
      s.y += dy;
    }
    const auto wa = make_window(a, 20, 12);
    const auto wb = make_window(b, 20, 12);
    for (int j = 0; j < 12; ++j) {
      EXPECT_NEAR(wb(0, j), wa(0, j), 1e-12);
      EXPECT_NEAR(wb(1, j), wa(1, j), 1e-12);
      EXPECT_EQ(wb.row(2), wa.row(2));
      EXPECT_EQ(wb.row(3), wa.row(3));
      EXPECT_EQ(wb.row(4), wa.row(4));
    }
  }
}

TEST(Window, RotationRotatesPositionAndHeadingRows) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 50; ++t) {
    const ClothoidSegment seg({u(rng), u(rng), kPi * u(rng)}, u(rng), 0.3 * u(rng), 3.0);
    const double phi = kPi * u(rng);
    const auto a = sample_path(ClothoidPath({seg}), 0.1);
    auto b = a;
    for (auto& s : b) {
      const double x = std::cos(phi) * s.x - std::sin(phi) * s.y;
      const double y = std::sin(phi) * s.x + std::cos(phi) * s.y;
      s.x = x;
      s.y = y;
      s.theta = wrap_angle(s.theta + phi);
    }
    const auto wa = make_window(a, 20, 12);
    const auto wb = make_window(b, 20, 12);
    const auto rotated = rotate_window(wa, phi);
    for (int r = 0; r < 5; ++r)
      for (int j = 0; j < 12; ++j) EXPECT_NEAR(wb(r, j), rotated(r, j), 1e-12) << r << " " << j;
  }
}

TEST(Window, Errors) {
  const auto samples = straight(0.0, 20);
  EXPECT_THROW(make_window(samples, 10, 12), InvalidArgument);
  EXPECT_THROW(make_window(samples, 20, 12), InvalidArgument);
  auto uneven = samples;
  for (std::size_t i = 8; i < uneven.size(); ++i) uneven[i].s += 0.006;  // one gap 6% too long
  EXPECT_THROW(make_window(uneven, 15, 12), InvalidArgument);
  for (std::size_t i = 8; i < uneven.size(); ++i) uneven[i].s -= 0.002;  // now 4%
  EXPECT_NO_THROW(make_window(uneven, 15, 12));
}

TEST(Reconstruct, StraightLineTwelveSamples) {
  PathReconstructor rec(0.1, {0, 0, 0});
  std::vector<PathSample> out;
  for (int i = 0; i < 120; ++i)
    for (const auto& s : rec.push_odometry(1.0, 0.0, 0.01)) out.push_back(s);
  ASSERT_EQ(out.size(), 12u);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_NEAR(out[i].s, 0.1 * (i + 1), 1e-12);
    EXPECT_NEAR(out[i].x, 0.1 * (i + 1), 1e-9);
    EXPECT_NEAR(out[i].y, 0.0, 1e-12);
    EXPECT_NEAR(out[i].kappa, 0.0, 1e-12);
  }
}

TEST(Reconstruct, ConstantTurnRateConvergesToCircleCurvature) {
  PathReconstructor rec(0.1, {0, 0, 0});
  std::vector<PathSample> out;
  for (int i = 0; i < 300; ++i)
    for (const auto& s : rec.push_odometry(1.0, 0.5, 0.01)) out.push_back(s);
  ASSERT_GE(out.size(), 29u);
  EXPECT_EQ(out[0].kappa, 0.0);
  for (std::size_t i = 3; i < out.size(); ++i) {
    EXPECT_NEAR(out[i].kappa, 0.5, 0.01) << i;
    // Points lie on the circle of radius 2 centred at (0, 2).
    EXPECT_NEAR(std::hypot(out[i].x, out[i].y - 2.0), 2.0, 1e-4);
  }
}

TEST(Reconstruct, StandingStillEmitsNothing) {
  PathReconstructor rec(0.1, {1, 1, 1});
  for (int i = 0; i < 500; ++i) EXPECT_TRUE(rec.push_odometry(0.0, 0.3, 0.01).empty());
  EXPECT_EQ(rec.travelled(), 0.0);
  EXPECT_THROW(rec.push_odometry(-0.1, 0.0, 0.01), InvalidArgument);
}

TEST(Reconstruct, OdometryWindowMatchesGroundTruthWindow) {
  const ClothoidPath path({ClothoidSegment({1.0, -1.0, 0.4}, 0.2, 0.1, 5.0)});
  const auto truth = sample_path(path, 0.1);
  const Pose2 start = path.eval(0.0).pose;
  PathReconstructor rec(0.1, start);
  std::vector<PathSample> got{{0.0, start.x, start.y, start.theta, path.eval(0.0).kappa}};
  const double v = 0.8, dt = 0.01;
  double s = 0.0;
  while (s + v * dt <= path.length()) {
    const double omega = v * path.eval(s + 0.5 * v * dt).kappa;
    for (const auto& p : rec.push_odometry(v, omega, dt)) got.push_back(p);
    s += v * dt;
  }
  ASSERT_GE(got.size(), 30u);
  // got[1] carries the reconstructor's placeholder curvature of zero; start past it.
  for (std::size_t k = 13; k + 1 < got.size() && k < truth.size(); ++k) {
    const auto a = make_window(got, k, 12);
    const auto b = make_window(truth, k, 12);
    for (int r = 0; r < 5; ++r) {
      const double scale = std::max(b.row(r).cwiseAbs().maxCoeff(), 0.05);
      for (int j = 0; j < 12; ++j) ASSERT_LE(std::abs(a(r, j) - b(r, j)), 0.05 * scale) << k << " " << r << " " << j;
    }
  }
}

TEST(Reconstruct, PoseStreamOnCircle) {
  PathReconstructor rec(0.1, {2, 0, kPi / 2});
  std::vector<PathSample> out;
  for (int i = 1; i <= 400; ++i) {
    const double a = 0.005 * i;
    for (const auto& s : rec.push_pose({2 * std::cos(a), 2 * std::sin(a), a + kPi / 2})) out.push_back(s);
  }
  ASSERT_GE(out.size(), 15u);
  for (std::size_t i = 2; i < out.size(); ++i) EXPECT_NEAR(out[i].kappa, 0.5, 0.01);
}

TEST(SampleHistory, FillsThenSlides) {
  SampleHistory h(12);
  const auto samples = straight(0.4, 30);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    h.push(samples[i]);
    if (i < 11) {
      EXPECT_FALSE(h.full());
      EXPECT_THROW(h.window(), InvalidArgument);
    } else {
      ASSERT_TRUE(h.full());
      const auto w = h.window();
      const auto direct = make_window(samples, i, 12);
      EXPECT_EQ(w, direct);
    }
  }
}
