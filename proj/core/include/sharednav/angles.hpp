#pragma once

#include <numbers>

namespace sharednav {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

constexpr double deg2rad(double d) { return d * kPi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / kPi; }

/// Absolute angular distance in [0, pi].
double angle_distance(double a, double b);

}  // namespace sharednav
