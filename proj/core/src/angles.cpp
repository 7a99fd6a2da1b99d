#include "sharednav/angles.hpp"

#include <cmath>

namespace sharednav {

double wrap_angle(double a) {
  double r = std::remainder(a, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

double angle_distance(double a, double b) { return std::abs(wrap_angle(a - b)); }

}  // namespace sharednav
