#include "sharednav/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/tools/minima.hpp>

#include "sharednav/angles.hpp"
#include "sharednav/error.hpp"

namespace sharednav {

using cplx = std::complex<double>;

double distance(Point2 a, Point2 b) { return std::hypot(b.x - a.x, b.y - a.y); }

// ---------------------------------------------------------------------------
// Fresnel integrals: power series below |x| = 1.5, continued fraction for the
// complementary error function above (modified Lentz).

FresnelPair fresnel(double x) {
  if (!std::isfinite(x)) throw InvalidArgument("fresnel: non-finite argument");

  constexpr double kEps = std::numeric_limits<double>::epsilon();
  constexpr double kTiny = std::numeric_limits<double>::min();
  constexpr double kSeriesLimit = 1.5;
  constexpr int kMaxIter = 200;

  const double ax = std::abs(x);
  double c = 0.0;
  double s = 0.0;

  if (ax < std::sqrt(kTiny)) {
    c = ax;
  } else if (ax <= kSeriesLimit) {
    // C = sum (-1)^n (pi/2)^{2n} x^{4n+1} / ((2n)! (4n+1)), S similarly with odd powers.
    const double fact = 0.5 * kPi * ax * ax;
    double sum_c = ax;
    double sum_s = 0.0;
    double term = ax;
    double sign = 1.0;
    bool odd = true;
    double denom = 3.0;
    for (int k = 1; k <= kMaxIter; ++k) {
      term *= fact / k;
      const double contrib = sign * term / denom;
      if (odd) {
        sum_s += contrib;
        sign = -sign;
      } else {
        sum_c += contrib;
      }
      if (term < kEps * std::abs(odd ? sum_s : sum_c) * 1e-2) break;
      odd = !odd;
      denom += 2.0;
    }
    c = sum_c;
    s = sum_s;
  } else {
    const double pix2 = kPi * ax * ax;
    cplx b(1.0, -pix2);
    cplx cc(1.0 / kTiny, 0.0);
    cplx d = 1.0 / b;
    cplx h = d;
    double n = -1.0;
    int k = 2;
    for (; k <= kMaxIter; ++k) {
      n += 2.0;
      const double a = -n * (n + 1.0);
      b += 4.0;
      d = 1.0 / (a * d + b);
      cc = b + a / cc;
      const cplx del = cc * d;
      h *= del;
      if (std::abs(del.real() - 1.0) + std::abs(del.imag()) <= kEps) break;
    }
    if (k > kMaxIter) throw ConvergenceError("fresnel: continued fraction did not converge");
    h *= cplx(ax, -ax);
    const cplx cs = cplx(0.5, 0.5) * (1.0 - cplx(std::cos(0.5 * pix2), std::sin(0.5 * pix2)) * h);
    c = cs.real();
    s = cs.imag();
  }
  if (x < 0.0) {
    c = -c;
    s = -s;
  }
  return {c, s};
}

namespace detail {
namespace {

constexpr double kMaxPiecePhase = 8.0;   // bound on |a| + |b| inside one piece
constexpr double kSmallA = 1e-2;         // below this the series in a is used
constexpr int kMaxMoment = 2 + 2 * 12;   // highest power of t the series can request

// m[k] = int_0^1 t^k exp(i b t) dt, k = 0..kmax.
void plain_moments(double b, int kmax, cplx* m) {
  const double ab = std::abs(b);
  if (ab <= 1.0) {
    const cplx ib(0.0, b);
    for (int k = 0; k <= kmax; ++k) {
      cplx sum = 0.0;
      cplx term = 1.0;  // (i b)^j / j!
      for (int j = 0; j < 60; ++j) {
        const cplx add = term / static_cast<double>(k + j + 1);
        sum += add;
        if (std::abs(add) < 1e-18 * std::abs(sum)) break;
        term *= ib / static_cast<double>(j + 1);
      }
      m[k] = sum;
    }
    return;
  }
  const cplx eib(std::cos(b), std::sin(b));
  const cplx ib(0.0, b);
  // Upward recurrence is stable while k < |b|, downward while k > |b|.
  const int kb = std::min(kmax, static_cast<int>(std::floor(ab)));
  m[0] = (eib - 1.0) / ib;
  for (int k = 1; k <= kb; ++k) m[k] = (eib - static_cast<double>(k) * m[k - 1]) / ib;
  if (kb < kmax) {
    const int start = kmax + 40 + static_cast<int>(std::ceil(ab));
    cplx mk = eib / static_cast<double>(start + 1);
    for (int k = start; k > kb + 1; --k) {
      mk = (eib - ib * mk) / static_cast<double>(k);
      if (k - 1 <= kmax) m[k - 1] = mk;
    }
  }
}

// Moments of a single piece with |a| + |b| bounded.
std::array<cplx, 3> piece_moments(double a, double b) {
  const double aa = std::abs(a);
  if (aa < kSmallA) {
    // exp(i a t^2 / 2) = sum_n (i a / 2)^n t^{2n} / n!
    cplx m[kMaxMoment + 1];
    plain_moments(b, kMaxMoment, m);
    std::array<cplx, 3> out{};
    cplx coeff = 1.0;
    const cplx half_ia(0.0, 0.5 * a);
    for (int n = 0; 2 + 2 * n <= kMaxMoment; ++n) {
      for (int k = 0; k < 3; ++k) out[k] += coeff * m[k + 2 * n];
      coeff *= half_ia / static_cast<double>(n + 1);
      if (std::abs(coeff) < 1e-18) break;
    }
    return out;
  }
  // Work with a > 0; negative a follows by conjugation.
  const bool flip = a < 0.0;
  const double ap = flip ? -a : a;
  const double bp = flip ? -b : b;
  const double z = std::sqrt(ap / kPi);
  const double w0 = bp / std::sqrt(ap * kPi);
  const FresnelPair f0 = fresnel(w0);
  const FresnelPair f1 = fresnel(w0 + z);
  const double g = -0.5 * bp * bp / ap;
  const cplx rot(std::cos(g), std::sin(g));
  const cplx m0 = rot * cplx(f1.c - f0.c, f1.s - f0.s) / z;
  const double phase1 = 0.5 * ap + bp;
  const cplx e1(std::cos(phase1), std::sin(phase1));
  const cplx i(0.0, 1.0);
  const cplx m1 = (-i * (e1 - 1.0) - bp * m0) / ap;
  const cplx m2 = (-i * e1 + i * m0 - bp * m1) / ap;
  if (flip) return {std::conj(m0), std::conj(m1), std::conj(m2)};
  return {m0, m1, m2};
}

}  // namespace

std::array<cplx, 3> phase_moments(double a, double b) {
  const int pieces =
      std::max(1, static_cast<int>(std::ceil((std::abs(a) + std::abs(b)) / kMaxPiecePhase)));
  if (pieces == 1) return piece_moments(a, b);
  const double h = 1.0 / pieces;
  std::array<cplx, 3> out{};
  for (int j = 0; j < pieces; ++j) {
    const double tj = j * h;
    const double phase = 0.5 * a * tj * tj + b * tj;
    const cplx rot = h * cplx(std::cos(phase), std::sin(phase));
    const auto g = piece_moments(a * h * h, (b + a * tj) * h);
    out[0] += rot * g[0];
    out[1] += rot * (tj * g[0] + h * g[1]);
    out[2] += rot * (tj * tj * g[0] + 2.0 * tj * h * g[1] + h * h * g[2]);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------

ClothoidSegment::ClothoidSegment(Pose2 start, double kappa0, double kappa_rate, double length)
    : start_(start), kappa0_(kappa0), kappa_rate_(kappa_rate), length_(length) {
  if (!(length >= 0.0) || !std::isfinite(length))
    throw InvalidArgument("ClothoidSegment: length must be finite and >= 0");
}

double ClothoidSegment::heading(double s) const {
  return start_.theta + kappa0_ * s + 0.5 * kappa_rate_ * s * s;
}

CurvePoint ClothoidSegment::eval(double s) const {
  const double slack = 1e-12 * std::max(1.0, length_);
  if (!(s >= -slack && s <= length_ + slack))
    throw InvalidArgument("eval_clothoid: abscissa " + std::to_string(s) + " outside [0, " +
                          std::to_string(length_) + "]");
  s = std::clamp(s, 0.0, length_);
  CurvePoint out;
  out.kappa = curvature(s);
  out.pose.theta = wrap_angle(heading(s));
  if (s == 0.0) {
    out.pose.x = start_.x;
    out.pose.y = start_.y;
    return out;
  }
  const auto m = detail::phase_moments(kappa_rate_ * s * s, kappa0_ * s);
  const cplx d = s * cplx(std::cos(start_.theta), std::sin(start_.theta)) * m[0];
  out.pose.x = start_.x + d.real();
  out.pose.y = start_.y + d.imag();
  return out;
}

CurvePoint eval_clothoid(const ClothoidSegment& seg, double s) { return seg.eval(s); }

// ---------------------------------------------------------------------------
// G1 Hermite fit. In the frame where the chord is the unit X axis the unknown
// is A, with theta(t) = phi0 + (delta - A) t + A t^2; the endpoint condition is
// g(A) = Im(exp(i phi0) int_0^1 exp(i((delta - A) t + A t^2)) dt) = 0.

namespace {

struct G1Eval {
  double g;
  double dg;
  double x;
};

G1Eval g1_eval(double A, double phi0, double delta) {
  const auto m = detail::phase_moments(2.0 * A, delta - A);
  const cplx e(std::cos(phi0), std::sin(phi0));
  const cplx f = e * m[0];
  const cplx df = e * (m[2] - m[1]);  // d/dA of the integral, divided by i
  return {f.imag(), df.real(), f.real()};
}

double g1_initial_guess(double phi0, double phi1) {
  // Polynomial fit of the root over the (phi0, phi1) square.
  constexpr double cf[] = {2.989696028701907,  0.716228953608281, -0.458969738821509,
                           -0.502821153340377, 0.261062141752652, -0.045854475238709};
  double x = phi0 / kPi;
  double y = phi1 / kPi;
  const double xy = x * y;
  x *= x;
  y *= y;
  return (phi0 + phi1) *
         (cf[0] + xy * (cf[1] + xy * cf[2]) + (cf[3] + xy * cf[4]) * (x + y) + cf[5] * (x * x + y * y));
}

constexpr double kG1Tol = 1e-14;
constexpr int kG1MaxIter = 100;

std::optional<double> g1_newton(double A, double phi0, double delta) {
  G1Eval cur = g1_eval(A, phi0, delta);
  for (int it = 0; it < kG1MaxIter; ++it) {
    if (std::abs(cur.g) < kG1Tol && cur.x > 0.0) return A;
    if (cur.dg == 0.0 || !std::isfinite(cur.dg)) return std::nullopt;
    double step = -cur.g / cur.dg;
    bool accepted = false;
    for (int damp = 0; damp < 30; ++damp) {
      const double trial = A + step;
      const G1Eval next = g1_eval(trial, phi0, delta);
      if (std::abs(next.g) < std::abs(cur.g) || std::abs(next.g) < kG1Tol) {
        A = trial;
        cur = next;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return (std::abs(cur.g) < 1e-12 && cur.x > 0.0) ? std::optional(A) : std::nullopt;
  }
  return (std::abs(cur.g) < 1e-12 && cur.x > 0.0) ? std::optional(A) : std::nullopt;
}

// Scans outward from the guess for a sign change with a positive chord projection,
// then bisects.
std::optional<double> g1_bracketed(double guess, double phi0, double delta) {
  constexpr double kScanStep = 0.05;
  constexpr double kScanRange = 6.0 * kPi;
  auto try_bracket = [&](double lo, double hi) -> std::optional<double> {
    G1Eval flo = g1_eval(lo, phi0, delta);
    G1Eval fhi = g1_eval(hi, phi0, delta);
    if ((flo.g > 0) == (fhi.g > 0)) return std::nullopt;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      const G1Eval fm = g1_eval(mid, phi0, delta);
      if ((fm.g > 0) == (flo.g > 0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
        fhi = fm;
      }
    }
    const double root = 0.5 * (lo + hi);
    if (g1_eval(root, phi0, delta).x <= 0.0) return std::nullopt;
    return root;
  };
  for (double off = 0.0; off < kScanRange; off += kScanStep) {
    if (auto r = try_bracket(guess + off, guess + off + kScanStep)) return r;
    if (auto r = try_bracket(guess - off - kScanStep, guess - off)) return r;
  }
  return std::nullopt;
}

}  // namespace

ClothoidSegment fit_g1(const Pose2& a, const Pose2& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double r = std::hypot(dx, dy);
  if (!(r > 1e-12)) throw InvalidArgument("fit_g1: start and end positions coincide");
  const double phi = std::atan2(dy, dx);
  const double phi0 = wrap_angle(a.theta - phi);
  const double phi1 = wrap_angle(b.theta - phi);
  const double delta = phi1 - phi0;

  const double guess = g1_initial_guess(phi0, phi1);
  std::optional<double> root = g1_newton(guess, phi0, delta);
  if (!root) {
    root = g1_bracketed(guess, phi0, delta);
    if (root) root = g1_newton(*root, phi0, delta).value_or(*root);
  }
  if (!root) {
    throw ConvergenceError("fit_g1: no clothoid found from (" + std::to_string(a.x) + ", " +
                           std::to_string(a.y) + ", " + std::to_string(a.theta) + ") to (" +
                           std::to_string(b.x) + ", " + std::to_string(b.y) + ", " +
                           std::to_string(b.theta) + ")");
  }
  const double A = *root;
  const double x = g1_eval(A, phi0, delta).x;
  const double length = r / x;
  return ClothoidSegment(a, (delta - A) / length, 2.0 * A / (length * length), length);
}

// ---------------------------------------------------------------------------

ClothoidPath::ClothoidPath(std::vector<ClothoidSegment> segments) : segments_(std::move(segments)) {
  cumulative_.reserve(segments_.size());
  double acc = 0.0;
  for (const auto& seg : segments_) {
    acc += seg.length();
    cumulative_.push_back(acc);
  }
}

std::size_t ClothoidPath::segment_at(double s) const {
  if (segments_.empty()) throw InvalidArgument("ClothoidPath: empty path");
  const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), s);
  if (it == cumulative_.end()) return segments_.size() - 1;
  return static_cast<std::size_t>(it - cumulative_.begin());
}

CurvePoint ClothoidPath::eval(double s) const {
  const std::size_t i = segment_at(s);
  const double begin = i == 0 ? 0.0 : cumulative_[i - 1];
  const auto& seg = segments_[i];
  return seg.eval(std::clamp(s - begin, 0.0, seg.length()));
}

double ClothoidPath::jerk_cost() const {
  double total = 0.0;
  for (const auto& seg : segments_) total += seg.jerk_cost();
  return total;
}

// ---------------------------------------------------------------------------
// Spline fitting. Work happens in a canonical frame (first waypoint at the
// origin, first chord along +X) so that the result commutes with rigid motions.

namespace {

struct Frame {
  double ox, oy, c, s;

  Point2 to_local(Point2 p) const {
    const double dx = p.x - ox;
    const double dy = p.y - oy;
    return {snap(c * dx + s * dy), snap(-s * dx + c * dy)};
  }

  // Rounding canonical coordinates to a fine grid makes rigidly moved inputs land on
  // bitwise identical optimisation problems; otherwise last-bit differences steer the
  // line searches apart by far more than a bit.
  static double snap(double v) { return std::round(v * 1e10) * 1e-10; }
};

std::optional<ClothoidSegment> try_fit(const Pose2& a, const Pose2& b) {
  try {
    return fit_g1(a, b);
  } catch (const Error&) {
    return std::nullopt;
  }
}

double end_kappa(const ClothoidSegment& seg) { return seg.kappa0() + seg.kappa_rate() * seg.length(); }

}  // namespace

ClothoidPath fit_spline(std::span<const Waypoint> waypoints, const SplineOptions& options) {
  const std::size_t n = waypoints.size();
  if (n < 2) throw InvalidArgument("fit_spline: need at least two waypoints");
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (distance(waypoints[i].p, waypoints[i + 1].p) <= 1e-12)
      throw InvalidArgument("fit_spline: waypoints " + std::to_string(i) + " and " +
                            std::to_string(i + 1) + " coincide");
  }

  const double rot = std::atan2(waypoints[1].p.y - waypoints[0].p.y, waypoints[1].p.x - waypoints[0].p.x);
  const Frame frame{waypoints[0].p.x, waypoints[0].p.y, std::cos(rot), std::sin(rot)};

  std::vector<Pose2> poses(n);
  std::vector<bool> free(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p = frame.to_local(waypoints[i].p);
    poses[i].x = p.x;
    poses[i].y = p.y;
  }
  for (std::size_t i = 0; i < n; ++i) {
    free[i] = !waypoints[i].heading.has_value();
    if (!free[i]) {
      poses[i].theta = std::round(wrap_angle(*waypoints[i].heading - rot) * 1e12) * 1e-12;
      continue;
    }
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
    poses[i].theta = std::atan2(poses[hi].y - poses[lo].y, poses[hi].x - poses[lo].x);
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::optional<ClothoidSegment>> segs(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) segs[i] = try_fit(poses[i], poses[i + 1]);
  const double ramp = options.joint_ramp;
  auto seg_cost = [](const std::optional<ClothoidSegment>& g) { return g ? g->jerk_cost() : kInf; };
  // A curvature jump counts as a linear ramp of length `ramp`: jump^2 / ramp.
  auto joint_cost = [&](const std::optional<ClothoidSegment>& l, const std::optional<ClothoidSegment>& r) {
    if (!(ramp > 0.0)) return 0.0;
    if (!l || !r) return kInf;
    const double jump = r->kappa0() - end_kappa(*l);
    return jump * jump / ramp;
  };
  auto total = [&] {
    double t = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      t += seg_cost(segs[i]);
      if (i > 0) t += joint_cost(segs[i - 1], segs[i]);
    }
    return t;
  };
  // Cost terms touched by heading i, given its two adjacent segments.
  auto around = [&](std::size_t i, const std::optional<ClothoidSegment>& left,
                    const std::optional<ClothoidSegment>& right) {
    double c = 0.0;
    if (i > 0) {
      c += seg_cost(left);
      if (i > 1) c += joint_cost(segs[i - 2], left);
    }
    if (i + 1 < n) {
      c += seg_cost(right);
      if (i + 2 < n) c += joint_cost(right, segs[i + 1]);
    }
    if (i > 0 && i + 1 < n) c += joint_cost(left, right);
    return c;
  };

  constexpr double kWindow = 0.6;  // radians searched either side of the current heading
  constexpr int kBits = 30;
  double current = total();
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    const double before = current;
    for (std::size_t i = 0; i < n; ++i) {
      if (!free[i]) continue;
      const std::optional<ClothoidSegment> none;
      auto local = [&](double theta) {
        Pose2 p = poses[i];
        p.theta = theta;
        return around(i, i > 0 ? try_fit(poses[i - 1], p) : none, i + 1 < n ? try_fit(p, poses[i + 1]) : none);
      };
      const double here = around(i, i > 0 ? segs[i - 1] : none, i + 1 < n ? segs[i] : none);
      if (here == 0.0) continue;
      boost::uintmax_t max_iter = 100;
      const double t0 = poses[i].theta;
      const auto [best, value] =
          boost::math::tools::brent_find_minima(local, t0 - kWindow, t0 + kWindow, kBits, max_iter);
      if (value < here) {
        poses[i].theta = best;
        if (i > 0) segs[i - 1] = try_fit(poses[i - 1], poses[i]);
        if (i + 1 < n) segs[i] = try_fit(poses[i], poses[i + 1]);
      }
    }
    current = total();
    if (!(before - current >= options.tolerance)) break;
  }

  std::vector<ClothoidSegment> segments;
  segments.reserve(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    ClothoidSegment local;
    try {
      local = fit_g1(poses[i], poses[i + 1]);
    } catch (const Error& e) {
      throw ConvergenceError("fit_spline: segment starting at waypoint " + std::to_string(i) +
                             " failed: " + e.what());
    }
    Pose2 start{waypoints[i].p.x, waypoints[i].p.y, local.start().theta + rot};
    if (!free[i]) start.theta = *waypoints[i].heading;
    segments.emplace_back(start, local.kappa0(), local.kappa_rate(), local.length());
  }
  return ClothoidPath(std::move(segments));
}

ClothoidPath fit_spline(std::span<const Point2> points, const SplineOptions& options) {
  std::vector<Waypoint> wps;
  wps.reserve(points.size());
  for (const auto& p : points) wps.push_back({p, std::nullopt});
  return fit_spline(std::span<const Waypoint>(wps), options);
}

std::vector<PathSample> sample_path(const ClothoidPath& path, double step) {
  if (!(step > 0.0)) throw InvalidArgument("sample_path: step must be positive");
  if (path.empty()) throw InvalidArgument("sample_path: empty path");
  const double length = path.length();
  const auto full = static_cast<std::size_t>(std::floor(length / step + 1e-9));
  std::vector<PathSample> out;
  out.reserve(full + 2);
  for (std::size_t i = 0; i <= full; ++i) {
    const double s = std::min(static_cast<double>(i) * step, length);
    const CurvePoint cp = path.eval(s);
    out.push_back({s, cp.pose.x, cp.pose.y, cp.pose.theta, cp.kappa});
  }
  if (length - out.back().s > 1e-9) {
    const CurvePoint cp = path.eval(length);
    out.push_back({length, cp.pose.x, cp.pose.y, cp.pose.theta, cp.kappa});
  }
  return out;
}

}  // namespace sharednav
