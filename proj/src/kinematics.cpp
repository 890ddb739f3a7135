#include "gripstat/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gripstat/angles.hpp"
#include "gripstat/error.hpp"

namespace gripstat {
namespace {

PlanarPoint add(PlanarPoint a, PlanarPoint b) { return {a.x + b.x, a.y + b.y}; }
PlanarPoint sub(PlanarPoint a, PlanarPoint b) { return {a.x - b.x, a.y - b.y}; }
PlanarPoint polar(double r, double angle) { return {r * std::cos(angle), r * std::sin(angle)}; }
double cross(PlanarPoint a, PlanarPoint b) { return a.x * b.y - a.y * b.x; }
double norm(PlanarPoint a) { return std::hypot(a.x, a.y); }

// Angle phi such that |pivot + radius*e(phi) - target| == reach, choosing the
// solution closest to `expected`.
double rotate_to_close(PlanarPoint pivot, double radius, PlanarPoint target, double reach, double expected) {
  const PlanarPoint w = sub(pivot, target);
  const double wn = norm(w);
  if (wn == 0.0) throw NoSolutionError("closure: pivot coincides with coupler joint");
  // w . e(phi) = m
  const double m = (reach * reach - wn * wn - radius * radius) / (2.0 * radius);
  double c = m / wn;
  if (c > 1.0 + 1e-12 || c < -1.0 - 1e-12) {
    throw NoSolutionError("closure: coupler cannot reach the rotating body at this actuation angle");
  }
  c = std::clamp(c, -1.0, 1.0);
  const double base = std::atan2(w.y, w.x);
  const double spread = std::acos(c);
  const double r1 = base + spread;
  const double r2 = base - spread;
  const double d1 = std::abs(wrap_angle(r1 - expected));
  const double d2 = std::abs(wrap_angle(r2 - expected));
  return expected + wrap_angle((d1 <= d2 ? r1 : r2) - expected);
}

}  // namespace

std::string_view to_string(GraspCase c) {
  switch (c) {
    case GraspCase::DistalFirst:
      return "distal_first";
    case GraspCase::MiddleFirst:
      return "middle_first";
    case GraspCase::ProximalFirst:
      return "proximal_first";
    case GraspCase::NoContact:
      return "no_contact";
  }
  return "no_contact";
}

GraspCase grasp_case_from_string(std::string_view s) {
  if (s == "distal_first") return GraspCase::DistalFirst;
  if (s == "middle_first") return GraspCase::MiddleFirst;
  if (s == "proximal_first") return GraspCase::ProximalFirst;
  if (s == "no_contact") return GraspCase::NoContact;
  throw ParseError("unknown grasp case '" + std::string(s) + "'");
}

void check_joint_limits(const FingerGeometry& g, double theta1, double theta2) {
  constexpr double kTol = 1e-12;
  if (!g.theta1_range.contains(theta1, kTol)) {
    throw LimitError("theta1 = " + std::to_string(rad2deg(theta1)) + " deg outside joint range");
  }
  if (!g.theta2_range.contains(theta2, kTol)) {
    throw LimitError("theta2 = " + std::to_string(rad2deg(theta2)) + " deg outside joint range");
  }
}

PlanarPoint forward_fingertip(const FingerGeometry& g, const JointState& s, LimitCheck check) {
  if (check == LimitCheck::kEnforce) check_joint_limits(g, s.theta1, s.beta - s.theta1);
  return {g.L1 * std::cos(s.theta1) + g.L2 * std::cos(s.beta) + g.L3 * std::cos(s.alpha),
          g.L1 * std::sin(s.theta1) + g.L2 * std::sin(s.beta) + g.L3 * std::sin(s.alpha)};
}

double solve_py(const FingerGeometry& g, double p_x, double alpha, double beta) {
  const double k1 = 2.0 * (g.L2 * std::cos(beta) + g.L3 * std::cos(alpha));
  const double k2 = 2.0 * (g.L2 * std::sin(beta) + g.L3 * std::sin(alpha));
  const double k3 = g.L2 * g.L2 + g.L3 * g.L3 - g.L1 * g.L1 + 2.0 * g.L2 * g.L3 * std::cos(alpha - beta);
  double disc = k2 * k2 - 4.0 * (p_x * p_x - k1 * p_x + k3);
  // Round-off around the tangent case.
  const double scale = k2 * k2 + 4.0 * (p_x * p_x + std::abs(k1 * p_x) + std::abs(k3));
  if (disc < 0.0 && disc > -1e-12 * scale) disc = 0.0;
  if (disc < 0.0) throw NoSolutionError("fingertip x = " + std::to_string(p_x) + " mm is unreachable");
  return 0.5 * (k2 + std::sqrt(disc));
}

PlanarPoint point_c(const FingerGeometry& g, const PlanarPoint& p, double alpha) {
  return {p.x - g.L3 * std::cos(alpha) + g.L3C * std::cos(alpha - g.gamma),
          p.y - g.L3 * std::sin(alpha) + g.L3C * std::sin(alpha - g.gamma)};
}

PlanarPoint actuation_joint(const FingerGeometry& g) { return polar(g.L1a, g.epsilon); }

PlanarPoint point_c_from_actuation(const FingerGeometry& g, double theta_a, double theta_b) {
  return add(add(actuation_joint(g), polar(g.La, theta_a)), polar(g.Lb, theta_b));
}

ActuationCoefficients actuation_coefficients(const FingerGeometry& g, const PlanarPoint& c) {
  const double u = c.x - g.L1a * std::cos(g.epsilon);
  const double w = c.y - g.L1a * std::sin(g.epsilon);
  return {-2.0 * g.La * u, -2.0 * g.La * w, u * u + w * w + g.La * g.La - g.Lb * g.Lb};
}

double closure_residual(const FingerGeometry& g, const PlanarPoint& c, double theta_a) {
  const double dx = c.x - g.L1a * std::cos(g.epsilon) - g.La * std::cos(theta_a);
  const double dy = c.y - g.L1a * std::sin(g.epsilon) - g.La * std::sin(theta_a);
  return dx * dx + dy * dy - g.Lb * g.Lb;
}

std::array<double, 2> actuation_roots(const FingerGeometry& g, const PlanarPoint& c) {
  const auto [r1, r2, r3] = actuation_coefficients(g, c);
  // (r3 - r1) t^2 + 2 r2 t + (r1 + r3) = 0 with t = tan(theta_a / 2)
  const double qa = r3 - r1;
  const double qb = 2.0 * r2;
  const double qc = r1 + r3;
  double disc = r2 * r2 - qa * qc;
  const double scale = r2 * r2 + std::abs(qa * qc);
  if (disc < 0.0 && disc > -1e-12 * scale) disc = 0.0;
  if (disc < 0.0) {
    throw NoSolutionError("point C (" + std::to_string(c.x) + ", " + std::to_string(c.y) +
                          ") is outside the reach of the driving dyad");
  }
  const double sq = std::sqrt(disc);
  // Stable form: q = -(b/2 + sign(b) sqrt(disc)), roots q/a and c/q.
  const double q = -(0.5 * qb + std::copysign(sq, qb == 0.0 ? 1.0 : qb));
  std::array<double, 2> roots{};
  if (q == 0.0) {
    // r2 == 0 and disc == 0, which forces qa*qc == 0.
    if (qa == 0.0) {
      roots = {kPi, kPi};
    } else {
      roots = {0.0, 0.0};
    }
    return roots;
  }
  const double t2 = qc / q;
  roots[1] = wrap_angle(2.0 * std::atan(t2));
  if (std::abs(qa) <= 1e-15 * (std::abs(qb) + std::abs(qc))) {
    roots[0] = kPi;  // root at infinity: t -> inf
  } else {
    roots[0] = wrap_angle(2.0 * std::atan(q / qa));
  }
  return roots;
}

double inverse_actuation(const FingerGeometry& g, const PlanarPoint& c) {
  const auto roots = actuation_roots(g, c);
  const PlanarPoint a = actuation_joint(g);
  const PlanarPoint ac = sub(c, a);
  const double scale = norm(ac) * g.La;
  // Assembly branch: B counter-clockwise of ray AC (cross >= 0); the tangent
  // case has both roots on the ray itself.
  constexpr double kBranchTol = 1e-9;
  double best = std::numeric_limits<double>::quiet_NaN();
  double best_cross = -std::numeric_limits<double>::infinity();
  for (double root : roots) {
    const double cr = cross(ac, polar(g.La, root)) / scale;
    if (cr >= -kBranchTol && cr > best_cross) {
      best = root;
      best_cross = cr;
    }
  }
  if (std::isnan(best)) throw AmbiguityError("no actuation root lies on the assembly branch");
  return best;
}

double transmission_link_angle(const FingerGeometry& g, const PlanarPoint& c, double theta_a) {
  const PlanarPoint b = add(actuation_joint(g), polar(g.La, theta_a));
  return std::atan2(c.y - b.y, c.x - b.x);
}

FingerPose finger_pose(const FingerGeometry& g, double theta1, double theta2, double theta3) {
  const double beta = theta1 + theta2;
  const double alpha = beta + theta3;
  FingerPose p;
  p.O1 = {0.0, 0.0};
  p.O2 = polar(g.L1, theta1);
  p.O3 = add(p.O2, polar(g.L2, beta));
  p.P = add(p.O3, polar(g.L3, alpha));
  p.C = add(p.O3, polar(g.L3C, alpha - g.gamma));
  p.A = actuation_joint(g);
  p.B = add(p.A, polar(g.La, inverse_actuation(g, p.C)));
  return p;
}

double actuation_from_joints(const FingerGeometry& g, double theta1, double theta2, double theta3) {
  JointState s;
  s.theta1 = theta1;
  s.beta = theta1 + theta2;
  s.alpha = s.beta + theta3;
  const PlanarPoint p = forward_fingertip(g, s, LimitCheck::kNone);
  return inverse_actuation(g, point_c(g, p, s.alpha));
}

JointState make_joint_state(const FingerGeometry& g, double theta1, double theta2, double theta3) {
  JointState s;
  s.theta1 = theta1;
  s.theta2 = theta2;
  s.theta3 = theta3;
  s.beta = theta1 + theta2;
  s.alpha = s.beta + theta3;
  const PlanarPoint c = point_c(g, forward_fingertip(g, s, LimitCheck::kNone), s.alpha);
  s.theta_a = inverse_actuation(g, c);
  s.theta_b = transmission_link_angle(g, c, s.theta_a);
  return s;
}

double parallel_theta1(const FingerGeometry& g, double theta_a) {
  auto f = [&](double t1) {
    return actuation_from_joints(g, t1, kParallelBeta - t1, kParallelAlpha - kParallelBeta) - theta_a;
  };
  double lo = g.theta1_range.min;
  double hi = g.theta1_range.max;
  double flo = f(lo);
  double fhi = f(hi);
  constexpr double kEdgeTol = 1e-12;
  if (std::abs(flo) <= kEdgeTol) return lo;
  if (std::abs(fhi) <= kEdgeTol) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) {
    throw LimitError("actuation angle " + std::to_string(rad2deg(theta_a)) +
                     " deg maps outside the parallel-mode theta1 range");
  }
  // Safeguarded secant/bisection; f is monotone on the range.
  double x = lo;
  for (int it = 0; it < 200; ++it) {
    double cand = hi - fhi * (hi - lo) / (fhi - flo);
    if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
    // Keep the bracket shrinking even when secant steps stall on one side.
    if (it % 3 == 2) cand = 0.5 * (lo + hi);
    const double fc = f(cand);
    x = cand;
    if (fc == 0.0 || (hi - lo) < 1e-15) break;
    if ((fc > 0.0) == (flo > 0.0)) {
      lo = cand;
      flo = fc;
    } else {
      hi = cand;
      fhi = fc;
    }
    if (std::abs(fc) < 1e-15) break;
  }
  return x;
}

JointAngles decouple_joints(const FingerGeometry& g, GraspCase grasp_case, double theta_a,
                            const ContactOnset& onset) {
  JointAngles out;
  const PlanarPoint a = actuation_joint(g);
  const PlanarPoint b = add(a, polar(g.La, theta_a));
  switch (grasp_case) {
    case GraspCase::NoContact:
    case GraspCase::DistalFirst: {
      out.theta1 = parallel_theta1(g, theta_a);
      out.theta2 = kParallelBeta - out.theta1;
      out.theta3 = kParallelAlpha - kParallelBeta;
      break;
    }
    case GraspCase::MiddleFirst: {
      out.theta1 = onset.theta1;
      out.theta2 = onset.theta2;
      const FingerPose p = finger_pose(g, onset.theta1, onset.theta2, onset.theta3);
      const double beta = onset.theta1 + onset.theta2;
      const double expected = beta + onset.theta3 - g.gamma;
      const double phi = rotate_to_close(p.O3, g.L3C, b, g.Lb, expected);
      out.theta3 = phi + g.gamma - beta;
      break;
    }
    case GraspCase::ProximalFirst: {
      out.theta1 = onset.theta1;
      const double theta_a_stop =
          onset.theta2_stop
              ? actuation_from_joints(g, onset.theta1, *onset.theta2_stop, onset.theta3)
              : std::numeric_limits<double>::infinity();
      if (theta_a <= theta_a_stop) {
        // Intermediate and distal turn together about O2.
        const FingerPose p = finger_pose(g, onset.theta1, onset.theta2, onset.theta3);
        const PlanarPoint rc = sub(p.C, p.O2);
        const double start = std::atan2(rc.y, rc.x);
        const double phi = rotate_to_close(p.O2, norm(rc), b, g.Lb, start);
        out.theta2 = onset.theta2 + (phi - start);
        out.theta3 = onset.theta3;
      } else {
        ContactOnset frozen{onset.theta1, *onset.theta2_stop, onset.theta3, std::nullopt};
        const JointAngles j = decouple_joints(g, GraspCase::MiddleFirst, theta_a, frozen);
        out.theta2 = j.theta2;
        out.theta3 = j.theta3;
      }
      break;
    }
  }
  check_joint_limits(g, out.theta1, out.theta2);
  return out;
}

}  // namespace gripstat
