#include "gripstat/statics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gripstat/angles.hpp"
#include "gripstat/error.hpp"

namespace gripstat {
namespace {

constexpr double kMmPerM = 1000.0;

double angle_of(const PlanarPoint& from, const PlanarPoint& to) { return std::atan2(to.y - from.y, to.x - from.x); }
double dist(const PlanarPoint& a, const PlanarPoint& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double denominator_actuation_side(const FourBarInstant& fb) {
  return fb.La * std::sin(fb.lambda + fb.theta_a) - fb.Lic * std::sin(fb.phi);
}

}  // namespace

// The IC runs off to infinity as the coupler turns parallel to O_aO_i, and the
// length then amplifies rounding roughly as L^2 / link length. Extended
// precision keeps metre-scale centres accurate to well under a nanometre.
using Wide = long double;

double ic_length_actuation_side(const FourBarInstant& fb) {
  const Wide psi = static_cast<Wide>(fb.lambda) + fb.theta_a;
  const Wide den = fb.La * std::sin(psi) - fb.Lic * std::sin(static_cast<Wide>(fb.phi));
  if (std::abs(den) < kIcDegenerateTol) throw DegeneracyError("instantaneous center at infinity");
  return static_cast<double>(fb.La * (fb.Lia * std::sin(psi) - fb.Lic * std::sin(psi + fb.phi)) / den);
}

double ic_length_phalange_side(const FourBarInstant& fb) {
  const Wide psi = static_cast<Wide>(fb.lambda) + fb.theta_a;
  const Wide phi = fb.phi;
  const Wide den = fb.Lic * std::sin(phi) - fb.La * std::sin(psi);
  if (std::abs(den) < kIcDegenerateTol) throw DegeneracyError("instantaneous center at infinity");
  return static_cast<double>(fb.Lic * (fb.Lia * std::sin(phi) - fb.La * std::sin(psi + phi)) / den);
}

IcResult instantaneous_center(const FourBarInstant& fb) {
  const double den = std::abs(denominator_actuation_side(fb));
  if (den < kIcDegenerateTol) {
    throw DegeneracyError("coupler O_bO_c parallel to O_aO_i: pure-translation instant");
  }
  IcResult r;
  r.near_degenerate = den < kIcWarnTol;
  if (fb.La >= fb.Lic) {
    r.branch = IcBranch::kBeyondPhalangeJoint;
    r.length = ic_length_actuation_side(fb);
  } else {
    r.branch = IcBranch::kBeyondActuationJoint;
    r.length = ic_length_phalange_side(fb);
  }
  return r;
}

double velocity_ratio(const FourBarInstant& fb, const IcResult& ic) {
  if (ic.branch == IcBranch::kBeyondPhalangeJoint) return (ic.length - fb.Lia) / ic.length;
  return ic.length / (ic.length - fb.Lia);
}

FourBarInstant four_bar_instant(const FingerGeometry& g, const JointState& s, int i) {
  const FingerPose p = finger_pose(g, s.theta1, s.theta2, s.theta3);
  const PlanarPoint joints[3] = {p.O1, p.O2, p.O3};
  const PlanarPoint& oi = joints[i];
  const double theta_a = angle_of(p.A, p.B);
  const double ground = angle_of(p.A, oi);  // direction O_a -> O_i
  FourBarInstant fb;
  fb.La = g.La;
  fb.Lia = dist(p.A, oi);
  fb.Lic = dist(oi, p.C);
  fb.theta_a = theta_a;
  fb.lambda = wrap_angle(-ground);
  fb.phi = wrap_angle(angle_of(oi, p.A) - angle_of(oi, p.C));
  return fb;
}

TransmissionRatios transmission_ratios(const FingerGeometry& g, const JointState& s, Actuation kind) {
  TransmissionRatios r;
  if (kind == Actuation::kFullyActuated) {
    r.X = {1.0, 0.0, 0.0};
    return r;
  }
  for (int i = 0; i < 3; ++i) {
    const FourBarInstant fb = four_bar_instant(g, s, i);
    const IcResult ic = instantaneous_center(fb);
    r.X[i] = velocity_ratio(fb, ic);
    r.near_degenerate = r.near_degenerate || ic.near_degenerate;
  }
  return r;
}

Eigen::Matrix3d transmission_matrix(const std::array<double, 3>& X) {
  Eigen::Matrix3d T;
  T << X[0], X[1], X[2], 0.0, 1.0, 0.0, 0.0, 0.0, 1.0;
  return T;
}

Eigen::Matrix3d jacobian(const FingerGeometry& g, const JointState& s, const ContactState& c) {
  for (int i = 0; i < 3; ++i) {
    if (c.mask[i] && !(std::isfinite(c.k[i]) && c.k[i] > 0.0)) {
      throw ValidationError("contact " + std::to_string(i + 1) + " is active but has no positive arm k");
    }
  }
  const auto& k = c.k;
  Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
  J(0, 0) = k[0];
  J(1, 0) = k[1] + g.L1 * std::cos(s.theta2);
  J(1, 1) = k[1];
  J(2, 0) = k[2] + g.L1 * std::cos(s.theta2 + s.theta3) + g.L2 * std::cos(s.theta3);
  J(2, 1) = k[2] + g.L2 * std::cos(s.theta3);
  J(2, 2) = k[2];
  return J;
}

Eigen::Vector3d contact_velocities(const Eigen::Matrix3d& J, const Eigen::Vector3d& omega) { return J * omega; }

Eigen::Vector3d contact_velocities_expanded(const FingerGeometry& g, const JointState& s,
                                            const std::array<double, 3>& k, const Eigen::Vector3d& w) {
  const double c2 = std::cos(s.theta2);
  const double c3 = std::cos(s.theta3);
  const double c23 = std::cos(s.theta2 + s.theta3);
  return {k[0] * w[0], (k[1] + g.L1 * c2) * w[0] + k[1] * w[1],
          (k[2] + g.L1 * c23 + g.L2 * c3) * w[0] + (k[2] + g.L2 * c3) * w[1] + k[2] * w[2]};
}

Eigen::Vector3d joint_torques(const ActuationState& a, const std::array<double, 3>& X, const FingerGeometry& g) {
  return {X[0] * a.tau_a, X[1] * a.tau_a - g.K2 * a.delta_theta2, X[2] * a.tau_a - g.K3 * a.delta_theta3};
}

Eigen::Vector3d contact_forces(const Eigen::Matrix3d& J, const Eigen::Vector3d& tau_prime, const ContactMask& mask) {
  std::vector<int> active;
  for (int i = 0; i < 3; ++i) {
    if (mask[i]) active.push_back(i);
  }
  Eigen::Vector3d F = Eigen::Vector3d::Zero();
  if (active.empty()) return F;
  const int n = static_cast<int>(active.size());
  for (int r = 0; r < n; ++r) {
    if (J(active[r], active[r]) == 0.0) {
      throw SingularityError("zero contact arm on active phalange " + std::to_string(active[r] + 1));
    }
  }
  // J^T restricted to the active set is upper triangular: back-substitute.
  for (int r = n - 1; r >= 0; --r) {
    const int i = active[r];
    double acc = tau_prime[i];
    for (int q = r + 1; q < n; ++q) {
      const int j = active[q];
      acc -= J(j, i) * F[j];
    }
    F[i] = acc / J(i, i);
  }
  return F;
}

Eigen::Vector3d contact_torques(const Eigen::Vector3d& tau_prime, const Eigen::Matrix3d& J) {
  const double k1 = J(0, 0), k2 = J(1, 1), k3 = J(2, 2);
  if (k1 * k2 * k3 == 0.0) {
    throw SingularityError("k1*k2*k3 == 0: use contact_forces with a reduced contact mask");
  }
  const double r12 = J(1, 0), r13 = J(2, 0), r23 = J(2, 1);
  return {tau_prime[0] - r12 / k2 * tau_prime[1] + (r12 * r23 - k2 * r13) / (k2 * k3) * tau_prime[2],
          tau_prime[1] - r23 / k3 * tau_prime[2], tau_prime[2]};
}

double power_balance(const Eigen::Vector3d& t, const Eigen::Vector3d& omega_a, const Eigen::Vector3d& F,
                     const Eigen::Vector3d& v, const Eigen::Vector3d& tau, const Eigen::Vector3d& omega) {
  const double p1 = t.dot(omega_a);
  const double p2 = F.dot(v);
  const double p3 = tau.dot(omega);
  const double spread = std::max({std::abs(p1 - p2), std::abs(p1 - p3), std::abs(p2 - p3)});
  // Scale by the magnitude of the summed terms so cancellation is not hidden.
  const double scale =
      std::max({(t.cwiseAbs().array() * omega_a.cwiseAbs().array()).sum(),
                (F.cwiseAbs().array() * v.cwiseAbs().array()).sum(),
                (tau.cwiseAbs().array() * omega.cwiseAbs().array()).sum()});
  if (scale == 0.0) return 0.0;
  return spread / scale;
}

StaticsResult solve_statics(const FingerGeometry& g, const JointState& s, const ContactState& c,
                            const ActuationState& a) {
  StaticsResult r;
  r.ratios = transmission_ratios(g, s);
  r.J = jacobian(g, s, c);
  r.tau_prime = joint_torques(a, r.ratios.X, g);
  r.F = contact_forces(r.J, r.tau_prime * kMmPerM, c.mask);
  return r;
}

double actuation_torque_for_distal_force(const FingerGeometry& g, const JointState& s, const ContactState& c,
                                         double delta_theta3, double target_force) {
  if (!c.mask[2]) throw DomainError("distal force setpoint needs an active distal contact");
  const TransmissionRatios r = transmission_ratios(g, s);
  // Last row of J^T F = tau' is always k3 f3 = tau'3.
  return (target_force * c.k[2] / kMmPerM + g.K3 * delta_theta3) / r.X[2];
}

}  // namespace gripstat
