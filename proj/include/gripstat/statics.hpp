#pragma once

#include <array>

#include <Eigen/Dense>

#include "gripstat/geometry.hpp"
#include "gripstat/kinematics.hpp"

namespace gripstat {

using ContactMask = std::array<bool, 3>;

// Per-phalange contact. k_i is measured from joint O_i along phalange i (mm)
// and is only meaningful where mask_i is set. Forces are normal to the
// phalange, positive toward the object. Contact is frictionless.
struct ContactState {
  ContactMask mask{};
  std::array<double, 3> k{};
  std::array<double, 3> F{};
};

struct ActuationState {
  double tau_a = 0.0;    // N*m at O_a
  double current = 0.0;  // A
  double delta_theta2 = 0.0;
  double delta_theta3 = 0.0;
};

// One driving four-bar O_a O_b O_c O_i, captured at an instant.
//   psi = lambda + theta_a : angle from ray O_aO_i to ray O_aO_b (ccw)
//   phi                    : angle from ray O_iO_c to ray O_iO_a (ccw)
struct FourBarInstant {
  double La = 0.0;
  double Lic = 0.0;
  double Lia = 0.0;
  double lambda = 0.0;
  double theta_a = 0.0;
  double phi = 0.0;
};

enum class IcBranch {
  kBeyondPhalangeJoint,   // La >= Lic, length is L_va measured from O_a
  kBeyondActuationJoint,  // La <  Lic, length is L_vi measured from O_i
};

struct IcResult {
  double length = 0.0;  // signed along the line O_aO_i (see IcBranch)
  IcBranch branch = IcBranch::kBeyondPhalangeJoint;
  bool near_degenerate = false;
};

inline constexpr double kIcDegenerateTol = 1e-12;
inline constexpr double kIcWarnTol = 1e-6;

// Both branch formulas with a caller-chosen branch; used by the tie tests.
double ic_length_actuation_side(const FourBarInstant& fb);
double ic_length_phalange_side(const FourBarInstant& fb);

// Throws DegeneracyError when the coupler is parallel to O_aO_i.
IcResult instantaneous_center(const FourBarInstant& fb);

// theta_a_dot / theta_i_dot for the four-bar with every other joint locked.
double velocity_ratio(const FourBarInstant& fb, const IcResult& ic);

// Four-bar of phalange joint i (0-based) rebuilt from the pose.
FourBarInstant four_bar_instant(const FingerGeometry& g, const JointState& s, int i);

enum class Actuation { kUnderactuated, kFullyActuated };

struct TransmissionRatios {
  std::array<double, 3> X{};
  bool near_degenerate = false;
};

TransmissionRatios transmission_ratios(const FingerGeometry& g, const JointState& s,
                                       Actuation kind = Actuation::kUnderactuated);

// Rows: [X1 X2 X3; 0 1 0; 0 0 1].
Eigen::Matrix3d transmission_matrix(const std::array<double, 3>& X);

// Lower-triangular contact Jacobian (mm). Throws ValidationError when an
// active contact has a non-positive or non-finite arm.
Eigen::Matrix3d jacobian(const FingerGeometry& g, const JointState& s, const ContactState& c);

Eigen::Vector3d contact_velocities(const Eigen::Matrix3d& J, const Eigen::Vector3d& omega);

// Per-component expansion of v = J * omega, straight from the link lengths.
Eigen::Vector3d contact_velocities_expanded(const FingerGeometry& g, const JointState& s,
                                            const std::array<double, 3>& k, const Eigen::Vector3d& omega);

// tau' = T^T t with t = (tau_a, -K2 dtheta2, -K3 dtheta3), in N*m.
Eigen::Vector3d joint_torques(const ActuationState& a, const std::array<double, 3>& X, const FingerGeometry& g);

// Solves J^T F = tau' over the active contacts. Inactive rows and columns are
// deleted and their forces set to zero. Units follow the inputs (J in mm and
// tau' in N*mm give F in N).
Eigen::Vector3d contact_forces(const Eigen::Matrix3d& J, const Eigen::Vector3d& tau_prime, const ContactMask& mask);

// tau''_i = f_i k_i for a full three-phalange contact. Throws
// SingularityError unless k1 k2 k3 != 0.
Eigen::Vector3d contact_torques(const Eigen::Vector3d& tau_prime, const Eigen::Matrix3d& J);

// Relative spread of the three virtual powers t.w_a, F.v and tau.theta_dot.
double power_balance(const Eigen::Vector3d& t, const Eigen::Vector3d& omega_a, const Eigen::Vector3d& F,
                     const Eigen::Vector3d& v, const Eigen::Vector3d& tau, const Eigen::Vector3d& omega);

// Full kinetostatic evaluation at one pose.
struct StaticsResult {
  TransmissionRatios ratios;
  Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
  Eigen::Vector3d tau_prime = Eigen::Vector3d::Zero();  // N*m
  Eigen::Vector3d F = Eigen::Vector3d::Zero();          // N
};

StaticsResult solve_statics(const FingerGeometry& g, const JointState& s, const ContactState& c,
                            const ActuationState& a);

// The actuation torque that produces f3 = target on the distal phalange.
double actuation_torque_for_distal_force(const FingerGeometry& g, const JointState& s, const ContactState& c,
                                         double delta_theta3, double target_force);

}  // namespace gripstat
