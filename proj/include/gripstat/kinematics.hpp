#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "gripstat/geometry.hpp"

namespace gripstat {

struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PlanarPoint&, const PlanarPoint&) = default;
};

// Instantaneous joint-space state. theta2/theta3 are relative joint angles;
// beta = theta1 + theta2 and alpha = beta + theta3 are the absolute
// orientations of the intermediate and distal phalanges.
struct JointState {
  double theta_a = 0.0;
  double theta_b = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::array<double, 4> omega{};  // (theta_a, theta1, theta2, theta3) rates, rad/s
};

enum class GraspCase { DistalFirst, MiddleFirst, ProximalFirst, NoContact };

std::string_view to_string(GraspCase c);
GraspCase grasp_case_from_string(std::string_view s);

// Reference-frame convention for parallel mode: the intermediate and distal
// phalanges stay vertical.
inline constexpr double kParallelAlpha = 1.5707963267948966;
inline constexpr double kParallelBeta = 1.5707963267948966;

enum class LimitCheck { kEnforce, kNone };

// Throws LimitError when theta1/theta2 leave the geometry's ranges.
void check_joint_limits(const FingerGeometry& g, double theta1, double theta2);

// Fingertip P from theta1, beta and alpha.
PlanarPoint forward_fingertip(const FingerGeometry& g, const JointState& s,
                              LimitCheck check = LimitCheck::kEnforce);

// p_y on the circle of radius L1 about the proximal joint, taking the root
// above the proximal joint. Throws NoSolutionError when p_x is unreachable.
double solve_py(const FingerGeometry& g, double p_x, double alpha, double beta);

// Point C on the distal phalange from the fingertip.
PlanarPoint point_c(const FingerGeometry& g, const PlanarPoint& p, double alpha);

// Point C reached through the driving chain F -> A -> B -> C.
PlanarPoint point_c_from_actuation(const FingerGeometry& g, double theta_a, double theta_b);

PlanarPoint actuation_joint(const FingerGeometry& g);

struct ActuationCoefficients {
  double rho1 = 0.0;
  double rho2 = 0.0;
  double rho3 = 0.0;
};

// rho1 cos(theta_a) + rho2 sin(theta_a) + rho3 = 0, from expanding the loop
// |C - A - La e(theta_a)|^2 = Lb^2.
ActuationCoefficients actuation_coefficients(const FingerGeometry& g, const PlanarPoint& c);

// |C - A - La e(theta_a)|^2 - Lb^2, in mm^2.
double closure_residual(const FingerGeometry& g, const PlanarPoint& c, double theta_a);

// Actuation angle that places C at the end of the A-B-C dyad, on the
// assembly branch with B counter-clockwise of ray AC. Throws NoSolutionError
// when C is outside the dyad's annulus and AmbiguityError if neither root is
// on the assembly branch.
double inverse_actuation(const FingerGeometry& g, const PlanarPoint& c);

// Both roots of the half-angle quadratic, unordered.
std::array<double, 2> actuation_roots(const FingerGeometry& g, const PlanarPoint& c);

double transmission_link_angle(const FingerGeometry& g, const PlanarPoint& c, double theta_a);

// Joint coordinates of one pose. O1 is the frame origin F.
struct FingerPose {
  PlanarPoint O1, O2, O3, P, C, A, B;
};

FingerPose finger_pose(const FingerGeometry& g, double theta1, double theta2, double theta3);

// Fills beta, alpha, theta_a and theta_b from the joint angles.
JointState make_joint_state(const FingerGeometry& g, double theta1, double theta2, double theta3);

// theta_a as a function of the three joint angles.
double actuation_from_joints(const FingerGeometry& g, double theta1, double theta2, double theta3);

// Parallel-mode inverse: the theta1 at which the parallel finger needs
// actuation angle theta_a. Throws LimitError outside theta1_range.
double parallel_theta1(const FingerGeometry& g, double theta_a);

struct JointAngles {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;
};

// Joint angles frozen when the first contact happened. theta2_stop is the
// intermediate joint angle at which a ProximalFirst grasp brings the
// intermediate phalange onto the object; beyond it theta2 freezes too.
struct ContactOnset {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;
  std::optional<double> theta2_stop;
};

JointAngles decouple_joints(const FingerGeometry& g, GraspCase grasp_case, double theta_a,
                            const ContactOnset& onset = {});

}  // namespace gripstat
