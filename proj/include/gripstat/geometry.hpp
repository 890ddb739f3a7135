#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace gripstat {

struct AngleRange {
  double min = 0.0;
  double max = 0.0;

  bool contains(double v, double tol = 0.0) const { return v >= min - tol && v <= max + tol; }
  friend bool operator==(const AngleRange&, const AngleRange&) = default;
};

// Fixed parameters of one finger. Lengths in mm, angles in rad, stiffness in
// N*m/rad. The two fingers of the gripper are mirror images, so one model
// covers both.
//
// Lia/Lic/lambda describe the driving four-bar O_a O_b O_c O_i of each
// phalange joint at the home pose (theta1 = theta1_range.min, parallel mode).
// For joints 2 and 3 they change with the pose; the statics module always
// rebuilds them from joint coordinates and never reads these fields.
struct FingerGeometry {
  double L1 = 0.0;   // proximal phalange
  double L2 = 0.0;   // intermediate phalange
  double L3 = 0.0;   // distal phalange
  double La = 0.0;   // driving crank AB
  double Lb = 0.0;   // coupler BC
  double L1a = 0.0;  // palm offset F -> A
  double L3C = 0.0;  // distal offset D -> C
  double epsilon = 0.0;
  double gamma = 0.0;
  std::array<double, 3> Lia{};
  std::array<double, 3> Lic{};
  std::array<double, 3> lambda{};
  double K2 = 0.0;
  double K3 = 0.0;
  AngleRange theta1_range;
  AngleRange theta2_range;
  double torque_constant_A = 0.0;  // N*m/A at the motor shaft
  double screw_gain = 0.0;         // torque amplification motor -> O_a
  double spring_preload = 0.0;     // rad of wind-up held by the stops
  // Fixed parallelogram DEIJ of the intermediate phalange (DE = L2).
  double Lij = 0.0;
  double Lei = 0.0;
  double Ldj = 0.0;

  friend bool operator==(const FingerGeometry&, const FingerGeometry&) = default;
};

struct Violation {
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

// Mechanical limits of the mechanism family.
inline constexpr AngleRange kTheta1Limit{0.3490658503988659, 1.9198621771937625};  // [20, 110] deg
inline constexpr AngleRange kTheta2Limit{0.0, 1.5707963267948966};                 // [0, 90] deg
inline constexpr double kParallelogramTolerance = 1e-9;                            // mm

ValidationReport validate_geometry(const FingerGeometry& g);

// Documented implementation constants. They are chosen to be mechanically
// consistent, not measured from any prototype.
const FingerGeometry& reference_geometry();

// Flat key/value document:
//   units: mm rad N*m/rad
//   L1 = 50
//   Lia = 20, 81.2, 110.5
// Blank lines and '#' comments are ignored.
std::string serialize_geometry(const FingerGeometry& g);

// Throws ParseError for malformed text or a missing/unknown key, and
// ValidationError when the parsed geometry is inconsistent.
FingerGeometry load_geometry(std::string_view text);

FingerGeometry load_geometry_file(const std::string& path);

}  // namespace gripstat
