#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gripstat/geometry.hpp"
#include "gripstat/kinematics.hpp"
#include "gripstat/statics.hpp"

namespace gripstat {

// Current noise about the commanded value: sigma = sigma0 + c_load*|tau_load|,
// plus sparse impulse outliers at Poisson-distributed times.
struct NoiseModel {
  double sigma0 = 0.01;            // A
  double c_load = 0.004;           // A per N*m of actuation torque
  double impulse_rate = 2.0;       // per second
  double impulse_amplitude = 0.25; // A, magnitude drawn in [0.5, 1] * amplitude
};

struct PlantConfig {
  double sample_rate = 1000.0;       // Hz
  // Friction current. The screw loses A*gain*I0 of torque whenever it is
  // loaded, so the torque reaching O_a is A*gain*(I - I0).
  double no_load_current = 0.15;     // A
  double ramp_time = 0.15;           // s, stall -> setpoint current
  double hold_time = 0.4;            // s at setpoint
  double approach_margin = 0.17453292519943295;  // rad of theta1 travelled before contact
  double palm_half_gap = 15.75;      // mm, finger base to gripper centerline
  double proximal_lead = 0.13962634015954636;    // rad, proximal contacts this much earlier
  NoiseModel noise;
};

struct GraspScenario {
  double object_size = 0.0;   // mm
  double motor_speed = 60.0;  // rpm
  GraspCase contact_case = GraspCase::MiddleFirst;
  double target_force = 100.0;  // N on the distal phalange
  std::uint64_t seed = 0;
  // Contact arms; default L_i / 2.
  std::optional<std::array<double, 3>> k;
  // Distal wrap (theta3 at the distal contact) and the intermediate stop for
  // ProximalFirst. Defaults come from default_wrap().
  std::optional<double> wrap_theta3;
  std::optional<double> theta2_stop;
};

// Gripper dimension range: 1.85 mm coin up to a 125 mm cube.
inline constexpr double kMinObjectSize = 1.85;
inline constexpr double kMaxObjectSize = 125.0;

// Equivalent object size whose faces meet the parallel finger at theta1.
double size_for_contact_angle(const FingerGeometry& g, const PlantConfig& cfg, double theta1);
double contact_angle_for_size(const FingerGeometry& g, const PlantConfig& cfg, double object_size);

// theta1 at first contact for a scenario (earlier for ProximalFirst).
double scenario_contact_theta1(const FingerGeometry& g, const PlantConfig& cfg, const GraspScenario& sc);

double default_wrap(GraspCase c, double object_size);

// Motor rpm -> actuation joint rate through an ideal screw transmission.
double actuation_rate(const FingerGeometry& g, double motor_rpm);

struct TraceTruth {
  GraspCase grasp_case = GraspCase::NoContact;
  double object_size = 0.0;
  double motor_speed = 0.0;
  double target_force = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> switch_index;  // first sample labelled 1
  std::optional<std::size_t> contact_index;  // first sample with contact (any case)
  std::optional<std::size_t> stall_index;    // actuator stops advancing
  double theta1_switch = 0.0;                // theta1 at first contact
  ContactOnset onset;
  std::array<double, 3> k{};
  double no_load_current = 0.0;
  std::vector<double> theta1, theta2, theta3;
  std::vector<double> tau_a;         // N*m, noise-free
  std::vector<double> delta_theta2, delta_theta3;
  std::vector<std::uint8_t> mask;    // bit i = phalange i+1 in contact
  std::vector<double> f1, f2, f3;    // N
  std::vector<std::size_t> impulses; // samples carrying an injected outlier
};

struct CurrentTrace {
  double sample_rate = 1000.0;
  std::vector<double> t;         // s
  std::vector<double> current;   // A
  std::vector<double> position;  // rad, actuation angle theta_a
  std::vector<double> velocity;  // rpm at the motor
  std::vector<int> labels;       // 0 parallel / 1 enveloping; may be empty
  std::optional<TraceTruth> truth;

  std::size_t size() const { return t.size(); }
};

// Quasi-static grasp episode. Throws DomainError for an infeasible scenario.
CurrentTrace simulate_grasp(const FingerGeometry& g, const GraspScenario& sc, const PlantConfig& cfg = {});

// Free open-close motion with no object over the full theta1 range.
CurrentTrace simulate_free_motion(const FingerGeometry& g, double motor_speed, std::uint64_t seed,
                                  const PlantConfig& cfg = {});

// N*m at O_a from motor current.
double torque_from_current(const FingerGeometry& g, double current);

struct DatasetGrid {
  std::vector<double> contact_theta1;  // rad, one object per entry
  std::vector<double> speeds;          // rpm
  std::size_t traces_per_cell = 1;
  GraspCase contact_case = GraspCase::MiddleFirst;
  double target_force = 100.0;
  std::uint64_t base_seed = 1;
};

// 16 objects over theta1 = 30..60 deg in 2 deg steps.
std::vector<double> standard_object_angles();

struct DatasetEntry {
  std::size_t object_index = 0;
  std::size_t speed_index = 0;
  std::size_t repeat = 0;
  GraspScenario scenario;
  CurrentTrace trace;
};

// Order: object, speed, repeat. Seeds depend only on (base_seed, grid index).
std::vector<GraspScenario> expand_grid(const FingerGeometry& g, const DatasetGrid& grid, const PlantConfig& cfg = {});

std::vector<DatasetEntry> batch_generate(const FingerGeometry& g, const DatasetGrid& grid,
                                         const PlantConfig& cfg = {}, unsigned jobs = 1);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace gripstat
