#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gripstat/geometry.hpp"
#include "gripstat/kinematics.hpp"
#include "gripstat/mode_detector.hpp"
#include "gripstat/plant_sim.hpp"
#include "gripstat/signal_pipeline.hpp"

namespace gripstat {

struct EstimatorConfig {
  // Case prior. Without one, a switch during motion is read as MiddleFirst.
  std::optional<GraspCase> case_prior;
  // Contact arms, default L_i / 2.
  std::optional<std::array<double, 3>> k;
  // Intermediate joint angle where a ProximalFirst wrap stops; default is the
  // upper theta2 limit.
  std::optional<double> theta2_stop;
  bool use_compensation = true;
  double steady_fraction = 0.2;       // of the post-stall samples
  double steady_max_derivative = 50;  // A/s
  std::optional<double> no_load_current;  // A; estimated from the parallel phase otherwise
};

// Everything needed to re-run statics for one sample.
struct EstimateSample {
  double t = 0.0;
  int mode = 0;
  double theta_a = 0.0;  // delay-aligned
  double current = 0.0;  // filtered
  JointAngles q;
  ContactMask mask{};
  double tau_a = 0.0;  // N*m
  double delta_theta2 = 0.0;
  double delta_theta3 = 0.0;
  std::array<double, 3> f{};
  bool infeasible = false;
};

struct ForceEstimate {
  std::vector<EstimateSample> samples;
  FilteredTrace filtered;
  SwitchDetection detection;
  GraspCase grasp_case = GraspCase::NoContact;
  std::optional<std::size_t> switch_index;
  std::optional<std::size_t> stall_index;
  double theta1_raw = 0.0;
  double theta1_switch = 0.0;  // after compensation
  bool extrapolated = false;
  double no_load_current = 0.0;
  std::array<double, 3> k{};
  std::array<double, 3> steady_force{};
  std::size_t steady_begin = 0, steady_end = 0;  // sample range used
  std::vector<std::string> flags;
};

ForceEstimate estimate(const CurrentTrace& tr, const FingerGeometry& g, const ModeModel& model,
                       const EstimatorConfig& cfg = {});

// Statics for one retained sample; estimate() uses exactly this.
std::array<double, 3> sample_forces(const FingerGeometry& g, const EstimateSample& s, const std::array<double, 3>& k);

// ---- training pipeline ------------------------------------------------------------

// Filtered features and truth labels from the start of the trace up to
// crop_after samples past the truth switch (whole trace when crop_after = 0).
LabelledSequence training_sequence(const CurrentTrace& tr, const FilterConfig& fc, std::size_t crop_after = 300);

struct ModelTrainingResult {
  ModeModel model;
  TrainReport train;
  CompensationFit compensation;
  std::optional<CompensationFit> proximal_compensation;
  double holdout_accuracy = 0.0;
  std::size_t undetected = 0;  // compensation traces with no switch found
};

// Trains the classifier on `train` (with `holdout` for reporting), then fits
// the compensation surface on switch deviations measured over `calibration`.
// ProximalFirst calibration traces, if any, get their own surface.
ModelTrainingResult train_mode_model(const FingerGeometry& g, const std::vector<CurrentTrace>& train,
                                     const std::vector<CurrentTrace>& holdout,
                                     const std::vector<CurrentTrace>& calibration, const TrainConfig& tc,
                                     const FilterConfig& fc = {}, unsigned jobs = 1);

// ---- evaluation --------------------------------------------------------------------

struct TraceEvaluation {
  std::size_t index = 0;
  GraspCase truth_case = GraspCase::NoContact;
  GraspCase estimated_case = GraspCase::NoContact;
  double motor_speed = 0.0;
  double object_size = 0.0;
  double target_force = 0.0;
  double theta1_true = 0.0;
  double theta1_raw = 0.0;
  double theta1_est = 0.0;
  bool detected = false;
  std::array<double, 3> f_true{};
  std::array<double, 3> f_est{};
  double force_deviation = 0.0;  // N, summed |f_est - f_true| over phalanges
  double deviation_rate = 0.0;   // force_deviation / sum |f_true|
};

struct GroupStats {
  double key = 0.0;
  std::size_t count = 0;
  double mean_theta1_dev = 0.0;  // deg, |.|
  double max_theta1_dev = 0.0;
  double mean_force_dev = 0.0;  // N
  double max_force_dev = 0.0;
  double mean_rate = 0.0;
  double max_rate = 0.0;
};

struct EvaluationReport {
  std::vector<TraceEvaluation> rows;
  GroupStats overall;
  std::vector<GroupStats> by_speed;
  std::vector<GroupStats> by_theta1;  // key in deg
  std::vector<GroupStats> by_setpoint;
  std::size_t missed = 0;

  std::string to_text() const;
  std::string to_csv() const;
};

EvaluationReport evaluate(const std::vector<CurrentTrace>& traces, const FingerGeometry& g, const ModeModel& model,
                          const EstimatorConfig& cfg = {}, unsigned jobs = 1);

// ---- ring check ----------------------------------------------------------------------

// deformation(F) fitted as a polynomial through (force, deformation)
// samples; the band is +-(band_sigmas * residual RMS + band_floor).
struct RingCurve {
  std::vector<double> coeffs;  // deformation = sum c_k F^k, mm
  double f_max = 0.0;          // fitted domain [0, f_max]
  double band = 0.0;           // mm half-width

  double deformation(double force) const;
};

RingCurve fit_ring_curve(const std::vector<double>& force, const std::vector<double>& deformation, int degree = 3,
                         double band_sigmas = 3.0, double band_floor = 0.02);

// Ground-truth compliant ring used by the check: F(delta) = k1 delta + k3 delta^3.
struct RingModel {
  double k1 = 12.0;  // N/mm
  double k3 = 0.8;   // N/mm^3
  double force(double delta) const { return k1 * delta + k3 * delta * delta * delta; }
  double deflection(double force) const;  // inverse, Newton
};

// Dynamometer-style samples 0..100 N step 5 N with relative force noise.
RingCurve calibrate_ring(const RingModel& ring, double noise_rel, std::uint64_t seed);

struct RingRun {
  double setpoint = 0.0;
  double estimated_force = 0.0;
  double true_force = 0.0;
  double deformation = 0.0;
  double expected = 0.0;
  bool within_band = false;
};

struct RingReport {
  std::vector<RingRun> runs;
  std::size_t within = 0;
};

struct RingCheckConfig {
  double object_theta1 = 0.6981317007977318;  // rad, ring face meets the fingers here (40 deg)
  double motor_speed = 60.0;
  std::size_t runs = 30;
  bool noisy = false;
  std::uint64_t seed = 1;
};

// Force-feedback grasp of a compliant ring between two mirrored fingers.
// The loop adjusts the motor current until the estimator reads the setpoint;
// the resulting ring deformation is checked against the fitted band. Throws
// DomainError for a setpoint outside the curve's domain.
RingReport ring_grasp_check(const FingerGeometry& g, const ModeModel& model, const RingModel& ring,
                            const RingCurve& curve, const std::vector<double>& setpoints, const RingCheckConfig& cfg,
                            const PlantConfig& plant = {});

}  // namespace gripstat
