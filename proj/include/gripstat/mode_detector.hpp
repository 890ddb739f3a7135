#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gripstat/geometry.hpp"
#include "gripstat/signal_pipeline.hpp"

namespace gripstat {

// Single-layer LSTM with a logistic read-out. Gate blocks in W, U and b are
// stacked in the order input, forget, output, candidate.
struct LstmParams {
  int input_dim = 2;
  int hidden_dim = 32;
  Eigen::MatrixXd W;      // 4H x D
  Eigen::MatrixXd U;      // 4H x H
  Eigen::VectorXd b;      // 4H
  Eigen::VectorXd w_out;  // H
  double b_out = 0.0;

  static LstmParams zeros(int input_dim, int hidden_dim);
  // Uniform in +-1/sqrt(H), forget-gate bias 1.
  static LstmParams random(int input_dim, int hidden_dim, std::uint64_t seed);

  // ValidationError on inconsistent shapes or non-finite entries.
  void validate() const;
  std::size_t parameter_count() const;
  // Flat views in a fixed order: W, U, b, w_out, b_out.
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& v);

  friend bool operator==(const LstmParams& a, const LstmParams& b);
};

struct LstmGradients {
  Eigen::MatrixXd W, U;
  Eigen::VectorXd b, w_out;
  double b_out = 0.0;

  explicit LstmGradients(const LstmParams& p);
  void set_zero();
  double norm() const;
  void scale(double s);
  std::vector<double> flatten() const;
};

// Feature sequences are T x D, one row per sample, already standardized.
// Returns P(mode 1) per sample. Zero initial state.
std::vector<double> lstm_forward(const LstmParams& p, const Eigen::MatrixXd& x);

// Sum over t of weight[t] * BCE(p_t, y_t), with full back-propagation
// through the whole sequence. grad may be null.
double lstm_loss(const LstmParams& p, const Eigen::MatrixXd& x, const std::vector<int>& y,
                 const std::vector<double>& weight, LstmGradients* grad);

struct Normalization {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> stddev{1.0, 1.0};
};

// (current_filt, derivative) rows, z-scored.
Eigen::MatrixXd make_features(const FilteredTrace& f, const Normalization& n);

struct LabelledSequence {
  Eigen::MatrixXd x;  // raw features, T x 2
  std::vector<int> y;
};

struct TrainConfig {
  int hidden_dim = 32;
  double learning_rate = 0.1;
  int epochs = 12;
  std::size_t bptt_horizon = 64;  // truncated BPTT chunk length
  std::size_t batch_size = 16;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochReport {
  int epoch = 0;
  double train_loss = 0.0;  // weighted mean BCE
  double holdout_accuracy = 0.0;
};

struct TrainReport {
  Normalization norm;
  std::array<double, 2> class_weight{1.0, 1.0};
  std::vector<EpochReport> epochs;
};

// Normalization is fitted on `train`. Throws TrainingError on an empty set
// or a non-finite loss (naming epoch and step).
LstmParams lstm_train(const std::vector<LabelledSequence>& train, const std::vector<LabelledSequence>& holdout,
                      const TrainConfig& cfg, TrainReport* report = nullptr);

double per_sample_accuracy(const LstmParams& p, const Normalization& n, const std::vector<LabelledSequence>& data,
                           double threshold = 0.5);

// Size axis is theta1 at contact (rad); the speed axis is motor rpm. Both
// fits use the scaled abscissa u = (x - center) / half_width and coefficients
// are stored in that basis, lowest power first. The size polynomial has zero
// mean over the fitted sizes; the speed polynomial carries the overall offset.
struct CompensationSurface {
  std::array<double, 3> speed_coeffs{};
  std::array<double, 5> size_coeffs{};
  double speed_center = 65.0, speed_half_width = 15.0;
  double size_center = 0.7853981633974483, size_half_width = 0.2617993877991494;
  std::string rule = "additive";

  double speed_term(double speed) const;
  double size_term(double theta1) const;
  double operator()(double speed, double theta1) const;
  bool in_domain(double speed, double theta1) const;

  friend bool operator==(const CompensationSurface&, const CompensationSurface&) = default;
};

struct CompensationSample {
  double speed = 0.0;
  double size = 0.0;       // theta1 at contact, rad
  double deviation = 0.0;  // theta1_raw - theta1_true, rad
};

struct CompensationFit {
  CompensationSurface surface;
  double residual_rms = 0.0;
};

// Sequential marginal fits combined additively. ValidationError when fewer
// than 3 distinct speeds or 5 distinct sizes are present.
CompensationFit fit_compensation(const std::vector<CompensationSample>& samples);

struct Compensated {
  double theta1 = 0.0;
  bool extrapolated = false;
};

Compensated compensate(const CompensationSurface& s, double speed, double size, double theta1_raw);

struct ModeModel {
  LstmParams params;
  Normalization norm;
  CompensationSurface surface;
  // The proximal contact produces a smaller current step, so its detection
  // lag differs; fitted separately when calibration data covers that case.
  std::optional<CompensationSurface> proximal_surface;
  FilterConfig filter;
  double threshold = 0.5;
  std::size_t debounce = 10;
};

struct SwitchDetection {
  std::optional<std::size_t> index;
  double theta1_raw = 0.0;
  std::vector<double> probability;
};

// First sample whose probability exceeds the threshold and stays above it for
// `debounce` further samples. theta1_raw comes from the delay-aligned actuation
// angle read through the parallel-mode kinematics. Runs starting inside the
// first `warmup` samples are ignored; the model overload uses the filter span.
SwitchDetection detect_switch(const FingerGeometry& g, const FilteredTrace& f, const ModeModel& m);
SwitchDetection detect_switch(const FingerGeometry& g, const FilteredTrace& f, const LstmParams& p,
                              const Normalization& n, double threshold, std::size_t debounce = 10,
                              std::size_t warmup = 0);

inline constexpr int kModelFormatVersion = 1;

std::string model_to_string(const ModeModel& m);
// Throws VersionError naming both versions, CorruptionError on truncation or
// checksum mismatch.
ModeModel model_from_string(const std::string& text, int reader_version = kModelFormatVersion);
void save_model(const std::filesystem::path& path, const ModeModel& m);
ModeModel load_model(const std::filesystem::path& path);

}  // namespace gripstat
