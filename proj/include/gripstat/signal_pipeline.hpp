#pragma once

#include <cstddef>
#include <deque>
#include <filesystem>
#include <optional>
#include <vector>

#include "gripstat/plant_sim.hpp"

namespace gripstat {

struct FilterConfig {
  std::size_t median_window = 5;
  std::size_t mean_window = 15;
  std::size_t delay_units = 7;  // (mean_window - 1) / 2 cancels the mean filter's lag

  void validate() const;  // ValidationError
};

// Centered sliding median. Windows past either end replicate the endpoint.
// Throws ValidationError for an even window, a window < 3 or one longer than
// the series.
std::vector<double> median_filter(const std::vector<double>& x, std::size_t window);

// Trailing (causal) moving average. Before the window fills, the first sample
// stands in for the missing history.
std::vector<double> mean_filter(const std::vector<double>& x, std::size_t window);

// (y[k] - y[k-1]) * fs, with d[0] = 0.
std::vector<double> first_difference(const std::vector<double>& y, double sample_rate);

// out[k] = x[k - d], holding x[0] at the start.
std::vector<double> delay_align(const std::vector<double>& position, std::size_t delay_units);
// out[k] = x[k + d], holding the last sample at the end.
std::vector<double> delay_advance(const std::vector<double>& position, std::size_t delay_units);

struct FilteredTrace {
  std::vector<double> current_filt;   // A
  std::vector<double> derivative;     // A/s
  std::vector<double> position_aligned;  // rad
};

FilteredTrace two_stage_filter(const CurrentTrace& tr, const FilterConfig& cfg);

// Trace CSV with current_filt_A,current_deriv_A_per_s appended.
void write_filtered_csv(const std::filesystem::path& path, const CurrentTrace& tr, const FilteredTrace& f);

// Sample-at-a-time form of two_stage_filter. The centered median needs
// median_window/2 samples of look-ahead, so push() returns the output for an
// earlier sample once it is settled and finish() flushes the tail. The
// concatenated output is bit-identical to the batch filter.
class StreamingFilter {
 public:
  struct Sample {
    std::size_t index = 0;
    double current_filt = 0.0;
    double derivative = 0.0;
    double position_aligned = 0.0;
  };

  StreamingFilter(const FilterConfig& cfg, double sample_rate);

  std::optional<Sample> push(double current, double position);
  std::vector<Sample> finish();

 private:
  Sample emit(std::size_t k);

  FilterConfig cfg_;
  double fs_;
  std::vector<double> raw_;        // all current samples seen
  std::vector<double> positions_;  // all positions seen
  std::vector<double> med_;        // settled median outputs
  std::deque<double> mean_hist_;
  double prev_filt_ = 0.0;
  std::size_t next_ = 0;
};

}  // namespace gripstat
