#include "gripstat/signal_pipeline.hpp"

#include <algorithm>
#include <string>

#include "gripstat/error.hpp"
#include "gripstat/trace_io.hpp"
#include "text_format.hpp"

namespace gripstat {

namespace {

void check_median_window(std::size_t window, std::size_t n) {
  if (window % 2 == 0) throw ValidationError("median window must be odd, got " + std::to_string(window));
  if (window < 3) throw ValidationError("median window must be at least 3");
  if (window > n) {
    throw ValidationError("median window " + std::to_string(window) + " exceeds series length " + std::to_string(n));
  }
}

// Median of x[k-h .. k+h] with indices clamped to [0, n-1].
double clamped_median(const std::vector<double>& x, std::size_t k, std::size_t window, double* scratch) {
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(window / 2);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  for (std::ptrdiff_t j = -h; j <= h; ++j) {
    const std::ptrdiff_t i = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(k) + j, 0, n - 1);
    scratch[j + h] = x[static_cast<std::size_t>(i)];
  }
  std::nth_element(scratch, scratch + h, scratch + window);
  return scratch[h];
}

// Sum in a fixed order so batch and streaming agree to the bit.
double window_mean(const double* w, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i];
  return s / static_cast<double>(n);
}

}  // namespace

void FilterConfig::validate() const {
  if (median_window % 2 == 0 || median_window < 3) {
    throw ValidationError("median_window must be odd and >= 3, got " + std::to_string(median_window));
  }
  if (mean_window < 1) throw ValidationError("mean_window must be >= 1");
}

std::vector<double> median_filter(const std::vector<double>& x, std::size_t window) {
  check_median_window(window, x.size());
  std::vector<double> out(x.size());
  std::vector<double> scratch(window);
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = clamped_median(x, k, window, scratch.data());
  return out;
}

std::vector<double> mean_filter(const std::vector<double>& x, std::size_t window) {
  if (window < 1) throw ValidationError("mean window must be >= 1");
  if (window > x.size()) {
    throw ValidationError("mean window " + std::to_string(window) + " exceeds series length " +
                          std::to_string(x.size()));
  }
  std::vector<double> out(x.size());
  std::vector<double> w(window);
  for (std::size_t k = 0; k < x.size(); ++k) {
    for (std::size_t j = 0; j < window; ++j) {
      // w[0] is the oldest sample.
      const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(window - 1 - j);
      w[j] = x[static_cast<std::size_t>(std::max<std::ptrdiff_t>(i, 0))];
    }
    out[k] = window_mean(w.data(), window);
  }
  return out;
}

std::vector<double> first_difference(const std::vector<double>& y, double sample_rate) {
  std::vector<double> d(y.size(), 0.0);
  for (std::size_t k = 1; k < y.size(); ++k) d[k] = (y[k] - y[k - 1]) * sample_rate;
  return d;
}

std::vector<double> delay_align(const std::vector<double>& x, std::size_t d) {
  if (!x.empty() && d >= x.size()) {
    throw ValidationError("delay_units " + std::to_string(d) + " must be below the series length");
  }
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k >= d ? k - d : 0];
  return out;
}

std::vector<double> delay_advance(const std::vector<double>& x, std::size_t d) {
  if (!x.empty() && d >= x.size()) {
    throw ValidationError("delay_units " + std::to_string(d) + " must be below the series length");
  }
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[std::min(k + d, x.size() - 1)];
  return out;
}

FilteredTrace two_stage_filter(const CurrentTrace& tr, const FilterConfig& cfg) {
  cfg.validate();
  FilteredTrace f;
  f.current_filt = mean_filter(median_filter(tr.current, cfg.median_window), cfg.mean_window);
  f.derivative = first_difference(f.current_filt, tr.sample_rate);
  f.position_aligned = delay_align(tr.position, cfg.delay_units);
  return f;
}

void write_filtered_csv(const std::filesystem::path& path, const CurrentTrace& tr, const FilteredTrace& f) {
  std::string out = "t_s,current_A,position_rad,velocity_rpm,label,current_filt_A,current_deriv_A_per_s\n";
  const bool labelled = tr.labels.size() == tr.size();
  for (std::size_t i = 0; i < tr.size(); ++i) {
    for (double v : {tr.t[i], tr.current[i], tr.position[i], tr.velocity[i]}) {
      out += detail::format_double(v);
      out += ',';
    }
    if (labelled) out += std::to_string(tr.labels[i]);
    out += ',';
    out += detail::format_double(f.current_filt[i]);
    out += ',';
    out += detail::format_double(f.derivative[i]);
    out += '\n';
  }
  write_text_file_atomic(path, out);
}

StreamingFilter::StreamingFilter(const FilterConfig& cfg, double sample_rate) : cfg_(cfg), fs_(sample_rate) {
  cfg_.validate();
}

StreamingFilter::Sample StreamingFilter::emit(std::size_t k) {
  // The median window of k is complete (or clamped at the end of stream).
  std::vector<double> scratch(cfg_.median_window);
  const double m = clamped_median(raw_, k, cfg_.median_window, scratch.data());
  if (mean_hist_.empty()) mean_hist_.assign(cfg_.mean_window, m);
  mean_hist_.pop_front();
  mean_hist_.push_back(m);
  std::vector<double> w(mean_hist_.begin(), mean_hist_.end());
  Sample s;
  s.index = k;
  s.current_filt = window_mean(w.data(), w.size());
  s.derivative = k == 0 ? 0.0 : (s.current_filt - prev_filt_) * fs_;
  s.position_aligned = positions_[k >= cfg_.delay_units ? k - cfg_.delay_units : 0];
  prev_filt_ = s.current_filt;
  return s;
}

std::optional<StreamingFilter::Sample> StreamingFilter::push(double current, double position) {
  raw_.push_back(current);
  positions_.push_back(position);
  const std::size_t h = cfg_.median_window / 2;
  if (raw_.size() <= h) return std::nullopt;
  // Sample raw_.size()-1-h now has its full look-ahead.
  return emit(next_++);
}

std::vector<StreamingFilter::Sample> StreamingFilter::finish() {
  std::vector<Sample> out;
  while (next_ < raw_.size()) out.push_back(emit(next_++));
  return out;
}

}  // namespace gripstat
