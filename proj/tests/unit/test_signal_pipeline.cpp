#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gripstat/error.hpp"
#include "gripstat/signal_pipeline.hpp"
#include "support.hpp"

using namespace gripstat;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<double> x(n);
  for (double& v : x) v = nd(rng);
  return x;
}

double variance(const std::vector<double>& x, std::size_t from = 0) {
  const double n = static_cast<double>(x.size() - from);
  const double m = std::accumulate(x.begin() + from, x.end(), 0.0) / n;
  double s = 0.0;
  for (std::size_t i = from; i < x.size(); ++i) s += (x[i] - m) * (x[i] - m);
  return s / (n - 1);
}

// Sort-and-pick-middle over an explicitly clamped window.
std::vector<double> naive_median(const std::vector<double>& x, std::size_t w) {
  const long h = static_cast<long>(w / 2);
  const long n = static_cast<long>(x.size());
  std::vector<double> out;
  for (long k = 0; k < n; ++k) {
    std::vector<double> win;
    for (long j = k - h; j <= k + h; ++j) win.push_back(x[static_cast<std::size_t>(std::clamp(j, 0L, n - 1))]);
    std::sort(win.begin(), win.end());
    out.push_back(win[win.size() / 2]);
  }
  return out;
}

CurrentTrace synthetic(const std::vector<double>& current) {
  CurrentTrace tr;
  for (std::size_t k = 0; k < current.size(); ++k) {
    tr.t.push_back(static_cast<double>(k) / tr.sample_rate);
    tr.current.push_back(current[k]);
    tr.position.push_back(0.001 * static_cast<double>(k));
    tr.velocity.push_back(60.0);
  }
  return tr;
}

}  // namespace

TEST(MedianFilter, RemovesIsolatedImpulse) {
  EXPECT_EQ(median_filter({1, 1, 100, 1, 1}, 3), (std::vector<double>{1, 1, 1, 1, 1}));
}

TEST(MedianFilter, ConstantUnchanged) {
  const std::vector<double> x(50, 0.37);
  EXPECT_EQ(median_filter(x, 7), x);
}

TEST(MedianFilter, MatchesNaiveOracle) {
  for (std::size_t w : {3u, 5u, 9u, 21u}) {
    const auto x = noise(500, w);
    EXPECT_EQ(median_filter(x, w), naive_median(x, w)) << w;
  }
}

TEST(MedianFilter, RejectsBadWindows) {
  const std::vector<double> x(10, 1.0);
  EXPECT_THROW(median_filter(x, 4), ValidationError);
  EXPECT_THROW(median_filter(x, 1), ValidationError);
  EXPECT_THROW(median_filter(x, 11), ValidationError);
}

TEST(MedianFilter, IdempotentOnMonotoneSeries) {
  auto x = noise(300, 3);
  std::sort(x.begin(), x.end());
  const auto once = median_filter(x, 5);
  EXPECT_EQ(median_filter(once, 5), once);
  EXPECT_EQ(once, x);
}

TEST(MeanFilter, ConstantUnchanged) {
  const std::vector<double> x(40, 2.5);
  for (double v : mean_filter(x, 6)) EXPECT_DOUBLE_EQ(v, 2.5);
}

TEST(MeanFilter, StepBecomesRamp) {
  std::vector<double> x(12, 0.0);
  std::fill(x.begin() + 4, x.end(), 1.0);
  const auto y = mean_filter(x, 4);
  const std::vector<double> want{0, 0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1, 1, 1};
  ASSERT_EQ(y.size(), want.size());
  for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(y[k], want[k], 1e-15) << k;
}

TEST(MeanFilter, WhiteNoiseVarianceShrinksByWindow) {
  const auto x = noise(100000, 11, 2.0);
  for (std::size_t w : {4u, 15u}) {
    const auto y = mean_filter(x, w);
    EXPECT_NEAR(variance(y, w) / variance(x), 1.0 / static_cast<double>(w), 0.1 / static_cast<double>(w)) << w;
  }
}

TEST(MeanFilter, Linear) {
  const auto x = noise(400, 1), y = noise(400, 2);
  const double a = 1.7, b = -0.3;
  std::vector<double> z(x.size());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = a * x[k] + b * y[k];
  const auto fx = mean_filter(x, 15), fy = mean_filter(y, 15), fz = mean_filter(z, 15);
  for (std::size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(fz[k], a * fx[k] + b * fy[k], 1e-13);
}

TEST(TwoStageFilter, ImpulsesOnConstantVanish) {
  std::vector<double> x(200, 0.4);
  for (std::size_t k : {3u, 50u, 51u, 120u, 196u}) x[k] += 5.0;
  const auto f = two_stage_filter(synthetic(x), FilterConfig{});
  ASSERT_EQ(f.current_filt.size(), x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_DOUBLE_EQ(f.current_filt[k], 0.4) << k;
    EXPECT_DOUBLE_EQ(f.derivative[k], 0.0) << k;
  }
}

TEST(TwoStageFilter, RampDerivativeRecoversSlope) {
  const double m = 3.0;  // A/s
  std::vector<double> x(300);
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = 0.2 + m * static_cast<double>(k) / 1000.0;
  const FilterConfig cfg;
  const auto f = two_stage_filter(synthetic(x), cfg);
  for (std::size_t k = cfg.median_window + cfg.mean_window; k < x.size() - cfg.median_window; ++k) {
    EXPECT_NEAR(f.derivative[k], m, 1e-9) << k;
  }
}

TEST(TwoStageFilter, SurgePeakInsideContactWindow) {
  const FingerGeometry& g = reference_geometry();
  PlantConfig cfg;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    GraspScenario sc;
    sc.object_size = size_for_contact_angle(g, cfg, deg2rad(40.0));
    sc.seed = seed;
    const CurrentTrace tr = simulate_grasp(g, sc, cfg);
    const auto f = two_stage_filter(tr, FilterConfig{});
    const std::size_t stall = *tr.truth->stall_index;
    const auto peak = static_cast<std::size_t>(std::max_element(f.derivative.begin(), f.derivative.begin() + stall) -
                                               f.derivative.begin());
    EXPECT_GE(peak, *tr.truth->switch_index) << seed;
    EXPECT_LT(peak, stall) << seed;
    for (double v : f.derivative) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(DelayAlign, ZeroIsIdentity) {
  const auto x = noise(30, 4);
  EXPECT_EQ(delay_align(x, 0), x);
}

TEST(DelayAlign, RampOffsetIsDelayTimesStep) {
  std::vector<double> x(100);
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = 0.01 * static_cast<double>(k);
  const auto y = delay_align(x, 7);
  for (std::size_t k = 7; k < x.size(); ++k) EXPECT_NEAR(x[k] - y[k], 0.07, 1e-12);
  for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(y[k], x[0]);
}

TEST(DelayAlign, AdvanceInvertsOnInterior) {
  const auto x = noise(80, 5);
  const std::size_t d = 6;
  const auto y = delay_advance(delay_align(x, d), d);
  for (std::size_t k = 0; k + d < x.size(); ++k) EXPECT_EQ(y[k], x[k]) << k;
  const auto z = delay_align(delay_advance(x, d), d);
  for (std::size_t k = d; k < x.size(); ++k) EXPECT_EQ(z[k], x[k]) << k;
}

TEST(DelayAlign, RealignsMeanFilteredStep) {
  for (std::size_t w : {5u, 15u, 31u}) {
    const std::size_t onset = 100;
    std::vector<double> x(300, 0.0), pos(300);
    std::fill(x.begin() + onset, x.end(), 1.0);
    std::iota(pos.begin(), pos.end(), 0.0);
    const auto y = mean_filter(x, w);
    const auto a = delay_align(pos, (w - 1) / 2);
    const auto k = static_cast<std::size_t>(std::find_if(y.begin(), y.end(), [](double v) { return v >= 0.5; }) -
                                            y.begin());
    EXPECT_LE(std::abs(a[k] - static_cast<double>(onset)), 1.0) << w;
  }
}

TEST(DelayAlign, RealignsSimulatedSurge) {
  const FingerGeometry& g = reference_geometry();
  PlantConfig cfg;
  cfg.noise = NoiseModel{0.0, 0.0, 0.0, 0.0};
  GraspScenario sc;
  sc.object_size = size_for_contact_angle(g, cfg, deg2rad(45.0));
  const CurrentTrace tr = simulate_grasp(g, sc, cfg);
  const FilterConfig fc;
  const auto f = two_stage_filter(tr, fc);
  const std::size_t s = *tr.truth->switch_index;
  // Half-height crossing of the filtered preload step.
  const double lo = f.current_filt[s - 1], hi = tr.current[s];
  std::size_t k = s;
  while (f.current_filt[k] < 0.5 * (lo + hi)) ++k;
  const double step = tr.position[s] - tr.position[s - 1];
  EXPECT_LE(std::abs(f.position_aligned[k] - tr.position[s]), step + 1e-12);
}

TEST(StreamingFilter, BitIdenticalToBatch) {
  const FingerGeometry& g = reference_geometry();
  GraspScenario sc;
  sc.object_size = 80.0;
  sc.seed = 19;
  const CurrentTrace tr = simulate_grasp(g, sc);
  for (const FilterConfig fc : {FilterConfig{}, FilterConfig{3, 1, 0}, FilterConfig{9, 20, 3}}) {
    const auto batch = two_stage_filter(tr, fc);
    StreamingFilter sf(fc, tr.sample_rate);
    std::vector<StreamingFilter::Sample> out;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      if (auto s = sf.push(tr.current[k], tr.position[k])) out.push_back(*s);
    }
    for (const auto& s : sf.finish()) out.push_back(s);
    ASSERT_EQ(out.size(), tr.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
      ASSERT_EQ(out[k].index, k);
      ASSERT_EQ(out[k].current_filt, batch.current_filt[k]) << k;
      ASSERT_EQ(out[k].derivative, batch.derivative[k]) << k;
      ASSERT_EQ(out[k].position_aligned, batch.position_aligned[k]) << k;
    }
  }
}

TEST(FilterConfig, Validation) {
  EXPECT_NO_THROW(FilterConfig{}.validate());
  EXPECT_THROW((FilterConfig{4, 15, 7}.validate()), ValidationError);
  EXPECT_THROW((FilterConfig{1, 15, 7}.validate()), ValidationError);
  EXPECT_THROW((FilterConfig{5, 0, 7}.validate()), ValidationError);
}
