#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include "gripstat/angles.hpp"
#include "gripstat/error.hpp"
#include "gripstat/estimator.hpp"
#include "gripstat/kinematics.hpp"
#include "gripstat/statics.hpp"

namespace gstest {

using namespace gripstat;

// In-limit joint state with a solvable actuation chain, or nothing when the
// draw lands outside the dyad's reach.
inline std::optional<JointState> random_state(const FingerGeometry& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> t1(deg2rad(25.0), deg2rad(85.0));
  std::uniform_real_distribution<double> t2(deg2rad(0.0), deg2rad(80.0));
  std::uniform_real_distribution<double> t3(deg2rad(0.0), deg2rad(60.0));
  const double a = t1(rng), b = t2(rng), c = t3(rng);
  try {
    return make_joint_state(g, a, b, c);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Signed distance from O_a along O_a -> O_i to where line O_bO_c crosses it.
// The four-bar is rebuilt from its own parameters with O_a at the origin and
// the intersection solved directly in extended precision.
inline long double ic_by_intersection(const FourBarInstant& fb) {
  using L = long double;
  const L pi = 3.14159265358979323846264338327950288L;
  const L rot = -static_cast<L>(fb.lambda);
  const L ux = std::cos(rot), uy = std::sin(rot);
  const L ix = fb.Lia * ux, iy = fb.Lia * uy;
  const L bx = fb.La * std::cos(static_cast<L>(fb.theta_a)), by = fb.La * std::sin(static_cast<L>(fb.theta_a));
  const L ang = rot + pi - fb.phi;
  const L cx = ix + fb.Lic * std::cos(ang), cy = iy + fb.Lic * std::sin(ang);
  const L dx = cx - bx, dy = cy - by;
  return (bx * dy - by * dx) / (ux * dy - uy * dx);
}

// Arbitrary four-bar: links 10-60 (La), 10-90 (Lia), 5-85 (Lic), any angles.
inline FourBarInstant random_four_bar(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FourBarInstant fb;
  fb.La = 10 + 50 * u(rng);
  fb.Lia = 10 + 80 * u(rng);
  fb.Lic = 5 + 80 * u(rng);
  fb.lambda = wrap_angle(2 * kPi * u(rng));
  fb.theta_a = wrap_angle(2 * kPi * u(rng));
  fb.phi = wrap_angle(2 * kPi * u(rng));
  return fb;
}

inline double ic_denominator(const FourBarInstant& fb) {
  return fb.La * std::sin(fb.lambda + fb.theta_a) - fb.Lic * std::sin(fb.phi);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gripstat_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Small model trained once per test binary: middle-first grasps over the
// object grid at four speeds plus a few proximal-first ones.
inline const ModeModel& small_model() {
  static const ModeModel model = [] {
    const FingerGeometry& g = reference_geometry();
    DatasetGrid mid;
    mid.contact_theta1 = standard_object_angles();
    mid.speeds = {50, 60, 70, 80};
    mid.traces_per_cell = 1;
    mid.base_seed = 101;
    DatasetGrid prox = mid;
    prox.contact_theta1.clear();
    for (double d = 30; d <= 40; d += 2) prox.contact_theta1.push_back(deg2rad(d));
    prox.contact_case = GraspCase::ProximalFirst;
    prox.base_seed = 202;
    std::vector<CurrentTrace> train, holdout, calib;
    std::size_t i = 0;
    for (auto& e : batch_generate(g, mid)) {
      calib.push_back(e.trace);
      (i++ % 8 == 7 ? holdout : train).push_back(std::move(e.trace));
    }
    for (auto& e : batch_generate(g, prox)) {
      calib.push_back(e.trace);
      train.push_back(std::move(e.trace));
    }
    TrainConfig tc;
    tc.epochs = 5;
    tc.seed = 7;
    return train_mode_model(g, train, holdout, calib, tc).model;
  }();
  return model;
}

}  // namespace gstest
