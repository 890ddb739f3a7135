#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "gripstat/error.hpp"
#include "gripstat/estimator.hpp"
#include "support.hpp"

using namespace gripstat;

namespace {

const FingerGeometry& G() { return reference_geometry(); }

PlantConfig quiet() {
  PlantConfig p;
  p.noise = NoiseModel{0.0, 0.0, 0.0, 0.0};
  return p;
}

GraspScenario scenario(GraspCase c, double theta1_deg, double force, std::uint64_t seed) {
  PlantConfig cfg;
  GraspScenario sc;
  double face = deg2rad(theta1_deg);
  if (c == GraspCase::ProximalFirst) face += cfg.proximal_lead;
  sc.object_size = size_for_contact_angle(G(), cfg, face);
  sc.contact_case = c;
  sc.target_force = force;
  sc.seed = seed;
  return sc;
}

std::array<double, 3> truth_end(const CurrentTrace& tr) {
  const auto& t = *tr.truth;
  return {t.f1.back(), t.f2.back(), t.f3.back()};
}

}  // namespace

TEST(Estimate, IdleTraceGivesNoForce) {
  CurrentTrace tr;
  const double ta = actuation_from_joints(G(), deg2rad(40.0), kParallelBeta - deg2rad(40.0), 0.0);
  for (std::size_t k = 0; k < 500; ++k) {
    tr.t.push_back(static_cast<double>(k) / tr.sample_rate);
    tr.current.push_back(0.0);
    tr.position.push_back(ta);
    tr.velocity.push_back(0.0);
  }
  const ForceEstimate e = estimate(tr, G(), gstest::small_model());
  ASSERT_EQ(e.samples.size(), tr.size());
  for (const auto& s : e.samples) {
    EXPECT_EQ(s.mode, 0);
    for (double f : s.f) EXPECT_EQ(f, 0.0);
  }
}

TEST(Estimate, ParallelGraspDistalForce) {
  for (double force : {50.0, 125.0, 200.0}) {
    for (std::uint64_t seed : {1u, 2u}) {
      GraspScenario sc;
      sc.object_size = 90.0;
      sc.contact_case = GraspCase::DistalFirst;
      sc.target_force = force;
      sc.seed = seed;
      const CurrentTrace tr = simulate_grasp(G(), sc);
      const ForceEstimate e = estimate(tr, G(), gstest::small_model());
      EXPECT_EQ(e.grasp_case, GraspCase::DistalFirst);
      const double f3 = truth_end(tr)[2];
      EXPECT_NEAR(f3, force, 1e-6 * force);
      EXPECT_NEAR(e.steady_force[2], f3, 0.03 * f3) << force << " seed " << seed;
      EXPECT_EQ(e.steady_force[0], 0.0);
      EXPECT_EQ(e.steady_force[1], 0.0);
    }
  }
}

TEST(Estimate, EnvelopingThreePointForces) {
  EstimatorConfig cfg;
  cfg.case_prior = GraspCase::ProximalFirst;
  for (double t1 : {32.0, 36.0, 40.0}) {
    const CurrentTrace tr = simulate_grasp(G(), scenario(GraspCase::ProximalFirst, t1, 120.0, 5));
    const ForceEstimate e = estimate(tr, G(), gstest::small_model(), cfg);
    ASSERT_TRUE(e.switch_index) << t1;
    const auto f = truth_end(tr);
    for (int i = 0; i < 3; ++i) {
      ASSERT_GT(f[i], 0.0);
      EXPECT_NEAR(e.steady_force[i], f[i], 0.03 * f[i]) << "theta1 " << t1 << " phalange " << i + 1;
    }
  }
}

TEST(Estimate, AuditReproducesEverySample) {
  EstimatorConfig cfg;
  cfg.case_prior = GraspCase::ProximalFirst;
  const CurrentTrace tr = simulate_grasp(G(), scenario(GraspCase::ProximalFirst, 34.0, 100.0, 8));
  const ForceEstimate e = estimate(tr, G(), gstest::small_model(), cfg);
  std::size_t loaded = 0;
  for (const auto& s : e.samples) {
    if (s.infeasible) continue;
    const auto f = sample_forces(G(), s, e.k);
    for (int i = 0; i < 3; ++i) ASSERT_EQ(f[i], s.f[i]);
    if (s.mask[0] || s.mask[1] || s.mask[2]) ++loaded;
  }
  EXPECT_GT(loaded, 100u);
}

TEST(Estimate, NoForceBeforeContactAndMonotoneMode) {
  const auto& m = gstest::small_model();
  for (GraspCase c : {GraspCase::MiddleFirst, GraspCase::DistalFirst}) {
    for (std::uint64_t seed : {3u, 4u}) {
      GraspScenario sc = scenario(c, 44.0, 100.0, seed);
      if (c == GraspCase::DistalFirst) sc.object_size = 70.0;
      const ForceEstimate e = estimate(simulate_grasp(G(), sc), G(), m);
      const std::size_t first = c == GraspCase::DistalFirst ? *e.stall_index : *e.switch_index;
      for (std::size_t k = 0; k < first; ++k) {
        for (double f : e.samples[k].f) ASSERT_EQ(f, 0.0) << k;
      }
      for (std::size_t k = 1; k < e.samples.size(); ++k) ASSERT_GE(e.samples[k].mode, e.samples[k - 1].mode);
    }
  }
}

TEST(Estimate, ForcesContinuousUnderFixedMask) {
  EstimatorConfig cfg;
  cfg.case_prior = GraspCase::ProximalFirst;
  const CurrentTrace tr = simulate_grasp(G(), scenario(GraspCase::ProximalFirst, 36.0, 150.0, 2));
  const ForceEstimate e = estimate(tr, G(), gstest::small_model(), cfg);
  const double dt = 1.0 / tr.sample_rate;
  std::size_t checked = 0;
  for (std::size_t k = 1; k < e.samples.size(); ++k) {
    const auto& a = e.samples[k - 1];
    const auto& b = e.samples[k];
    if (a.mask != b.mask || a.infeasible || b.infeasible) continue;
    if (!(b.mask[0] || b.mask[1] || b.mask[2])) continue;
    // Sensitivity of each force to the actuation torque at this pose.
    EstimateSample p = b;
    p.tau_a += 1.0;
    const auto fp = sample_forces(G(), p, e.k);
    const double rate = std::abs(b.tau_a - a.tau_a) / dt;
    for (int i = 0; i < 3; ++i) {
      const double gain = std::abs(fp[i] - b.f[i]);
      // Pose drift while moving adds a small term on top.
      EXPECT_LE(std::abs(b.f[i] - a.f[i]), rate * gain * dt * 10 + 0.05) << k << " f" << i + 1;
    }
    ++checked;
  }
  EXPECT_GT(checked, 100u);
}

TEST(Evaluate, SetpointRowsAndNoiseFreeAccuracy) {
  std::vector<CurrentTrace> traces;
  const PlantConfig pc = quiet();
  for (int sp = 50; sp <= 200; sp += 25) {
    for (double size : {70.0, 100.0}) {
      GraspScenario sc;
      sc.object_size = size;
      sc.contact_case = GraspCase::DistalFirst;
      sc.target_force = sp;
      traces.push_back(simulate_grasp(G(), sc, pc));
    }
  }
  const EvaluationReport r = evaluate(traces, G(), gstest::small_model());
  ASSERT_EQ(r.by_setpoint.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_DOUBLE_EQ(r.by_setpoint[i].key, 50.0 + 25.0 * i);
    EXPECT_EQ(r.by_setpoint[i].count, 2u);
  }
  EXPECT_EQ(r.missed, 0u);
  EXPECT_LT(r.overall.max_theta1_dev, 1e-6);
  EXPECT_LT(r.overall.max_rate, 1e-6);
  EXPECT_LT(r.overall.max_force_dev, 1e-4);
  EXPECT_NE(r.to_text().find("setpoint"), std::string::npos);
  const std::string csv = r.to_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 15);
}

TEST(Evaluate, PerObjectLayout) {
  DatasetGrid grid;
  grid.contact_theta1 = standard_object_angles();
  grid.speeds = {60};
  grid.traces_per_cell = 2;
  grid.base_seed = 31;
  std::vector<CurrentTrace> traces;
  for (auto& e : batch_generate(G(), grid)) traces.push_back(std::move(e.trace));
  const EvaluationReport r = evaluate(traces, G(), gstest::small_model());
  ASSERT_EQ(r.by_theta1.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_NEAR(r.by_theta1[i].key, 30.0 + 2.0 * i, 1e-9);
    EXPECT_EQ(r.by_theta1[i].count, 2u);
  }
  ASSERT_EQ(r.by_speed.size(), 1u);
  EXPECT_LT(r.overall.mean_theta1_dev, 0.7);
}

TEST(RingCheck, LinearRingMatchesHookesLaw) {
  RingModel ring;
  ring.k3 = 0.0;
  EXPECT_NEAR(ring.deflection(50.0), 50.0 / ring.k1, 1e-12);
  const RingCurve curve = calibrate_ring(ring, 0.0, 1);
  EXPECT_NEAR(curve.deformation(50.0), 50.0 / ring.k1, 1e-9);
  RingCheckConfig cfg;
  cfg.runs = 3;
  const RingReport rep = ring_grasp_check(G(), gstest::small_model(), ring, curve, {50.0}, cfg);
  ASSERT_EQ(rep.runs.size(), 3u);
  for (const auto& r : rep.runs) {
    EXPECT_NEAR(r.deformation, 50.0 / ring.k1, 0.01 * 50.0 / ring.k1);
    EXPECT_TRUE(r.within_band);
  }
}

TEST(RingCheck, NoiseFreeRunsAllWithinBand) {
  const RingModel ring;
  const RingCurve curve = calibrate_ring(ring, 0.01, 4);
  RingCheckConfig cfg;
  const RingReport rep = ring_grasp_check(G(), gstest::small_model(), ring, curve, {50.0, 75.0, 100.0}, cfg);
  ASSERT_EQ(rep.runs.size(), 90u);
  EXPECT_EQ(rep.within, 90u);
}

TEST(RingCheck, SetpointOutsideCurveRejected) {
  const RingModel ring;
  const RingCurve curve = calibrate_ring(ring, 0.0, 1);
  EXPECT_THROW(ring_grasp_check(G(), gstest::small_model(), ring, curve, {150.0}, RingCheckConfig{}), DomainError);
}
