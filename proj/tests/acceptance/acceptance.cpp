// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gripstat/angles.hpp"
#include "gripstat/cli.hpp"
#include "gripstat/error.hpp"
#include "gripstat/estimator.hpp"
#include "gripstat/kinematics.hpp"
#include "gripstat/mode_detector.hpp"
#include "gripstat/plant_sim.hpp"
#include "gripstat/statics.hpp"
#include "../unit/support.hpp"

using namespace gripstat;
namespace fs = std::filesystem;

namespace {

// Tolerances and limits.
constexpr double kPowerTol = 1e-9;
constexpr double kPowerSeconds = 10.0;
constexpr double kIcTolMm = 1e-9;
constexpr double kIcSeconds = 5.0;
constexpr double kRoundTripTol = 1e-9;
constexpr double kJacobianTol = 1e-6;
constexpr double kReducedTol = 1e-12;
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 30.0;
constexpr double kSwitchMeanDeg = 0.7;
constexpr double kSwitchMaxDeg = 1.5;
constexpr double kSwitchMeanAllSpeedsDeg = 0.8;
constexpr double kSwitchSeconds = 15 * 60.0;
constexpr double kForceRate = 0.03;
constexpr double kCoeffTol = 1e-8;
constexpr double kRmsTol = 1e-10;
constexpr std::size_t kRingRuns = 30;
constexpr std::size_t kRingNoisyMin = 27;

const FingerGeometry& G() { return reference_geometry(); }

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

ContactState full_contact(std::array<double, 3> k) {
  ContactState c;
  c.mask = {true, true, true};
  c.k = k;
  return c;
}

// ---- 1 ---------------------------------------------------------------------------------

Outcome virtual_work() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0), arm(0.2, 0.8), tq(0.5, 10.0), dfl(0.0, 1.0);
  int n = 0;
  double worst = 0.0;
  while (n < 1000) {
    const auto s = gstest::random_state(G(), rng);
    if (!s) continue;
    ActuationState a;
    a.tau_a = tq(rng);
    a.delta_theta2 = dfl(rng);
    a.delta_theta3 = dfl(rng);
    const std::array<double, 3> k{arm(rng) * G().L1, arm(rng) * G().L2, arm(rng) * G().L3};
    const Eigen::Vector3d w(u(rng), u(rng), u(rng));
    const StaticsResult r = solve_statics(G(), *s, full_contact(k), a);
    const Eigen::Vector3d t = Eigen::Vector3d(a.tau_a, -G().K2 * a.delta_theta2, -G().K3 * a.delta_theta3) * 1000.0;
    const Eigen::Vector3d wa = transmission_matrix(r.ratios.X) * w;
    worst = std::max(worst, power_balance(t, wa, r.F, contact_velocities(r.J, w), r.tau_prime * 1000.0, w));
    ++n;
  }
  const double sec = since(t0);
  return {worst <= kPowerTol && sec < kPowerSeconds,
          fmt("max relative residual %.2e over %d states (tol %.0e), %.2f s (limit %.0f s)", worst, n, kPowerTol, sec,
              kPowerSeconds)};
}

// ---- 2 ---------------------------------------------------------------------------------

Outcome kennedy() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(102);
  int n = 0;
  double worst = 0.0, far = 0.0;
  while (n < 1000) {
    const FourBarInstant fb = gstest::random_four_bar(rng);
    if (std::abs(gstest::ic_denominator(fb)) < 1e-6) continue;
    const long double s = gstest::ic_by_intersection(fb);
    worst = std::max(worst, static_cast<double>(std::abs(ic_length_actuation_side(fb) - s)));
    worst = std::max(worst, static_cast<double>(std::abs(ic_length_phalange_side(fb) - (fb.Lia - s))));
    far = std::max(far, static_cast<double>(std::abs(s)));
    ++n;
  }
  // Tie La = Lic: both formulas must place the centre at the same point.
  double tie = 0.0;
  int ties = 0;
  while (ties < 200) {
    FourBarInstant fb = gstest::random_four_bar(rng);
    fb.Lic = fb.La;
    if (std::abs(gstest::ic_denominator(fb)) < 1e-6) continue;
    tie = std::max(tie, std::abs(ic_length_phalange_side(fb) - (fb.Lia - ic_length_actuation_side(fb))));
    ++ties;
  }
  const double sec = since(t0);
  return {worst <= kIcTolMm && tie <= kIcTolMm && sec < kIcSeconds,
          fmt("max |L - L_oracle| %.2e mm over %d four-bars (farthest centre %.2e mm), tie branches %.2e mm "
              "(tol %.0e mm), %.2f s (limit %.0f s)",
              worst, n, far, tie, kIcTolMm, sec, kIcSeconds)};
}

// ---- 3 ---------------------------------------------------------------------------------

Outcome round_trip() {
  std::mt19937_64 rng(103);
  int n = 0;
  double worst = 0.0, closure = 0.0, gap = 0.0;
  while (n < 1000) {
    const auto s = gstest::random_state(G(), rng);
    if (!s) continue;
    // C reached from the finger side and from the crank and coupler.
    const PlanarPoint cf = point_c(G(), forward_fingertip(G(), *s), s->alpha);
    const PlanarPoint ca = point_c_from_actuation(G(), s->theta_a, s->theta_b);
    gap = std::max(gap, std::hypot(cf.x - ca.x, cf.y - ca.y));
    worst = std::max(worst, std::abs(wrap_angle(inverse_actuation(G(), ca) - s->theta_a)));
    closure = std::max(closure, std::abs(closure_residual(G(), ca, s->theta_a)));
    ++n;
  }
  return {worst <= kRoundTripTol && closure <= kRoundTripTol && gap <= kRoundTripTol,
          fmt("max theta_a error %.2e rad, closure residual %.2e, finger/actuator C gap %.2e mm over %d states "
              "(tol %.0e)",
              worst, closure, gap, n, kRoundTripTol)};
}

// ---- 4 ---------------------------------------------------------------------------------

PlanarPoint contact_point(const JointState& s, const std::array<double, 3>& k, int i) {
  const double t1 = s.theta1, b = s.theta1 + s.theta2, a = b + s.theta3;
  const PlanarPoint o2{G().L1 * std::cos(t1), G().L1 * std::sin(t1)};
  const PlanarPoint o3{o2.x + G().L2 * std::cos(b), o2.y + G().L2 * std::sin(b)};
  if (i == 0) return {k[0] * std::cos(t1), k[0] * std::sin(t1)};
  if (i == 1) return {o2.x + k[1] * std::cos(b), o2.y + k[1] * std::sin(b)};
  return {o3.x + k[2] * std::cos(a), o3.y + k[2] * std::sin(a)};
}

Outcome jacobian_fd() {
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> arm(0.1, 0.9), rate(-1.0, 1.0);
  const double h = 1e-7;
  double worst = 0.0;
  int n = 0;
  while (n < 100) {
    const auto s = gstest::random_state(G(), rng);
    if (!s) continue;
    const std::array<double, 3> k{arm(rng) * G().L1, arm(rng) * G().L2, arm(rng) * G().L3};
    const Eigen::Vector3d w(rate(rng), rate(rng), rate(rng));
    const Eigen::Vector3d v = contact_velocities(jacobian(G(), *s, full_contact(k)), w);
    JointState plus = *s, minus = *s;
    plus.theta1 += h * w[0], plus.theta2 += h * w[1], plus.theta3 += h * w[2];
    minus.theta1 -= h * w[0], minus.theta2 -= h * w[1], minus.theta3 -= h * w[2];
    const double phal[3] = {s->theta1, s->theta1 + s->theta2, s->theta1 + s->theta2 + s->theta3};
    for (int i = 0; i < 3; ++i) {
      const PlanarPoint a = contact_point(plus, k, i), b = contact_point(minus, k, i);
      const double nrm = phal[i] + kPi / 2;
      const double fd = ((a.x - b.x) * std::cos(nrm) + (a.y - b.y) * std::sin(nrm)) / (2 * h);
      worst = std::max(worst, std::abs(fd - v[i]) / std::max(1.0, std::abs(v[i])));
    }
    ++n;
  }
  return {worst <= kJacobianTol, fmt("max relative error %.2e over %d states (tol %.0e)", worst, n, kJacobianTol)};
}

// ---- 5 ---------------------------------------------------------------------------------

Outcome singular_contacts() {
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> f(1.0, 100.0), arm(0.1, 0.9);
  const ContactMask masks[] = {{false, true, true}, {true, false, true}, {true, true, false},
                               {false, false, true}, {true, false, false}, {false, true, false}};
  double worst = 0.0;
  bool distal_exact = true;
  int cases = 0;
  while (cases < 200) {
    const auto s = gstest::random_state(G(), rng);
    if (!s) continue;
    const std::array<double, 3> k{arm(rng) * G().L1, arm(rng) * G().L2, arm(rng) * G().L3};
    const Eigen::Matrix3d J = jacobian(G(), *s, full_contact(k));
    for (const auto& m : masks) {
      Eigen::Vector3d F(f(rng), f(rng), f(rng));
      for (int j = 0; j < 3; ++j) F[j] = m[j] ? F[j] : 0.0;
      const Eigen::Vector3d tp = J.transpose() * F;
      const Eigen::Vector3d full = contact_forces(J, tp, {true, true, true});
      const Eigen::Vector3d reduced = contact_forces(J, tp, m);
      worst = std::max(worst, (reduced - full).cwiseAbs().maxCoeff() / F.norm());
    }
    // Distal-only: f3 = tau'3 / k3 with no other force.
    const Eigen::Vector3d tp(0.0, 0.0, f(rng));
    const Eigen::Vector3d F3 = contact_forces(J, tp, {false, false, true});
    distal_exact = distal_exact && F3[2] == tp[2] / k[2] && F3[0] == 0.0 && F3[1] == 0.0;
    ++cases;
  }
  return {worst <= kReducedTol && distal_exact,
          fmt("reduced vs full max relative difference %.2e over %d poses x 6 masks (tol %.0e); distal-only f3 = "
              "tau'3/k3 exactly: %s",
              worst, cases, kReducedTol, distal_exact ? "yes" : "no")};
}

// ---- 6 ---------------------------------------------------------------------------------

Outcome lstm_gradient() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const LstmParams p = LstmParams::random(2, 32, seed);
    std::mt19937_64 rng(seed + 100);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(10, 2);
    std::vector<int> y(10);
    std::vector<double> w(10);
    for (int t = 0; t < 10; ++t) {
      x(t, 0) = nd(rng);
      x(t, 1) = nd(rng);
      y[t] = t >= 5 ? 1 : 0;
      w[t] = t >= 5 ? 2.0 : 0.7;
    }
    LstmGradients g(p);
    lstm_loss(p, x, y, w, &g);
    const auto grad = g.flatten();
    const auto theta = p.flatten();
    const double h = 1e-5;
    LstmParams q = p;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto th = theta;
      th[i] = theta[i] + h;
      q.unflatten(th);
      const double up = lstm_loss(q, x, y, w, nullptr);
      th[i] = theta[i] - h;
      q.unflatten(th);
      const double dn = lstm_loss(q, x, y, w, nullptr);
      const double fd = (up - dn) / (2 * h);
      // Relative, with a floor for parameters whose gradient is near zero.
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-3}));
      ++checked;
    }
  }
  const double sec = since(t0);
  return {worst <= kGradTol && sec < kGradSeconds,
          fmt("max relative gradient error %.2e over %zu parameters on 3 sequences (tol %.0e), %.1f s (limit %.0f s)",
              worst, checked, kGradTol, sec, kGradSeconds)};
}

// ---- 7 and 8 ---------------------------------------------------------------------------

// Drops the per-sample truth series; training and calibration need only the scalars.
std::vector<CurrentTrace> slim(std::vector<DatasetEntry>&& es) {
  std::vector<CurrentTrace> out;
  out.reserve(es.size());
  for (auto& e : es) {
    TraceTruth& t = *e.trace.truth;
    for (auto* v : {&t.theta1, &t.theta2, &t.theta3, &t.tau_a, &t.delta_theta2, &t.delta_theta3, &t.f1, &t.f2, &t.f3}) {
      std::vector<double>().swap(*v);
    }
    std::vector<std::uint8_t>().swap(t.mask);
    out.push_back(std::move(e.trace));
  }
  return out;
}

DatasetGrid grid(const std::vector<double>& deg, std::vector<double> speeds, std::size_t per_cell, std::uint64_t seed,
                 GraspCase c = GraspCase::MiddleFirst, double force = 100.0) {
  DatasetGrid g;
  for (double d : deg) g.contact_theta1.push_back(deg2rad(d));
  g.speeds = std::move(speeds);
  g.traces_per_cell = per_cell;
  g.base_seed = seed;
  g.contact_case = c;
  g.target_force = force;
  return g;
}

std::vector<double> objects_deg() {
  std::vector<double> d;
  for (double t : standard_object_angles()) d.push_back(rad2deg(t));
  return d;
}

const std::vector<double> kProximalDeg{30, 32, 34, 36, 38, 40};
const std::vector<double> kSpeeds{50, 60, 70, 80};

struct TrainedModel {
  ModeModel model;
  double holdout_accuracy = 0.0;
  std::size_t undetected = 0;
  double seconds = 0.0;
};

TrainedModel train_protocol_model() {
  const auto t0 = Clock::now();
  std::vector<CurrentTrace> train, holdout, calib;
  {
    // 16 objects x 100 traces at 60 rpm; every tenth trace is held out.
    auto mid = slim(batch_generate(G(), grid(objects_deg(), {60}, 100, 7001)));
    for (std::size_t i = 0; i < mid.size(); ++i) (i % 10 == 9 ? holdout : train).push_back(std::move(mid[i]));
    for (auto& t : slim(batch_generate(G(), grid(kProximalDeg, {60}, 20, 7002, GraspCase::ProximalFirst)))) {
      train.push_back(std::move(t));
    }
  }
  {
    // Compensation data: 16 objects x 4 speeds x 50 traces, plus proximal-first contacts.
    calib = slim(batch_generate(G(), grid(objects_deg(), kSpeeds, 50, 7003)));
    for (auto& t : slim(batch_generate(G(), grid(kProximalDeg, kSpeeds, 10, 7004, GraspCase::ProximalFirst)))) {
      calib.push_back(std::move(t));
    }
  }
  TrainConfig tc;
  tc.seed = 1;
  const ModelTrainingResult r = train_mode_model(G(), train, holdout, calib, tc);
  TrainedModel out;
  out.model = r.model;
  out.holdout_accuracy = r.holdout_accuracy;
  out.undetected = r.undetected;
  out.seconds = since(t0);
  return out;
}

// Evaluates in chunks so only a few dozen full truth records are alive at once.
std::vector<TraceEvaluation> evaluate_chunked(const DatasetGrid& full, const ModeModel& model,
                                              const EstimatorConfig& cfg, std::size_t* missed) {
  std::vector<TraceEvaluation> rows;
  const std::size_t per_object = full.speeds.size() * full.traces_per_cell;
  for (std::size_t o = 0; o < full.contact_theta1.size(); ++o) {
    DatasetGrid g = full;
    g.contact_theta1 = {full.contact_theta1[o]};
    g.base_seed = derive_seed(full.base_seed, o);
    std::vector<CurrentTrace> traces;
    for (auto& e : batch_generate(G(), g)) traces.push_back(std::move(e.trace));
    const EvaluationReport rep = evaluate(traces, G(), model, cfg);
    *missed += rep.missed;
    rows.insert(rows.end(), rep.rows.begin(), rep.rows.end());
    (void)per_object;
  }
  return rows;
}

Outcome switch_accuracy(const TrainedModel& tm) {
  const auto t0 = Clock::now();
  std::ostringstream d;
  bool pass = true;
  double sum_all = 0.0;
  std::size_t n_all = 0, missed_all = 0;
  for (std::size_t si = 0; si < kSpeeds.size(); ++si) {
    std::size_t missed = 0;
    const auto rows = evaluate_chunked(grid(objects_deg(), {kSpeeds[si]}, 30, 7100 + si), tm.model, {}, &missed);
    double sum = 0.0, mx = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (!r.detected) continue;
      const double dev = std::abs(rad2deg(r.theta1_est - r.theta1_true));
      sum += dev;
      mx = std::max(mx, dev);
      ++n;
    }
    const double mean = n ? sum / static_cast<double>(n) : INFINITY;
    sum_all += sum;
    n_all += n;
    missed_all += missed;
    d << fmt("%.0f rpm: mean %.3f max %.3f deg (n=%zu, missed %zu); ", kSpeeds[si], mean, mx, n, missed);
    if (kSpeeds[si] == 60.0) pass = pass && mean <= kSwitchMeanDeg && mx <= kSwitchMaxDeg && missed == 0;
  }
  const double mean_all = n_all ? sum_all / static_cast<double>(n_all) : INFINITY;
  const double sec = tm.seconds + since(t0);
  pass = pass && mean_all <= kSwitchMeanAllSpeedsDeg && missed_all == 0 && sec <= kSwitchSeconds;
  d << fmt("all speeds mean %.3f deg (limits: 60 rpm mean %.1f max %.1f, all speeds mean %.1f, no misses); "
           "holdout per-sample accuracy %.4f; training + eval %.0f s (limit %.0f s)",
           mean_all, kSwitchMeanDeg, kSwitchMaxDeg, kSwitchMeanAllSpeedsDeg, tm.holdout_accuracy, sec, kSwitchSeconds);
  return {pass, d.str()};
}

Outcome force_accuracy(const TrainedModel& tm) {
  std::ostringstream d;
  bool pass = true;
  // Parallel grasps: 7 setpoints x 4 object sizes x 10 trials at 60 rpm.
  d << "parallel mean rate by setpoint:";
  for (int sp = 50; sp <= 200; sp += 25) {
    std::size_t missed = 0;
    const auto rows = evaluate_chunked(grid({30, 40, 50, 60}, {60}, 10, 7200 + sp, GraspCase::DistalFirst, sp),
                                       tm.model, {}, &missed);
    double rate = 0.0;
    for (const auto& r : rows) rate += r.deviation_rate;
    rate /= static_cast<double>(rows.size());
    d << fmt(" %dN %.2f%%", sp, 100 * rate);
    pass = pass && rate <= kForceRate;
  }
  // Three-point enveloping grasps inside the positive-force region, all speeds.
  EstimatorConfig cfg;
  cfg.case_prior = GraspCase::ProximalFirst;
  double rate = 0.0, dev = 0.0;
  std::size_t n = 0, missed = 0;
  for (double f : {50.0, 100.0, 150.0, 200.0}) {
    for (const auto& r : evaluate_chunked(grid(kProximalDeg, kSpeeds, 2, 7300 + static_cast<std::uint64_t>(f),
                                               GraspCase::ProximalFirst, f),
                                          tm.model, cfg, &missed)) {
      rate += r.deviation_rate;
      dev += r.force_deviation / 3.0;
      ++n;
    }
  }
  rate /= static_cast<double>(n);
  dev /= static_cast<double>(n);
  pass = pass && rate <= kForceRate;
  d << fmt("; three-point mean rate %.2f%%, mean per-phalange deviation %.2f N over %zu grasps (missed %zu); "
           "limit %.0f%%",
           100 * rate, dev, n, missed, 100 * kForceRate);
  return {pass, d.str()};
}

// ---- 9 ---------------------------------------------------------------------------------

Outcome compensation_exact() {
  const std::array<double, 3> q{0.012, -0.004, 0.0025};
  const std::array<double, 5> r{0.002, 0.006, -0.003, 0.0011, 0.0006};
  std::vector<CompensationSample> s;
  double mean_r = 0.0;
  for (int d = 30; d <= 60; d += 2) {
    const double x = (deg2rad(d) - deg2rad(45.0)) / deg2rad(15.0);
    mean_r += (r[0] + x * (r[1] + x * (r[2] + x * (r[3] + x * r[4])))) / 16.0;
  }
  for (double v : kSpeeds) {
    for (int d = 30; d <= 60; d += 2) {
      const double u = (v - 65.0) / 15.0, x = (deg2rad(d) - deg2rad(45.0)) / deg2rad(15.0);
      const double z = q[0] + u * (q[1] + u * q[2]) + r[0] + x * (r[1] + x * (r[2] + x * (r[3] + x * r[4])));
      for (int i = 0; i < 50; ++i) s.push_back({v, deg2rad(d), z});
    }
  }
  const CompensationFit fit = fit_compensation(s);
  double err = 0.0;
  for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(fit.surface.speed_coeffs[i] - q[i] - (i == 0 ? mean_r : 0)));
  for (int i = 0; i < 5; ++i) err = std::max(err, std::abs(fit.surface.size_coeffs[i] - r[i] + (i == 0 ? mean_r : 0)));
  return {err <= kCoeffTol && fit.residual_rms <= kRmsTol,
          fmt("max coefficient error %.2e (tol %.0e), residual RMS %.2e (tol %.0e) on %zu points", err, kCoeffTol,
              fit.residual_rms, kRmsTol, s.size())};
}

// ---- 10 --------------------------------------------------------------------------------

Outcome ring_check(const TrainedModel& tm) {
  const RingModel ring;
  const RingCurve curve = calibrate_ring(ring, 0.01, 11);
  std::ostringstream d;
  bool pass = true;
  for (double sp : {50.0, 75.0, 100.0}) {
    RingCheckConfig cfg;
    cfg.runs = kRingRuns;
    cfg.seed = 12;
    const RingReport quiet = ring_grasp_check(G(), tm.model, ring, curve, {sp}, cfg);
    cfg.noisy = true;
    const RingReport noisy = ring_grasp_check(G(), tm.model, ring, curve, {sp}, cfg);
    pass = pass && quiet.within == kRingRuns && noisy.within >= kRingNoisyMin;
    d << fmt("%.0f N: noise-free %zu/%zu, noisy %zu/%zu; ", sp, quiet.within, kRingRuns, noisy.within, kRingRuns);
  }
  d << fmt("band +-%.3f mm (need %zu/%zu noise-free, >= %zu/%zu noisy)", curve.band, kRingRuns, kRingRuns,
           kRingNoisyMin, kRingRuns);
  return {pass, d.str()};
}

// ---- 11 --------------------------------------------------------------------------------

Outcome determinism(const TrainedModel& tm) {
  const fs::path data = GRIPSTAT_DATA_DIR;
  const fs::path root = gstest::scratch_dir("acceptance_replay");
  const std::string geo = (data / "reference_geometry.cfg").string();
  auto scen = [&](const char* n) { return (data / "scenarios" / n).string(); };
  save_model(root / "protocol_model.json", tm.model);
  const std::string model = (root / "protocol_model.json").string();
  const std::string trace = (data / "examples" / "middle_first_45deg" / "trace.csv").string();
  struct Cmd {
    std::string name;
    std::vector<std::string> args;
  };
  const std::vector<Cmd> cmds = {
      {"simulate", {"simulate", "--geometry", geo, "--scenario", scen("proximal_first_35deg.json"), "--seed", "7"}},
      {"generate", {"generate", "--geometry", geo, "--scenario", scen("sanity_grid.json"), "--jobs", "2"}},
      {"train", {"train", "--geometry", geo, "--scenario", scen("sanity_train.json"), (root / "generate").string()}},
      {"eval", {"eval", "--geometry", geo, "--model", model, (root / "generate").string()}},
      {"forces", {"forces", "--geometry", geo, "--model", model, trace}},
      {"sweep", {"sweep", "--geometry", geo, "--model", model, "--scenario", scen("quick_sweep.json"), "--speeds",
                 "50,60,70,80"}},
  };
  std::ostringstream d;
  bool pass = true;
  for (const auto& c : cmds) {
    auto args = c.args;
    args.push_back("--out");
    args.push_back((root / c.name).string());
    std::ostringstream out, err;
    const int rc = cli::run(args, out, err);
    std::string report;
    const bool same =
        rc == cli::kExitOk && cli::replay_manifest(root / c.name / "manifest.json", root / (c.name + "_replay"), &report);
    pass = pass && same;
    d << c.name << (same ? " ok" : " MISMATCH (" + (rc ? err.str() : report) + ")") << "; ";
  }
  d << "outputs compared by SHA-256 after replay from each manifest";
  return {pass, d.str()};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };
  report(1, "virtual-work balance", guarded(virtual_work));
  report(2, "instantaneous centre vs line intersection", guarded(kennedy));
  report(3, "actuation inverse/forward round trip", guarded(round_trip));
  report(4, "contact Jacobian finite differences", guarded(jacobian_fd));
  report(5, "reduced contact systems", guarded(singular_contacts));
  report(6, "LSTM gradient check", guarded(lstm_gradient));
  std::printf("     training the protocol model (16 x 100 traces at 60 rpm, 3200 calibration traces)...\n");
  std::fflush(stdout);
  TrainedModel tm;
  Outcome trained{true, ""};
  try {
    tm = train_protocol_model();
  } catch (const std::exception& e) {
    trained = {false, std::string("training failed: ") + e.what()};
  }
  report(7, "mode-switch angle accuracy", trained.pass ? guarded([&] { return switch_accuracy(tm); }) : trained);
  report(8, "force-sensing accuracy", trained.pass ? guarded([&] { return force_accuracy(tm); }) : trained);
  report(9, "compensation fit exactness", guarded(compensation_exact));
  report(10, "ring force-feedback check", trained.pass ? guarded([&] { return ring_check(tm); }) : trained);
  report(11, "determinism from manifests", trained.pass ? guarded([&] { return determinism(tm); }) : trained);
  std::printf("%s: %d of 11 criteria failed\n", failed ? "FAILED" : "ALL PASSED", failed);
  return failed ? 1 : 0;
}
