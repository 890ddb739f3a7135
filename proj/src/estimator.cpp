#include "gripstat/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "gripstat/angles.hpp"
#include "gripstat/error.hpp"
#include "gripstat/statics.hpp"
#include "parallel.hpp"

namespace gripstat {

namespace {

constexpr double kStallRpm = 1e-9;

std::array<double, 3> default_arms(const FingerGeometry& g) { return {g.L1 / 2, g.L2 / 2, g.L3 / 2}; }

std::optional<std::size_t> find_stall(const CurrentTrace& tr) {
  bool moved = false;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    if (std::abs(tr.velocity[k]) > kStallRpm) {
      moved = true;
    } else if (moved) {
      return k;
    }
  }
  return std::nullopt;
}

JointAngles parallel_pose(const FingerGeometry& g, double theta_a) {
  return decouple_joints(g, GraspCase::NoContact, theta_a);
}

}  // namespace

std::array<double, 3> sample_forces(const FingerGeometry& g, const EstimateSample& s, const std::array<double, 3>& k) {
  if (!(s.mask[0] || s.mask[1] || s.mask[2])) return {0.0, 0.0, 0.0};
  const JointState js = make_joint_state(g, s.q.theta1, s.q.theta2, s.q.theta3);
  ContactState c;
  c.mask = s.mask;
  c.k = k;
  ActuationState a;
  a.tau_a = s.tau_a;
  a.delta_theta2 = s.delta_theta2;
  a.delta_theta3 = s.delta_theta3;
  const StaticsResult r = solve_statics(g, js, c, a);
  return {r.F[0], r.F[1], r.F[2]};
}

ForceEstimate estimate(const CurrentTrace& tr, const FingerGeometry& g, const ModeModel& model,
                       const EstimatorConfig& cfg) {
  ForceEstimate out;
  const std::size_t n = tr.size();
  if (n == 0) throw ValidationError("empty trace");
  if (tr.current.size() != n || tr.position.size() != n || tr.velocity.size() != n) {
    throw ValidationError("trace columns differ in length");
  }
  out.k = cfg.k.value_or(default_arms(g));
  out.filtered = two_stage_filter(tr, model.filter);
  const FilteredTrace& f = out.filtered;
  out.detection = detect_switch(g, f, model);
  out.stall_index = find_stall(tr);
  const std::size_t d = model.filter.delay_units;

  // Case and switch.
  const bool switched_moving =
      out.detection.index && (!out.stall_index || *out.detection.index < *out.stall_index);
  if (cfg.case_prior == GraspCase::DistalFirst || (!switched_moving && out.stall_index)) {
    out.grasp_case = GraspCase::DistalFirst;
    if (out.detection.index && cfg.case_prior != GraspCase::DistalFirst) {
      out.flags.push_back("switch detected only after the actuator stalled; read as a parallel grasp");
    }
  } else if (switched_moving) {
    out.grasp_case = cfg.case_prior.value_or(GraspCase::MiddleFirst);
    if (out.grasp_case == GraspCase::DistalFirst || out.grasp_case == GraspCase::NoContact) {
      out.grasp_case = GraspCase::MiddleFirst;
    }
    out.switch_index = out.detection.index;
    out.flags.push_back(cfg.case_prior ? "grasp case from prior" : "grasp case defaulted to middle_first");
  } else {
    out.grasp_case = GraspCase::NoContact;
  }

  // Friction current from the free-running part of the trace.
  std::size_t free_end = n;
  if (out.switch_index) free_end = std::min(free_end, *out.switch_index);
  if (out.stall_index) free_end = std::min(free_end, *out.stall_index);
  if (cfg.no_load_current) {
    out.no_load_current = *cfg.no_load_current;
  } else {
    const std::size_t lo = std::min(model.filter.mean_window, free_end / 2);
    const std::size_t hi = free_end > model.filter.mean_window ? free_end - model.filter.mean_window / 2 : free_end;
    double s = 0.0;
    std::size_t cnt = 0;
    for (std::size_t k = lo; k < hi; ++k, ++cnt) s += f.current_filt[k];
    if (cnt == 0) {
      out.flags.push_back("no free-running samples; no-load current taken as 0");
    } else {
      out.no_load_current = s / static_cast<double>(cnt);
    }
  }

  ContactOnset onset;
  double ta_stop2 = 0.0;
  if (out.switch_index) {
    out.theta1_raw = out.detection.theta1_raw;
    out.theta1_switch = out.theta1_raw;
    if (cfg.use_compensation) {
      const double speed = std::abs(tr.velocity[std::min(*out.switch_index, n - 1)]);
      const CompensationSurface& surf = out.grasp_case == GraspCase::ProximalFirst && model.proximal_surface
                                            ? *model.proximal_surface
                                            : model.surface;
      const Compensated c = compensate(surf, speed, out.theta1_raw, out.theta1_raw);
      out.theta1_switch = c.theta1;
      out.extrapolated = c.extrapolated;
      if (c.extrapolated) out.flags.push_back("compensation surface extrapolated");
    }
    out.theta1_switch = std::clamp(out.theta1_switch, g.theta1_range.min, g.theta1_range.max);
    onset = {out.theta1_switch, kParallelBeta - out.theta1_switch, 0.0, std::nullopt};
    if (out.grasp_case == GraspCase::ProximalFirst) {
      onset.theta2_stop = cfg.theta2_stop.value_or(g.theta2_range.max);
      const double ta_c = actuation_from_joints(g, onset.theta1, onset.theta2, onset.theta3);
      ta_stop2 = ta_c + wrap_angle(actuation_from_joints(g, onset.theta1, *onset.theta2_stop, 0.0) - ta_c);
    }
  }

  const double pre = g.spring_preload;
  const double gain = g.torque_constant_A * g.screw_gain;
  out.samples.resize(n);
  JointAngles last{};
  bool have_last = false;
  bool flagged_infeasible = false;
  for (std::size_t k = 0; k < n; ++k) {
    EstimateSample& s = out.samples[k];
    s.t = tr.t[k];
    s.theta_a = f.position_aligned[k];
    s.current = f.current_filt[k];
    s.mode = out.switch_index && k >= *out.switch_index ? 1 : 0;
    const bool stalled = out.stall_index && k >= *out.stall_index + d;
    try {
      if (s.mode == 1) {
        s.q = decouple_joints(g, out.grasp_case, s.theta_a, onset);
      } else {
        s.q = parallel_pose(g, s.theta_a);
      }
      last = s.q;
      have_last = true;
    } catch (const Error&) {
      s.infeasible = true;
      if (have_last) s.q = last;
      if (!flagged_infeasible) {
        out.flags.push_back("kinematically infeasible samples; last valid pose held");
        flagged_infeasible = true;
      }
    }
    switch (out.grasp_case) {
      case GraspCase::DistalFirst:
        s.mask = {false, false, stalled};
        break;
      case GraspCase::MiddleFirst:
        if (s.mode == 1) {
          s.mask = {false, true, stalled};
          s.delta_theta3 = pre + (s.q.theta3 - onset.theta3);
        }
        break;
      case GraspCase::ProximalFirst:
        if (s.mode == 1) {
          if (s.theta_a <= ta_stop2) {
            s.mask = {true, false, stalled};
            s.delta_theta2 = pre + (s.q.theta2 - onset.theta2);
          } else {
            s.mask = {true, true, stalled};
            s.delta_theta2 = pre + (*onset.theta2_stop - onset.theta2);
            s.delta_theta3 = pre + (s.q.theta3 - onset.theta3);
          }
        }
        break;
      case GraspCase::NoContact:
        break;
    }
    s.tau_a = gain * std::max(0.0, s.current - out.no_load_current);
    if (s.infeasible && !have_last) continue;
    try {
      s.f = sample_forces(g, s, out.k);
    } catch (const DegeneracyError&) {
      s.infeasible = true;
      out.flags.push_back("instantaneous center degenerate at sample " + std::to_string(k));
    }
  }

  // Steady state: tail of the post-stall samples with a quiet derivative.
  std::size_t begin = 0;
  if (out.stall_index) begin = std::min(n, *out.stall_index + d);
  const std::size_t len = n - begin;
  const auto tail = static_cast<std::size_t>(std::ceil(cfg.steady_fraction * static_cast<double>(len)));
  out.steady_begin = n - tail;
  out.steady_end = n;
  std::size_t used = 0;
  for (std::size_t k = out.steady_begin; k < n; ++k) {
    if (std::abs(f.derivative[k]) > cfg.steady_max_derivative) continue;
    for (int i = 0; i < 3; ++i) out.steady_force[i] += out.samples[k].f[i];
    ++used;
  }
  if (used == 0) {
    out.flags.push_back("no quiet samples in the steady-state window");
  } else {
    for (double& v : out.steady_force) v /= static_cast<double>(used);
  }
  return out;
}

// ---- training pipeline ------------------------------------------------------------------

LabelledSequence training_sequence(const CurrentTrace& tr, const FilterConfig& fc, std::size_t crop_after) {
  if (tr.labels.size() != tr.size()) throw ValidationError("training traces must carry labels");
  const FilteredTrace f = two_stage_filter(tr, fc);
  std::size_t n = tr.size();
  if (crop_after > 0) {
    const auto it = std::find(tr.labels.begin(), tr.labels.end(), 1);
    std::size_t anchor = static_cast<std::size_t>(it - tr.labels.begin());
    if (it == tr.labels.end() && tr.truth && tr.truth->stall_index) anchor = *tr.truth->stall_index;
    n = std::min(n, anchor + crop_after);
  }
  LabelledSequence s;
  s.x.resize(static_cast<Eigen::Index>(n), 2);
  s.y.assign(tr.labels.begin(), tr.labels.begin() + static_cast<std::ptrdiff_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    s.x(static_cast<Eigen::Index>(i), 0) = f.current_filt[i];
    s.x(static_cast<Eigen::Index>(i), 1) = f.derivative[i];
  }
  return s;
}

ModelTrainingResult train_mode_model(const FingerGeometry& g, const std::vector<CurrentTrace>& train,
                                     const std::vector<CurrentTrace>& holdout,
                                     const std::vector<CurrentTrace>& calibration, const TrainConfig& tc,
                                     const FilterConfig& fc, unsigned jobs) {
  std::vector<LabelledSequence> tr(train.size()), ho(holdout.size());
  detail::parallel_for(train.size(), jobs, [&](std::size_t i) { tr[i] = training_sequence(train[i], fc); });
  detail::parallel_for(holdout.size(), jobs, [&](std::size_t i) { ho[i] = training_sequence(holdout[i], fc); });
  ModelTrainingResult r;
  r.model.params = lstm_train(tr, ho, tc, &r.train);
  r.model.norm = r.train.norm;
  r.model.filter = fc;
  r.holdout_accuracy = r.train.epochs.empty() ? 0.0 : r.train.epochs.back().holdout_accuracy;

  std::vector<std::optional<CompensationSample>> found(calibration.size());
  std::vector<bool> proximal(calibration.size(), false);
  detail::parallel_for(calibration.size(), jobs, [&](std::size_t i) {
    const CurrentTrace& t = calibration[i];
    if (!t.truth) throw ValidationError("calibration traces need a truth record");
    proximal[i] = t.truth->grasp_case == GraspCase::ProximalFirst;
    const SwitchDetection det = detect_switch(g, two_stage_filter(t, fc), r.model);
    if (!det.index) return;
    found[i] = CompensationSample{t.truth->motor_speed, t.truth->theta1_switch, det.theta1_raw - t.truth->theta1_switch};
  });
  std::vector<CompensationSample> samples, prox_samples;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (!found[i]) {
      ++r.undetected;
    } else {
      (proximal[i] ? prox_samples : samples).push_back(*found[i]);
    }
  }
  r.compensation = fit_compensation(samples);
  r.model.surface = r.compensation.surface;
  if (!prox_samples.empty()) {
    r.proximal_compensation = fit_compensation(prox_samples);
    r.model.proximal_surface = r.proximal_compensation->surface;
  }
  return r;
}

// ---- evaluation -------------------------------------------------------------------------

namespace {

GroupStats summarize(double key, const std::vector<const TraceEvaluation*>& rows) {
  GroupStats g;
  g.key = key;
  std::size_t nth = 0;
  for (const TraceEvaluation* r : rows) {
    ++g.count;
    if (r->detected) {
      const double dev = std::abs(rad2deg(r->theta1_est - r->theta1_true));
      g.mean_theta1_dev += dev;
      g.max_theta1_dev = std::max(g.max_theta1_dev, dev);
      ++nth;
    }
    g.mean_force_dev += r->force_deviation;
    g.max_force_dev = std::max(g.max_force_dev, r->force_deviation);
    g.mean_rate += r->deviation_rate;
    g.max_rate = std::max(g.max_rate, r->deviation_rate);
  }
  if (nth) g.mean_theta1_dev /= static_cast<double>(nth);
  if (g.count) {
    g.mean_force_dev /= static_cast<double>(g.count);
    g.mean_rate /= static_cast<double>(g.count);
  }
  return g;
}

template <class KeyFn>
std::vector<GroupStats> group_by(const std::vector<TraceEvaluation>& rows, KeyFn key) {
  std::map<double, std::vector<const TraceEvaluation*>> m;
  for (const auto& r : rows) m[key(r)].push_back(&r);
  std::vector<GroupStats> out;
  for (const auto& [k, v] : m) out.push_back(summarize(k, v));
  return out;
}

void table(std::ostringstream& os, const char* title, const char* key, const std::vector<GroupStats>& gs) {
  os << title << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%10s %6s %12s %12s %12s %12s %10s %10s\n", key, "n", "mean_dth1", "max_dth1",
                "mean_dF_N", "max_dF_N", "mean_rate", "max_rate");
  os << line;
  for (const auto& g : gs) {
    std::snprintf(line, sizeof line, "%10.2f %6zu %12.2f %12.2f %12.2f %12.2f %9.2f%% %9.2f%%\n", g.key, g.count,
                  g.mean_theta1_dev, g.max_theta1_dev, g.mean_force_dev, g.max_force_dev, 100 * g.mean_rate,
                  100 * g.max_rate);
    os << line;
  }
  os << "\n";
}

}  // namespace

std::string EvaluationReport::to_text() const {
  std::ostringstream os;
  table(os, "theta1 deviation and force deviation by motor speed (rpm)", "speed", by_speed);
  table(os, "by contact theta1 (deg)", "theta1", by_theta1);
  table(os, "by force setpoint (N)", "setpoint", by_setpoint);
  table(os, "overall", "-", {overall});
  os << "missed switches: " << missed << "\n";
  return os.str();
}

std::string EvaluationReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "index,truth_case,estimated_case,speed_rpm,object_size_mm,target_N,theta1_true_rad,theta1_raw_rad,"
        "theta1_est_rad,detected,f1_true,f2_true,f3_true,f1_est,f2_est,f3_est,force_dev_N,deviation_rate\n";
  for (const auto& r : rows) {
    os << r.index << ',' << to_string(r.truth_case) << ',' << to_string(r.estimated_case) << ',' << r.motor_speed
       << ',' << r.object_size << ',' << r.target_force << ',' << r.theta1_true << ',' << r.theta1_raw << ','
       << r.theta1_est << ',' << (r.detected ? 1 : 0);
    for (double v : r.f_true) os << ',' << v;
    for (double v : r.f_est) os << ',' << v;
    os << ',' << r.force_deviation << ',' << r.deviation_rate << '\n';
  }
  return os.str();
}

EvaluationReport evaluate(const std::vector<CurrentTrace>& traces, const FingerGeometry& g, const ModeModel& model,
                          const EstimatorConfig& cfg, unsigned jobs) {
  EvaluationReport rep;
  rep.rows.resize(traces.size());
  const std::size_t d = model.filter.delay_units;
  detail::parallel_for(traces.size(), jobs, [&](std::size_t i) {
    const CurrentTrace& tr = traces[i];
    if (!tr.truth) throw ValidationError("evaluation traces need a truth record");
    const TraceTruth& t = *tr.truth;
    EstimatorConfig c = cfg;
    if (!c.k) c.k = t.k;
    const ForceEstimate e = estimate(tr, g, model, c);
    TraceEvaluation& r = rep.rows[i];
    r.index = i;
    r.truth_case = t.grasp_case;
    r.estimated_case = e.grasp_case;
    r.motor_speed = t.motor_speed;
    r.object_size = t.object_size;
    r.target_force = t.target_force;
    r.theta1_true = t.theta1_switch;
    r.detected = e.switch_index.has_value();
    r.theta1_raw = e.theta1_raw;
    r.theta1_est = e.theta1_switch;
    r.f_est = e.steady_force;
    // Truth over the same physical instants (the estimate lags by d samples).
    std::size_t cnt = 0;
    for (std::size_t k = e.steady_begin; k < e.steady_end; ++k) {
      const std::size_t raw = k >= d ? k - d : 0;
      r.f_true[0] += t.f1[raw];
      r.f_true[1] += t.f2[raw];
      r.f_true[2] += t.f3[raw];
      ++cnt;
    }
    double num = 0.0, den = 0.0;
    for (int j = 0; j < 3; ++j) {
      if (cnt) r.f_true[j] /= static_cast<double>(cnt);
      num += std::abs(r.f_est[j] - r.f_true[j]);
      den += std::abs(r.f_true[j]);
    }
    r.force_deviation = num;
    r.deviation_rate = den > 0.0 ? num / den : 0.0;
  });
  for (const auto& r : rep.rows) {
    const bool should_switch = r.truth_case == GraspCase::MiddleFirst || r.truth_case == GraspCase::ProximalFirst;
    if (should_switch && !r.detected) ++rep.missed;
  }
  std::vector<const TraceEvaluation*> all;
  for (const auto& r : rep.rows) all.push_back(&r);
  rep.overall = summarize(0.0, all);
  rep.by_speed = group_by(rep.rows, [](const TraceEvaluation& r) { return r.motor_speed; });
  rep.by_theta1 = group_by(rep.rows, [](const TraceEvaluation& r) {
    return std::round(rad2deg(r.theta1_true) * 1e6) / 1e6;
  });
  rep.by_setpoint = group_by(rep.rows, [](const TraceEvaluation& r) { return r.target_force; });
  return rep;
}

// ---- ring check ---------------------------------------------------------------------------

double RingCurve::deformation(double force) const {
  double v = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 0;) v = v * force + coeffs[k];
  return v;
}

RingCurve fit_ring_curve(const std::vector<double>& force, const std::vector<double>& deformation, int degree,
                         double band_sigmas, double band_floor) {
  if (force.size() != deformation.size() || force.size() < static_cast<std::size_t>(degree + 2)) {
    throw ValidationError("ring curve needs more (force, deformation) pairs than coefficients");
  }
  const auto n = static_cast<Eigen::Index>(force.size());
  Eigen::MatrixXd V(n, degree + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (int k = 0; k <= degree; ++k, p *= force[static_cast<std::size_t>(i)]) V(i, k) = p;
    y[i] = deformation[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd c = V.colPivHouseholderQr().solve(y);
  RingCurve rc;
  rc.coeffs.assign(c.data(), c.data() + c.size());
  rc.f_max = *std::max_element(force.begin(), force.end());
  const double rms = std::sqrt((V * c - y).squaredNorm() / static_cast<double>(n));
  rc.band = band_sigmas * rms + band_floor;
  return rc;
}

double RingModel::deflection(double force) const {
  double x = force / k1;
  for (int it = 0; it < 60; ++it) {
    const double r = k1 * x + k3 * x * x * x - force;
    x -= r / (k1 + 3 * k3 * x * x);
  }
  return x;
}

RingCurve calibrate_ring(const RingModel& ring, double noise_rel, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> F, D;
  for (int i = 0; i <= 20; ++i) {
    const double f = 5.0 * i;
    // The dynamometer reading carries the noise; deformation is set exactly.
    const double delta = ring.deflection(f);
    F.push_back(f * (1.0 + noise_rel * nd(rng)));
    D.push_back(delta);
  }
  F.front() = 0.0;
  RingCurve rc = fit_ring_curve(F, D);
  // Domain is the nominal load range, not the largest noisy reading.
  rc.f_max = 100.0;
  return rc;
}

RingReport ring_grasp_check(const FingerGeometry& g, const ModeModel& model, const RingModel& ring,
                            const RingCurve& curve, const std::vector<double>& setpoints, const RingCheckConfig& cfg,
                            const PlantConfig& plant) {
  for (double sp : setpoints) {
    if (!(sp > 0.0 && sp <= curve.f_max)) {
      throw DomainError("setpoint " + std::to_string(sp) + " N outside the fitted ring curve [0, " +
                        std::to_string(curve.f_max) + "] N");
    }
  }
  const double gain = g.torque_constant_A * g.screw_gain;
  const std::array<double, 3> k = default_arms(g);
  const double t1c = cfg.object_theta1;
  const double ta_c = actuation_from_joints(g, t1c, kParallelBeta - t1c, 0.0);
  // Ring squeeze between two mirrored fingers when the distal faces sit at theta1.
  auto squeeze = [&](double t1) { return 2.0 * g.L1 * (std::cos(t1c) - std::cos(t1)); };
  auto distal_force = [&](double t1, double tau_a) {
    const JointState js = make_joint_state(g, t1, kParallelBeta - t1, 0.0);
    return transmission_ratios(g, js).X[2] * tau_a * 1000.0 / k[2];
  };
  // Quasi-static equilibrium of finger and ring for a motor current.
  auto settle = [&](double current) {
    const double tau = gain * std::max(0.0, current - plant.no_load_current);
    double lo = t1c, hi = g.theta1_range.max;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (ring.force(squeeze(mid)) < distal_force(mid, tau)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };

  RingReport rep;
  const std::size_t window = 200;
  for (double sp : setpoints) {
    for (std::size_t run = 0; run < cfg.runs; ++run) {
      PlantConfig pc = plant;
      if (!cfg.noisy) {
        pc.noise.sigma0 = 0.0;
        pc.noise.c_load = 0.0;
        pc.noise.impulse_rate = 0.0;
      }
      std::mt19937_64 rng(derive_seed(cfg.seed, run * 1000 + static_cast<std::size_t>(sp)));
      std::normal_distribution<double> nd(0.0, 1.0);
      std::uniform_real_distribution<double> ud(0.0, 1.0);
      // Measured current: the same noise model as the plant simulator.
      auto measure = [&](double i_cmd, double tau, std::size_t count, std::vector<double>& out) {
        for (std::size_t j = 0; j < count; ++j) {
          double v = i_cmd + (pc.noise.sigma0 + pc.noise.c_load * std::abs(tau)) * nd(rng);
          if (pc.noise.impulse_rate > 0.0 && ud(rng) < pc.noise.impulse_rate / pc.sample_rate) {
            v += pc.noise.impulse_amplitude * (ud(rng) < 0.5 ? -1.0 : 1.0);
          }
          out.push_back(v);
        }
      };
      // Approach phase: the estimator learns the friction current here.
      CurrentTrace approach;
      approach.sample_rate = pc.sample_rate;
      measure(pc.no_load_current, 0.0, 400, approach.current);
      approach.t.resize(approach.current.size());
      approach.position.assign(approach.current.size(), ta_c);
      FilteredTrace fa = two_stage_filter(approach, model.filter);
      double i0 = 0.0;
      for (std::size_t j = model.filter.mean_window; j < fa.current_filt.size(); ++j) i0 += fa.current_filt[j];
      i0 /= static_cast<double>(fa.current_filt.size() - model.filter.mean_window);

      double i_cmd = pc.no_load_current;
      double est = 0.0;
      double t1 = t1c;
      for (int iter = 0; iter < 40; ++iter) {
        t1 = settle(i_cmd);
        const double tau_true = gain * std::max(0.0, i_cmd - pc.no_load_current);
        CurrentTrace seg;
        seg.sample_rate = pc.sample_rate;
        measure(i_cmd, tau_true, window, seg.current);
        seg.t.resize(window);
        seg.position.assign(window, actuation_from_joints(g, t1, kParallelBeta - t1, 0.0));
        const FilteredTrace fs = two_stage_filter(seg, model.filter);
        // Estimator path: parallel pose from the encoder, distal-only statics.
        double acc = 0.0;
        std::size_t used = 0;
        for (std::size_t j = model.filter.mean_window; j < window; ++j) {
          EstimateSample s;
          s.q = parallel_pose(g, fs.position_aligned[j]);
          s.mask = {false, false, true};
          s.tau_a = gain * std::max(0.0, fs.current_filt[j] - i0);
          acc += sample_forces(g, s, k)[2];
          ++used;
        }
        est = acc / static_cast<double>(used);
        const double slope = distal_force(t1, gain);  // N per A
        i_cmd += 0.8 * (sp - est) / slope;
        i_cmd = std::max(i_cmd, pc.no_load_current);
      }
      RingRun r;
      r.setpoint = sp;
      r.estimated_force = est;
      r.deformation = squeeze(t1);
      r.true_force = ring.force(r.deformation);
      r.expected = curve.deformation(sp);
      r.within_band = std::abs(r.deformation - r.expected) <= curve.band;
      rep.within += r.within_band ? 1 : 0;
      rep.runs.push_back(r);
    }
  }
  return rep;
}

}  // namespace gripstat
