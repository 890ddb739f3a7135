#include "gripstat/plant_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <string>
#include <thread>

#include "gripstat/angles.hpp"
#include "gripstat/error.hpp"
#include "parallel.hpp"

namespace gripstat {

namespace {

constexpr double kMmPerM = 1000.0;

double motor_gain(const FingerGeometry& g) { return g.torque_constant_A * g.screw_gain; }

std::array<double, 3> default_arms(const FingerGeometry& g) { return {g.L1 / 2, g.L2 / 2, g.L3 / 2}; }

std::uint8_t mask_bits(const ContactMask& m) {
  return static_cast<std::uint8_t>((m[0] ? 1 : 0) | (m[1] ? 2 : 0) | (m[2] ? 4 : 0));
}

// One quasi-static sample of the mechanism.
struct PlantState {
  double theta_a = 0.0;
  JointAngles q;
  ContactMask mask{};
  double d2 = 0.0;  // spring deflections, rad
  double d3 = 0.0;
  double tau_a = 0.0;  // N*m reaching O_a
  bool moving = true;
};

class NoiseSource {
 public:
  NoiseSource(std::uint64_t seed, const NoiseModel& m, double fs) : rng_(seed), m_(m), fs_(fs) {}

  double gaussian(double tau_load) {
    const double sigma = m_.sigma0 + m_.c_load * std::abs(tau_load);
    return sigma * normal_(rng_);
  }

  // Impulse outlier for this sample, or 0.
  double impulse() {
    if (m_.impulse_rate <= 0.0) return 0.0;
    const double p = m_.impulse_rate / fs_;
    if (uniform_(rng_) >= p) return 0.0;
    const double mag = m_.impulse_amplitude * (0.5 + 0.5 * uniform_(rng_));
    return uniform_(rng_) < 0.5 ? -mag : mag;
  }

 private:
  std::mt19937_64 rng_;
  NoiseModel m_;
  double fs_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

void validate_scenario(const GraspScenario& sc) {
  if (!(sc.motor_speed > 0.0) || !std::isfinite(sc.motor_speed)) {
    throw DomainError("motor_speed must be positive, got " + std::to_string(sc.motor_speed));
  }
  if (sc.contact_case != GraspCase::NoContact &&
      !(sc.object_size >= kMinObjectSize && sc.object_size <= kMaxObjectSize)) {
    throw DomainError("object_size " + std::to_string(sc.object_size) + " mm outside [1.85, 125] mm");
  }
  if (!(sc.target_force >= 0.0) || !std::isfinite(sc.target_force)) {
    throw DomainError("target_force must be non-negative");
  }
}

void push_sample(CurrentTrace& tr, const FingerGeometry& g, const PlantConfig& cfg, const GraspScenario& sc,
                 const PlantState& st, double current_clean, NoiseSource& noise, int label) {
  TraceTruth& tt = *tr.truth;
  const std::size_t k = tr.t.size();
  tr.t.push_back(static_cast<double>(k) / cfg.sample_rate);
  double i = current_clean + noise.gaussian(st.tau_a);
  const double spike = noise.impulse();
  if (spike != 0.0) {
    i += spike;
    tt.impulses.push_back(k);
  }
  tr.current.push_back(i);
  tr.position.push_back(st.theta_a);
  tr.velocity.push_back(st.moving ? sc.motor_speed : 0.0);
  tr.labels.push_back(label);

  tt.theta1.push_back(st.q.theta1);
  tt.theta2.push_back(st.q.theta2);
  tt.theta3.push_back(st.q.theta3);
  tt.tau_a.push_back(st.tau_a);
  tt.delta_theta2.push_back(st.d2);
  tt.delta_theta3.push_back(st.d3);
  tt.mask.push_back(mask_bits(st.mask));
  std::array<double, 3> f{};
  if (st.mask[0] || st.mask[1] || st.mask[2]) {
    const JointState js = make_joint_state(g, st.q.theta1, st.q.theta2, st.q.theta3);
    ContactState c;
    c.mask = st.mask;
    c.k = tt.k;
    ActuationState a;
    a.tau_a = st.tau_a;
    a.delta_theta2 = st.d2;
    a.delta_theta3 = st.d3;
    const StaticsResult r = solve_statics(g, js, c, a);
    f = {r.F[0], r.F[1], r.F[2]};
  }
  tt.f1.push_back(f[0]);
  tt.f2.push_back(f[1]);
  tt.f3.push_back(f[2]);
}

}  // namespace

double torque_from_current(const FingerGeometry& g, double current) { return motor_gain(g) * current; }

double actuation_rate(const FingerGeometry& g, double motor_rpm) { return motor_rpm * 2.0 * kPi / 60.0 / g.screw_gain; }

double size_for_contact_angle(const FingerGeometry& g, const PlantConfig& cfg, double theta1) {
  return 2.0 * (cfg.palm_half_gap + g.L1 * std::cos(theta1));
}

double contact_angle_for_size(const FingerGeometry& g, const PlantConfig& cfg, double object_size) {
  const double c = (object_size / 2.0 - cfg.palm_half_gap) / g.L1;
  if (!(c >= -1.0 && c <= 1.0)) {
    throw DomainError("object of " + std::to_string(object_size) + " mm cannot be reached by the finger");
  }
  return std::acos(c);
}

double scenario_contact_theta1(const FingerGeometry& g, const PlantConfig& cfg, const GraspScenario& sc) {
  double t1 = contact_angle_for_size(g, cfg, sc.object_size);
  if (sc.contact_case == GraspCase::ProximalFirst) t1 -= cfg.proximal_lead;
  if (!(t1 > g.theta1_range.min && t1 < g.theta1_range.max)) {
    throw DomainError("object of " + std::to_string(sc.object_size) + " mm makes contact at theta1 = " +
                      std::to_string(rad2deg(t1)) + " deg, outside the finger's travel");
  }
  return t1;
}

double default_wrap(GraspCase c, double object_size) {
  switch (c) {
    case GraspCase::MiddleFirst:
      return deg2rad(std::clamp(object_size - 60.0, 5.0, 60.0));
    case GraspCase::ProximalFirst:
      return deg2rad(40.0);
    default:
      return 0.0;
  }
}

CurrentTrace simulate_free_motion(const FingerGeometry& g, double motor_speed, std::uint64_t seed,
                                  const PlantConfig& cfg) {
  if (!(motor_speed > 0.0)) throw DomainError("motor_speed must be positive");
  CurrentTrace tr;
  tr.sample_rate = cfg.sample_rate;
  tr.truth.emplace();
  TraceTruth& tt = *tr.truth;
  tt.grasp_case = GraspCase::NoContact;
  tt.motor_speed = motor_speed;
  tt.seed = seed;
  tt.k = default_arms(g);
  tt.no_load_current = cfg.no_load_current;
  NoiseSource noise(seed, cfg.noise, cfg.sample_rate);
  GraspScenario sc;
  sc.motor_speed = motor_speed;

  auto parallel_state = [&](double theta_a) {
    PlantState st;
    st.theta_a = theta_a;
    st.q = decouple_joints(g, GraspCase::NoContact, theta_a);
    return st;
  };
  const double lo = actuation_from_joints(g, g.theta1_range.min, kParallelBeta - g.theta1_range.min, 0.0);
  const double hi = actuation_from_joints(g, g.theta1_range.max, kParallelBeta - g.theta1_range.max, 0.0);
  const double step = actuation_rate(g, motor_speed) / cfg.sample_rate;
  // Close, then open again.
  for (double ta = lo; ta <= hi; ta += step) {
    push_sample(tr, g, cfg, sc, parallel_state(ta), cfg.no_load_current, noise, 0);
  }
  for (double ta = hi; ta >= lo; ta -= step) {
    push_sample(tr, g, cfg, sc, parallel_state(ta), cfg.no_load_current, noise, 0);
    tr.velocity.back() = -motor_speed;
  }
  return tr;
}

namespace {

CurrentTrace simulate_contact(const FingerGeometry& g, const GraspScenario& sc, const PlantConfig& cfg) {

  const double t1c = scenario_contact_theta1(g, cfg, sc);
  const double t1start = std::max(g.theta1_range.min, t1c - cfg.approach_margin);
  const double gain = motor_gain(g);
  const double pre = g.spring_preload;

  CurrentTrace tr;
  tr.sample_rate = cfg.sample_rate;
  tr.truth.emplace();
  TraceTruth& tt = *tr.truth;
  tt.grasp_case = sc.contact_case;
  tt.object_size = sc.object_size;
  tt.motor_speed = sc.motor_speed;
  tt.target_force = sc.target_force;
  tt.seed = sc.seed;
  tt.k = sc.k.value_or(default_arms(g));
  tt.no_load_current = cfg.no_load_current;
  tt.theta1_switch = t1c;
  tt.onset = {t1c, kParallelBeta - t1c, 0.0, std::nullopt};
  if (sc.contact_case == GraspCase::ProximalFirst) tt.onset.theta2_stop = sc.theta2_stop.value_or(g.theta2_range.max);
  const ContactOnset& on = tt.onset;
  const double wrap = sc.wrap_theta3.value_or(default_wrap(sc.contact_case, sc.object_size));

  const double ta_start = actuation_from_joints(g, t1start, kParallelBeta - t1start, 0.0);
  const double ta_contact = actuation_from_joints(g, on.theta1, on.theta2, on.theta3);
  // The crank may pass +-pi during a deep wrap; keep theta_a continuous.
  auto unwrap = [&](double ta) { return ta_contact + wrap_angle(ta - ta_contact); };
  double ta_stall = ta_contact;
  double ta_stop2 = ta_contact;
  switch (sc.contact_case) {
    case GraspCase::MiddleFirst:
      ta_stall = unwrap(actuation_from_joints(g, on.theta1, on.theta2, wrap));
      break;
    case GraspCase::ProximalFirst:
      ta_stop2 = unwrap(actuation_from_joints(g, on.theta1, *on.theta2_stop, 0.0));
      ta_stall = unwrap(actuation_from_joints(g, on.theta1, *on.theta2_stop, wrap));
      break;
    default:
      break;
  }
  if (!(ta_stall >= ta_stop2 && ta_stop2 >= ta_contact && ta_contact > ta_start)) {
    throw DomainError("scenario does not produce an advancing grasp");
  }

  // Quasi-static state at actuation angle theta_a while still moving.
  auto moving_state = [&](double ta) {
    PlantState st;
    st.theta_a = ta;
    if (ta <= ta_contact) {
      st.q = decouple_joints(g, GraspCase::NoContact, ta);
      return st;
    }
    st.q = decouple_joints(g, sc.contact_case, ta, on);
    const JointState js = make_joint_state(g, st.q.theta1, st.q.theta2, st.q.theta3);
    const auto X = transmission_ratios(g, js).X;
    if (sc.contact_case == GraspCase::MiddleFirst) {
      st.mask = {false, true, false};
      st.d3 = pre + (st.q.theta3 - on.theta3);
      st.tau_a = g.K3 * st.d3 / X[2];
    } else if (ta <= ta_stop2) {
      st.mask = {true, false, false};
      st.d2 = pre + (st.q.theta2 - on.theta2);
      st.tau_a = g.K2 * st.d2 / X[1];
    } else {
      st.mask = {true, true, false};
      st.d2 = pre + (*on.theta2_stop - on.theta2);
      st.d3 = pre + (st.q.theta3 - on.theta3);
      st.tau_a = g.K3 * st.d3 / X[2];
    }
    return st;
  };

  const double step = actuation_rate(g, sc.motor_speed) / cfg.sample_rate;
  const bool switches = sc.contact_case != GraspCase::DistalFirst;
  NoiseSource noise(sc.seed, cfg.noise, cfg.sample_rate);
  int label = 0;
  for (std::size_t k = 0;; ++k) {
    const double ta = ta_start + step * static_cast<double>(k);
    if (ta >= ta_stall) break;
    const PlantState st = moving_state(ta);
    if (ta > ta_contact && !tt.contact_index) {
      tt.contact_index = k;
      if (switches) {
        tt.switch_index = k;
        label = 1;
      }
    }
    push_sample(tr, g, cfg, sc, st, cfg.no_load_current + st.tau_a / gain, noise, label);
  }

  // Distal contact: the screw stops and the current is raised to the setpoint.
  PlantState st = moving_state(ta_stall);
  st.moving = false;
  st.mask[2] = true;
  if (!tt.contact_index) tt.contact_index = tr.size();
  tt.stall_index = tr.size();
  const JointState js = make_joint_state(g, st.q.theta1, st.q.theta2, st.q.theta3);
  ContactState c;
  c.mask = st.mask;
  c.k = tt.k;
  const double tau_set = actuation_torque_for_distal_force(g, js, c, st.d3, sc.target_force);
  const double i_stall = cfg.no_load_current + st.tau_a / gain;
  const double i_set = cfg.no_load_current + tau_set / gain;
  const auto n_ramp = static_cast<std::size_t>(std::llround(cfg.ramp_time * cfg.sample_rate));
  const auto n_hold = static_cast<std::size_t>(std::llround(cfg.hold_time * cfg.sample_rate));
  for (std::size_t k = 1; k <= n_ramp + n_hold; ++k) {
    const double u = n_ramp == 0 ? 1.0 : std::min(1.0, static_cast<double>(k) / static_cast<double>(n_ramp));
    const double i = i_stall + u * (i_set - i_stall);
    st.tau_a = (i - cfg.no_load_current) * gain;
    push_sample(tr, g, cfg, sc, st, i, noise, label);
  }
  return tr;
}

}  // namespace

CurrentTrace simulate_grasp(const FingerGeometry& g, const GraspScenario& sc, const PlantConfig& cfg) {
  validate_scenario(sc);
  if (sc.contact_case == GraspCase::NoContact) return simulate_free_motion(g, sc.motor_speed, sc.seed, cfg);
  try {
    return simulate_contact(g, sc, cfg);
  } catch (const DomainError&) {
    throw;
  } catch (const Error& e) {
    // The linkage cannot follow the requested wrap.
    throw DomainError(std::string("infeasible grasp scenario: ") + e.what());
  }
}

std::vector<double> standard_object_angles() {
  std::vector<double> out;
  for (int d = 30; d <= 60; d += 2) out.push_back(deg2rad(d));
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = base * 0x9E3779B97F4A7C15ULL + index + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<GraspScenario> expand_grid(const FingerGeometry& g, const DatasetGrid& grid, const PlantConfig& cfg) {
  std::vector<GraspScenario> out;
  out.reserve(grid.contact_theta1.size() * grid.speeds.size() * grid.traces_per_cell);
  for (double t1 : grid.contact_theta1) {
    for (double v : grid.speeds) {
      for (std::size_t r = 0; r < grid.traces_per_cell; ++r) {
        GraspScenario sc;
        double face = t1;
        if (grid.contact_case == GraspCase::ProximalFirst) face += cfg.proximal_lead;
        sc.object_size = size_for_contact_angle(g, cfg, face);
        sc.motor_speed = v;
        sc.contact_case = grid.contact_case;
        sc.target_force = grid.target_force;
        sc.seed = derive_seed(grid.base_seed, out.size());
        out.push_back(sc);
      }
    }
  }
  return out;
}

std::vector<DatasetEntry> batch_generate(const FingerGeometry& g, const DatasetGrid& grid, const PlantConfig& cfg,
                                         unsigned jobs) {
  if (grid.contact_theta1.empty() || grid.speeds.empty() || grid.traces_per_cell == 0) {
    throw DomainError("dataset grid is empty");
  }
  const std::vector<GraspScenario> scenarios = expand_grid(g, grid, cfg);
  std::vector<DatasetEntry> out(scenarios.size());
  const std::size_t per_object = grid.speeds.size() * grid.traces_per_cell;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].object_index = i / per_object;
    out[i].speed_index = (i % per_object) / grid.traces_per_cell;
    out[i].repeat = i % grid.traces_per_cell;
    out[i].scenario = scenarios[i];
  }
  detail::parallel_for(out.size(), jobs, [&](std::size_t i) { out[i].trace = simulate_grasp(g, out[i].scenario, cfg); });
  return out;
}

}  // namespace gripstat
