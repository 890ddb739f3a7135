#include "gripstat/cli.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gripstat/angles.hpp"
#include "gripstat/checksum.hpp"
#include "gripstat/error.hpp"
#include "gripstat/estimator.hpp"
#include "gripstat/geometry.hpp"
#include "gripstat/trace_io.hpp"
#include "json.hpp"
#include "text_format.hpp"

namespace gripstat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string command;
  std::string geometry;
  std::string scenario;
  std::string out;
  std::string model;
  std::string speeds;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::vector<std::string> inputs;
};

// Everything a run needs to be replayed: canonical argv plus checksums.
struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  std::vector<std::uint64_t> seeds;
  std::vector<fs::path> inputs;
  std::vector<std::string> outputs;  // relative to the output directory
};

fs::path require_path(const std::string& p, const std::string& what) {
  if (p.empty()) throw UsageError("missing " + what);
  if (!fs::exists(p)) throw UsageError(what + " not found: " + p);
  return fs::absolute(p).lexically_normal();
}

fs::path output_dir(const Options& o) {
  if (o.out.empty()) throw UsageError("missing --out DIR");
  const fs::path p = fs::absolute(o.out).lexically_normal();
  fs::create_directories(p);
  return p;
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_text_file(p));
  } catch (const json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("config key '") + key + "': " + e.what());
  }
}

FingerGeometry load_geo(const Options& o, Manifest& m) {
  if (o.geometry.empty()) return reference_geometry();
  const fs::path p = require_path(o.geometry, "geometry file");
  m.inputs.push_back(p);
  return load_geometry_file(p.string());
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> v;
  for (auto part : detail::split(text, ',')) {
    part = detail::trim(part);
    if (part.empty()) continue;
    double x = 0.0;
    if (!detail::parse_double(part, x)) throw UsageError(std::string("bad value in ") + what + ": '" + std::string(part) + "'");
    v.push_back(x);
  }
  if (v.empty()) throw UsageError(std::string("empty ") + what);
  return v;
}

std::vector<double> speeds_or(const Options& o, std::vector<double> fallback) {
  if (o.speeds.empty()) return fallback;
  auto v = parse_list(o.speeds, "speed list");
  for (double s : v) {
    if (!(s > 0.0)) throw UsageError("speeds must be positive");
  }
  return v;
}

PlantConfig plant_from_json(const json& j) {
  PlantConfig p;
  if (!j.is_object()) return p;
  p.sample_rate = get_or(j, "sample_rate_Hz", p.sample_rate);
  p.no_load_current = get_or(j, "no_load_current_A", p.no_load_current);
  p.ramp_time = get_or(j, "ramp_time_s", p.ramp_time);
  p.hold_time = get_or(j, "hold_time_s", p.hold_time);
  p.approach_margin = deg2rad(get_or(j, "approach_margin_deg", rad2deg(p.approach_margin)));
  p.palm_half_gap = get_or(j, "palm_half_gap_mm", p.palm_half_gap);
  p.proximal_lead = deg2rad(get_or(j, "proximal_lead_deg", rad2deg(p.proximal_lead)));
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    p.noise.sigma0 = get_or(n, "sigma0_A", p.noise.sigma0);
    p.noise.c_load = get_or(n, "c_load_A_per_Nm", p.noise.c_load);
    p.noise.impulse_rate = get_or(n, "impulse_rate_per_s", p.noise.impulse_rate);
    p.noise.impulse_amplitude = get_or(n, "impulse_amplitude_A", p.noise.impulse_amplitude);
  }
  if (!(p.sample_rate > 0.0) || p.noise.sigma0 < 0.0 || p.noise.c_load < 0.0 || p.noise.impulse_rate < 0.0) {
    throw ValidationError("plant config: sample rate must be positive and noise parameters non-negative");
  }
  return p;
}

json plant_to_json(const PlantConfig& p) {
  return {{"sample_rate_Hz", p.sample_rate},
          {"no_load_current_A", p.no_load_current},
          {"ramp_time_s", p.ramp_time},
          {"hold_time_s", p.hold_time},
          {"approach_margin_deg", rad2deg(p.approach_margin)},
          {"palm_half_gap_mm", p.palm_half_gap},
          {"proximal_lead_deg", rad2deg(p.proximal_lead)},
          {"noise",
           {{"sigma0_A", p.noise.sigma0},
            {"c_load_A_per_Nm", p.noise.c_load},
            {"impulse_rate_per_s", p.noise.impulse_rate},
            {"impulse_amplitude_A", p.noise.impulse_amplitude}}}};
}

GraspCase case_from_json(const json& j, const char* key, GraspCase fallback) {
  const std::string s = get_or<std::string>(j, key, std::string(to_string(fallback)));
  return grasp_case_from_string(s);
}

GraspScenario scenario_from_json(const json& j, const FingerGeometry& g, const PlantConfig& pc) {
  GraspScenario sc;
  sc.contact_case = case_from_json(j, "contact_case", sc.contact_case);
  if (j.contains("object_size_mm")) {
    sc.object_size = get_or(j, "object_size_mm", 0.0);
  } else if (j.contains("contact_theta1_deg")) {
    double face = deg2rad(get_or(j, "contact_theta1_deg", 0.0));
    if (sc.contact_case == GraspCase::ProximalFirst) face += pc.proximal_lead;
    sc.object_size = size_for_contact_angle(g, pc, face);
  } else if (sc.contact_case != GraspCase::NoContact) {
    throw ValidationError("scenario needs object_size_mm or contact_theta1_deg");
  }
  sc.motor_speed = get_or(j, "motor_speed_rpm", sc.motor_speed);
  sc.target_force = get_or(j, "target_force_N", sc.target_force);
  sc.seed = get_or<std::uint64_t>(j, "seed", sc.seed);
  if (j.contains("k_mm")) sc.k = get_or(j, "k_mm", std::array<double, 3>{});
  if (j.contains("wrap_theta3_deg")) sc.wrap_theta3 = deg2rad(get_or(j, "wrap_theta3_deg", 0.0));
  if (j.contains("theta2_stop_deg")) sc.theta2_stop = deg2rad(get_or(j, "theta2_stop_deg", 0.0));
  return sc;
}

json scenario_to_json(const GraspScenario& sc) {
  json j = {{"object_size_mm", sc.object_size},
            {"motor_speed_rpm", sc.motor_speed},
            {"contact_case", std::string(to_string(sc.contact_case))},
            {"target_force_N", sc.target_force},
            {"seed", sc.seed}};
  if (sc.k) j["k_mm"] = *sc.k;
  if (sc.wrap_theta3) j["wrap_theta3_deg"] = rad2deg(*sc.wrap_theta3);
  if (sc.theta2_stop) j["theta2_stop_deg"] = rad2deg(*sc.theta2_stop);
  return j;
}

EstimatorConfig estimator_from_json(const json& j) {
  EstimatorConfig c;
  if (!j.is_object()) return c;
  if (j.contains("case_prior")) c.case_prior = grasp_case_from_string(get_or<std::string>(j, "case_prior", ""));
  if (j.contains("k_mm")) c.k = get_or(j, "k_mm", std::array<double, 3>{});
  if (j.contains("theta2_stop_deg")) c.theta2_stop = deg2rad(get_or(j, "theta2_stop_deg", 0.0));
  c.use_compensation = get_or(j, "use_compensation", c.use_compensation);
  c.steady_fraction = get_or(j, "steady_fraction", c.steady_fraction);
  if (!(c.steady_fraction > 0.0 && c.steady_fraction <= 1.0)) throw ValidationError("steady_fraction must be in (0, 1]");
  return c;
}

json estimator_to_json(const EstimatorConfig& c) {
  json j = {{"use_compensation", c.use_compensation}, {"steady_fraction", c.steady_fraction}};
  if (c.case_prior) j["case_prior"] = std::string(to_string(*c.case_prior));
  if (c.k) j["k_mm"] = *c.k;
  if (c.theta2_stop) j["theta2_stop_deg"] = rad2deg(*c.theta2_stop);
  return j;
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.hidden_dim = get_or(j, "hidden_dim", t.hidden_dim);
  t.learning_rate = get_or(j, "learning_rate", t.learning_rate);
  t.epochs = get_or(j, "epochs", t.epochs);
  t.bptt_horizon = get_or(j, "bptt_horizon", t.bptt_horizon);
  t.batch_size = get_or(j, "batch_size", t.batch_size);
  t.clip_norm = get_or(j, "clip_norm", t.clip_norm);
  t.seed = get_or<std::uint64_t>(j, "seed", t.seed);
  t.validate();
  return t;
}

json train_to_json(const TrainConfig& t) {
  return {{"hidden_dim", t.hidden_dim},   {"learning_rate", t.learning_rate}, {"epochs", t.epochs},
          {"bptt_horizon", t.bptt_horizon}, {"batch_size", t.batch_size},     {"clip_norm", t.clip_norm},
          {"seed", t.seed}};
}

FilterConfig filter_from_json(const json& j) {
  FilterConfig f;
  if (!j.is_object()) return f;
  f.median_window = get_or(j, "median_window", f.median_window);
  f.mean_window = get_or(j, "mean_window", f.mean_window);
  f.delay_units = get_or(j, "delay_units", (f.mean_window - 1) / 2);
  f.validate();
  return f;
}

json filter_to_json(const FilterConfig& f) {
  return {{"median_window", f.median_window}, {"mean_window", f.mean_window}, {"delay_units", f.delay_units}};
}

std::vector<std::string> base_argv(const Options& o, const fs::path& out) {
  std::vector<std::string> a{o.command};
  for (const auto& in : o.inputs) a.push_back(fs::absolute(in).lexically_normal().string());
  if (!o.geometry.empty()) a.insert(a.end(), {"--geometry", fs::absolute(o.geometry).lexically_normal().string()});
  if (!o.scenario.empty()) a.insert(a.end(), {"--scenario", fs::absolute(o.scenario).lexically_normal().string()});
  if (!o.model.empty()) a.insert(a.end(), {"--model", fs::absolute(o.model).lexically_normal().string()});
  if (o.seed) a.insert(a.end(), {"--seed", std::to_string(*o.seed)});
  if (!o.speeds.empty()) a.insert(a.end(), {"--speeds", o.speeds});
  a.insert(a.end(), {"--jobs", std::to_string(o.jobs), "--out", out.string()});
  return a;
}

void write_manifest(const fs::path& out, const Manifest& m, double wall) {
  json j;
  j["format"] = "gripstat-run";
  j["version"] = 1;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["config"] = m.config;
  j["seeds"] = m.seeds;
  json ins = json::array();
  for (const auto& p : m.inputs) {
    ins.push_back({{"path", p.string()}, {"sha256", fs::is_regular_file(p) ? sha256_file(p) : std::string()}});
  }
  j["inputs"] = ins;
  json outs = json::array();
  for (const auto& rel : m.outputs) outs.push_back({{"path", rel}, {"sha256", sha256_file(out / rel)}});
  j["outputs"] = outs;
  j["tool_version"] = kToolVersion;
  j["wall_time_s"] = wall;
  write_text_file_atomic(out / "manifest.json", j.dump(1) + "\n");
}

// ---- commands --------------------------------------------------------------------

void cmd_simulate(const Options& o, Manifest& m, std::ostream& out) {
  const FingerGeometry g = load_geo(o, m);
  const fs::path sp = require_path(o.scenario, "scenario file (--scenario)");
  m.inputs.push_back(sp);
  const json sj = read_json(sp);
  const PlantConfig pc = plant_from_json(sj.value("plant", json::object()));
  GraspScenario sc = scenario_from_json(sj, g, pc);
  if (o.seed) sc.seed = *o.seed;
  const fs::path dir = output_dir(o);
  const CurrentTrace tr = simulate_grasp(g, sc, pc);
  save_trace(dir, "trace", tr, &sc);
  m.outputs = {"trace.csv", "trace.json"};
  m.seeds = {sc.seed};
  m.config = {{"scenario", scenario_to_json(sc)}, {"plant", plant_to_json(pc)}};
  out << "wrote " << tr.size() << " samples to " << (dir / "trace.csv").string() << "\n";
}

DatasetGrid grid_from_json(const json& j, const Options& o) {
  DatasetGrid grid;
  if (j.contains("objects_theta1_deg")) {
    for (double d : get_or(j, "objects_theta1_deg", std::vector<double>{})) grid.contact_theta1.push_back(deg2rad(d));
  } else {
    grid.contact_theta1 = standard_object_angles();
  }
  grid.speeds = speeds_or(o, get_or(j, "speeds_rpm", std::vector<double>{60.0}));
  grid.traces_per_cell = get_or<std::size_t>(j, "traces_per_cell", 2);
  grid.contact_case = case_from_json(j, "contact_case", GraspCase::MiddleFirst);
  grid.target_force = get_or(j, "target_force_N", grid.target_force);
  grid.base_seed = o.seed.value_or(get_or<std::uint64_t>(j, "base_seed", grid.base_seed));
  if (grid.contact_theta1.empty() || grid.traces_per_cell == 0) throw UsageError("dataset grid is empty");
  return grid;
}

json grid_to_json(const DatasetGrid& g) {
  std::vector<double> deg;
  for (double t : g.contact_theta1) deg.push_back(rad2deg(t));
  return {{"objects_theta1_deg", deg},       {"speeds_rpm", g.speeds},
          {"traces_per_cell", g.traces_per_cell}, {"contact_case", std::string(to_string(g.contact_case))},
          {"target_force_N", g.target_force}, {"base_seed", g.base_seed}};
}

void cmd_generate(const Options& o, Manifest& m, std::ostream& out) {
  const FingerGeometry g = load_geo(o, m);
  json cj = json::object();
  if (!o.scenario.empty()) {
    const fs::path sp = require_path(o.scenario, "dataset config (--scenario)");
    m.inputs.push_back(sp);
    cj = read_json(sp);
  }
  const DatasetGrid grid = grid_from_json(cj, o);
  const PlantConfig pc = plant_from_json(cj.value("plant", json::object()));
  const fs::path dir = output_dir(o);
  const auto entries = batch_generate(g, grid, pc, o.jobs);
  save_dataset(dir, entries, grid);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    char stem[64];
    std::snprintf(stem, sizeof stem, "trace_%05zu", i);
    m.outputs.push_back(std::string(stem) + ".csv");
    m.outputs.push_back(std::string(stem) + ".json");
  }
  m.outputs.push_back("dataset.json");
  m.seeds = {grid.base_seed};
  m.config = {{"grid", grid_to_json(grid)}, {"plant", plant_to_json(pc)}};
  out << "wrote " << entries.size() << " traces to " << dir.string() << "\n";
}

std::vector<DatasetRecord> load_dataset_dir(const std::string& d, Manifest& m) {
  const fs::path p = require_path(d, "dataset directory");
  if (!fs::exists(p / "dataset.json")) throw UsageError("not a dataset directory (no dataset.json): " + p.string());
  m.inputs.push_back(p / "dataset.json");
  auto out = load_dataset(p);
  if (out.empty()) throw UsageError("dataset is empty: " + p.string());
  return out;
}

void cmd_train(const Options& o, Manifest& m, std::ostream& out) {
  const FingerGeometry g = load_geo(o, m);
  if (o.inputs.empty()) throw UsageError("train needs at least one dataset directory");
  json cj = json::object();
  if (!o.scenario.empty()) {
    const fs::path sp = require_path(o.scenario, "training config (--scenario)");
    m.inputs.push_back(sp);
    cj = read_json(sp);
  }
  TrainConfig tc = train_from_json(cj);
  if (o.seed) tc.seed = *o.seed;
  const FilterConfig fc = filter_from_json(cj.value("filter", json::object()));
  const auto holdout_every = get_or<std::size_t>(cj, "holdout_every", 10);
  std::vector<CurrentTrace> train, holdout, calibration;
  std::size_t idx = 0;
  for (const auto& d : o.inputs) {
    for (auto& r : load_dataset_dir(d, m)) {
      calibration.push_back(r.trace);
      if (holdout_every > 0 && idx % holdout_every == holdout_every - 1) {
        holdout.push_back(std::move(r.trace));
      } else {
        train.push_back(std::move(r.trace));
      }
      ++idx;
    }
  }
  const fs::path dir = output_dir(o);
  ModelTrainingResult res = train_mode_model(g, train, holdout, calibration, tc, fc, o.jobs);
  res.model.threshold = get_or(cj, "threshold", res.model.threshold);
  res.model.debounce = get_or<std::size_t>(cj, "debounce", res.model.debounce);
  save_model(dir / "model.json", res.model);
  std::ostringstream rep;
  rep << "epoch train_loss holdout_accuracy\n";
  char line[128];
  for (const auto& e : res.train.epochs) {
    std::snprintf(line, sizeof line, "%5d %.6f %.6f\n", e.epoch, e.train_loss, e.holdout_accuracy);
    rep << line;
  }
  std::snprintf(line, sizeof line, "compensation residual RMS %.4f deg, undetected %zu\n",
                rad2deg(res.compensation.residual_rms), res.undetected);
  rep << line;
  if (res.proximal_compensation) {
    std::snprintf(line, sizeof line, "proximal_first compensation residual RMS %.4f deg\n",
                  rad2deg(res.proximal_compensation->residual_rms));
    rep << line;
  }
  write_text_file_atomic(dir / "train_report.txt", rep.str());
  m.outputs = {"model.json", "train_report.txt"};
  m.seeds = {tc.seed};
  m.config = {{"train", train_to_json(tc)}, {"filter", filter_to_json(fc)}, {"holdout_every", holdout_every}};
  out << rep.str();
}

ModeModel load_model_opt(const Options& o, Manifest& m) {
  const fs::path p = require_path(o.model, "model file (--model)");
  m.inputs.push_back(p);
  return load_model(p);
}

EstimatorConfig estimator_opt(const Options& o, Manifest& m) {
  if (o.scenario.empty()) return {};
  const fs::path sp = require_path(o.scenario, "estimator config (--scenario)");
  m.inputs.push_back(sp);
  return estimator_from_json(read_json(sp));
}

void cmd_eval(const Options& o, Manifest& m, std::ostream& out) {
  const FingerGeometry g = load_geo(o, m);
  if (o.inputs.size() != 1) throw UsageError("eval needs one dataset directory");
  const ModeModel model = load_model_opt(o, m);
  const EstimatorConfig ec = estimator_opt(o, m);
  std::vector<CurrentTrace> traces;
  for (auto& r : load_dataset_dir(o.inputs[0], m)) traces.push_back(std::move(r.trace));
  const fs::path dir = output_dir(o);
  const EvaluationReport rep = evaluate(traces, g, model, ec, o.jobs);
  write_text_file_atomic(dir / "eval_report.txt", rep.to_text());
  write_text_file_atomic(dir / "eval_rows.csv", rep.to_csv());
  m.outputs = {"eval_report.txt", "eval_rows.csv"};
  m.config = {{"estimator", estimator_to_json(ec)}};
  out << rep.to_text();
}

void cmd_forces(const Options& o, Manifest& m, std::ostream& out) {
  const FingerGeometry g = load_geo(o, m);
  if (o.inputs.size() != 1) throw UsageError("forces needs one trace file");
  const ModeModel model = load_model_opt(o, m);
  const EstimatorConfig ec = estimator_opt(o, m);
  const fs::path tp = require_path(o.inputs[0], "trace file");
  m.inputs.push_back(tp);
  const CurrentTrace tr = load_trace(tp);
  const fs::path dir = output_dir(o);
  const ForceEstimate e = estimate(tr, g, model, ec);
  std::string csv =
      "t_s,mode,theta_a_rad,current_filt_A,theta1_rad,theta2_rad,theta3_rad,tau_a_Nm,mask,f1_N,f2_N,f3_N,infeasible\n";
  for (const auto& s : e.samples) {
    for (double v : {s.t}) csv += detail::format_double(v) + ",";
    csv += std::to_string(s.mode) + ",";
    for (double v : {s.theta_a, s.current, s.q.theta1, s.q.theta2, s.q.theta3, s.tau_a}) {
      csv += detail::format_double(v) + ",";
    }
    csv += std::to_string((s.mask[0] ? 1 : 0) | (s.mask[1] ? 2 : 0) | (s.mask[2] ? 4 : 0)) + ",";
    for (double v : s.f) csv += detail::format_double(v) + ",";
    csv += s.infeasible ? "1\n" : "0\n";
  }
  write_text_file_atomic(dir / "forces.csv", csv);
  json sj = {{"grasp_case", std::string(to_string(e.grasp_case))},
             {"switch_index", e.switch_index ? json(*e.switch_index) : json(nullptr)},
             {"stall_index", e.stall_index ? json(*e.stall_index) : json(nullptr)},
             {"theta1_raw_deg", rad2deg(e.theta1_raw)},
             {"theta1_switch_deg", rad2deg(e.theta1_switch)},
             {"no_load_current_A", e.no_load_current},
             {"k_mm", e.k},
             {"steady_force_N", e.steady_force},
             {"flags", e.flags}};
  write_text_file_atomic(dir / "summary.json", sj.dump(1) + "\n");
  m.outputs = {"forces.csv", "summary.json"};
  m.config = {{"estimator", estimator_to_json(ec)}};
  char line[200];
  std::snprintf(line, sizeof line, "case %s, steady forces f1=%.2f f2=%.2f f3=%.2f N\n",
                std::string(to_string(e.grasp_case)).c_str(), e.steady_force[0], e.steady_force[1],
                e.steady_force[2]);
  out << line;
}

// ---- sweep ---------------------------------------------------------------------------

struct SweepConfig {
  std::vector<double> objects_deg;
  std::size_t trials = 3;
  std::vector<double> setpoints{50, 75, 100, 125, 150, 175, 200};
  std::vector<double> setpoint_objects_deg{30, 60};
  std::vector<double> multipoint_deg{30, 35, 40};
  std::size_t train_traces_per_cell = 3;
  // Training and calibration grid; independent of the swept objects and
  // speeds so a small sweep still gets a full compensation surface.
  std::vector<double> train_objects_deg;
  std::vector<double> train_speeds{50, 60, 70, 80};
  TrainConfig train;
  std::uint64_t seed = 1;
};

SweepConfig sweep_from_json(const json& j, const Options& o) {
  SweepConfig c;
  for (double t : standard_object_angles()) c.objects_deg.push_back(rad2deg(t));
  c.train_objects_deg = c.objects_deg;
  c.objects_deg = get_or(j, "objects_theta1_deg", c.objects_deg);
  c.train_objects_deg = get_or(j, "train_objects_theta1_deg", c.train_objects_deg);
  c.trials = get_or(j, "trials", c.trials);
  c.setpoints = get_or(j, "setpoints_N", c.setpoints);
  c.setpoint_objects_deg = get_or(j, "setpoint_objects_theta1_deg", c.setpoint_objects_deg);
  c.multipoint_deg = get_or(j, "multipoint_theta1_deg", c.multipoint_deg);
  c.train_traces_per_cell = get_or(j, "train_traces_per_cell", c.train_traces_per_cell);
  c.train_speeds = get_or(j, "train_speeds_rpm", c.train_speeds);
  c.train.epochs = 6;
  if (j.contains("train")) c.train = train_from_json(j.at("train"));
  c.seed = o.seed.value_or(get_or<std::uint64_t>(j, "seed", c.seed));
  if (c.trials == 0 || c.objects_deg.empty()) throw UsageError("sweep needs objects and trials");
  return c;
}

json sweep_to_json(const SweepConfig& c, const std::vector<double>& speeds) {
  return {{"objects_theta1_deg", c.objects_deg},
          {"trials", c.trials},
          {"setpoints_N", c.setpoints},
          {"setpoint_objects_theta1_deg", c.setpoint_objects_deg},
          {"multipoint_theta1_deg", c.multipoint_deg},
          {"train_traces_per_cell", c.train_traces_per_cell},
          {"train_objects_theta1_deg", c.train_objects_deg},
          {"train_speeds_rpm", c.train_speeds},
          {"train", train_to_json(c.train)},
          {"seed", c.seed},
          {"speeds_rpm", speeds}};
}

std::vector<CurrentTrace> traces_of(std::vector<DatasetEntry>&& e) {
  std::vector<CurrentTrace> out;
  for (auto& x : e) out.push_back(std::move(x.trace));
  return out;
}

ModeModel sweep_model(const FingerGeometry& g, const SweepConfig& c, unsigned jobs) {
  DatasetGrid mid;
  for (double d : c.train_objects_deg) mid.contact_theta1.push_back(deg2rad(d));
  mid.speeds = c.train_speeds;
  mid.traces_per_cell = c.train_traces_per_cell;
  mid.base_seed = derive_seed(c.seed, 1);
  DatasetGrid prox = mid;
  prox.contact_theta1.clear();
  for (double d = 30; d <= 40; d += 2) prox.contact_theta1.push_back(deg2rad(d));
  prox.contact_case = GraspCase::ProximalFirst;
  prox.base_seed = derive_seed(c.seed, 2);
  auto a = traces_of(batch_generate(g, mid, {}, jobs));
  auto b = traces_of(batch_generate(g, prox, {}, jobs));
  std::vector<CurrentTrace> train, holdout, calib;
  for (std::size_t i = 0; i < a.size(); ++i) {
    calib.push_back(a[i]);
    (i % 10 == 9 ? holdout : train).push_back(a[i]);
  }
  for (auto& t : b) {
    calib.push_back(t);
    train.push_back(std::move(t));
  }
  return train_mode_model(g, train, holdout, calib, c.train, {}, jobs).model;
}

void cmd_sweep(const Options& o, Manifest& m, std::ostream& out) {
  const FingerGeometry g = load_geo(o, m);
  json cj = json::object();
  if (!o.scenario.empty()) {
    const fs::path sp = require_path(o.scenario, "sweep config (--scenario)");
    m.inputs.push_back(sp);
    cj = read_json(sp);
  }
  const std::vector<double> speeds = speeds_or(o, {50, 60, 70, 80});
  const SweepConfig c = sweep_from_json(cj, o);
  const fs::path dir = output_dir(o);
  const ModeModel model = o.model.empty() ? sweep_model(g, c, o.jobs) : load_model_opt(o, m);

  std::ostringstream t2, t3, t4;
  std::string rows = "table,speed_rpm,key,n,mean,max\n";
  char line[512];
  t2 << "Switch angle deviation after compensation (deg)\n";
  std::snprintf(line, sizeof line, "%8s %6s %10s %10s\n", "speed", "n", "mean", "max");
  t2 << line;
  t3 << "Parallel grasp force deviation rate by setpoint (%)\n";
  t3 << "   speed";
  for (double sp : c.setpoints) {
    std::snprintf(line, sizeof line, " %8.0fN", sp);
    t3 << line;
  }
  t3 << "     mean\n";
  t4 << "Three-point enveloping grasp, mean steady forces (N) and deviation rate\n";
  std::snprintf(line, sizeof line, "%8s %8s %8s %8s %8s %8s %8s %8s %8s\n", "speed", "f1_true", "f2_true", "f3_true",
                "f1_est", "f2_est", "f3_est", "dev_N", "rate");
  t4 << line;

  for (std::size_t si = 0; si < speeds.size(); ++si) {
    const double v = speeds[si];
    // Mode switch accuracy.
    DatasetGrid tg;
    for (double d : c.objects_deg) tg.contact_theta1.push_back(deg2rad(d));
    tg.speeds = {v};
    tg.traces_per_cell = c.trials;
    tg.base_seed = derive_seed(c.seed, 100 + si);
    const auto rep2 = evaluate(traces_of(batch_generate(g, tg, {}, o.jobs)), g, model, {}, o.jobs);
    std::snprintf(line, sizeof line, "%8.0f %6zu %10.3f %10.3f\n", v, rep2.overall.count,
                  rep2.overall.mean_theta1_dev, rep2.overall.max_theta1_dev);
    t2 << line;
    for (const auto& gs : rep2.by_theta1) {
      rows += "II," + detail::format_double(v) + "," + detail::format_double(gs.key) + "," +
              std::to_string(gs.count) + "," + detail::format_double(gs.mean_theta1_dev) + "," +
              detail::format_double(gs.max_theta1_dev) + "\n";
    }

    // Parallel grasp force accuracy.
    std::vector<CurrentTrace> par;
    std::vector<GraspScenario> scs;
    for (double sp : c.setpoints) {
      for (double d : c.setpoint_objects_deg) {
        for (std::size_t r = 0; r < c.trials; ++r) {
          GraspScenario sc;
          sc.contact_case = GraspCase::DistalFirst;
          sc.motor_speed = v;
          sc.target_force = sp;
          sc.object_size = size_for_contact_angle(g, {}, deg2rad(d));
          sc.seed = derive_seed(c.seed, 1000000 + scs.size() + 10000 * si);
          scs.push_back(sc);
        }
      }
    }
    par.resize(scs.size());
    for (std::size_t i = 0; i < scs.size(); ++i) par[i] = simulate_grasp(g, scs[i]);
    const auto rep3 = evaluate(par, g, model, {}, o.jobs);
    std::snprintf(line, sizeof line, "%8.0f", v);
    t3 << line;
    for (const auto& gs : rep3.by_setpoint) {
      std::snprintf(line, sizeof line, " %8.2f%%", 100 * gs.mean_rate);
      t3 << line;
      rows += "III," + detail::format_double(v) + "," + detail::format_double(gs.key) + "," +
              std::to_string(gs.count) + "," + detail::format_double(gs.mean_rate) + "," +
              detail::format_double(gs.max_rate) + "\n";
    }
    std::snprintf(line, sizeof line, " %7.2f%%\n", 100 * rep3.overall.mean_rate);
    t3 << line;

    // Multi-point enveloping grasp.
    std::vector<CurrentTrace> mp;
    for (double d : c.multipoint_deg) {
      for (std::size_t r = 0; r < c.trials; ++r) {
        GraspScenario sc;
        sc.contact_case = GraspCase::ProximalFirst;
        sc.motor_speed = v;
        sc.object_size = size_for_contact_angle(g, {}, deg2rad(d) + PlantConfig{}.proximal_lead);
        sc.seed = derive_seed(c.seed, 2000000 + mp.size() + 10000 * si);
        mp.push_back(simulate_grasp(g, sc));
      }
    }
    EstimatorConfig ec;
    ec.case_prior = GraspCase::ProximalFirst;
    const auto rep4 = evaluate(mp, g, model, ec, o.jobs);
    std::array<double, 3> ft{}, fe{};
    for (const auto& r : rep4.rows) {
      for (int j = 0; j < 3; ++j) {
        ft[j] += r.f_true[j] / static_cast<double>(rep4.rows.size());
        fe[j] += r.f_est[j] / static_cast<double>(rep4.rows.size());
      }
    }
    std::snprintf(line, sizeof line, "%8.0f %8.2f %8.2f %8.2f %8.2f %8.2f %8.2f %8.2f %7.2f%%\n", v, ft[0], ft[1],
                  ft[2], fe[0], fe[1], fe[2], rep4.overall.mean_force_dev, 100 * rep4.overall.mean_rate);
    t4 << line;
    rows += "IV," + detail::format_double(v) + ",all," + std::to_string(rep4.overall.count) + "," +
            detail::format_double(rep4.overall.mean_rate) + "," + detail::format_double(rep4.overall.max_rate) + "\n";
  }
  write_text_file_atomic(dir / "table_switch_angle.txt", t2.str());
  write_text_file_atomic(dir / "table_parallel_force.txt", t3.str());
  write_text_file_atomic(dir / "table_multipoint_force.txt", t4.str());
  write_text_file_atomic(dir / "sweep_rows.csv", rows);
  m.outputs = {"table_switch_angle.txt", "table_parallel_force.txt", "table_multipoint_force.txt", "sweep_rows.csv"};
  if (o.model.empty()) {
    save_model(dir / "model.json", model);
    m.outputs.push_back("model.json");
  }
  m.seeds = {c.seed};
  m.config = sweep_to_json(c, speeds);
  out << t2.str() << "\n" << t3.str() << "\n" << t4.str();
}

int dispatch(const Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  Manifest m;
  m.command = o.command;
  if (o.command == "simulate") {
    cmd_simulate(o, m, out);
  } else if (o.command == "generate") {
    cmd_generate(o, m, out);
  } else if (o.command == "train") {
    cmd_train(o, m, out);
  } else if (o.command == "eval") {
    cmd_eval(o, m, out);
  } else if (o.command == "forces") {
    cmd_forces(o, m, out);
  } else if (o.command == "sweep") {
    cmd_sweep(o, m, out);
  } else {
    throw UsageError("unknown command '" + o.command + "'");
  }
  const fs::path dir = fs::absolute(o.out).lexically_normal();
  m.argv = base_argv(o, dir);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(dir, m, wall);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sensor-less grasp force estimation for an underactuated gripper finger", "gripstat"};
  app.require_subcommand(1);
  Options o;
  std::string seed_text;
  const char* names[][2] = {{"simulate", "simulate one grasp episode"},
                            {"generate", "generate a labelled trace dataset"},
                            {"train", "train the mode-switch model on datasets"},
                            {"eval", "evaluate a model on a dataset"},
                            {"forces", "estimate contact forces for one trace"},
                            {"sweep", "run the accuracy sweeps and write aggregate tables"}};
  for (const auto& [name, help] : names) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--geometry", o.geometry, "finger geometry file (default: reference geometry)");
    sub->add_option("--scenario", o.scenario, "scenario / config file (JSON)");
    sub->add_option("--seed", seed_text, "random seed override");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--jobs", o.jobs, "maximum worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--model", o.model, "model document");
    sub->add_option("--speeds", o.speeds, "comma-separated motor speeds (rpm)");
    sub->add_option("inputs", o.inputs, "dataset directories or trace file");
    sub->callback([&o, n = std::string(name)] { o.command = n; });
  }
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    if (!seed_text.empty()) {
      long long s = 0;
      if (!detail::parse_int(seed_text, s) || s < 0) throw UsageError("--seed must be a non-negative integer");
      o.seed = static_cast<std::uint64_t>(s);
    }
    if (o.speeds.empty() && std::find(args.begin(), args.end(), "--speeds") != args.end()) {
      throw UsageError("empty speed list");
    }
    return dispatch(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const VersionError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CorruptionError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

bool replay_manifest(const fs::path& manifest, const fs::path& new_out, std::string* report) {
  const json m = read_json(manifest);
  std::vector<std::string> argv = m.at("argv").get<std::vector<std::string>>();
  for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
    if (argv[i] == "--out") argv[i + 1] = fs::absolute(new_out).string();
  }
  std::ostringstream sink, errs;
  const int rc = run(argv, sink, errs);
  std::ostringstream r;
  bool ok = rc == kExitOk;
  if (!ok) r << "replay exited with " << rc << ": " << errs.str();
  for (const json& o : m.at("outputs")) {
    const std::string rel = o.at("path").get<std::string>();
    const fs::path p = new_out / rel;
    const std::string want = o.at("sha256").get<std::string>();
    const std::string got = fs::exists(p) ? sha256_file(p) : "missing";
    if (got != want) {
      ok = false;
      r << rel << ": " << got << " != " << want << "\n";
    }
  }
  if (report) *report = r.str();
  return ok;
}

}  // namespace gripstat::cli
