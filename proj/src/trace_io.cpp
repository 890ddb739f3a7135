#include "gripstat/trace_io.hpp"

#include <fstream>
#include <sstream>

#include "gripstat/error.hpp"
#include "json.hpp"
#include "text_format.hpp"

namespace gripstat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kTraceHeader = "t_s,current_A,position_rad,velocity_rpm,label";
constexpr int kDatasetFormat = 1;

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_get(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

json scenario_json(const GraspScenario& sc) {
  json j;
  j["object_size_mm"] = sc.object_size;
  j["motor_speed_rpm"] = sc.motor_speed;
  j["contact_case"] = std::string(to_string(sc.contact_case));
  j["target_force_N"] = sc.target_force;
  j["seed"] = sc.seed;
  if (sc.k) j["k_mm"] = *sc.k;
  if (sc.wrap_theta3) j["wrap_theta3_rad"] = *sc.wrap_theta3;
  if (sc.theta2_stop) j["theta2_stop_rad"] = *sc.theta2_stop;
  return j;
}

json truth_json(const TraceTruth& t) {
  json j;
  j["grasp_case"] = std::string(to_string(t.grasp_case));
  j["object_size_mm"] = t.object_size;
  j["motor_speed_rpm"] = t.motor_speed;
  j["target_force_N"] = t.target_force;
  j["seed"] = t.seed;
  j["switch_index"] = opt(t.switch_index);
  j["contact_index"] = opt(t.contact_index);
  j["stall_index"] = opt(t.stall_index);
  j["theta1_switch_rad"] = t.theta1_switch;
  j["onset"] = {{"theta1", t.onset.theta1},
                {"theta2", t.onset.theta2},
                {"theta3", t.onset.theta3},
                {"theta2_stop", opt(t.onset.theta2_stop)}};
  j["k_mm"] = t.k;
  j["no_load_current_A"] = t.no_load_current;
  j["theta1"] = t.theta1;
  j["theta2"] = t.theta2;
  j["theta3"] = t.theta3;
  j["tau_a"] = t.tau_a;
  j["delta_theta2"] = t.delta_theta2;
  j["delta_theta3"] = t.delta_theta3;
  j["mask"] = t.mask;
  j["f1"] = t.f1;
  j["f2"] = t.f2;
  j["f3"] = t.f3;
  j["impulses"] = t.impulses;
  return j;
}

TraceTruth truth_from_json(const json& j) {
  TraceTruth t;
  t.grasp_case = grasp_case_from_string(j.at("grasp_case").get<std::string>());
  t.object_size = j.at("object_size_mm").get<double>();
  t.motor_speed = j.at("motor_speed_rpm").get<double>();
  t.target_force = j.at("target_force_N").get<double>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.switch_index = opt_get<std::size_t>(j, "switch_index");
  t.contact_index = opt_get<std::size_t>(j, "contact_index");
  t.stall_index = opt_get<std::size_t>(j, "stall_index");
  t.theta1_switch = j.at("theta1_switch_rad").get<double>();
  const json& on = j.at("onset");
  t.onset.theta1 = on.at("theta1").get<double>();
  t.onset.theta2 = on.at("theta2").get<double>();
  t.onset.theta3 = on.at("theta3").get<double>();
  t.onset.theta2_stop = opt_get<double>(on, "theta2_stop");
  t.k = j.at("k_mm").get<std::array<double, 3>>();
  t.no_load_current = j.at("no_load_current_A").get<double>();
  t.theta1 = j.at("theta1").get<std::vector<double>>();
  t.theta2 = j.at("theta2").get<std::vector<double>>();
  t.theta3 = j.at("theta3").get<std::vector<double>>();
  t.tau_a = j.at("tau_a").get<std::vector<double>>();
  t.delta_theta2 = j.at("delta_theta2").get<std::vector<double>>();
  t.delta_theta3 = j.at("delta_theta3").get<std::vector<double>>();
  t.mask = j.at("mask").get<std::vector<std::uint8_t>>();
  t.f1 = j.at("f1").get<std::vector<double>>();
  t.f2 = j.at("f2").get<std::vector<double>>();
  t.f3 = j.at("f3").get<std::vector<double>>();
  t.impulses = j.at("impulses").get<std::vector<std::size_t>>();
  return t;
}

}  // namespace

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_trace_csv(const fs::path& path, const CurrentTrace& tr) {
  std::string out = kTraceHeader;
  out += '\n';
  const bool labelled = tr.labels.size() == tr.size();
  for (std::size_t i = 0; i < tr.size(); ++i) {
    out += detail::format_double(tr.t[i]);
    out += ',';
    out += detail::format_double(tr.current[i]);
    out += ',';
    out += detail::format_double(tr.position[i]);
    out += ',';
    out += detail::format_double(tr.velocity[i]);
    out += ',';
    if (labelled) out += std::to_string(tr.labels[i]);
    out += '\n';
  }
  write_text_file_atomic(path, out);
}

CurrentTrace read_trace_csv(const fs::path& path) {
  const std::string text = read_text_file(path);
  const auto lines = detail::split_lines(text);
  if (lines.empty() || !detail::trim(lines[0]).starts_with(kTraceHeader)) {
    throw ParseError(path.string() + ": expected header '" + std::string(kTraceHeader) + "'");
  }
  CurrentTrace tr;
  bool any_label = false;
  bool any_blank = false;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto line = detail::trim(lines[n]);
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    auto bad = [&](const std::string& why) {
      return ParseError(path.string() + ":" + std::to_string(n + 1) + ": " + why);
    };
    if (f.size() < 5) throw bad("expected 5 columns");
    double v[4];
    for (int c = 0; c < 4; ++c) {
      if (!detail::parse_double(detail::trim(f[c]), v[c])) throw bad("bad number '" + std::string(f[c]) + "'");
    }
    tr.t.push_back(v[0]);
    tr.current.push_back(v[1]);
    tr.position.push_back(v[2]);
    tr.velocity.push_back(v[3]);
    const auto lab = detail::trim(f[4]);
    if (lab.empty()) {
      any_blank = true;
    } else {
      long long l = 0;
      if (!detail::parse_int(lab, l) || (l != 0 && l != 1)) throw bad("label must be 0 or 1");
      tr.labels.push_back(static_cast<int>(l));
      any_label = true;
    }
  }
  if (any_label && any_blank) throw ParseError(path.string() + ": labels present on some rows only");
  if (tr.size() >= 2) tr.sample_rate = 1.0 / (tr.t[1] - tr.t[0]);
  return tr;
}

std::string trace_metadata_json(const CurrentTrace& tr, const GraspScenario* sc) {
  json j;
  j["format"] = "gripstat-trace";
  j["version"] = 1;
  j["sample_rate_Hz"] = tr.sample_rate;
  j["samples"] = tr.size();
  if (sc) j["scenario"] = scenario_json(*sc);
  if (tr.truth) j["truth"] = truth_json(*tr.truth);
  return j.dump();
}

fs::path save_trace(const fs::path& dir, const std::string& stem, const CurrentTrace& tr, const GraspScenario* sc) {
  fs::create_directories(dir);
  const fs::path csv = dir / (stem + ".csv");
  write_trace_csv(csv, tr);
  write_text_file_atomic(dir / (stem + ".json"), trace_metadata_json(tr, sc));
  return csv;
}

CurrentTrace load_trace(const fs::path& csv) {
  CurrentTrace tr = read_trace_csv(csv);
  fs::path meta = csv;
  meta.replace_extension(".json");
  if (fs::exists(meta)) {
    try {
      const json j = json::parse(read_text_file(meta));
      tr.sample_rate = j.at("sample_rate_Hz").get<double>();
      if (j.contains("truth")) tr.truth = truth_from_json(j.at("truth"));
    } catch (const json::exception& e) {
      throw ParseError(meta.string() + ": " + e.what());
    }
  }
  return tr;
}

void save_dataset(const fs::path& dir, const std::vector<DatasetEntry>& entries, const DatasetGrid& grid) {
  fs::create_directories(dir);
  json m;
  m["format"] = "gripstat-dataset";
  m["version"] = kDatasetFormat;
  m["grid"] = {{"contact_theta1_rad", grid.contact_theta1},
               {"speeds_rpm", grid.speeds},
               {"traces_per_cell", grid.traces_per_cell},
               {"contact_case", std::string(to_string(grid.contact_case))},
               {"target_force_N", grid.target_force},
               {"base_seed", grid.base_seed}};
  json list = json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const DatasetEntry& e = entries[i];
    char stem[64];
    std::snprintf(stem, sizeof stem, "trace_%05zu", i);
    save_trace(dir, stem, e.trace, &e.scenario);
    list.push_back({{"file", std::string(stem) + ".csv"},
                    {"object_index", e.object_index},
                    {"speed_index", e.speed_index},
                    {"repeat", e.repeat},
                    {"contact_theta1_rad", grid.contact_theta1.at(e.object_index)},
                    {"motor_speed_rpm", e.scenario.motor_speed},
                    {"seed", e.scenario.seed}});
  }
  m["entries"] = list;
  write_text_file_atomic(dir / "dataset.json", m.dump(1));
}

std::vector<DatasetRecord> load_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "dataset.json";
  std::vector<DatasetRecord> out;
  try {
    const json m = json::parse(read_text_file(mpath));
    if (m.at("format") != "gripstat-dataset") throw ParseError(mpath.string() + ": not a dataset manifest");
    if (m.at("version").get<int>() != kDatasetFormat) {
      throw VersionError(mpath.string() + ": dataset version " + std::to_string(m.at("version").get<int>()) +
                         ", reader supports " + std::to_string(kDatasetFormat));
    }
    for (const json& e : m.at("entries")) {
      DatasetRecord r;
      r.file = dir / e.at("file").get<std::string>();
      r.object_index = e.at("object_index").get<std::size_t>();
      r.speed_index = e.at("speed_index").get<std::size_t>();
      r.repeat = e.at("repeat").get<std::size_t>();
      r.contact_theta1 = e.at("contact_theta1_rad").get<double>();
      r.motor_speed = e.at("motor_speed_rpm").get<double>();
      r.trace = load_trace(r.file);
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ParseError(mpath.string() + ": " + e.what());
  }
  return out;
}

}  // namespace gripstat
