#include "gripstat/geometry.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gripstat/angles.hpp"
#include "gripstat/error.hpp"
#include "text_format.hpp"

namespace gripstat {
namespace {

constexpr std::string_view kUnitsLine = "units: mm rad N*m/rad";

// One entry per serialized key. Each field is a view over 1..3 doubles.
struct FieldSpec {
  const char* name;
  std::function<std::vector<double*>(FingerGeometry&)> slots;
};

const std::vector<FieldSpec>& field_specs() {
  static const std::vector<FieldSpec> specs = {
      {"L1", [](FingerGeometry& g) { return std::vector<double*>{&g.L1}; }},
      {"L2", [](FingerGeometry& g) { return std::vector<double*>{&g.L2}; }},
      {"L3", [](FingerGeometry& g) { return std::vector<double*>{&g.L3}; }},
      {"La", [](FingerGeometry& g) { return std::vector<double*>{&g.La}; }},
      {"Lb", [](FingerGeometry& g) { return std::vector<double*>{&g.Lb}; }},
      {"L1a", [](FingerGeometry& g) { return std::vector<double*>{&g.L1a}; }},
      {"L3C", [](FingerGeometry& g) { return std::vector<double*>{&g.L3C}; }},
      {"epsilon", [](FingerGeometry& g) { return std::vector<double*>{&g.epsilon}; }},
      {"gamma", [](FingerGeometry& g) { return std::vector<double*>{&g.gamma}; }},
      {"Lia", [](FingerGeometry& g) { return std::vector<double*>{&g.Lia[0], &g.Lia[1], &g.Lia[2]}; }},
      {"Lic", [](FingerGeometry& g) { return std::vector<double*>{&g.Lic[0], &g.Lic[1], &g.Lic[2]}; }},
      {"lambda",
       [](FingerGeometry& g) { return std::vector<double*>{&g.lambda[0], &g.lambda[1], &g.lambda[2]}; }},
      {"K2", [](FingerGeometry& g) { return std::vector<double*>{&g.K2}; }},
      {"K3", [](FingerGeometry& g) { return std::vector<double*>{&g.K3}; }},
      {"theta1_range",
       [](FingerGeometry& g) { return std::vector<double*>{&g.theta1_range.min, &g.theta1_range.max}; }},
      {"theta2_range",
       [](FingerGeometry& g) { return std::vector<double*>{&g.theta2_range.min, &g.theta2_range.max}; }},
      {"torque_constant_A", [](FingerGeometry& g) { return std::vector<double*>{&g.torque_constant_A}; }},
      {"screw_gain", [](FingerGeometry& g) { return std::vector<double*>{&g.screw_gain}; }},
      {"spring_preload", [](FingerGeometry& g) { return std::vector<double*>{&g.spring_preload}; }},
      {"Lij", [](FingerGeometry& g) { return std::vector<double*>{&g.Lij}; }},
      {"Lei", [](FingerGeometry& g) { return std::vector<double*>{&g.Lei}; }},
      {"Ldj", [](FingerGeometry& g) { return std::vector<double*>{&g.Ldj}; }},
  };
  return specs;
}

void check_positive(ValidationReport& r, const char* field, double v) {
  if (!std::isfinite(v)) {
    r.violations.push_back({field, "non-finite value"});
  } else if (v <= 0.0) {
    r.violations.push_back({field, "non-positive length"});
  }
}

void check_range(ValidationReport& r, const char* field, const AngleRange& range, const AngleRange& limit,
                 const char* limit_text) {
  if (!std::isfinite(range.min) || !std::isfinite(range.max)) {
    r.violations.push_back({field, "non-finite value"});
    return;
  }
  if (range.min >= range.max) r.violations.push_back({field, "empty range (min >= max)"});
  // 1e-12 rad slack so that degree constants converted at runtime still pass.
  if (range.min < limit.min - 1e-12 || range.max > limit.max + 1e-12) {
    r.violations.push_back({field, std::string("exceeds mechanical limit ") + limit_text});
  }
}

}  // namespace

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].field << ": " << violations[i].message;
  }
  return os.str();
}

ValidationReport validate_geometry(const FingerGeometry& g) {
  ValidationReport r;
  check_positive(r, "L1", g.L1);
  check_positive(r, "L2", g.L2);
  check_positive(r, "L3", g.L3);
  check_positive(r, "La", g.La);
  check_positive(r, "Lb", g.Lb);
  check_positive(r, "L1a", g.L1a);
  check_positive(r, "L3C", g.L3C);
  for (double v : g.Lia) check_positive(r, "Lia", v);
  for (double v : g.Lic) check_positive(r, "Lic", v);
  check_positive(r, "Lij", g.Lij);
  check_positive(r, "Lei", g.Lei);
  check_positive(r, "Ldj", g.Ldj);

  for (const auto& [name, v] : {std::pair{"epsilon", g.epsilon}, std::pair{"gamma", g.gamma}}) {
    if (!std::isfinite(v)) r.violations.push_back({name, "non-finite value"});
  }
  for (double v : g.lambda) {
    if (!std::isfinite(v)) r.violations.push_back({"lambda", "non-finite value"});
  }

  if (!(g.K2 > 0.0) || !std::isfinite(g.K2)) r.violations.push_back({"K2", "stiffness must be positive"});
  if (!(g.K3 > 0.0) || !std::isfinite(g.K3)) r.violations.push_back({"K3", "stiffness must be positive"});
  if (!(g.torque_constant_A > 0.0) || !std::isfinite(g.torque_constant_A)) {
    r.violations.push_back({"torque_constant_A", "must be positive"});
  }
  if (!(g.screw_gain > 0.0) || !std::isfinite(g.screw_gain)) {
    r.violations.push_back({"screw_gain", "must be positive"});
  }
  if (!(g.spring_preload >= 0.0) || !std::isfinite(g.spring_preload)) {
    r.violations.push_back({"spring_preload", "must be non-negative"});
  }

  check_range(r, "theta1_range", g.theta1_range, kTheta1Limit, "[20, 110] deg");
  check_range(r, "theta2_range", g.theta2_range, kTheta2Limit, "90 deg (range [0, 90] deg)");

  if (std::abs(g.Lij - g.L2) > kParallelogramTolerance) {
    r.violations.push_back({"Lij", "parallelogram DEIJ: IJ must equal DE = L2"});
  }
  if (std::abs(g.Lei - g.Ldj) > kParallelogramTolerance) {
    r.violations.push_back({"Lei", "parallelogram DEIJ: EI must equal DJ"});
  }
  return r;
}

const FingerGeometry& reference_geometry() {
  static const FingerGeometry g = [] {
    FingerGeometry r;
    r.L1 = 50.0;
    r.L2 = 40.0;
    r.L3 = 30.0;
    r.La = 30.0;
    r.Lb = 60.0;
    r.L1a = 20.0;
    r.L3C = 10.0;
    r.epsilon = deg2rad(90.0);
    r.gamma = deg2rad(20.0);
    // Home-pose four-bar descriptors (theta1 = 20 deg, parallel mode).
    r.Lia = {20.0, 47.07398127786371, 59.86685465807719};
    r.Lic = {83.44232906395854, 49.515190564398786, 10.0};
    r.lambda = {1.5707963267948966, 0.061622754720599006, -0.6683926952479327};
    // 0.019 N*m/deg per torsion spring.
    r.K2 = 0.019 * 180.0 / kPi;
    r.K3 = 0.019 * 180.0 / kPi;
    r.theta1_range = {deg2rad(20.0), deg2rad(90.0)};
    r.theta2_range = {0.0, deg2rad(90.0)};
    r.torque_constant_A = 0.12;
    // 41.76 N*m output from a 1.2 N*m motor.
    r.screw_gain = 41.76 / 1.2;
    r.spring_preload = deg2rad(10.0);
    r.Lij = 40.0;
    r.Lei = 8.0;
    r.Ldj = 8.0;
    return r;
  }();
  return g;
}

std::string serialize_geometry(const FingerGeometry& g) {
  FingerGeometry copy = g;
  std::string out;
  out += kUnitsLine;
  out += '\n';
  for (const auto& spec : field_specs()) {
    out += spec.name;
    out += " = ";
    const auto slots = spec.slots(copy);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (i) out += ", ";
      out += detail::format_double(*slots[i]);
    }
    out += '\n';
  }
  return out;
}

FingerGeometry load_geometry(std::string_view text) {
  std::map<std::string, std::vector<double>, std::less<>> values;
  bool saw_units = false;
  int line_no = 0;
  for (std::string_view line : detail::split_lines(text)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (line.starts_with("units:")) {
      if (detail::trim(line) != kUnitsLine) {
        throw ParseError("line " + std::to_string(line_no) + ": unsupported units header '" +
                         std::string(line) + "' (expected '" + std::string(kUnitsLine) + "')");
      }
      saw_units = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(detail::trim(line.substr(0, eq)));
    if (values.contains(key)) throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    std::vector<double> nums;
    for (std::string_view item : detail::split(line.substr(eq + 1), ',')) {
      double v = 0.0;
      if (!detail::parse_double(detail::trim(item), v)) {
        throw ParseError("line " + std::to_string(line_no) + ": bad number '" + std::string(item) + "' for '" +
                         key + "'");
      }
      nums.push_back(v);
    }
    values.emplace(std::move(key), std::move(nums));
  }
  if (!saw_units) throw ParseError("missing 'units:' header line");

  FingerGeometry g;
  for (const auto& spec : field_specs()) {
    auto it = values.find(spec.name);
    if (it == values.end()) throw ParseError(std::string("missing field '") + spec.name + "'");
    auto slots = spec.slots(g);
    if (it->second.size() != slots.size()) {
      throw ParseError(std::string("field '") + spec.name + "' expects " + std::to_string(slots.size()) +
                       " value(s), got " + std::to_string(it->second.size()));
    }
    for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = it->second[i];
    values.erase(it);
  }
  if (!values.empty()) throw ParseError("unknown field '" + values.begin()->first + "'");

  const ValidationReport report = validate_geometry(g);
  if (!report.ok()) throw ValidationError("inconsistent geometry: " + report.summary());
  return g;
}

FingerGeometry load_geometry_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open geometry file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_geometry(ss.str());
}

}  // namespace gripstat
