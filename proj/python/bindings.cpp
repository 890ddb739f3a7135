#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "gripstat/cli.hpp"
#include "gripstat/error.hpp"
#include "gripstat/estimator.hpp"
#include "gripstat/geometry.hpp"
#include "gripstat/kinematics.hpp"
#include "gripstat/mode_detector.hpp"
#include "gripstat/plant_sim.hpp"
#include "gripstat/statics.hpp"
#include "gripstat/trace_io.hpp"

namespace py = pybind11;
using namespace gripstat;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Grasp mode detection and contact-force estimation for a linkage finger.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NoSolutionError>(m, "NoSolutionError", base.ptr());
  py::register_exception<AmbiguityError>(m, "AmbiguityError", base.ptr());
  py::register_exception<LimitError>(m, "LimitError", base.ptr());
  py::register_exception<DegeneracyError>(m, "DegeneracyError", base.ptr());
  py::register_exception<SingularityError>(m, "SingularityError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<VersionError>(m, "VersionError", base.ptr());
  py::register_exception<CorruptionError>(m, "CorruptionError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());

  py::enum_<GraspCase>(m, "GraspCase")
      .value("DistalFirst", GraspCase::DistalFirst)
      .value("MiddleFirst", GraspCase::MiddleFirst)
      .value("ProximalFirst", GraspCase::ProximalFirst)
      .value("NoContact", GraspCase::NoContact);

  py::class_<FingerGeometry>(m, "FingerGeometry")
      .def_readonly("L1", &FingerGeometry::L1)
      .def_readonly("L2", &FingerGeometry::L2)
      .def_readonly("L3", &FingerGeometry::L3)
      .def_readonly("K2", &FingerGeometry::K2)
      .def_readonly("K3", &FingerGeometry::K3)
      .def("serialize", [](const FingerGeometry& g) { return serialize_geometry(g); })
      .def("__eq__", [](const FingerGeometry& a, const FingerGeometry& b) { return a == b; });
  m.def("reference_geometry", &reference_geometry, py::return_value_policy::copy);
  m.def("load_geometry", [](const std::string& text) { return load_geometry(text); });
  m.def("load_geometry_file", &load_geometry_file);

  py::class_<PlanarPoint>(m, "PlanarPoint").def_readonly("x", &PlanarPoint::x).def_readonly("y", &PlanarPoint::y);
  py::class_<JointState>(m, "JointState")
      .def_readonly("theta_a", &JointState::theta_a)
      .def_readonly("theta1", &JointState::theta1)
      .def_readonly("theta2", &JointState::theta2)
      .def_readonly("theta3", &JointState::theta3);
  m.def("make_joint_state", &make_joint_state, py::arg("geometry"), py::arg("theta1"), py::arg("theta2"),
        py::arg("theta3"));
  m.def("actuation_from_joints", &actuation_from_joints, py::arg("geometry"), py::arg("theta1"), py::arg("theta2"),
        py::arg("theta3"));
  m.def("parallel_theta1", &parallel_theta1, py::arg("geometry"), py::arg("theta_a"));
  m.def(
      "contact_forces",
      [](const Eigen::Matrix3d& J, const Eigen::Vector3d& tau_prime, std::array<bool, 3> mask) {
        return contact_forces(J, tau_prime, mask);
      },
      py::arg("J"), py::arg("tau_prime"), py::arg("mask") = std::array<bool, 3>{true, true, true});

  py::class_<GraspScenario>(m, "GraspScenario")
      .def(py::init<>())
      .def_readwrite("object_size", &GraspScenario::object_size)
      .def_readwrite("motor_speed", &GraspScenario::motor_speed)
      .def_readwrite("contact_case", &GraspScenario::contact_case)
      .def_readwrite("target_force", &GraspScenario::target_force)
      .def_readwrite("seed", &GraspScenario::seed);

  py::class_<TraceTruth>(m, "TraceTruth")
      .def_readonly("grasp_case", &TraceTruth::grasp_case)
      .def_readonly("switch_index", &TraceTruth::switch_index)
      .def_readonly("stall_index", &TraceTruth::stall_index)
      .def_readonly("theta1_switch", &TraceTruth::theta1_switch)
      .def_readonly("f1", &TraceTruth::f1)
      .def_readonly("f2", &TraceTruth::f2)
      .def_readonly("f3", &TraceTruth::f3);

  py::class_<CurrentTrace>(m, "CurrentTrace")
      .def_readonly("sample_rate", &CurrentTrace::sample_rate)
      .def_readonly("t", &CurrentTrace::t)
      .def_readonly("current", &CurrentTrace::current)
      .def_readonly("position", &CurrentTrace::position)
      .def_readonly("velocity", &CurrentTrace::velocity)
      .def_readonly("labels", &CurrentTrace::labels)
      .def_readonly("truth", &CurrentTrace::truth)
      .def("__len__", &CurrentTrace::size);

  m.def("simulate_grasp", [](const FingerGeometry& g, const GraspScenario& sc) { return simulate_grasp(g, sc); },
        py::arg("geometry"), py::arg("scenario"));
  m.def("size_for_contact_angle",
        [](const FingerGeometry& g, double theta1) { return size_for_contact_angle(g, PlantConfig{}, theta1); },
        py::arg("geometry"), py::arg("theta1"));
  m.def("load_trace", &load_trace, py::arg("csv_path"));
  m.def("write_trace_csv", &write_trace_csv, py::arg("path"), py::arg("trace"));

  py::class_<ModeModel>(m, "ModeModel");
  m.def("load_model", &load_model, py::arg("path"));
  m.def("save_model", &save_model, py::arg("path"), py::arg("model"));

  py::class_<EstimatorConfig>(m, "EstimatorConfig")
      .def(py::init<>())
      .def_readwrite("case_prior", &EstimatorConfig::case_prior)
      .def_readwrite("use_compensation", &EstimatorConfig::use_compensation);

  py::class_<ForceEstimate>(m, "ForceEstimate")
      .def_readonly("grasp_case", &ForceEstimate::grasp_case)
      .def_readonly("switch_index", &ForceEstimate::switch_index)
      .def_readonly("stall_index", &ForceEstimate::stall_index)
      .def_readonly("theta1_switch", &ForceEstimate::theta1_switch)
      .def_readonly("steady_force", &ForceEstimate::steady_force)
      .def_readonly("flags", &ForceEstimate::flags)
      .def_property_readonly("modes",
                             [](const ForceEstimate& e) {
                               std::vector<int> v;
                               for (const auto& s : e.samples) v.push_back(s.mode);
                               return v;
                             })
      .def_property_readonly("forces", [](const ForceEstimate& e) {
        Eigen::MatrixX3d f(static_cast<Eigen::Index>(e.samples.size()), 3);
        for (std::size_t k = 0; k < e.samples.size(); ++k) {
          for (int i = 0; i < 3; ++i) f(static_cast<Eigen::Index>(k), i) = e.samples[k].f[i];
        }
        return f;
      });
  m.def("estimate", &estimate, py::arg("trace"), py::arg("geometry"), py::arg("model"),
        py::arg("config") = EstimatorConfig{});

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int rc = cli::run(args, out, err);
        return py::make_tuple(rc, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
