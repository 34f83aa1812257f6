// pybind11 bindings: the library's main operations with numpy-friendly
// types.  Maps copy across the boundary; Eigen vectors/matrices convert to
// and from numpy arrays.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fourrf/circuit.hpp"
#include "fourrf/constants.hpp"
#include "fourrf/dcsolve.hpp"
#include "fourrf/dynamics.hpp"
#include "fourrf/efield.hpp"
#include "fourrf/errors.hpp"
#include "fourrf/geometry.hpp"
#include "fourrf/pseudo.hpp"
#include "fourrf/thermo.hpp"

namespace py = pybind11;
using namespace fourrf;

namespace {

Eigen::MatrixX3d stack(const std::vector<Vec3>& v) {
  Eigen::MatrixX3d m(v.size(), 3);
  for (std::size_t i = 0; i < v.size(); ++i) m.row(i) = v[i].transpose();
  return m;
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "four-rf-electrode surface trap toolkit: analytic electrostatics, "
            "pseudopotential and mode analysis, dc solving, resonator circuit, "
            "trajectories, sideband thermometry";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception<ModelDomainError>(m, "ModelDomainError", PyExc_ValueError);

  // --- constants / ion -----------------------------------------------------
  py::class_<Ion>(m, "Ion")
      .def(py::init<double, double>(), py::arg("charge"), py::arg("mass"))
      .def_readwrite("charge", &Ion::charge)
      .def_readwrite("mass", &Ion::mass)
      .def_static("ca40", &Ion::ca40);
  m.def("omega_from_MHz", &omega_from_MHz, py::arg("f_MHz"));
  m.def("MHz_from_omega", &MHz_from_omega, py::arg("omega"));

  // --- geometry --------------------------------------------------------
  py::enum_<Role>(m, "Role")
      .value("rf_plus", Role::rf_plus)
      .value("rf_minus", Role::rf_minus)
      .value("dc", Role::dc)
      .value("ground", Role::ground);
  py::class_<Rect>(m, "Rect")
      .def(py::init([](double x0, double x1, double y0, double y1) {
             return Rect{x0, x1, y0, y1};
           }),
           py::arg("x_min"), py::arg("x_max"), py::arg("y_min"), py::arg("y_max"))
      .def_readwrite("x_min", &Rect::x_min)
      .def_readwrite("x_max", &Rect::x_max)
      .def_readwrite("y_min", &Rect::y_min)
      .def_readwrite("y_max", &Rect::y_max)
      .def("area", &Rect::area);
  py::class_<Electrode>(m, "Electrode")
      .def(py::init<>())
      .def_readwrite("name", &Electrode::name)
      .def_readwrite("role", &Electrode::role)
      .def_readwrite("rects", &Electrode::rects);
  py::class_<ElectrodeLayout>(m, "ElectrodeLayout")
      .def(py::init<>())
      .def_readwrite("electrodes", &ElectrodeLayout::electrodes)
      .def("names_with_role", &ElectrodeLayout::names_with_role)
      .def("__len__",
           [](const ElectrodeLayout& l) { return l.electrodes.size(); });
  m.def("reference_layout", [] { return reference_layout(); },
        "built-in four-rf-square vertical-linear layout");
  m.def("load_layout_file", &load_layout_file, py::arg("path"));
  m.def("save_layout_file", &save_layout_file, py::arg("path"),
        py::arg("layout"));
  m.def("validate_layout",
        [](const ElectrodeLayout& l) { return validate(l).summary(); });

  // --- efield ----------------------------------------------------------
  py::class_<FieldEval>(m, "FieldEval")
      .def_readonly("potential", &FieldEval::potential)
      .def_readonly("gradient", &FieldEval::gradient)
      .def_readonly("hessian", &FieldEval::hessian)
      .def("field", &FieldEval::field);
  py::class_<PhasorEval>(m, "PhasorEval")
      .def_readonly("potential", &PhasorEval::potential)
      .def_readonly("gradient", &PhasorEval::gradient)
      .def_readonly("hessian", &PhasorEval::hessian)
      .def("field", &PhasorEval::field);
  py::class_<FieldBasis>(m, "FieldBasis")
      .def(py::init<ElectrodeLayout>(), py::arg("layout"))
      .def_property_readonly("layout", &FieldBasis::layout)
      .def("potential", &FieldBasis::potential, py::arg("electrode"),
           py::arg("point"))
      .def("gradient", &FieldBasis::gradient, py::arg("electrode"),
           py::arg("point"))
      .def("hessian", &FieldBasis::hessian, py::arg("electrode"),
           py::arg("point"))
      .def("superpose_dc",
           [](const FieldBasis& b, const std::map<std::string, double>& v,
              const Vec3& p) { return b.superpose(v, p, 2); },
           py::arg("voltages"), py::arg("point"))
      .def("superpose_rf",
           [](const FieldBasis& b, const std::map<std::string, cplx>& v,
              const Vec3& p) { return b.superpose(v, p, 2); },
           py::arg("phasors"), py::arg("point"));

  // --- pseudo ----------------------------------------------------------
  py::class_<DriveConfig>(m, "DriveConfig")
      .def(py::init<>())
      .def_readwrite("rf_omega", &DriveConfig::rf_omega)
      .def_readwrite("rf_amplitudes", &DriveConfig::rf_amplitudes)
      .def_readwrite("dc_voltages", &DriveConfig::dc_voltages)
      .def_readwrite("ion", &DriveConfig::ion);
  m.def("matched_drive", &matched_drive, py::arg("layout"),
        py::arg("amplitude"), py::arg("rf_omega"),
        py::arg("ion") = Ion::ca40());
  m.def("pseudopotential", &pseudopotential, py::arg("basis"),
        py::arg("drive"), py::arg("point"));
  py::class_<PseudoEval>(m, "PseudoEval")
      .def_readonly("value", &PseudoEval::value)
      .def_readonly("gradient", &PseudoEval::gradient)
      .def_readonly("hessian", &PseudoEval::hessian);
  m.def("pseudo_eval", &pseudo_eval, py::arg("basis"), py::arg("drive"),
        py::arg("point"));
  m.def("total_potential", &total_potential, py::arg("basis"),
        py::arg("drive"), py::arg("point"));
  m.def("find_rf_null", &find_rf_null, py::arg("basis"), py::arg("drive"),
        py::arg("z"), py::arg("guess") = Eigen::Vector2d::Zero(),
        py::arg("tol") = 1e-6, py::arg("max_iter") = 80);
  m.def("planar_rf_depth", &planar_rf_depth, py::arg("basis"),
        py::arg("drive"), py::arg("z"), py::arg("n_directions") = 16);

  py::class_<AxisMode>(m, "AxisMode")
      .def_readonly("omega", &AxisMode::omega)
      .def_readonly("axis", &AxisMode::axis)
      .def_readonly("mathieu_q", &AxisMode::mathieu_q)
      .def_readonly("mathieu_a", &AxisMode::mathieu_a)
      .def_readonly("stable", &AxisMode::stable)
      .def_readonly("depth", &AxisMode::depth);
  py::class_<TrapSolution>(m, "TrapSolution")
      .def_readonly("equilibrium", &TrapSolution::equilibrium)
      .def_readonly("total_hessian", &TrapSolution::total_hessian)
      .def_readonly("x_like", &TrapSolution::x_like)
      .def_readonly("y_like", &TrapSolution::y_like)
      .def_readonly("vertical", &TrapSolution::vertical)
      .def_readonly("warnings", &TrapSolution::warnings)
      .def("mode", &TrapSolution::mode, py::arg("i"),
           py::return_value_policy::reference_internal);
  py::class_<ModeAnalysisOptions>(m, "ModeAnalysisOptions")
      .def(py::init<>())
      .def_readwrite("compute_depth", &ModeAnalysisOptions::compute_depth)
      .def_readwrite("stationarity_tol", &ModeAnalysisOptions::stationarity_tol);
  m.def("mode_analysis", &mode_analysis, py::arg("basis"), py::arg("drive"),
        py::arg("equilibrium"), py::arg("options") = ModeAnalysisOptions{});

  py::enum_<TiltPlane>(m, "TiltPlane")
      .value("xz", TiltPlane::xz)
      .value("yz", TiltPlane::yz);
  py::class_<OperatingPointSpec>(m, "OperatingPointSpec")
      .def(py::init<>())
      .def_readwrite("height", &OperatingPointSpec::height)
      .def_readwrite("rf_omega", &OperatingPointSpec::rf_omega)
      .def_readwrite("vertical_freq", &OperatingPointSpec::vertical_freq)
      .def_readwrite("splitting", &OperatingPointSpec::splitting)
      .def_readwrite("tilt", &OperatingPointSpec::tilt)
      .def_readwrite("plane", &OperatingPointSpec::plane)
      .def_readwrite("planar_freq", &OperatingPointSpec::planar_freq)
      .def_readwrite("ion", &OperatingPointSpec::ion)
      .def_readwrite("dc_bounds", &OperatingPointSpec::dc_bounds);
  py::class_<OperatingPoint>(m, "OperatingPoint")
      .def_readonly("drive", &OperatingPoint::drive)
      .def_readonly("dc", &OperatingPoint::dc)
      .def_readonly("modes", &OperatingPoint::modes)
      .def_readonly("rf_amplitude", &OperatingPoint::rf_amplitude);
  m.def("plan_operating_point", &plan_operating_point, py::arg("basis"),
        py::arg("spec") = OperatingPointSpec{});
  m.def("rf_amplitude_for_target", &rf_amplitude_for_target, py::arg("basis"),
        py::arg("height"), py::arg("planar_freq"), py::arg("tilt") = 0.0,
        py::arg("base") = OperatingPointSpec{});

  // --- dcsolve ---------------------------------------------------------
  py::class_<DcTarget>(m, "DcTarget")
      .def(py::init<>())
      .def_readwrite("point", &DcTarget::point)
      .def_readwrite("field", &DcTarget::field)
      .def_readwrite("hessian", &DcTarget::hessian)
      .def_readwrite("weights", &DcTarget::weights)
      .def_readwrite("bounds", &DcTarget::bounds)
      .def_readwrite("ridge", &DcTarget::ridge);
  py::class_<DcSolution>(m, "DcSolution")
      .def_readonly("voltages", &DcSolution::voltages)
      .def_readonly("residual_norm", &DcSolution::residual_norm)
      .def_readonly("residual_rel", &DcSolution::residual_rel)
      .def_readonly("achieved_field", &DcSolution::achieved_field)
      .def_readonly("achieved_hessian", &DcSolution::achieved_hessian)
      .def_readonly("rank", &DcSolution::rank)
      .def_readonly("bounded", &DcSolution::bounded)
      .def_readonly("clipped", &DcSolution::clipped);
  m.def("solve_dc", &solve_dc, py::arg("basis"), py::arg("target"));
  m.def("tilt_target", &tilt_target, py::arg("hessian"), py::arg("angle"),
        py::arg("plane"));
  m.def("equilibrium_on_null", &equilibrium_on_null, py::arg("basis"),
        py::arg("dc_voltages"), py::arg("ion"), py::arg("z_lo"),
        py::arg("z_hi"));

  // --- dynamics --------------------------------------------------------
  py::class_<ProbeGeometry>(m, "ProbeGeometry")
      .def(py::init<>())
      .def_readwrite("k", &ProbeGeometry::k)
      .def("wavenumber", &ProbeGeometry::wavenumber)
      .def_static("vertical_729", &ProbeGeometry::vertical_729)
      .def_static("in_plane_729", &ProbeGeometry::in_plane_729,
                  py::arg("azimuth_rad") = 0.0);
  m.def("modulation_index", &modulation_index, py::arg("residual_field"),
        py::arg("ion"), py::arg("rf_omega"), py::arg("probe"));
  m.def("beta_to_sideband_ratio", &beta_to_sideband_ratio, py::arg("beta"));
  m.def("sideband_ratio_to_beta", &sideband_ratio_to_beta, py::arg("ratio"));

  py::enum_<StepperKind>(m, "StepperKind")
      .value("adaptive", StepperKind::adaptive)
      .value("leapfrog", StepperKind::leapfrog);
  py::class_<IntegrateOptions>(m, "IntegrateOptions")
      .def(py::init<>())
      .def_readwrite("kind", &IntegrateOptions::kind)
      .def_readwrite("rel_tol", &IntegrateOptions::rel_tol)
      .def_readwrite("abs_tol_pos", &IntegrateOptions::abs_tol_pos)
      .def_readwrite("abs_tol_vel", &IntegrateOptions::abs_tol_vel)
      .def_readwrite("fixed_dt", &IntegrateOptions::fixed_dt)
      .def_readwrite("sample_dt", &IntegrateOptions::sample_dt);
  py::class_<Trajectory>(m, "Trajectory")
      .def_property_readonly("t",
                             [](const Trajectory& tr) {
                               return Eigen::Map<const Eigen::VectorXd>(
                                          tr.t.data(), tr.t.size())
                                   .eval();
                             })
      .def_property_readonly(
          "position", [](const Trajectory& tr) { return stack(tr.position); })
      .def_property_readonly(
          "velocity", [](const Trajectory& tr) { return stack(tr.velocity); })
      .def_readonly("n_steps", &Trajectory::n_steps)
      .def("__len__", &Trajectory::size);
  m.def("integrate_motion",
        [](const FieldBasis& basis, const DriveConfig& drive, const Vec3& x0,
           const Vec3& v0, double duration, const IntegrateOptions& opts) {
          return integrate_motion(basis, drive, x0, v0, duration, opts);
        },
        py::arg("basis"), py::arg("drive"), py::arg("x0"), py::arg("v0"),
        py::arg("duration"), py::arg("options") = IntegrateOptions{});

  // --- circuit ---------------------------------------------------------
  py::class_<ArmComponents>(m, "ArmComponents")
      .def(py::init<>())
      .def_readwrite("c1", &ArmComponents::c1)
      .def_readwrite("l1", &ArmComponents::l1)
      .def_readwrite("c2", &ArmComponents::c2)
      .def_readwrite("c3", &ArmComponents::c3)
      .def_readwrite("cv", &ArmComponents::cv)
      .def_readwrite("c_trap", &ArmComponents::c_trap)
      .def_readwrite("l_sec", &ArmComponents::l_sec)
      .def_readwrite("r_loss", &ArmComponents::r_loss);
  py::class_<ResonatorNetwork>(m, "ResonatorNetwork")
      .def(py::init<>())
      .def_readwrite("plus", &ResonatorNetwork::plus)
      .def_readwrite("minus", &ResonatorNetwork::minus)
      .def_readwrite("source_amplitude", &ResonatorNetwork::source_amplitude)
      .def_readwrite("enforce_trimmer_range",
                     &ResonatorNetwork::enforce_trimmer_range)
      .def_static("reference_defaults", &ResonatorNetwork::reference_defaults)
      .def("validate", &ResonatorNetwork::validate);
  py::class_<ArmResponse>(m, "ArmResponse")
      .def_readonly("electrode", &ArmResponse::electrode)
      .def_readonly("pickoff", &ArmResponse::pickoff)
      .def_readonly("resonance", &ArmResponse::resonance)
      .def_readonly("loaded_q", &ArmResponse::loaded_q);
  py::class_<MismatchResult>(m, "MismatchResult")
      .def_readonly("amplitude_ratio", &MismatchResult::amplitude_ratio)
      .def_readonly("phase_error", &MismatchResult::phase_error)
      .def_readonly("common_mode", &MismatchResult::common_mode);
  m.def("solve_network", &solve_network, py::arg("network"), py::arg("omega"));
  m.def("mismatch", &mismatch, py::arg("network"), py::arg("omega"));
  m.def("combined_resonance", &combined_resonance, py::arg("network"));
  py::class_<BetaSweepPoint>(m, "BetaSweepPoint")
      .def_readonly("cv", &BetaSweepPoint::cv)
      .def_readonly("resonance_hz", &BetaSweepPoint::resonance_hz)
      .def_readonly("amplitude_ratio", &BetaSweepPoint::amplitude_ratio)
      .def_readonly("phase_error_rad", &BetaSweepPoint::phase_error_rad)
      .def_readonly("beta", &BetaSweepPoint::beta);
  m.def("beta_vs_resonance", &beta_vs_resonance, py::arg("network"),
        py::arg("basis"), py::arg("drive_template"), py::arg("trap_point"),
        py::arg("probe"), py::arg("cv_plus_values"));
  m.def("load_netlist", &load_netlist, py::arg("path"));
  m.def("save_netlist", &save_netlist, py::arg("network"), py::arg("path"));

  // --- thermo ----------------------------------------------------------
  py::enum_<Sideband>(m, "Sideband")
      .value("red", Sideband::red)
      .value("carrier", Sideband::carrier)
      .value("blue", Sideband::blue);
  m.def("lamb_dicke", &lamb_dicke, py::arg("ion"), py::arg("probe"),
        py::arg("mode_omega"), py::arg("mode_axis") = Vec3(0, 0, 1));
  py::class_<SidebandScan>(m, "SidebandScan")
      .def(py::init<>())
      .def_readwrite("mode_omega", &SidebandScan::mode_omega)
      .def_readwrite("eta", &SidebandScan::eta)
      .def_readwrite("rabi_carrier", &SidebandScan::rabi_carrier)
      .def_readwrite("probe_time", &SidebandScan::probe_time)
      .def_readwrite("detunings", &SidebandScan::detunings)
      .def_readwrite("shots", &SidebandScan::shots)
      .def_static("typical", &SidebandScan::typical, py::arg("ion") = Ion::ca40());
  m.def("excitation_probability", &excitation_probability, py::arg("scan"),
        py::arg("sideband"), py::arg("nbar"), py::arg("detuning"));
  py::class_<ScanSample>(m, "ScanSample")
      .def(py::init<>())
      .def_readwrite("detuning", &ScanSample::detuning)
      .def_readwrite("fraction", &ScanSample::fraction)
      .def_readwrite("shots", &ScanSample::shots);
  py::class_<SyntheticScan>(m, "SyntheticScan")
      .def_readonly("red", &SyntheticScan::red)
      .def_readonly("blue", &SyntheticScan::blue)
      .def_readonly("seed", &SyntheticScan::seed)
      .def_readonly("analytic", &SyntheticScan::analytic);
  m.def("synthesize_scan", &synthesize_scan, py::arg("scan"), py::arg("nbar"),
        py::arg("seed"), py::arg("analytic") = false);
  py::class_<GaussianFit>(m, "GaussianFit")
      .def_readonly("amplitude", &GaussianFit::amplitude)
      .def_readonly("center", &GaussianFit::center)
      .def_readonly("width", &GaussianFit::width)
      .def_readonly("offset", &GaussianFit::offset)
      .def_readonly("sigma_amplitude", &GaussianFit::sigma_amplitude)
      .def_readonly("sigma_center", &GaussianFit::sigma_center)
      .def_readonly("sigma_width", &GaussianFit::sigma_width)
      .def_readonly("sigma_offset", &GaussianFit::sigma_offset)
      .def_readonly("rss", &GaussianFit::rss)
      .def_readonly("iterations", &GaussianFit::iterations);
  m.def("fit_gaussian",
        py::overload_cast<const std::vector<double>&,
                          const std::vector<double>&>(&fit_gaussian),
        py::arg("x"), py::arg("y"));
  m.def("fit_gaussian",
        py::overload_cast<const std::vector<double>&,
                          const std::vector<double>&,
                          const std::vector<double>&>(&fit_gaussian),
        py::arg("x"), py::arg("y"), py::arg("sigma"));
  py::class_<ThermalEstimate>(m, "ThermalEstimate")
      .def_readonly("nbar", &ThermalEstimate::nbar)
      .def_readonly("sigma", &ThermalEstimate::sigma)
      .def_readonly("amplitude_ratio", &ThermalEstimate::amplitude_ratio)
      .def_readonly("red", &ThermalEstimate::red)
      .def_readonly("blue", &ThermalEstimate::blue);
  m.def("estimate_nbar", &estimate_nbar, py::arg("red"), py::arg("blue"));
}
