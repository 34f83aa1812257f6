#pragma once

#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fourrf/constants.hpp"
#include "fourrf/dcsolve.hpp"
#include "fourrf/efield.hpp"

namespace fourrf {

// One rf tone at rf_omega with per-electrode complex amplitudes
// (zero-to-peak volts; the physical voltage is Re(V * exp(i*omega*t))),
// plus static dc voltages.
struct DriveConfig {
  double rf_omega = 0; // rad/s
  std::map<std::string, cplx> rf_amplitudes;
  std::map<std::string, double> dc_voltages;
  Ion ion = Ion::ca40();
};

// Nominal antiphase drive: +amplitude on every rf_plus pad, -amplitude on
// every rf_minus pad.  For the four-square layout this pins the rf null to
// the whole z axis.
DriveConfig matched_drive(const ElectrodeLayout& layout, double amplitude,
                          double rf_omega, const Ion& ion = Ion::ca40());

// time-averaged kinetic energy of the driven micromotion:
// psi = q^2 |E|^2 / (4 m Omega^2), with E the zero-to-peak field phasor
double pseudopotential_from_field(double field_norm_sq, const Ion& ion,
                                  double rf_omega);

struct PseudoEval {
  double value = 0;            // J
  Vec3 gradient = Vec3::Zero();  // J/m
  Mat3 hessian = Mat3::Zero();   // J/m^2
};

double pseudopotential(const FieldBasis& basis, const DriveConfig& drive,
                       const Vec3& p);
PseudoEval pseudo_eval(const FieldBasis& basis, const DriveConfig& drive,
                       const Vec3& p);
// total ion potential energy U = psi + q * phi_dc (and derivatives)
PseudoEval total_potential(const FieldBasis& basis, const DriveConfig& drive,
                           const Vec3& p);

// In-plane rf-null search at fixed height: Gauss-Newton on the complex field
// phasor.  Returns (x, y) with |E| <= tol (V/m).  Throws NumericalError when
// the iteration stalls at a nonzero minimum (e.g. phase-mismatched drive,
// where no true null exists) or fails to converge.
Eigen::Vector2d find_rf_null(const FieldBasis& basis,
                             const DriveConfig& drive, double z,
                             Eigen::Vector2d guess, double tol = 1e-6,
                             int max_iter = 80);

struct AxisMode {
  double omega = 0;   // rad/s, sqrt(|lambda|/m)
  Vec3 axis = Vec3::Zero(); // unit eigenvector of the total Hessian
  double mathieu_q = 0; // 2 q |H_rf axis| / (m Omega^2), rms parametric drive
  double mathieu_a = 0; // 4 q (axis' H_dc axis) / (m Omega^2)
  bool stable = true; // positive curvature and |mathieu_q| < 0.908
  std::optional<double> depth; // J, lowest escape barrier along +-axis
};

struct TrapSolution {
  Vec3 equilibrium = Vec3::Zero();
  Mat3 total_hessian = Mat3::Zero(); // of U, J/m^2
  AxisMode x_like, y_like, vertical; // vertical: largest |z| component
  std::vector<std::string> warnings;

  const AxisMode& mode(int i) const; // 0 = x_like, 1 = y_like, 2 = vertical
};

struct ModeAnalysisOptions {
  bool compute_depth = false;
  // warn when the implied equilibrium offset |H^-1 grad U| exceeds this
  double stationarity_tol = 1e-9; // m
};

TrapSolution mode_analysis(const FieldBasis& basis, const DriveConfig& drive,
                           const Vec3& equilibrium,
                           const ModeAnalysisOptions& opts = {});

// Planar escape barrier of the bare pseudopotential at height z: smallest
// over in-plane directions of the largest psi along the outward ray.  The
// axial direction is open in psi alone (confinement there is dc), so this
// is the conventional rf depth for a null-line trap.
double planar_rf_depth(const FieldBasis& basis, const DriveConfig& drive,
                       double z, int n_directions = 16);

// Complete dc + rf working point on the null axis.  The dc set realizes, at
// (0, 0, height): zero field, vertical curvature for vertical_freq, a planar
// asymmetry that puts the second planar mode at (1 + splitting) x the first,
// all rotated by tilt in the chosen plane.  The rf amplitude is then
// root-solved so the planar mode lying in the tilt plane hits planar_freq.
struct OperatingPointSpec {
  double height = 175e-6;                    // m
  double rf_omega = omega_from_MHz(18.1);    // rad/s
  double vertical_freq = omega_from_MHz(1.2); // rad/s, dc-only mode
  double splitting = 0.1;  // relative planar split; the tilt-plane mode is lower
  double tilt = 0;         // rad
  TiltPlane plane = TiltPlane::xz;
  double planar_freq = omega_from_MHz(1.0);  // rad/s target
  double v_min = 1.0, v_max = 3000.0;        // rf amplitude bracket, V
  Ion ion = Ion::ca40();
  std::map<std::string, std::pair<double, double>> dc_bounds;
};

struct OperatingPoint {
  DriveConfig drive; // solved rf amplitude + dc voltages
  DcSolution dc;
  TrapSolution modes;
  double rf_amplitude = 0; // V zero-to-peak
};

OperatingPoint plan_operating_point(const FieldBasis& basis,
                                    const OperatingPointSpec& spec);

// thin wrapper: rf amplitude that puts the tilt-plane planar mode at
// planar_freq, with the other operating-point settings at their defaults
double rf_amplitude_for_target(const FieldBasis& basis, double height,
                               double planar_freq, double tilt = 0,
                               const OperatingPointSpec& base = {});

} // namespace fourrf
