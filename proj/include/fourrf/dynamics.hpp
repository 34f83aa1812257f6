#pragma once

#include <cstdint>
#include <vector>

#include "fourrf/efield.hpp"
#include "fourrf/pseudo.hpp"

namespace fourrf {

// ---------------------------------------------------------------------------
// Probe geometry and micromotion sideband observables.
// ---------------------------------------------------------------------------

// Laser probe direction, carried as the full wave vector (rad/m).
struct ProbeGeometry {
  Vec3 k = Vec3::Zero();

  double wavenumber() const { return k.norm(); }

  // 729 nm quadrupole probe entering along the trap normal (+z)
  static ProbeGeometry vertical_729();
  // 729 nm probe in the electrode plane at the given azimuth from +x
  static ProbeGeometry in_plane_729(double azimuth_rad = 0.0);

  static constexpr double probe_wavelength_729 = 729e-9; // m
};

// Modulation index beta = |k . u| of the driven micromotion, where
// u = q E_res / (m Omega^2) is the displacement amplitude an ion acquires in
// a residual rf field phasor E_res (V/m, zero-to-peak).  The secular-frequency
// correction 1/(1 - (omega/Omega)^2) is deliberately not applied; it is below
// half a percent for the traps considered here and the uncorrected form is
// the one used when inferring fields from sideband data.
double modulation_index(const Vec3c& residual_field, const Ion& ion,
                        double rf_omega, const ProbeGeometry& probe);

// Rabi-frequency ratio of the first micromotion sideband to the carrier,
// J1(beta)/J0(beta).  Monotone increasing in beta on [0, j01) where
// j01 = 2.404825... is the first zero of J0, so the inverse below is well
// defined for any ratio >= 0.
double beta_to_sideband_ratio(double beta);
double sideband_ratio_to_beta(double ratio);

// ---------------------------------------------------------------------------
// Time-domain integration of a single ion in the full oscillating field.
// ---------------------------------------------------------------------------

// Anything that can provide a static field and an rf phasor at a point.
// The instantaneous field is E(x, t) = dc_field(x) + Re[rf_field(x) e^{iwt}].
class FieldSource {
public:
  virtual ~FieldSource() = default;
  virtual Vec3 dc_field(const Vec3& x) const = 0;
  virtual Vec3c rf_field(const Vec3& x) const = 0;
  virtual double rf_omega() const = 0;

  // E(x, t); the default composes the parts, overrides may fuse the work
  virtual Vec3 instantaneous(const Vec3& x, double t) const;
};

// FieldSource backed by an electrode basis and a drive configuration.
class BasisFieldSource : public FieldSource {
public:
  BasisFieldSource(const FieldBasis& basis, const DriveConfig& drive);

  Vec3 dc_field(const Vec3& x) const override;
  Vec3c rf_field(const Vec3& x) const override;
  double rf_omega() const override { return omega_; }
  Vec3 instantaneous(const Vec3& x, double t) const override;

private:
  const FieldBasis* basis_;
  std::vector<double> dc_;
  std::vector<cplx> rf_;
  double omega_;
};

enum class StepperKind : std::uint8_t {
  adaptive, // dormand-prince 5(4), dense output, error-controlled
  leapfrog, // fixed-step velocity Verlet; cross-check integrator
};

struct IntegrateOptions {
  StepperKind kind = StepperKind::adaptive;
  // Adaptive error control uses block norms: every position component is
  // weighted by abs_tol_pos + rel_tol * |x|, every velocity component by
  // abs_tol_vel + rel_tol * |v|.  Per-component weights would pin the
  // on-axis transverse velocities (identically ~0) to the absolute floor
  // and let field-evaluation roundoff (~uV/m, i.e. ~1e-4 m/s^2 of force
  // noise) throttle the step size by orders of magnitude.  The floors sit
  // safely above that noise.
  double rel_tol = 1e-10;
  double abs_tol_pos = 1e-15; // m
  double abs_tol_vel = 1e-9;  // m/s
  double fixed_dt = 0.0;  // leapfrog step; <= 0 picks rf_period / 256
  double sample_dt = 0.0; // output grid; <= 0 picks rf_period / 16

  // escape box; leaving it raises EscapeError with the exit time
  double box_halfwidth_xy = 2e-3; // m
  double box_z_min = 1e-6;        // m, just above the electrode plane
  double box_z_max = 5e-3;        // m
};

// Samples on the uniform grid k * sample_dt, k = 0..n.  The duration is
// snapped up to a whole number of sample intervals, so the last sample time
// may exceed the requested duration by less than one interval.
struct Trajectory {
  std::vector<double> t;      // s
  std::vector<Vec3> position; // m
  std::vector<Vec3> velocity; // m/s
  std::uint64_t n_steps = 0;  // accepted integrator steps

  std::size_t size() const { return t.size(); }
};

Trajectory integrate_motion(const FieldSource& source, const Ion& ion,
                            const Vec3& x0, const Vec3& v0, double duration,
                            const IntegrateOptions& opts = {});

// convenience overload wiring a basis + drive straight into the integrator
Trajectory integrate_motion(const FieldBasis& basis, const DriveConfig& drive,
                            const Vec3& x0, const Vec3& v0, double duration,
                            const IntegrateOptions& opts = {});

} // namespace fourrf
