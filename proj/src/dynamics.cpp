#include "fourrf/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "fourrf/errors.hpp"

namespace fourrf {

namespace {
// first zero of J0; J1/J0 is monotone increasing and unbounded on [0, j01)
constexpr double bessel_j0_zero1 = 2.404825557695773;
} // namespace

// ---------------------------------------------------------------------------
// probe geometry / sidebands
// ---------------------------------------------------------------------------

ProbeGeometry ProbeGeometry::vertical_729() {
  ProbeGeometry p;
  p.k = Vec3(0, 0, 2.0 * constants::pi / probe_wavelength_729);
  return p;
}

ProbeGeometry ProbeGeometry::in_plane_729(double azimuth_rad) {
  ProbeGeometry p;
  const double k = 2.0 * constants::pi / probe_wavelength_729;
  p.k = Vec3(k * std::cos(azimuth_rad), k * std::sin(azimuth_rad), 0);
  return p;
}

double modulation_index(const Vec3c& residual_field, const Ion& ion,
                        double rf_omega, const ProbeGeometry& probe) {
  if (rf_omega <= 0)
    throw ConfigError("modulation_index: rf_omega must be positive");
  if (ion.mass <= 0)
    throw ConfigError("modulation_index: ion mass must be positive");
  // displacement phasor of the driven motion, u = q E / (m Omega^2)
  const Vec3c u =
      (ion.charge / (ion.mass * rf_omega * rf_omega)) * residual_field;
  const cplx ku =
      probe.k.x() * u.x() + probe.k.y() * u.y() + probe.k.z() * u.z();
  return std::abs(ku);
}

double beta_to_sideband_ratio(double beta) {
  if (beta < 0)
    throw ConfigError("beta_to_sideband_ratio: beta must be >= 0");
  if (beta >= bessel_j0_zero1)
    throw ModelDomainError(
        "beta_to_sideband_ratio: beta beyond the first carrier null");
  return std::cyl_bessel_j(1, beta) / std::cyl_bessel_j(0, beta);
}

double sideband_ratio_to_beta(double ratio) {
  if (ratio < 0)
    throw ConfigError("sideband_ratio_to_beta: ratio must be >= 0");
  if (ratio == 0)
    return 0;
  // J1/J0 - ratio is monotone increasing; bracket against the carrier null
  const double hi = bessel_j0_zero1 * (1.0 - 1e-13);
  auto f = [ratio](double b) { return beta_to_sideband_ratio(b) - ratio; };
  if (f(hi) < 0)
    throw NumericalError("sideband_ratio_to_beta: no bracket below the J0 null");
  boost::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(
      f, 0.0, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

// ---------------------------------------------------------------------------
// field sources
// ---------------------------------------------------------------------------

Vec3 FieldSource::instantaneous(const Vec3& x, double t) const {
  Vec3 e = dc_field(x);
  const double w = rf_omega();
  if (w > 0) {
    const cplx ph(std::cos(w * t), std::sin(w * t));
    e += (rf_field(x) * ph).real();
  }
  return e;
}

BasisFieldSource::BasisFieldSource(const FieldBasis& basis,
                                   const DriveConfig& drive)
    : basis_(&basis),
      dc_(basis.coeffs(drive.dc_voltages)),
      rf_(basis.coeffs(drive.rf_amplitudes)),
      omega_(drive.rf_omega) {
  if (omega_ <= 0)
    throw ConfigError("BasisFieldSource: rf_omega must be positive");
}

Vec3 BasisFieldSource::dc_field(const Vec3& x) const {
  FieldEval dc;
  basis_->superpose_rf_dc({}, dc_, x, 1, nullptr, &dc);
  return dc.field();
}

Vec3c BasisFieldSource::rf_field(const Vec3& x) const {
  PhasorEval rf;
  basis_->superpose_rf_dc(rf_, {}, x, 1, &rf, nullptr);
  return -rf.gradient;
}

Vec3 BasisFieldSource::instantaneous(const Vec3& x, double t) const {
  PhasorEval rf;
  FieldEval dc;
  basis_->superpose_rf_dc(rf_, dc_, x, 1, &rf, &dc); // one geometry pass
  const cplx ph(std::cos(omega_ * t), std::sin(omega_ * t));
  return dc.field() + (-rf.gradient * ph).real();
}

// ---------------------------------------------------------------------------
// integration
// ---------------------------------------------------------------------------

namespace {

using State = std::array<double, 6>; // x, y, z, vx, vy, vz

bool outside_box(const State& s, const IntegrateOptions& o);
[[noreturn]] void throw_escape(const State& s, double t);

struct EquationOfMotion {
  const FieldSource* src;
  double q_over_m;
  double omega;
  const IntegrateOptions* opts;

  void operator()(const State& s, State& dsdt, double t) const {
    // escape must be caught at evaluation time: a runaway can cross the
    // whole box (and the z > 0 domain of the basis) within one trial step
    if (outside_box(s, *opts))
      throw_escape(s, t);
    const Vec3 e = src->instantaneous(Vec3(s[0], s[1], s[2]), t);
    dsdt[0] = s[3];
    dsdt[1] = s[4];
    dsdt[2] = s[5];
    dsdt[3] = q_over_m * e.x();
    dsdt[4] = q_over_m * e.y();
    dsdt[5] = q_over_m * e.z();
  }
};

// see the IntegrateOptions comment: block-norm weights keep identically-zero
// components (transverse motion on the null axis) off the absolute floor
class BlockErrorChecker {
public:
  typedef double value_type;

  BlockErrorChecker(double rel, double abs_pos, double abs_vel)
      : rel_(rel), abs_pos_(abs_pos), abs_vel_(abs_vel) {}

  template <class Algebra>
  double error(Algebra&, const State& x, const State& dxdt, State& xerr,
               double dt) const {
    auto block = [](const State& s, int base) {
      return std::sqrt(s[base] * s[base] + s[base + 1] * s[base + 1] +
                       s[base + 2] * s[base + 2]);
    };
    const double wp = abs_pos_ + rel_ * (block(x, 0) + dt * block(dxdt, 0));
    const double wv = abs_vel_ + rel_ * (block(x, 3) + dt * block(dxdt, 3));
    double worst = 0;
    for (int i = 0; i < 3; ++i)
      worst = std::max(worst, std::abs(xerr[i]) / wp);
    for (int i = 3; i < 6; ++i)
      worst = std::max(worst, std::abs(xerr[i]) / wv);
    return worst;
  }

private:
  double rel_, abs_pos_, abs_vel_;
};

bool outside_box(const State& s, const IntegrateOptions& o) {
  return std::abs(s[0]) > o.box_halfwidth_xy ||
         std::abs(s[1]) > o.box_halfwidth_xy || s[2] < o.box_z_min ||
         s[2] > o.box_z_max;
}

[[noreturn]] void throw_escape(const State& s, double t) {
  std::ostringstream msg;
  msg << "trajectory left the sampling box at t = " << t << " s (position "
      << s[0] << ", " << s[1] << ", " << s[2] << " m)";
  throw EscapeError(msg.str(), t);
}

void record(Trajectory& tr, double t, const State& s) {
  tr.t.push_back(t);
  tr.position.emplace_back(s[0], s[1], s[2]);
  tr.velocity.emplace_back(s[3], s[4], s[5]);
}

// whole sample intervals covering the duration (>= 1); the trajectory ends
// at n * sample_dt, i.e. the duration is snapped to the sample grid
std::size_t sample_count(double duration, double sample_dt) {
  const auto n = std::llround(std::ceil(duration / sample_dt - 1e-9));
  return static_cast<std::size_t>(std::max<std::int64_t>(1, n));
}

Trajectory run_adaptive(const EquationOfMotion& eom, const State& s0,
                        double duration, double sample_dt,
                        const IntegrateOptions& opts) {
  namespace ode = boost::numeric::odeint;
  using Controlled =
      ode::controlled_runge_kutta<ode::runge_kutta_dopri5<State>,
                                  BlockErrorChecker>;
  ode::dense_output_runge_kutta<Controlled> stepper{Controlled{
      BlockErrorChecker{opts.rel_tol, opts.abs_tol_pos, opts.abs_tol_vel}}};
  stepper.initialize(s0, 0.0, sample_dt / 8.0);

  Trajectory tr;
  const std::size_t n_samples = sample_count(duration, sample_dt);
  tr.t.reserve(n_samples + 1);
  tr.position.reserve(n_samples + 1);
  tr.velocity.reserve(n_samples + 1);
  record(tr, 0.0, s0);

  std::size_t next = 1;
  State sampled;
  while (next <= n_samples) {
    stepper.do_step(eom);
    ++tr.n_steps;
    if (outside_box(stepper.current_state(), opts))
      throw_escape(stepper.current_state(), stepper.current_time());
    while (next <= n_samples &&
           static_cast<double>(next) * sample_dt <=
               stepper.current_time() * (1.0 + 1e-15)) {
      const double ts = static_cast<double>(next) * sample_dt;
      stepper.calc_state(ts, sampled);
      record(tr, ts, sampled);
      ++next;
    }
  }
  return tr;
}

Trajectory run_leapfrog(const EquationOfMotion& eom, const State& s0,
                        double duration, double sample_dt,
                        const IntegrateOptions& opts) {
  double dt = opts.fixed_dt;
  if (dt <= 0)
    dt = (eom.omega > 0) ? (2.0 * constants::pi / eom.omega) / 256.0
                         : sample_dt / 64.0;
  // commensurate step so samples land on step boundaries exactly
  const auto per_sample = std::max<std::int64_t>(1, std::llround(sample_dt / dt));
  dt = sample_dt / static_cast<double>(per_sample);

  auto accel = [&eom](const Vec3& x, double t) {
    State s{x.x(), x.y(), x.z(), 0, 0, 0}, d;
    eom(s, d, t);
    return Vec3(d[3], d[4], d[5]);
  };

  Trajectory tr;
  const std::size_t n_samples = sample_count(duration, sample_dt);
  record(tr, 0.0, s0);

  Vec3 x(s0[0], s0[1], s0[2]), v(s0[3], s0[4], s0[5]);
  Vec3 a = accel(x, 0.0);
  for (std::size_t i = 1; i <= n_samples; ++i) {
    for (std::int64_t j = 0; j < per_sample; ++j) {
      const double t =
          (static_cast<double>(i - 1) +
           static_cast<double>(j) / static_cast<double>(per_sample)) *
          sample_dt;
      const Vec3 vh = v + 0.5 * dt * a;
      x += dt * vh;
      a = accel(x, t + dt);
      v = vh + 0.5 * dt * a;
      ++tr.n_steps;
      const State cur{x.x(), x.y(), x.z(), v.x(), v.y(), v.z()};
      if (outside_box(cur, opts))
        throw_escape(cur, t + dt);
    }
    const State cur{x.x(), x.y(), x.z(), v.x(), v.y(), v.z()};
    record(tr, static_cast<double>(i) * sample_dt, cur);
  }
  return tr;
}

} // namespace

Trajectory integrate_motion(const FieldSource& source, const Ion& ion,
                            const Vec3& x0, const Vec3& v0, double duration,
                            const IntegrateOptions& opts) {
  if (duration <= 0)
    throw ConfigError("integrate_motion: duration must be positive");
  if (ion.mass <= 0)
    throw ConfigError("integrate_motion: ion mass must be positive");
  const double omega = source.rf_omega();

  double sample_dt = opts.sample_dt;
  if (sample_dt <= 0)
    sample_dt =
        (omega > 0) ? (2.0 * constants::pi / omega) / 16.0 : duration / 4096.0;
  if (sample_dt > duration)
    sample_dt = duration;

  EquationOfMotion eom{&source, ion.charge / ion.mass, omega, &opts};
  const State s0{x0.x(), x0.y(), x0.z(), v0.x(), v0.y(), v0.z()};
  if (outside_box(s0, opts))
    throw ConfigError("integrate_motion: initial state outside the box");

  switch (opts.kind) {
  case StepperKind::leapfrog:
    return run_leapfrog(eom, s0, duration, sample_dt, opts);
  case StepperKind::adaptive:
  default:
    return run_adaptive(eom, s0, duration, sample_dt, opts);
  }
}

Trajectory integrate_motion(const FieldBasis& basis, const DriveConfig& drive,
                            const Vec3& x0, const Vec3& v0, double duration,
                            const IntegrateOptions& opts) {
  BasisFieldSource src(basis, drive);
  return integrate_motion(src, drive.ion, x0, v0, duration, opts);
}

} // namespace fourrf
