#include "fourrf/pseudo.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/tools/roots.hpp>

#include "fourrf/errors.hpp"

namespace fourrf {

DriveConfig matched_drive(const ElectrodeLayout& layout, double amplitude,
                          double rf_omega, const Ion& ion) {
  if (!(rf_omega > 0)) throw ConfigError("rf_omega must be positive");
  DriveConfig d;
  d.rf_omega = rf_omega;
  d.ion = ion;
  for (const auto& name : layout.names_with_role(Role::rf_plus))
    d.rf_amplitudes[name] = amplitude;
  for (const auto& name : layout.names_with_role(Role::rf_minus))
    d.rf_amplitudes[name] = -amplitude;
  if (d.rf_amplitudes.empty())
    throw ConfigError("layout has no rf electrodes");
  return d;
}

double pseudopotential_from_field(double field_norm_sq, const Ion& ion,
                                  double rf_omega) {
  return ion.charge * ion.charge * field_norm_sq /
         (4.0 * ion.mass * rf_omega * rf_omega);
}

namespace {

struct RfDcEval {
  PhasorEval rf;
  FieldEval dc;
};

RfDcEval eval_both(const FieldBasis& basis, const DriveConfig& drive,
                   const Vec3& p, int order) {
  RfDcEval out;
  auto rf = basis.coeffs(drive.rf_amplitudes);
  auto dc = basis.coeffs(drive.dc_voltages);
  basis.superpose_rf_dc(rf, dc, p, order, &out.rf, &out.dc);
  return out;
}

// S = |grad phi_rf|^2 and derivatives; psi = pref * S
struct SEval {
  double s = 0;
  Vec3 grad = Vec3::Zero();
  Mat3 hess = Mat3::Zero();
};

SEval s_eval(const PhasorEval& rf, int order) {
  SEval out;
  const Vec3c g = rf.gradient;
  out.s = g.squaredNorm();
  if (order < 1) return out;
  const Vec3c gc = g.conjugate();
  out.grad = 2.0 * (rf.hessian * gc).real();
  if (order < 2) return out;
  // Hess(S) = 2 Re(H conj(H)) + 2 Re(T . conj(g))
  out.hess = 2.0 * ((rf.hessian * rf.hessian.conjugate()).real() +
                    rf.third_contract(gc).real());
  out.hess = 0.5 * (out.hess + out.hess.transpose()).eval();
  return out;
}

double pseudo_pref(const DriveConfig& drive) {
  if (!(drive.rf_omega > 0)) throw ConfigError("rf_omega must be positive");
  return drive.ion.charge * drive.ion.charge /
         (4.0 * drive.ion.mass * drive.rf_omega * drive.rf_omega);
}

} // namespace

double pseudopotential(const FieldBasis& basis, const DriveConfig& drive,
                       const Vec3& p) {
  PhasorEval rf = basis.superpose(basis.coeffs(drive.rf_amplitudes), p, 1);
  return pseudo_pref(drive) * rf.gradient.squaredNorm();
}

PseudoEval pseudo_eval(const FieldBasis& basis, const DriveConfig& drive,
                       const Vec3& p) {
  PhasorEval rf = basis.superpose(basis.coeffs(drive.rf_amplitudes), p, 3);
  SEval s = s_eval(rf, 2);
  const double pref = pseudo_pref(drive);
  return {pref * s.s, pref * s.grad, pref * s.hess};
}

PseudoEval total_potential(const FieldBasis& basis, const DriveConfig& drive,
                           const Vec3& p) {
  RfDcEval ev = eval_both(basis, drive, p, 3);
  SEval s = s_eval(ev.rf, 2);
  const double pref = pseudo_pref(drive);
  const double q = drive.ion.charge;
  return {pref * s.s + q * ev.dc.potential, pref * s.grad + q * ev.dc.gradient,
          pref * s.hess + q * ev.dc.hessian};
}

Eigen::Vector2d find_rf_null(const FieldBasis& basis, const DriveConfig& drive,
                             double z, Eigen::Vector2d guess, double tol,
                             int max_iter) {
  if (!(z > 0)) throw ModelDomainError("rf null search needs z > 0");
  auto rf = basis.coeffs(drive.rf_amplitudes);
  Eigen::Vector2d xy = guess;
  for (int it = 0; it < max_iter; ++it) {
    PhasorEval ev = basis.superpose(rf, Vec3{xy[0], xy[1], z}, 2);
    const Vec3c g = ev.gradient;
    const double enorm = g.norm();
    if (enorm <= tol) return xy;

    // Gauss-Newton on the stacked (Re, Im) residual restricted to (x, y)
    Eigen::Matrix2d JtJ;
    Eigen::Vector2d Jtr;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b)
        JtJ(a, b) = (ev.hessian.row(a).conjugate() *
                     ev.hessian.row(b).transpose())
                        .real()(0, 0);
      Jtr[a] = (ev.hessian.row(a).conjugate() * g).real()(0, 0);
    }
    Eigen::Vector2d step = JtJ.ldlt().solve(-Jtr);
    if (!step.allFinite())
      throw NumericalError("rf null search: singular field curvature");
    // keep the step inside a sane region
    const double cap = 0.5e-3;
    if (step.norm() > cap) step *= cap / step.norm();
    xy += step;
    if (step.norm() < 1e-16)
      throw NumericalError(
          "rf null search stalled at |E| = " + std::to_string(enorm) +
          " V/m (no null within tolerance; drive may be phase-mismatched)");
  }
  throw NumericalError("rf null search did not converge");
}

namespace {

AxisMode make_mode(const Vec3& axis, double lambda, const Mat3c& h_rf,
                   const Mat3& h_dc, const DriveConfig& drive,
                   std::vector<std::string>& warnings, const char* label) {
  AxisMode m;
  m.axis = axis;
  const double mass = drive.ion.mass;
  const double q = drive.ion.charge;
  const double om2 = drive.rf_omega * drive.rf_omega;
  m.omega = std::sqrt(std::abs(lambda) / mass);
  m.mathieu_q = 2.0 * q * (h_rf * axis.cast<cplx>()).norm() / (mass * om2);
  m.mathieu_a = 4.0 * q * axis.dot(h_dc * axis) / (mass * om2);
  m.stable = lambda > 0 && m.mathieu_q < 0.908;
  if (lambda <= 0)
    warnings.push_back(std::string(label) +
                       " mode: negative total curvature (anti-confining)");
  else if (m.mathieu_q >= 0.908)
    warnings.push_back(std::string(label) + " mode: Mathieu q = " +
                       std::to_string(m.mathieu_q) +
                       " outside the first stability region");
  return m;
}

std::optional<double> barrier_along(const FieldBasis& basis,
                                    const DriveConfig& drive, const Vec3& x0,
                                    const Vec3& dir, double u0) {
  // walk outward until the potential turns down (saddle crossed), the ray
  // hits the electrode plane (a wall, not an escape), or the sampling range
  // ends (escape toward infinity, where every contribution decays to zero)
  const double step = 1e-6, reach = 600e-6;
  auto dc = basis.coeffs(drive.dc_voltages);
  double peak = u0;
  bool fell = false;
  for (double t = step; t <= reach; t += step) {
    Vec3 p = x0 + t * dir;
    if (p[2] < 2e-6) return std::nullopt; // dives toward the electrode plane
    double u = pseudopotential(basis, drive, p) +
               drive.ion.charge * basis.superpose(dc, p, 0).potential;
    if (u > peak) {
      peak = u;
    } else if (u < peak - 0.02 * std::abs(peak - u0) && peak > u0) {
      fell = true; // clearly past the barrier top
      break;
    }
  }
  if (!fell) peak = std::max(peak, 0.0); // asymptotic value at infinity
  return std::max(peak - u0, 0.0);
}

} // namespace

const AxisMode& TrapSolution::mode(int i) const {
  switch (i) {
  case 0: return x_like;
  case 1: return y_like;
  case 2: return vertical;
  }
  throw ConfigError("mode index out of range");
}

TrapSolution mode_analysis(const FieldBasis& basis, const DriveConfig& drive,
                           const Vec3& equilibrium,
                           const ModeAnalysisOptions& opts) {
  TrapSolution sol;
  sol.equilibrium = equilibrium;

  RfDcEval ev = eval_both(basis, drive, equilibrium, 3);
  SEval s = s_eval(ev.rf, 2);
  const double pref = pseudo_pref(drive);
  const double q = drive.ion.charge;
  Vec3 grad_u = pref * s.grad + q * ev.dc.gradient;
  sol.total_hessian = pref * s.hess + q * ev.dc.hessian;

  // stationarity: implied offset of the true equilibrium
  Eigen::FullPivLU<Mat3> lu(sol.total_hessian);
  if (lu.isInvertible()) {
    double offset = lu.solve(grad_u).norm();
    if (offset > opts.stationarity_tol)
      sol.warnings.push_back(
          "point is not stationary: implied equilibrium offset " +
          std::to_string(offset * 1e9) + " nm");
  }

  Eigen::SelfAdjointEigenSolver<Mat3> eig(sol.total_hessian);
  if (eig.info() != Eigen::Success)
    throw NumericalError("mode analysis: eigensolver failed");

  // classify: vertical = largest |z| component, then x-like by |x|
  int iz = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(eig.eigenvectors()(2, i)) >
        std::abs(eig.eigenvectors()(2, iz)))
      iz = i;
  std::vector<int> rest;
  for (int i = 0; i < 3; ++i)
    if (i != iz) rest.push_back(i);
  int ix = rest[0], iy = rest[1];
  if (std::abs(eig.eigenvectors()(0, iy)) >
      std::abs(eig.eigenvectors()(0, ix)))
    std::swap(ix, iy);

  auto axis_of = [&](int i) {
    Vec3 a = eig.eigenvectors().col(i);
    // deterministic sign: biggest component positive
    int big = 0;
    for (int k = 1; k < 3; ++k)
      if (std::abs(a[k]) > std::abs(a[big])) big = k;
    return a[big] < 0 ? Vec3(-a) : a;
  };
  sol.x_like = make_mode(axis_of(ix), eig.eigenvalues()[ix], ev.rf.hessian,
                         ev.dc.hessian, drive, sol.warnings, "x-like");
  sol.y_like = make_mode(axis_of(iy), eig.eigenvalues()[iy], ev.rf.hessian,
                         ev.dc.hessian, drive, sol.warnings, "y-like");
  sol.vertical = make_mode(axis_of(iz), eig.eigenvalues()[iz], ev.rf.hessian,
                           ev.dc.hessian, drive, sol.warnings, "vertical");

  if (opts.compute_depth) {
    double u0 = pseudopotential(basis, drive, equilibrium) +
                q * basis.superpose(basis.coeffs(drive.dc_voltages),
                                    equilibrium, 0)
                        .potential;
    for (AxisMode* m : {&sol.x_like, &sol.y_like, &sol.vertical}) {
      auto up = barrier_along(basis, drive, equilibrium, m->axis, u0);
      auto dn = barrier_along(basis, drive, equilibrium, -m->axis, u0);
      if (up && dn)
        m->depth = std::min(*up, *dn);
      else if (up)
        m->depth = up;
      else
        m->depth = dn;
    }
  }
  return sol;
}

double planar_rf_depth(const FieldBasis& basis, const DriveConfig& drive,
                       double z, int n_directions) {
  if (!(z > 0)) throw ModelDomainError("rf depth needs z > 0");
  if (n_directions < 1) throw ConfigError("rf depth needs >= 1 direction");
  auto rf = basis.coeffs(drive.rf_amplitudes);
  const double pref = pseudo_pref(drive);
  double depth = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_directions; ++k) {
    const double th = constants::pi * k / n_directions; // psi has inversion symmetry
    const Vec3 dir{std::cos(th), std::sin(th), 0};
    double peak = 0;
    const double step = 2e-6, reach = 800e-6;
    for (double t = step; t <= reach; t += step) {
      double psi =
          pref * basis.superpose(rf, Vec3{0, 0, z} + t * dir, 1)
                     .gradient.squaredNorm();
      if (psi > peak)
        peak = psi;
      else if (peak > 0 && psi < 0.9 * peak)
        break; // well past the wall top
    }
    depth = std::min(depth, peak);
  }
  return depth;
}

namespace {

// dc curvature target for an operating point, before tilt: vertical
// confinement c and a planar asymmetry s that splits the two rf-degenerate
// planar modes, weakening the tilt-plane one
Mat3 dc_target_hessian(const OperatingPointSpec& spec) {
  const double mass = spec.ion.mass;
  const double q = spec.ion.charge;
  const double c = mass * spec.vertical_freq * spec.vertical_freq / q;
  const double w1 = spec.planar_freq;
  const double ratio = 1.0 + spec.splitting;
  const double split =
      mass * w1 * w1 * (ratio * ratio - 1.0) / (2.0 * q);
  Mat3 h = Mat3::Zero();
  if (spec.plane == TiltPlane::xz) {
    h(0, 0) = -c / 2 - split; // x weakened: the in-plane partner of the tilt
    h(1, 1) = -c / 2 + split;
  } else {
    h(0, 0) = -c / 2 + split;
    h(1, 1) = -c / 2 - split;
  }
  h(2, 2) = c;
  return tilt_target(h, spec.tilt, spec.plane);
}

const AxisMode& planar_mode(const TrapSolution& modes,
                            const OperatingPointSpec& spec) {
  return spec.plane == TiltPlane::xz ? modes.x_like : modes.y_like;
}

} // namespace

OperatingPoint plan_operating_point(const FieldBasis& basis,
                                    const OperatingPointSpec& spec) {
  if (!(spec.height > 0)) throw ConfigError("operating height must be > 0");
  if (!(spec.planar_freq > 0) || !(spec.vertical_freq > 0))
    throw ConfigError("mode frequency targets must be > 0");

  DcTarget target;
  target.point = {0, 0, spec.height};
  target.hessian = dc_target_hessian(spec);
  target.bounds = spec.dc_bounds;
  DcSolution dc = solve_dc(basis, target);

  const Vec3 eq{0, 0, spec.height};
  auto modes_at = [&](double v) {
    DriveConfig d = matched_drive(basis.layout(), v, spec.rf_omega, spec.ion);
    d.dc_voltages = dc.voltages;
    return mode_analysis(basis, d, eq);
  };

  // signed squared frequency keeps f smooth and monotone even where the
  // planar curvature starts out negative (dc anti-confinement at low drive)
  auto f = [&](double v) {
    TrapSolution ts = modes_at(v);
    const AxisMode& pm = planar_mode(ts, spec);
    double lam = pm.axis.dot(ts.total_hessian * pm.axis);
    return lam / spec.ion.mass - spec.planar_freq * spec.planar_freq;
  };

  // the planar eigenvalue grows monotonically with V^2 (the pseudopotential
  // Hessian is PSD and scales as V^2), so any sign change brackets the root
  double lo = spec.v_min, hi = spec.v_max;
  double flo = f(lo), fhi = f(hi);
  if (flo > 0)
    throw ModelDomainError(
        "planar target below the dc-only mode frequency at v_min");
  if (fhi < 0)
    throw ModelDomainError("planar target unreachable below v_max = " +
                           std::to_string(hi) + " V");
  boost::math::tools::eps_tolerance<double> tol(46);
  std::uintmax_t iters = 120;
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  const double v = 0.5 * (r.first + r.second);

  OperatingPoint op;
  op.rf_amplitude = v;
  op.dc = dc;
  op.drive = matched_drive(basis.layout(), v, spec.rf_omega, spec.ion);
  op.drive.dc_voltages = dc.voltages;
  op.modes = mode_analysis(basis, op.drive, eq, {.compute_depth = false});
  return op;
}

double rf_amplitude_for_target(const FieldBasis& basis, double height,
                               double planar_freq, double tilt,
                               const OperatingPointSpec& base) {
  OperatingPointSpec spec = base;
  spec.height = height;
  spec.planar_freq = planar_freq;
  spec.tilt = tilt;
  return plan_operating_point(basis, spec).rf_amplitude;
}

} // namespace fourrf
