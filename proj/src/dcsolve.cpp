#include "fourrf/dcsolve.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/tools/roots.hpp>

#include "fourrf/errors.hpp"

namespace fourrf {

namespace {

constexpr int kRows = 8;

// constraint rows [Ex,Ey,Ez,Hxx,Hyy,Hxy,Hxz,Hyz] of one basis function
Eigen::Matrix<double, kRows, 1> basis_rows(const FieldEval& ev) {
  Eigen::Matrix<double, kRows, 1> c;
  c << -ev.gradient[0], -ev.gradient[1], -ev.gradient[2], ev.hessian(0, 0),
      ev.hessian(1, 1), ev.hessian(0, 1), ev.hessian(0, 2), ev.hessian(1, 2);
  return c;
}

// min-norm Tikhonov solution through the SVD filter factors
Eigen::VectorXd svd_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                          double ridge, int* rank_out) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  const double thresh = 1e-10 * smax;
  const double lambda = ridge > 0 ? ridge * smax * smax : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > thresh) {
      inv[i] = sv[i] / (sv[i] * sv[i] + lambda);
      ++rank;
    }
  if (rank_out) *rank_out = rank;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * b;
}

} // namespace

DcSolution solve_dc(const FieldBasis& basis, const DcTarget& target) {
  // a target Hessian with nonzero trace cannot come from a vacuum potential
  const double htrace = target.hessian.trace();
  const double hscale = target.hessian.cwiseAbs().maxCoeff();
  if (std::abs(htrace) > 1e-8 * std::max(hscale, 1e-30))
    throw ModelDomainError(
        "dc curvature target is not traceless (trace = " +
        std::to_string(htrace) + " V/m^2); no vacuum potential realizes it");

  const auto& electrodes = basis.layout().electrodes;
  std::vector<int> dc_idx;
  for (int i = 0; i < basis.n_electrodes(); ++i)
    if (electrodes[i].role == Role::dc) dc_idx.push_back(i);
  const int n = static_cast<int>(dc_idx.size());
  if (n == 0) throw ConfigError("layout has no dc electrodes to solve for");

  Eigen::MatrixXd A(kRows, n);
  for (int j = 0; j < n; ++j)
    A.col(j) = basis_rows(basis.evaluate(dc_idx[j], target.point, 2));
  Eigen::Matrix<double, kRows, 1> b;
  b << target.field[0], target.field[1], target.field[2],
      target.hessian(0, 0), target.hessian(1, 1), target.hessian(0, 1),
      target.hessian(0, 2), target.hessian(1, 2);

  // precondition: bring the two row classes (field ~1/z, curvature ~1/z^2)
  // to a common O(1) scale, then apply the user weights.  Per-class rather
  // than per-row so a symmetry-killed row stays zero instead of being
  // amplified into roundoff noise.
  double f_typ = 0, h_typ = 0;
  for (int i = 0; i < 3; ++i)
    f_typ = std::max(f_typ, A.row(i).cwiseAbs().maxCoeff());
  for (int i = 3; i < kRows; ++i)
    h_typ = std::max(h_typ, A.row(i).cwiseAbs().maxCoeff());
  Eigen::Matrix<double, kRows, 1> scale;
  for (int i = 0; i < kRows; ++i) {
    double s = i < 3 ? f_typ : h_typ;
    scale[i] = target.weights[i] / (s > 0 ? s : 1.0);
  }
  Eigen::MatrixXd Aw = scale.asDiagonal() * A;
  Eigen::VectorXd bw = scale.asDiagonal() * b;

  // active-set loop: fix violated pads at their bound and re-solve the rest
  std::vector<int> state(n, 0); // 0 free, +1 at upper, -1 at lower
  Eigen::VectorXd volts = Eigen::VectorXd::Zero(n);
  DcSolution sol;
  for (int pass = 0; pass <= n; ++pass) {
    std::vector<int> free;
    Eigen::VectorXd rhs = bw;
    for (int j = 0; j < n; ++j) {
      if (state[j] == 0)
        free.push_back(j);
      else
        rhs -= Aw.col(j) * volts[j];
    }
    Eigen::MatrixXd Af(kRows, free.size());
    for (size_t k = 0; k < free.size(); ++k) Af.col(k) = Aw.col(free[k]);
    int rank = 0;
    Eigen::VectorXd vf =
        free.empty() ? Eigen::VectorXd()
                     : svd_solve(Af, rhs, target.ridge, &rank);
    sol.rank = rank;
    for (size_t k = 0; k < free.size(); ++k) volts[free[k]] = vf[k];

    // worst bound violation among free pads
    int worst = -1, worst_dir = 0;
    double worst_amt = 0;
    for (size_t k = 0; k < free.size(); ++k) {
      int j = free[k];
      auto it = target.bounds.find(electrodes[dc_idx[j]].name);
      if (it == target.bounds.end()) continue;
      const auto& [lo, hi] = it->second;
      if (lo > hi)
        throw ConfigError("bound lo > hi for '" + electrodes[dc_idx[j]].name +
                          "'");
      if (volts[j] > hi && volts[j] - hi > worst_amt) {
        worst = j;
        worst_dir = +1;
        worst_amt = volts[j] - hi;
      }
      if (volts[j] < lo && lo - volts[j] > worst_amt) {
        worst = j;
        worst_dir = -1;
        worst_amt = lo - volts[j];
      }
    }
    if (worst < 0) break;
    const auto& [lo, hi] = target.bounds.at(electrodes[dc_idx[worst]].name);
    state[worst] = worst_dir;
    volts[worst] = worst_dir > 0 ? hi : lo;
  }

  for (int j = 0; j < n; ++j) {
    sol.voltages[electrodes[dc_idx[j]].name] = volts[j];
    if (state[j] != 0) {
      sol.bounded = true;
      sol.clipped.push_back(electrodes[dc_idx[j]].name);
    }
  }

  Eigen::VectorXd resid = Aw * volts - bw;
  sol.residual_norm = resid.norm();
  const double bnorm = bw.norm();
  sol.residual_rel = bnorm > 1e-30 ? sol.residual_norm / bnorm : 0.0;

  FieldEval achieved = basis.superpose(sol.voltages, target.point, 2);
  sol.achieved_field = achieved.field();
  sol.achieved_hessian = achieved.hessian;
  return sol;
}

Mat3 tilt_target(const Mat3& hessian, double angle, TiltPlane plane) {
  Mat3 R;
  const double c = std::cos(angle), s = std::sin(angle);
  if (plane == TiltPlane::xz) // rotation about +y: x -> x cos + z sin
    R << c, 0, s, 0, 1, 0, -s, 0, c;
  else // rotation about -x: y -> y cos + z sin
    R << 1, 0, 0, 0, c, s, 0, -s, c;
  return R * hessian * R.transpose();
}

double equilibrium_on_null(const FieldBasis& basis,
                           const std::map<std::string, double>& dc_voltages,
                           const Ion& ion, double z_lo, double z_hi) {
  if (!(z_lo > 0) || !(z_hi > z_lo))
    throw ConfigError("equilibrium search needs 0 < z_lo < z_hi");
  auto coeffs = basis.coeffs(dc_voltages);
  // axial force per charge: F_z/q = E_z = -dphi/dz on the null line
  auto force = [&](double z) {
    return -basis.superpose(coeffs, Vec3{0, 0, z}, 1).gradient[2];
  };

  // bracket by scanning, then refine with TOMS 748
  const int n_scan = 128;
  double za = z_lo, fa = force(za), zb = 0, fb = 0;
  bool found = false;
  for (int i = 1; i <= n_scan; ++i) {
    zb = z_lo + (z_hi - z_lo) * i / n_scan;
    fb = force(zb);
    if (fa == 0) {
      zb = za;
      found = true;
      break;
    }
    if (fa * fb <= 0) {
      found = true;
      break;
    }
    za = zb;
    fa = fb;
  }
  if (!found)
    throw NumericalError("no axial dc equilibrium in [" +
                         std::to_string(to_um(z_lo)) + ", " +
                         std::to_string(to_um(z_hi)) + "] um");

  double z_eq;
  if (za == zb) {
    z_eq = za;
  } else {
    boost::math::tools::eps_tolerance<double> tol(48);
    std::uintmax_t iters = 200;
    auto r = boost::math::tools::toms748_solve(force, za, zb, tol, iters);
    z_eq = 0.5 * (r.first + r.second);
  }

  // axial stability: positive curvature of the potential energy q*phi
  const double phi_zz =
      basis.superpose(coeffs, Vec3{0, 0, z_eq}, 2).hessian(2, 2);
  if (ion.charge * phi_zz <= 0)
    throw ModelDomainError("axial dc equilibrium at z = " +
                           std::to_string(to_um(z_eq)) +
                           " um is anti-confining");
  return z_eq;
}

} // namespace fourrf
