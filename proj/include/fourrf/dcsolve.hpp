#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fourrf/constants.hpp"
#include "fourrf/efield.hpp"

namespace fourrf {

enum class TiltPlane { xz, yz };

// Least-squares target for the dc electrode set at one point: three field
// components and five independent potential-curvature components (zz follows
// from the traceless constraint).  Row order for the weights:
// [Ex, Ey, Ez, Hxx, Hyy, Hxy, Hxz, Hyz].
struct DcTarget {
  Vec3 point = Vec3::Zero();
  Vec3 field = Vec3::Zero(); // E = -grad(phi), V/m
  Mat3 hessian = Mat3::Zero(); // potential Hessian, V/m^2, must be ~traceless
  Eigen::Matrix<double, 8, 1> weights = Eigen::Matrix<double, 8, 1>::Ones();
  std::map<std::string, std::pair<double, double>> bounds; // volts, per pad
  // Tikhonov strength relative to the largest normal-matrix eigenvalue;
  // keeps the min-norm solution tame near rank changes.  0 disables.
  double ridge = 1e-12;
};

struct DcSolution {
  std::map<std::string, double> voltages; // every dc-role electrode
  double residual_norm = 0; // weighted, in row-normalized units
  double residual_rel = 0;  // residual_norm / ||weighted rhs|| (0 if rhs ~ 0)
  Vec3 achieved_field = Vec3::Zero();
  Mat3 achieved_hessian = Mat3::Zero();
  int rank = 0;             // numerical rank of the constraint matrix
  bool bounded = false;     // true if any bound ended up active
  std::vector<std::string> clipped; // pads held at a bound
};

// Minimum-norm weighted least squares over the dc electrodes (SVD with
// rank thresholding + optional ridge), then active-set clipping to the
// voltage bounds.  Throws ModelDomainError when the target Hessian is not
// traceless (no vacuum potential can realize it).
DcSolution solve_dc(const FieldBasis& basis, const DcTarget& target);

// Rotate a curvature target by angle about the axis normal to the chosen
// plane (xz: about +y, so +angle tips the x axis toward +z; yz: about -x).
Mat3 tilt_target(const Mat3& hessian, double angle, TiltPlane plane);

// Axial equilibrium of the dc potential on the rf null line (the z axis for
// the four-square layout with a matched drive, where the rf field vanishes
// identically).  Root of the axial force in [z_lo, z_hi], refined to ~1e-12
// relative.  Throws NumericalError when the force does not cross zero and
// ModelDomainError when the equilibrium is axially anti-confining.
double equilibrium_on_null(const FieldBasis& basis,
                           const std::map<std::string, double>& dc_voltages,
                           const Ion& ion, double z_lo, double z_hi);

} // namespace fourrf
