#pragma once

#include <array>
#include <complex>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fourrf/geometry.hpp"

namespace fourrf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec3c = Eigen::Vector3cd;
using Mat3c = Eigen::Matrix3cd;
using cplx = std::complex<double>;

// Symmetric third-derivative tensor of a scalar field, stored as the three
// derivative slabs slab[k] = d(Hessian)/dx_k.
struct Tensor3 {
  std::array<Mat3, 3> slab{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};

  // sum_k slab[k] * v[k]  (directional derivative of the Hessian)
  Mat3 contract(const Vec3& v) const;
  Mat3c contract(const Vec3c& v) const;
};

// Potential of a unit-voltage electrode set and its derivatives at a point.
// potential in V, gradient in V/m, hessian in V/m^2, third in V/m^3.
struct FieldEval {
  double potential = 0;
  Vec3 gradient = Vec3::Zero();
  Mat3 hessian = Mat3::Zero();
  Tensor3 third;

  Vec3 field() const { return -gradient; } // E = -grad(phi)
};

// Complex-phasor superposition (rf drive with per-electrode amplitude and
// phase); physical field is Re(field() * exp(i*omega*t)).
struct PhasorEval {
  cplx potential{0, 0};
  Vec3c gradient = Vec3c::Zero();
  Mat3c hessian = Mat3c::Zero();
  std::array<Mat3c, 3> third{Mat3c::Zero(), Mat3c::Zero(), Mat3c::Zero()};

  Vec3c field() const { return -gradient; }
  Mat3c third_contract(const Vec3c& v) const {
    return third[0] * v[0] + third[1] * v[1] + third[2] * v[2];
  }
};

// Analytic basis functions for a rectangle-electrode layout in the z = 0
// plane with the surrounding plane grounded (gapless approximation).  Each
// electrode held at 1 V with all others grounded subtends the potential
// phi = (solid angle)/(2*pi), a closed-form arctangent sum over rectangle
// corners, differentiable in closed form through third order.  Valid for
// z > 0 only.
class FieldBasis {
public:
  explicit FieldBasis(ElectrodeLayout layout);

  const ElectrodeLayout& layout() const { return layout_; }
  int n_electrodes() const { return static_cast<int>(layout_.electrodes.size()); }

  // order: highest derivative to evaluate (0..3); higher orders stay zero
  FieldEval evaluate(int electrode, const Vec3& p, int order = 2) const;
  FieldEval evaluate(const std::string& electrode, const Vec3& p,
                     int order = 2) const;

  double potential(const std::string& electrode, const Vec3& p) const;
  Vec3 gradient(const std::string& electrode, const Vec3& p) const;
  Mat3 hessian(const std::string& electrode, const Vec3& p) const;

  // weighted sums over electrodes; missing names throw ConfigError
  FieldEval superpose(const std::map<std::string, double>& volts,
                      const Vec3& p, int order = 2) const;
  PhasorEval superpose(const std::map<std::string, cplx>& volts, const Vec3& p,
                       int order = 2) const;

  // dense per-electrode coefficient vectors for the hot paths
  std::vector<double> coeffs(const std::map<std::string, double>& volts) const;
  std::vector<cplx> coeffs(const std::map<std::string, cplx>& volts) const;
  FieldEval superpose(const std::vector<double>& volts, const Vec3& p,
                      int order = 2) const;
  PhasorEval superpose(const std::vector<cplx>& volts, const Vec3& p,
                       int order = 2) const;

  // one geometry pass shared by an rf phasor set and a dc set (integrator
  // hot path); either output may be null
  void superpose_rf_dc(const std::vector<cplx>& rf,
                       const std::vector<double>& dc, const Vec3& p, int order,
                       PhasorEval* rf_out, FieldEval* dc_out) const;

private:
  ElectrodeLayout layout_;
  struct FlatRect {
    int electrode;
    double x0, x1, y0, y1;
  };
  std::vector<FlatRect> rects_;
};

// Infinite strip x0 < x < x1 (all y) at 1 V in a grounded plane: the exact
// 2D result phi = (atan((x1-x)/z) - atan((x0-x)/z))/pi.  Cross-check only.
double strip_potential(double x0, double x1, double x, double z);
Eigen::Vector2d strip_gradient(double x0, double x1, double x,
                               double z); // (d/dx, d/dz)

} // namespace fourrf
