#include "fourrf/efield.hpp"

#include <cmath>

#include "fourrf/constants.hpp"
#include "fourrf/errors.hpp"

namespace fourrf {

Mat3 Tensor3::contract(const Vec3& v) const {
  return slab[0] * v[0] + slab[1] * v[1] + slab[2] * v[2];
}

Mat3c Tensor3::contract(const Vec3c& v) const {
  return slab[0].cast<cplx>() * v[0] + slab[1].cast<cplx>() * v[1] +
         slab[2].cast<cplx>() * v[2];
}

namespace {

// One corner term of the rectangle potential, T = atan2(dx*dy, z*r), and its
// derivatives with respect to the observation point.  dx = x_corner - x,
// dy = y_corner - y; A = dx^2 + z^2, B = dy^2 + z^2, r^2 = dx^2 + dy^2 + z^2.
// The rectangle potential is (1/2pi) * sum over corners with checkerboard
// signs.  Tzz is computed from its own closed form, not from -Txx-Tyy, so
// harmonicity stays a meaningful test of the implementation.
struct Corner {
  double T = 0;
  double Tx = 0, Ty = 0, Tz = 0;
  double Txx = 0, Tyy = 0, Tzz = 0, Txy = 0, Txz = 0, Tyz = 0;
  double Txxx = 0, Txxy = 0, Txxz = 0, Txyy = 0, Txyz = 0, Txzz = 0, Tyyy = 0,
         Tyyz = 0, Tyzz = 0, Tzzz = 0;
};

Corner corner_terms(double dx, double dy, double z, int order) {
  Corner c;
  const double r2 = dx * dx + dy * dy + z * z;
  const double r = std::sqrt(r2);
  c.T = std::atan2(dx * dy, z * r);
  if (order < 1) return c;

  const double A = dx * dx + z * z;
  const double B = dy * dy + z * z;
  const double r3 = r * r2;
  c.Tx = -z * dy / (r * A);
  c.Ty = -z * dx / (r * B);
  c.Tz = -dx * dy / r * (1.0 / A + 1.0 / B);
  if (order < 2) return c;

  const double A2 = A * A, B2 = B * B;
  c.Txx = -z * dx * dy * (A + 2 * r2) / (r3 * A2);
  c.Tyy = -z * dx * dy * (B + 2 * r2) / (r3 * B2);
  c.Tzz = z * dx * dy * ((2.0 / A2 + 2.0 / B2) / r + (1.0 / A + 1.0 / B) / r3);
  c.Txy = z / r3;
  c.Txz = dy * (A * (A + B) - 2 * dx * dx * r2) / (A2 * r3);
  c.Tyz = dx * (B * (A + B) - 2 * dy * dy * r2) / (B2 * r3);
  if (order < 3) return c;

  const double r5 = r3 * r2;
  const double z2 = z * z;
  c.Txxy = 3 * z * dx / r5;
  c.Txyy = 3 * z * dy / r5;
  c.Txyz = (r2 - 3 * z2) / r5;
  c.Txxx = -z * dy *
           ((dx * dx * (3 * A + 2 * r2) - r2 * A) / (r5 * A2) +
            2 * (dx * dx * (A + 4 * r2) - r2 * A) / (r3 * A2 * A));
  c.Tyyy = -z * dx *
           ((dy * dy * (3 * B + 2 * r2) - r2 * B) / (r5 * B2) +
            2 * (dy * dy * (B + 4 * r2) - r2 * B) / (r3 * B2 * B));
  c.Txxz = -dx * dy *
           (1.0 / (r3 * A) + 2.0 / (r * A2) - z2 * (3 * A + 2 * r2) / (r5 * A2) -
            2 * z2 * (A + 4 * r2) / (r3 * A2 * A));
  c.Tyyz = -dx * dy *
           (1.0 / (r3 * B) + 2.0 / (r * B2) - z2 * (3 * B + 2 * r2) / (r5 * B2) -
            2 * z2 * (B + 4 * r2) / (r3 * B2 * B));
  // the remaining terms follow from harmonicity of the derivative fields
  c.Txzz = -c.Txxx - c.Txyy;
  c.Tyzz = -c.Txxy - c.Tyyy;
  c.Tzzz = -c.Txxz - c.Tyyz;
  return c;
}

void accumulate(FieldEval& acc, double w, const Corner& c, int order) {
  acc.potential += w * c.T;
  if (order < 1) return;
  acc.gradient[0] += w * c.Tx;
  acc.gradient[1] += w * c.Ty;
  acc.gradient[2] += w * c.Tz;
  if (order < 2) return;
  acc.hessian(0, 0) += w * c.Txx;
  acc.hessian(1, 1) += w * c.Tyy;
  acc.hessian(2, 2) += w * c.Tzz;
  acc.hessian(0, 1) += w * c.Txy;
  acc.hessian(0, 2) += w * c.Txz;
  acc.hessian(1, 2) += w * c.Tyz;
  if (order < 3) return;
  auto& t = acc.third.slab;
  // slab[k](i,j) = d^3 T / dx_i dx_j dx_k, fully symmetric
  t[0](0, 0) += w * c.Txxx;
  t[0](0, 1) += w * c.Txxy;
  t[0](0, 2) += w * c.Txxz;
  t[0](1, 1) += w * c.Txyy;
  t[0](1, 2) += w * c.Txyz;
  t[0](2, 2) += w * c.Txzz;
  t[1](0, 0) += w * c.Txxy;
  t[1](0, 1) += w * c.Txyy;
  t[1](0, 2) += w * c.Txyz;
  t[1](1, 1) += w * c.Tyyy;
  t[1](1, 2) += w * c.Tyyz;
  t[1](2, 2) += w * c.Tyzz;
  t[2](0, 0) += w * c.Txxz;
  t[2](0, 1) += w * c.Txyz;
  t[2](0, 2) += w * c.Txzz;
  t[2](1, 1) += w * c.Tyyz;
  t[2](1, 2) += w * c.Tyzz;
  t[2](2, 2) += w * c.Tzzz;
}

void symmetrize(FieldEval& e, int order) {
  if (order >= 2) {
    e.hessian(1, 0) = e.hessian(0, 1);
    e.hessian(2, 0) = e.hessian(0, 2);
    e.hessian(2, 1) = e.hessian(1, 2);
  }
  if (order >= 3)
    for (auto& s : e.third.slab) {
      s(1, 0) = s(0, 1);
      s(2, 0) = s(0, 2);
      s(2, 1) = s(1, 2);
    }
}

void check_height(const Vec3& p) {
  if (!(p[2] > 0))
    throw ModelDomainError("field basis is defined for z > 0 only (z = " +
                           std::to_string(p[2]) + " m)");
}

} // namespace

FieldBasis::FieldBasis(ElectrodeLayout layout) : layout_(std::move(layout)) {
  auto rep = validate(layout_);
  if (!rep.ok())
    throw ConfigError("invalid electrode layout:\n" + rep.summary());
  for (size_t i = 0; i < layout_.electrodes.size(); ++i)
    for (const auto& r : layout_.electrodes[i].rects)
      rects_.push_back(
          {static_cast<int>(i), r.x_min, r.x_max, r.y_min, r.y_max});
}

FieldEval FieldBasis::evaluate(int electrode, const Vec3& p, int order) const {
  if (electrode < 0 || electrode >= n_electrodes())
    throw ConfigError("electrode index out of range");
  check_height(p);
  const double inv2pi = 1.0 / (2.0 * constants::pi);
  FieldEval acc;
  for (const auto& fr : rects_) {
    if (fr.electrode != electrode) continue;
    // checkerboard corner signs: + for (max,max) and (min,min)
    accumulate(acc, inv2pi,
               corner_terms(fr.x1 - p[0], fr.y1 - p[1], p[2], order), order);
    accumulate(acc, inv2pi,
               corner_terms(fr.x0 - p[0], fr.y0 - p[1], p[2], order), order);
    accumulate(acc, -inv2pi,
               corner_terms(fr.x0 - p[0], fr.y1 - p[1], p[2], order), order);
    accumulate(acc, -inv2pi,
               corner_terms(fr.x1 - p[0], fr.y0 - p[1], p[2], order), order);
  }
  symmetrize(acc, order);
  return acc;
}

FieldEval FieldBasis::evaluate(const std::string& electrode, const Vec3& p,
                               int order) const {
  int i = layout_.index_of(electrode);
  if (i < 0) throw ConfigError("unknown electrode '" + electrode + "'");
  return evaluate(i, p, order);
}

double FieldBasis::potential(const std::string& electrode,
                             const Vec3& p) const {
  return evaluate(electrode, p, 0).potential;
}

Vec3 FieldBasis::gradient(const std::string& electrode, const Vec3& p) const {
  return evaluate(electrode, p, 1).gradient;
}

Mat3 FieldBasis::hessian(const std::string& electrode, const Vec3& p) const {
  return evaluate(electrode, p, 2).hessian;
}

std::vector<double>
FieldBasis::coeffs(const std::map<std::string, double>& volts) const {
  std::vector<double> v(n_electrodes(), 0.0);
  for (const auto& [name, amp] : volts) {
    int i = layout_.index_of(name);
    if (i < 0) throw ConfigError("unknown electrode '" + name + "'");
    v[i] = amp;
  }
  return v;
}

std::vector<cplx>
FieldBasis::coeffs(const std::map<std::string, cplx>& volts) const {
  std::vector<cplx> v(n_electrodes(), cplx{0, 0});
  for (const auto& [name, amp] : volts) {
    int i = layout_.index_of(name);
    if (i < 0) throw ConfigError("unknown electrode '" + name + "'");
    v[i] = amp;
  }
  return v;
}

FieldEval FieldBasis::superpose(const std::map<std::string, double>& volts,
                                const Vec3& p, int order) const {
  return superpose(coeffs(volts), p, order);
}

PhasorEval FieldBasis::superpose(const std::map<std::string, cplx>& volts,
                                 const Vec3& p, int order) const {
  return superpose(coeffs(volts), p, order);
}

FieldEval FieldBasis::superpose(const std::vector<double>& volts,
                                const Vec3& p, int order) const {
  FieldEval out;
  superpose_rf_dc({}, volts, p, order, nullptr, &out);
  return out;
}

PhasorEval FieldBasis::superpose(const std::vector<cplx>& volts, const Vec3& p,
                                 int order) const {
  PhasorEval out;
  superpose_rf_dc(volts, {}, p, order, &out, nullptr);
  return out;
}

void FieldBasis::superpose_rf_dc(const std::vector<cplx>& rf,
                                 const std::vector<double>& dc, const Vec3& p,
                                 int order, PhasorEval* rf_out,
                                 FieldEval* dc_out) const {
  if (rf_out && rf.size() != static_cast<size_t>(n_electrodes()))
    throw ConfigError("rf coefficient vector has wrong length");
  if (dc_out && dc.size() != static_cast<size_t>(n_electrodes()))
    throw ConfigError("dc coefficient vector has wrong length");
  check_height(p);
  const double inv2pi = 1.0 / (2.0 * constants::pi);

  FieldEval rr, ri, dd; // rf real part, rf imag part, dc
  for (const auto& fr : rects_) {
    const int e = fr.electrode;
    double wr = 0, wi = 0, wd = 0;
    if (rf_out) {
      wr = rf[e].real() * inv2pi;
      wi = rf[e].imag() * inv2pi;
    }
    if (dc_out) wd = dc[e] * inv2pi;
    if (wr == 0 && wi == 0 && wd == 0) continue;

    const Corner cs[4] = {
        corner_terms(fr.x1 - p[0], fr.y1 - p[1], p[2], order),
        corner_terms(fr.x0 - p[0], fr.y0 - p[1], p[2], order),
        corner_terms(fr.x0 - p[0], fr.y1 - p[1], p[2], order),
        corner_terms(fr.x1 - p[0], fr.y0 - p[1], p[2], order)};
    const double sign[4] = {1, 1, -1, -1};
    for (int k = 0; k < 4; ++k) {
      if (wr != 0) accumulate(rr, sign[k] * wr, cs[k], order);
      if (wi != 0) accumulate(ri, sign[k] * wi, cs[k], order);
      if (wd != 0) accumulate(dd, sign[k] * wd, cs[k], order);
    }
  }
  symmetrize(rr, order);
  symmetrize(ri, order);
  symmetrize(dd, order);

  if (dc_out) *dc_out = dd;
  if (rf_out) {
    const cplx i1{0, 1};
    rf_out->potential = rr.potential + i1 * ri.potential;
    rf_out->gradient = rr.gradient.cast<cplx>() + i1 * ri.gradient.cast<cplx>();
    rf_out->hessian = rr.hessian.cast<cplx>() + i1 * ri.hessian.cast<cplx>();
    for (int k = 0; k < 3; ++k)
      rf_out->third[k] = rr.third.slab[k].cast<cplx>() +
                         i1 * ri.third.slab[k].cast<cplx>();
  }
}

double strip_potential(double x0, double x1, double x, double z) {
  if (!(z > 0)) throw ModelDomainError("strip potential needs z > 0");
  return (std::atan((x1 - x) / z) - std::atan((x0 - x) / z)) / constants::pi;
}

Eigen::Vector2d strip_gradient(double x0, double x1, double x, double z) {
  if (!(z > 0)) throw ModelDomainError("strip potential needs z > 0");
  const double a = x1 - x, b = x0 - x;
  const double da = 1.0 / (a * a + z * z), db = 1.0 / (b * b + z * z);
  return Eigen::Vector2d{(-da + db) * z, (-a * da + b * db)} / constants::pi;
}

} // namespace fourrf
