#pragma once

// Independent integral oracle for the rectangle-electrode potential: the
// half-space Dirichlet Green function gives
//   phi(p) = z/(2*pi) * integral over the pad of dA / |p - p'|^3 ,
// evaluated here with tiled Gauss-Legendre product quadrature.  This shares
// no code with the closed-form arctangent evaluator it checks.

#include <cmath>
#include <utility>
#include <vector>

#include "fourrf/geometry.hpp"

namespace fourrf::testsupport {

inline std::pair<std::vector<double>, std::vector<double>>
gauss_legendre(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p1 = 0, dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1;
      p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[i] = -t;
    x[n - 1 - i] = t;
    w[i] = w[n - 1 - i] = 2.0 / ((1 - t * t) * dp * dp);
  }
  return {x, w};
}

inline double rect_potential_quad(const Rect& r, double px, double py,
                                  double pz, int tiles = 8, int order = 24) {
  auto [xn, xw] = gauss_legendre(order);
  double sum = 0;
  const double hx = (r.x_max - r.x_min) / tiles;
  const double hy = (r.y_max - r.y_min) / tiles;
  for (int tx = 0; tx < tiles; ++tx)
    for (int ty = 0; ty < tiles; ++ty) {
      const double cx = r.x_min + (tx + 0.5) * hx;
      const double cy = r.y_min + (ty + 0.5) * hy;
      for (int i = 0; i < order; ++i)
        for (int j = 0; j < order; ++j) {
          const double sx = cx + 0.5 * hx * xn[i] - px;
          const double sy = cy + 0.5 * hy * xn[j] - py;
          const double d2 = sx * sx + sy * sy + pz * pz;
          sum += xw[i] * xw[j] / (d2 * std::sqrt(d2));
        }
    }
  return sum * pz / (2.0 * M_PI) * 0.25 * hx * hy;
}

} // namespace fourrf::testsupport
