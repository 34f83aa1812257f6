#include "fourrf/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "fourrf/errors.hpp"

namespace fourrf {

double lamb_dicke(const Ion& ion, const ProbeGeometry& probe,
                  double mode_omega, const Vec3& mode_axis) {
  if (!(mode_omega > 0))
    throw ConfigError("lamb_dicke: mode frequency must be positive");
  const double n = mode_axis.norm();
  if (!(n > 0))
    throw ConfigError("lamb_dicke: mode axis must not vanish");
  const double x0 = std::sqrt(constants::hbar / (2.0 * ion.mass * mode_omega));
  return std::abs(probe.k.dot(mode_axis) / n) * x0;
}

void SidebandScan::validate() const {
  if (!(eta > 0) || !(eta < 0.5))
    throw ConfigError("sideband scan: eta must lie in (0, 0.5)");
  if (!(rabi_carrier > 0))
    throw ConfigError("sideband scan: carrier Rabi frequency must be positive");
  if (!(probe_time > 0))
    throw ConfigError("sideband scan: probe time must be positive");
  if (!(mode_omega > 0))
    throw ConfigError("sideband scan: mode frequency must be positive");
  if (shots < 1)
    throw ConfigError("sideband scan: need at least one shot per point");
  if (detunings.empty())
    throw ConfigError("sideband scan: empty detuning grid");
}

SidebandScan SidebandScan::typical(const Ion& ion) {
  SidebandScan s;
  s.eta = lamb_dicke(ion, ProbeGeometry::vertical_729(), s.mode_omega);
  // 3/4 of an n=0 blue pi-pulse: strong contrast without sitting on the
  // flat top where the amplitude ratio loses sensitivity
  s.probe_time = 0.75 * constants::pi / (s.eta * s.rabi_carrier);
  for (int i = -15; i <= 15; ++i)
    s.detunings.push_back(2.0 * constants::pi * i * 1e3);
  return s;
}

double excitation_probability(const SidebandScan& scan, Sideband sideband,
                              double nbar, double detuning) {
  scan.validate();
  if (!(nbar >= 0))
    throw ConfigError("excitation_probability: nbar must be >= 0");

  const double r = nbar / (nbar + 1.0);
  double weight = 1.0 / (nbar + 1.0); // p_0
  double tail = 1.0;                  // mass not yet consumed
  double p = 0.0;
  for (int n = 0; n < 100000 && tail > 1e-12; ++n) {
    double rabi = 0;
    switch (sideband) {
    case Sideband::red:
      rabi = scan.eta * scan.rabi_carrier * std::sqrt(double(n));
      break;
    case Sideband::blue:
      rabi = scan.eta * scan.rabi_carrier * std::sqrt(double(n + 1));
      break;
    case Sideband::carrier:
      rabi = scan.rabi_carrier;
      break;
    }
    const double w2 = rabi * rabi + detuning * detuning;
    if (w2 > 0) {
      const double s = std::sin(0.5 * std::sqrt(w2) * scan.probe_time);
      p += weight * (rabi * rabi / w2) * s * s;
    }
    tail -= weight;
    weight *= r;
  }
  return p;
}

SyntheticScan synthesize_scan(const SidebandScan& scan, double nbar,
                              std::uint64_t seed, bool analytic) {
  scan.validate();
  SyntheticScan out;
  out.seed = seed;
  out.analytic = analytic;
  std::mt19937_64 rng(seed);
  for (Sideband sb : {Sideband::red, Sideband::blue}) {
    auto& dest = sb == Sideband::red ? out.red : out.blue;
    dest.reserve(scan.detunings.size());
    for (double delta : scan.detunings) {
      const double p = excitation_probability(scan, sb, nbar, delta);
      double frac = p;
      if (!analytic) {
        std::binomial_distribution<int> draw(scan.shots,
                                             std::clamp(p, 0.0, 1.0));
        frac = double(draw(rng)) / scan.shots;
      }
      dest.push_back({delta, frac, scan.shots});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// gaussian least squares
// ---------------------------------------------------------------------------

namespace {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::Vector4d;
using Eigen::VectorXd;

VectorXd gaussian_model(const VectorXd& x, const Vector4d& th) {
  return th[0] * (-(x.array() - th[1]).square() / (2.0 * th[2] * th[2]))
                     .exp()
                     .matrix() +
         VectorXd::Constant(x.size(), th[3]);
}

MatrixXd gaussian_jacobian(const VectorXd& x, const Vector4d& th) {
  const auto d = x.array() - th[1];
  const auto g = (-d.square() / (2.0 * th[2] * th[2])).exp();
  MatrixXd jac(x.size(), 4);
  jac.col(0) = g.matrix();
  jac.col(1) = (th[0] * g * d / (th[2] * th[2])).matrix();
  jac.col(2) = (th[0] * g * d.square() / (th[2] * th[2] * th[2])).matrix();
  jac.col(3) = VectorXd::Ones(x.size());
  return jac;
}

} // namespace

namespace {

// shared engine, working on noise-whitened residuals r_i = (y_i - m_i)/s_i;
// chi2_scaled switches the covariance convention (see the header)
GaussianFit fit_gaussian_engine(const VectorXd& x, const VectorXd& y,
                                const VectorXd& sig, bool chi2_scaled) {
  const int n = static_cast<int>(x.size());

  // moment-based start: peak over baseline, width from the grid span
  int imax = 0;
  y.maxCoeff(&imax);
  const double span = x.maxCoeff() - x.minCoeff();
  if (!(span > 0))
    throw ConfigError("fit_gaussian: degenerate abscissa grid");
  Vector4d th(y.maxCoeff() - y.minCoeff(), x[imax], span / 6.0, y.minCoeff());
  if (th[0] <= 0)
    throw NumericalError("fit_gaussian: flat data, no peak to fit");

  const Eigen::ArrayXd w = sig.array().inverse();
  auto whitened_rss = [&](const Vector4d& p) {
    return ((y - gaussian_model(x, p)).array() * w).matrix().squaredNorm();
  };
  double rss = whitened_rss(th);
  double lambda = 1e-3;
  bool converged = false;
  bool ever_stepped = false;
  int iters = 0;
  for (int it = 0; it < 200 && !converged; ++it) {
    const MatrixXd jac = w.matrix().asDiagonal() * gaussian_jacobian(x, th);
    const VectorXd res =
        ((y - gaussian_model(x, th)).array() * w).matrix();
    const Eigen::Matrix4d jtj = jac.transpose() * jac;
    const Vector4d jtr = jac.transpose() * res;

    bool stepped = false;
    for (int tries = 0; tries < 60; ++tries) {
      Eigen::Matrix4d damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-30);
      const Vector4d step = damped.ldlt().solve(jtr);
      Vector4d cand = th + step;
      if (std::abs(cand[2]) < 1e-12 * span)
        cand[2] = 1e-12 * span; // keep the width away from the singularity
      const double cand_rss = whitened_rss(cand);
      if (std::isfinite(cand_rss) && cand_rss <= rss) {
        converged = rss - cand_rss <= 1e-14 * (rss + 1e-300);
        th = cand;
        rss = cand_rss;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        ever_stepped = true;
        break;
      }
      lambda *= 8.0;
      if (lambda > 1e14)
        break;
    }
    iters = it + 1;
    // no downhill step left after a productive descent: we are at a minimum
    if (!stepped)
      converged = ever_stepped;
    if (!stepped)
      break;
  }
  if (!converged)
    throw NumericalError("fit_gaussian: no convergence");

  th[2] = std::abs(th[2]); // width sign is immaterial
  GaussianFit fit;
  fit.amplitude = th[0];
  fit.center = th[1];
  fit.width = th[2];
  fit.offset = th[3];
  fit.rss = rss;
  fit.iterations = iters;

  const MatrixXd jac = w.matrix().asDiagonal() * gaussian_jacobian(x, th);
  const Eigen::Matrix4d jtj = jac.transpose() * jac;
  // chi2_scaled: never let a lucky chi2 < dof tighten the bars below the
  // stated per-point noise; otherwise rss estimates the noise itself
  const double dof = std::max(1, n - 4);
  const double s2 = chi2_scaled ? std::max(1.0, rss / dof) : rss / dof;
  const Eigen::Matrix4d cov =
      s2 * jtj.ldlt().solve(Eigen::Matrix4d::Identity());
  fit.sigma_amplitude = std::sqrt(std::max(0.0, cov(0, 0)));
  fit.sigma_center = std::sqrt(std::max(0.0, cov(1, 1)));
  fit.sigma_width = std::sqrt(std::max(0.0, cov(2, 2)));
  fit.sigma_offset = std::sqrt(std::max(0.0, cov(3, 3)));
  return fit;
}

void check_fit_sizes(size_t nx, size_t ny) {
  if (nx != ny)
    throw ConfigError("fit_gaussian: x and y sizes differ");
  if (nx < 5)
    throw ConfigError("fit_gaussian: need at least 5 points for 4 parameters");
}

} // namespace

GaussianFit fit_gaussian(const std::vector<double>& xs,
                         const std::vector<double>& ys) {
  check_fit_sizes(xs.size(), ys.size());
  const int n = static_cast<int>(xs.size());
  return fit_gaussian_engine(Map<const VectorXd>(xs.data(), n),
                             Map<const VectorXd>(ys.data(), n),
                             VectorXd::Ones(n), false);
}

GaussianFit fit_gaussian(const std::vector<double>& xs,
                         const std::vector<double>& ys,
                         const std::vector<double>& sigma) {
  check_fit_sizes(xs.size(), ys.size());
  if (sigma.size() != xs.size())
    throw ConfigError("fit_gaussian: sigma size differs from the data");
  for (double s : sigma)
    if (!(s > 0))
      throw ConfigError("fit_gaussian: sigmas must be positive");
  const int n = static_cast<int>(xs.size());
  return fit_gaussian_engine(Map<const VectorXd>(xs.data(), n),
                             Map<const VectorXd>(ys.data(), n),
                             Map<const VectorXd>(sigma.data(), n), true);
}

ThermalEstimate estimate_nbar(const std::vector<ScanSample>& red,
                              const std::vector<ScanSample>& blue) {
  auto fit_scan = [](const std::vector<ScanSample>& s) {
    std::vector<double> x, y, sig;
    x.reserve(s.size());
    y.reserve(s.size());
    sig.reserve(s.size());
    for (const auto& p : s) {
      if (p.shots < 1)
        throw ConfigError("estimate_nbar: every sample needs shots >= 1");
      x.push_back(p.detuning);
      y.push_back(p.fraction);
      // half-count regularized binomial error bar from the observed fraction
      const double pt = (p.fraction * p.shots + 0.5) / (p.shots + 1.0);
      sig.push_back(std::sqrt(pt * (1.0 - pt) / p.shots));
    }
    GaussianFit fit = fit_gaussian(x, y, sig);
    // reweight once with the model's predicted fractions: error bars taken
    // from the data make downward fluctuations look precise and bias the
    // weights; the refit removes that correlation
    for (size_t i = 0; i < x.size(); ++i) {
      const double floor = 0.5 / (s[i].shots + 1.0);
      const double d = (x[i] - fit.center) / fit.width;
      const double model = fit.amplitude * std::exp(-0.5 * d * d) + fit.offset;
      const double pt = std::clamp(model, floor, 1.0 - floor);
      sig[i] = std::sqrt(pt * (1.0 - pt) / s[i].shots);
    }
    return fit_gaussian(x, y, sig);
  };

  ThermalEstimate est;
  est.red = fit_scan(red);
  est.blue = fit_scan(blue);
  if (!(est.blue.amplitude > 0))
    throw NumericalError("estimate_nbar: blue sideband fit has no peak");

  const double r = est.red.amplitude / est.blue.amplitude;
  est.amplitude_ratio = r;
  if (r >= 1.0)
    throw ModelDomainError(
        "estimate_nbar: red/blue ratio >= 1 is not a thermal state");
  est.nbar = std::max(0.0, r / (1.0 - r));

  // independent fits: the ratio variance adds in relative quadrature, then
  // d(nbar)/dR = 1/(1-R)^2
  const double rel2 =
      std::pow(est.red.sigma_amplitude / est.red.amplitude, 2) +
      std::pow(est.blue.sigma_amplitude / est.blue.amplitude, 2);
  const double sigma_r = std::abs(r) * std::sqrt(rel2);
  est.sigma = sigma_r / ((1.0 - r) * (1.0 - r));
  return est;
}

} // namespace fourrf
