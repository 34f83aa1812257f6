// Acceptance gate: eight end-to-end criteria, one PASS/FAIL line each.
// Exits nonzero if any criterion fails.  Oracles are independent of the
// code under test: FFT spectra for mode frequencies, Gauss-Legendre
// quadrature and finite differences for the field math.

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "fourrf/circuit.hpp"
#include "fourrf/constants.hpp"
#include "fourrf/dcsolve.hpp"
#include "fourrf/dynamics.hpp"
#include "fourrf/efield.hpp"
#include "fourrf/geometry.hpp"
#include "fourrf/pseudo.hpp"
#include "fourrf/thermo.hpp"
#include "support/numdiff.hpp"
#include "support/quadrature.hpp"

using namespace fourrf;
using fourrf::testsupport::grad_fd;
using fourrf::testsupport::rect_potential_quad;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. matched antiphase drive nulls the rf field on the whole vertical axis
// ---------------------------------------------------------------------------
Outcome criterion_null_axis(const FieldBasis& basis) {
  DriveConfig drive = matched_drive(basis.layout(), 100.0, omega_from_MHz(18.1));
  std::vector<cplx> rf = basis.coeffs(drive.rf_amplitudes);
  double worst = 0;
  for (int i = 0; i <= 250; ++i) {
    double z = from_um(50.0 + i);
    double on = basis.superpose(rf, Vec3(0, 0, z), 1).field().norm();
    double off = basis.superpose(rf, Vec3(from_um(50), 0, z), 1).field().norm();
    worst = std::max(worst, on / off);
  }
  return {worst < 1e-9, "worst on/off-axis field ratio " + fmt("%.2e", worst) +
                            " (limit 1e-9)"};
}

// ---------------------------------------------------------------------------
// 2. rf amplitude vs height: interior minimum near 110 um, monotone sides,
//    4 deg tilt curve above the 0 deg curve everywhere
// ---------------------------------------------------------------------------
Outcome criterion_power_curve(const FieldBasis& basis) {
  OperatingPointSpec base; // 1 MHz planar target at 2pi x 18.1 MHz
  std::vector<double> h, v0, v4;
  for (int i = 0; i < 26; ++i) h.push_back(from_um(50.0 + 10.0 * i));
  for (double hi : h) {
    v0.push_back(rf_amplitude_for_target(basis, hi, base.planar_freq, 0, base));
    v4.push_back(rf_amplitude_for_target(basis, hi, base.planar_freq,
                                         4.0 * constants::pi / 180.0, base));
  }
  std::size_t imin = std::min_element(v0.begin(), v0.end()) - v0.begin();
  bool interior = imin > 0 && imin + 1 < v0.size();
  bool monotone = true;
  for (std::size_t i = 1; i <= imin && monotone; ++i)
    monotone = v0[i] < v0[i - 1];
  for (std::size_t i = imin + 1; i < v0.size() && monotone; ++i)
    monotone = v0[i] > v0[i - 1];
  bool ordered = true;
  for (std::size_t i = 0; i < h.size(); ++i) ordered = ordered && v4[i] >= v0[i];
  double h_min = to_um(h[imin]);
  bool near = h_min >= 90.0 && h_min <= 130.0;
  return {interior && monotone && ordered && near,
          "V(h) minimum at " + fmt("%.0f", h_min) +
              " um (want 110 +- 20), monotone sides " +
              (monotone ? "yes" : "NO") + ", 4deg >= 0deg " +
              (ordered ? "yes" : "NO")};
}

// ---------------------------------------------------------------------------
// 3. Hessian mode frequencies vs FFT of integrated trajectories, 20 random
//    stable configurations with q <= 0.3, agreement within 2%
// ---------------------------------------------------------------------------
double fft_peak_freq(const std::vector<double>& signal, double dt, double f_lo,
                     double f_hi) {
  const int n = static_cast<int>(signal.size());
  std::vector<double> in(signal.size());
  double mean = 0;
  for (double s : signal) mean += s;
  mean /= n;
  for (int i = 0; i < n; ++i) { // Hann window keeps leakage off the peak
    double w = 0.5 - 0.5 * std::cos(2.0 * constants::pi * i / (n - 1));
    in[i] = (signal[i] - mean) * w;
  }
  std::vector<std::complex<double>> spec(n / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(
      n, in.data(), reinterpret_cast<fftw_complex*>(spec.data()),
      FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  const double df = 1.0 / (n * dt);
  int lo = std::max(1, int(f_lo / df)), hi = std::min(int(spec.size()) - 2,
                                                      int(f_hi / df));
  int k = lo;
  for (int i = lo; i <= hi; ++i)
    if (std::abs(spec[i]) > std::abs(spec[k])) k = i;
  // parabolic interpolation on log magnitude
  double a = std::log(std::abs(spec[k - 1]) + 1e-300);
  double b = std::log(std::abs(spec[k]) + 1e-300);
  double c = std::log(std::abs(spec[k + 1]) + 1e-300);
  double d = 0.5 * (a - c) / (a - 2 * b + c);
  return (k + d) * df;
}

Outcome criterion_modes_vs_fft(const FieldBasis& basis) {
  std::mt19937 rng(1234);
  auto uni = [&](double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
  };

  // draw stable operating points with well-separated modes
  std::vector<OperatingPoint> ops;
  std::vector<std::string> labels;
  int draws = 0;
  while (ops.size() < 20 && draws < 200) {
    ++draws;
    OperatingPointSpec spec;
    spec.height = from_um(uni(100, 250));
    spec.rf_omega = omega_from_MHz(uni(15, 25));
    spec.planar_freq = omega_from_MHz(uni(0.7, 1.3));
    spec.vertical_freq = omega_from_MHz(uni(0.8, 1.6));
    spec.splitting = uni(0.05, 0.2);
    spec.tilt = uni(0.0, 4.0) * constants::pi / 180.0;
    spec.plane = (draws % 2) ? TiltPlane::xz : TiltPlane::yz;
    OperatingPoint op;
    try {
      op = plan_operating_point(basis, spec);
    } catch (const std::exception&) {
      continue;
    }
    double qmax = 0, fmin = 1e18, fgap = 1e18;
    std::vector<double> fs;
    bool stable = true;
    for (int m = 0; m < 3; ++m) {
      const AxisMode& am = op.modes.mode(m);
      stable = stable && am.stable;
      qmax = std::max(qmax, std::abs(am.mathieu_q));
      fs.push_back(am.omega / (2.0 * constants::pi));
    }
    std::sort(fs.begin(), fs.end());
    fmin = fs[0];
    fgap = std::min(fs[1] - fs[0], fs[2] - fs[1]);
    if (!stable || qmax > 0.3 || fmin < 0.5e6 || fgap < 30e3) continue;
    ops.push_back(op);
    labels.push_back(fmt("%.0f", to_um(spec.height)) + " um, q " +
                     fmt("%.2f", qmax));
  }
  if (ops.size() < 20)
    return {false, "only drew " + std::to_string(ops.size()) +
                       " stable configurations"};

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  double worst = 0;
  std::string worst_who = "none";
  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= ops.size()) return;
      const OperatingPoint& op = ops[i];
      // one trajectory excites all three modes at once
      Vec3 x0 = op.modes.equilibrium;
      for (int m = 0; m < 3; ++m) x0 += from_um(0.2) * op.modes.mode(m).axis;
      const double duration = 256e-6;
      Trajectory tr = integrate_motion(basis, op.drive, x0, Vec3::Zero(),
                                       duration);
      const double dt = tr.t[1] - tr.t[0];
      for (int m = 0; m < 3; ++m) {
        const AxisMode& am = op.modes.mode(m);
        std::vector<double> proj(tr.size());
        for (std::size_t k = 0; k < tr.size(); ++k)
          proj[k] = (tr.position[k] - op.modes.equilibrium).dot(am.axis);
        double f_hess = am.omega / (2.0 * constants::pi);
        double f_fft = fft_peak_freq(proj, dt, 0.6 * f_hess, 1.4 * f_hess);
        double err = std::abs(f_fft - f_hess) / f_hess;
        std::lock_guard<std::mutex> lock(mu);
        if (err > worst) {
          worst = err;
          worst_who = labels[i] + ", mode " + std::to_string(m);
        }
      }
    }
  };
  unsigned n_threads = std::min(4u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::max(1u, n_threads); ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  return {worst < 0.02, "20 configurations x 3 modes, worst |f_fft - f_hess|/f = " +
                            fmt("%.3f%%", 100 * worst) + " (" + worst_who +
                            ", limit 2%)"};
}

// ---------------------------------------------------------------------------
// 4. dc solver: 0.10 +- 0.001 planar splitting at 1 MHz, and equilibrium
//    height round-trips across 50-300 um within 0.5 um
// ---------------------------------------------------------------------------
Outcome criterion_dc_solver(const FieldBasis& basis) {
  OperatingPointSpec spec;
  OperatingPoint op = plan_operating_point(basis, spec);
  double wx = op.modes.x_like.omega, wy = op.modes.y_like.omega;
  double split = std::abs(wy - wx) / wx;
  double fx = MHz_from_omega(wx);
  bool split_ok = std::abs(split - 0.10) <= 0.001 &&
                  std::abs(fx - 1.0) < 1e-4;

  const Ion ion = spec.ion;
  double worst = 0;
  for (double h_um : {50.0, 100.0, 150.0, 200.0, 250.0, 300.0}) {
    double h = from_um(h_um);
    double c = ion.mass * spec.vertical_freq * spec.vertical_freq / ion.charge;
    Mat3 hess = Mat3::Zero();
    hess(0, 0) = hess(1, 1) = -c / 2;
    hess(2, 2) = c;
    DcTarget target;
    target.point = {0, 0, h};
    target.hessian = hess;
    DcSolution sol = solve_dc(basis, target);
    double zeq = equilibrium_on_null(basis, sol.voltages, ion, 0.3 * h, 3 * h);
    worst = std::max(worst, std::abs(to_um(zeq) - h_um));
  }
  return {split_ok && worst <= 0.5,
          "splitting " + fmt("%.4f", split) + " at " + fmt("%.4f", fx) +
              " MHz (want 0.100 +- 0.001), worst height round-trip " +
              fmt("%.3f", worst) + " um (limit 0.5)"};
}

// ---------------------------------------------------------------------------
// 5. trimmer sweep with a loss asymmetry: beta linear in |f - f_min| over
//    the central band, minimum at the matched setting, span >= 1.0 -> <= 0.1
// ---------------------------------------------------------------------------
Outcome criterion_beta_sweep(const FieldBasis& basis) {
  ResonatorNetwork net = ResonatorNetwork::reference_defaults();
  net.minus.r_loss *= 1.0025; // un-nullable arm asymmetry
  double amp = rf_amplitude_for_target(basis, from_um(175), omega_from_MHz(1.0));
  DriveConfig drive = matched_drive(basis.layout(), amp, omega_from_MHz(18.1));
  std::vector<double> cvs;
  for (int i = 0; i < 49; ++i)
    cvs.push_back(5e-12 - 24e-15 + 48e-15 * i / 48.0);
  std::vector<BetaSweepPoint> pts =
      beta_vs_resonance(net, basis, drive, Vec3(0, 0, from_um(175)),
                        ProbeGeometry::vertical_729(), cvs);

  std::size_t imin = 0;
  double bmax = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].beta < pts[imin].beta) imin = i;
    bmax = std::max(bmax, pts[i].beta);
  }
  bool matched_min = std::abs(int(imin) - 24) <= 1; // nominal trimmer setting
  bool span = bmax >= 1.0 && pts[imin].beta <= 0.1;

  // folded linearity: beta vs |f - f_min| inside the +-0.5% band
  double f_min = pts[imin].resonance_hz;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int n = 0;
  for (const auto& p : pts) {
    if (std::abs(p.resonance_hz - f_min) > 0.005 * f_min) continue;
    double x = std::abs(p.resonance_hz - f_min), y = p.beta;
    sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
    ++n;
  }
  double cov = sxy - sx * sy / n, vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
  double r2 = cov * cov / (vx * vy);
  return {matched_min && span && r2 > 0.99,
          "beta " + fmt("%.2f", bmax) + " -> " + fmt("%.3f", pts[imin].beta) +
              ", min at point " + std::to_string(imin) +
              " of 49 (nominal 24), folded R^2 = " + fmt("%.4f", r2) +
              " over " + std::to_string(n) + " points (limit 0.99)"};
}

// ---------------------------------------------------------------------------
// 6. Bessel sideband ratio: round trip and small-beta limit
// ---------------------------------------------------------------------------
Outcome criterion_bessel() {
  double worst = 0;
  for (int i = 0; i <= 1800; ++i) {
    double b = 1.8 * i / 1800.0;
    double back = sideband_ratio_to_beta(beta_to_sideband_ratio(b));
    worst = std::max(worst, std::abs(back - b));
  }
  double ratio = beta_to_sideband_ratio(0.01);
  double small_dev = std::abs(0.01 / (2.0 * ratio) - 1.0);
  return {worst < 1e-10 && small_dev < 1e-3,
          "worst round-trip error " + fmt("%.1e", worst) +
              " (limit 1e-10), small-beta deviation " + fmt("%.1e", small_dev) +
              " (limit 1e-3)"};
}

// ---------------------------------------------------------------------------
// 7. thermometry: nbar = 0.20, 100 shots, seeds 0-99; >= 95 within 2 s.d.,
//    typical s.d. of order 0.03
// ---------------------------------------------------------------------------
Outcome criterion_thermometry() {
  SidebandScan scan = SidebandScan::typical();
  const double nbar = 0.20;
  int hits = 0, fails = 0;
  std::vector<double> sigmas;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SyntheticScan syn = synthesize_scan(scan, nbar, seed);
    try {
      ThermalEstimate est = estimate_nbar(syn.red, syn.blue);
      if (std::abs(est.nbar - nbar) <= 2.0 * est.sigma) ++hits;
      sigmas.push_back(est.sigma);
    } catch (const std::exception&) {
      ++fails;
    }
  }
  std::sort(sigmas.begin(), sigmas.end());
  double med = sigmas.empty() ? 0 : sigmas[sigmas.size() / 2];
  bool sd_typical = med > 0.01 && med < 0.06;
  return {hits >= 95 && fails == 0 && sd_typical,
          std::to_string(hits) + "/100 seeds within 2 s.d. (need >= 95), " +
              std::to_string(fails) + " estimator failures, median s.d. " +
              fmt("%.3f", med) + " (want order 0.03)"};
}

// ---------------------------------------------------------------------------
// 8. field math: harmonicity, analytic-vs-FD gradients, quadrature oracle
// ---------------------------------------------------------------------------
Outcome criterion_field_math(const FieldBasis& basis) {
  std::mt19937 rng(99);
  auto uni = [&](double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
  };
  const auto& electrodes = basis.layout().electrodes;
  double worst_harm = 0, worst_grad = 0, worst_quad = 0;
  for (int s = 0; s < 200; ++s) {
    int e = int(uni(0, double(electrodes.size()))) % int(electrodes.size());
    Vec3 p{from_um(uni(-700, 700)), from_um(uni(-700, 700)),
           from_um(uni(20, 500))};
    FieldEval ev = basis.evaluate(e, p, 2);
    worst_harm = std::max(
        worst_harm, std::abs(ev.hessian.trace()) / (ev.hessian.norm() + 1e-30));
    auto phi = [&](const Vec3& q) { return basis.evaluate(e, q, 0).potential; };
    Vec3 g_fd = grad_fd(phi, p, from_um(0.5));
    worst_grad = std::max(worst_grad,
                          (g_fd - ev.gradient).norm() / (ev.gradient.norm() + 1e-30));
    if (s < 60) {
      double quad = 0;
      for (const Rect& r : electrodes[e].rects)
        quad += rect_potential_quad(r, p.x(), p.y(), p.z());
      worst_quad = std::max(worst_quad, std::abs(quad - ev.potential) /
                                            std::max(std::abs(quad), 1e-12));
    }
  }
  return {worst_harm < 1e-8 && worst_grad < 1e-6 && worst_quad < 1e-6,
          "harmonicity " + fmt("%.1e", worst_harm) +
              " (limit 1e-8), FD gradient " + fmt("%.1e", worst_grad) +
              " (limit 1e-6), quadrature " + fmt("%.1e", worst_quad) +
              " (limit 1e-6)"};
}

} // namespace

int main() {
  FieldBasis basis(reference_layout());
  struct Item {
    const char* name;
    std::function<Outcome()> run;
  };
  const Item items[] = {
      {"null-axis cancellation", [&] { return criterion_null_axis(basis); }},
      {"rf power curve shape", [&] { return criterion_power_curve(basis); }},
      {"mode analysis vs FFT", [&] { return criterion_modes_vs_fft(basis); }},
      {"dc splitting and height round-trip",
       [&] { return criterion_dc_solver(basis); }},
      {"beta vs resonance sweep", [&] { return criterion_beta_sweep(basis); }},
      {"Bessel sideband consistency", [] { return criterion_bessel(); }},
      {"thermometry recovery", [] { return criterion_thermometry(); }},
      {"field-math invariants", [&] { return criterion_field_math(basis); }},
  };
  int failed = 0, idx = 0;
  for (const Item& item : items) {
    ++idx;
    auto t0 = std::chrono::steady_clock::now();
    Outcome oc;
    try {
      oc = item.run();
    } catch (const std::exception& e) {
      oc = {false, std::string("exception: ") + e.what()};
    }
    if (!oc.pass) ++failed;
    std::printf("%s  criterion %d  %s: %s  [%.1f s]\n",
                oc.pass ? "PASS" : "FAIL", idx, item.name, oc.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("acceptance: %d/8 criteria passed\n", 8 - failed);
  return failed == 0 ? 0 : 1;
}
