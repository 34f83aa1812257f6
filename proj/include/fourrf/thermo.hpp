#pragma once

#include <cstdint>
#include <vector>

#include "fourrf/constants.hpp"
#include "fourrf/dynamics.hpp"

namespace fourrf {

// Resolved-sideband thermometry on a single secular mode: thermal lineshapes
// for red/blue first-order sidebands, synthetic scans with shot noise, and
// the Gaussian-amplitude-ratio estimator for the mean phonon number.

enum class Sideband { red, carrier, blue };

// eta = (k . mode_axis) * sqrt(hbar / (2 m omega)): coupling of the probe
// photon recoil to the ground-state wavepacket of the probed mode
double lamb_dicke(const Ion& ion, const ProbeGeometry& probe,
                  double mode_omega, const Vec3& mode_axis = Vec3(0, 0, 1));

struct SidebandScan {
  double mode_omega = omega_from_MHz(1.0); // probed secular mode, rad/s
  double eta = 0.0;                        // Lamb-Dicke parameter, (0, 0.5)
  double rabi_carrier = 2.0 * constants::pi * 50e3; // Omega_0, rad/s
  double probe_time = 0.0;                 // s
  std::vector<double> detunings;           // rad/s about the sideband center
  int shots = 100;                         // repetitions per grid point

  void validate() const; // ConfigError on any broken invariant

  // vertical 729 nm probe on the default mode: computed eta, probe time set
  // for 3/4 of a blue pi-pulse at n = 0, +-15 kHz grid with 1 kHz steps
  static SidebandScan typical(const Ion& ion = Ion::ca40());
};

// P(excite) = sum_n p_n (Omega_n^2/(Omega_n^2+delta^2))
//                       sin^2(sqrt(Omega_n^2+delta^2) t/2),
// p_n = nbar^n/(nbar+1)^(n+1), Omega_n = eta Omega_0 sqrt(n) on red,
// eta Omega_0 sqrt(n+1) on blue, Omega_0 on the carrier; the thermal sum
// stops once the remaining tail mass is below 1e-12
double excitation_probability(const SidebandScan& scan, Sideband sideband,
                              double nbar, double detuning);

struct ScanSample {
  double detuning; // rad/s
  double fraction; // excited fraction in [0, 1]
  int shots;
};

struct SyntheticScan {
  std::vector<ScanSample> red;
  std::vector<ScanSample> blue;
  std::uint64_t seed = 0;
  bool analytic = false;
};

// binomial(shots, P)/shots per grid point, red scan drawn first, then blue;
// deterministic for a given seed. analytic = true skips the noise and
// returns the exact probabilities (the shots -> infinity limit)
SyntheticScan synthesize_scan(const SidebandScan& scan, double nbar,
                              std::uint64_t seed, bool analytic = false);

struct GaussianFit {
  double amplitude = 0, center = 0, width = 0, offset = 0;
  double sigma_amplitude = 0, sigma_center = 0, sigma_width = 0,
         sigma_offset = 0;
  double rss = 0;     // residual sum of squares at the optimum
  int iterations = 0; // Levenberg-Marquardt steps taken
};

// least-squares fit of y = A exp(-(x-c)^2/(2 w^2)) + b. Without sigmas the
// parameter covariance is (J^T J)^-1 scaled by rss/(N-4) (plain OLS). With
// per-point sigmas the fit is inverse-variance weighted and the covariance
// (J^T W J)^-1 is scaled by max(1, chi2/(N-4)), so a lineshape the model
// only approximates widens the error bars instead of shrinking them.
// NumericalError if the fit cannot converge.
GaussianFit fit_gaussian(const std::vector<double>& x,
                         const std::vector<double>& y);
GaussianFit fit_gaussian(const std::vector<double>& x,
                         const std::vector<double>& y,
                         const std::vector<double>& sigma);

struct ThermalEstimate {
  double nbar = 0;            // mean phonon number, clamped at 0
  double sigma = 0;           // 1 s.d., propagated from the fit covariances
  double amplitude_ratio = 0; // R = A_red / A_blue (unclamped)
  GaussianFit red, blue;
};

// Gaussian-amplitude ratio R = A_red/A_blue -> nbar = R/(1-R), each peak
// fitted with binomial error bars sqrt(p(1-p)/shots) (half-count regularized
// so empty bins keep a finite weight). The scans must cover their peaks.
// R >= 1 is not a thermal state: ModelDomainError.
ThermalEstimate estimate_nbar(const std::vector<ScanSample>& red,
                              const std::vector<ScanSample>& blue);

} // namespace fourrf
