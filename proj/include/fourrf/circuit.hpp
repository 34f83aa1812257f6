#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fourrf/dynamics.hpp"
#include "fourrf/efield.hpp"
#include "fourrf/pseudo.hpp"

namespace fourrf {

// ---------------------------------------------------------------------------
// Lumped model of the transformer-fed two-arm rf resonator.
//
// Per arm: an ideal EMF (+-source_amplitude, opposite polarity per arm)
// behind the secondary branch R_loss + jw L_sec drives node n1; the series
// coupling capacitor C1 connects n1 to the electrode node n2; n2 is shunted
// to ground by the bias feed inductor L1, the trimmer CV, and the electrode
// plus wiring capacitance C_trap; the pickoff divider C2 (n2 -> n3) over
// C3 (n3 -> ground) monitors the electrode voltage.  The transformer itself
// is abstracted to the fixed EMF pair; primary matching is out of scope.
// ---------------------------------------------------------------------------

struct ArmComponents {
  double c1 = 2e-9;      // F, series coupling
  double l1 = 100e-3;    // H, shunt bias feed
  double c2 = 2e-12;     // F, divider top
  double c3 = 100e-12;   // F, divider bottom
  double cv = 5e-12;     // F, trimmer
  double c_trap = 70e-12; // F, electrode + wiring to ground
  double l_sec = 1e-6;   // H, transformer secondary per arm
  double r_loss = 0.58;  // ohm, effective series loss
};

struct ResonatorNetwork {
  ArmComponents plus, minus;
  double source_amplitude = 1.0; // V EMF per arm, zero-to-peak
  // the physical trimmers only reach 2 - 7 pF; disable to model other parts
  bool enforce_trimmer_range = true;

  static ResonatorNetwork reference_defaults();
  void validate() const; // throws ConfigError
};

struct ArmResponse {
  cplx electrode;    // V, node n2 phasor
  cplx pickoff;      // V, node n3 phasor
  double resonance;  // rad/s, frequency maximizing |electrode|
  double loaded_q;   // resonance / half-power width
};

// Nodal solution of both arms at one frequency (rad/s).  first = plus arm.
std::pair<ArmResponse, ArmResponse> solve_network(const ResonatorNetwork& net,
                                                  double omega);

struct MismatchResult {
  double amplitude_ratio = 1; // |V+| / |V-|
  double phase_error = 0;     // arg V+ - arg V- - pi, wrapped to (-pi, pi]
  cplx common_mode{0, 0};     // (V+ + V-) / 2, the null-breaking drive
};

MismatchResult mismatch(const ResonatorNetwork& net, double omega);

// Frequency (rad/s) maximizing the differential electrode drive
// |V+ - V-| / 2; for symmetric arms this is the arm resonance.
double combined_resonance(const ResonatorNetwork& net);

// One row of the trimmer sweep behind the beta-versus-resonance figure.
struct BetaSweepPoint {
  double cv;              // F, plus-arm trimmer setting
  double resonance_hz;    // Hz, operating = combined resonance
  double amplitude_ratio;
  double phase_error_rad;
  double beta;
};

// For each plus-arm trimmer value: retune the operating frequency to the
// combined resonance (the drive tracks the circuit resonance in practice),
// solve the network, scale both arm phasors by one fixed factor calibrated
// so the nominal network's differential amplitude matches the drive
// template's rf amplitude, superpose the per-pad phasors, and convert the
// residual field at the trap point into a modulation index along the probe.
std::vector<BetaSweepPoint> beta_vs_resonance(
    const ResonatorNetwork& net, const FieldBasis& basis,
    const DriveConfig& drive_template, const Vec3& trap_point,
    const ProbeGeometry& probe, const std::vector<double>& cv_plus_values);

// Netlist file: one "<component> <arm> <value> <unit>" entry per line,
// components C1 L1 C2 C3 CV C_trap L_sec R_loss source, arm + - or both,
// # comments.  Values must be positive; units must match the component.
ResonatorNetwork load_netlist(const std::string& path);
void save_netlist(const ResonatorNetwork& net, const std::string& path);

} // namespace fourrf
