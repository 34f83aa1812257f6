#pragma once

#include <numbers>

namespace fourrf {

// CODATA 2018
namespace constants {
inline constexpr double pi = std::numbers::pi;
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg
inline constexpr double hbar = 1.054571817e-34;               // J s
inline constexpr double electron_mass_u = 5.48579909065e-4;   // u
// 40Ca atomic mass (AME2020) minus one electron
inline constexpr double ca40_ion_mass =
    (39.962590863 - electron_mass_u) * atomic_mass_unit;
} // namespace constants

struct Ion {
  double charge; // C
  double mass;   // kg
  static Ion ca40() {
    return {constants::elementary_charge, constants::ca40_ion_mass};
  }
};

// Interfaces take micrometers / MHz where noted; internals are SI throughout.
inline constexpr double from_um(double v) { return v * 1e-6; }
inline constexpr double to_um(double v) { return v * 1e6; }
inline constexpr double omega_from_MHz(double f_MHz) {
  return 2.0 * constants::pi * f_MHz * 1e6;
}
inline constexpr double MHz_from_omega(double omega) {
  return omega / (2.0 * constants::pi) * 1e-6;
}

} // namespace fourrf
