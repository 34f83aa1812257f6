#include <doctest.h>

#include <cmath>
#include <random>

#include "fourrf/errors.hpp"
#include "fourrf/pseudo.hpp"
#include "support/numdiff.hpp"

using namespace fourrf;
using namespace fourrf::testsupport;

namespace {
const double kOmegaRf = omega_from_MHz(18.1);
}

TEST_CASE("pseudopotential scalar formula against a hand-computed pin") {
  // 1 kV/m zero-to-peak field on 40Ca+ at 18.1 MHz
  double psi = pseudopotential_from_field(1e3 * 1e3, Ion::ca40(), kOmegaRf);
  CHECK(psi == doctest::Approx(7.4775e-24).epsilon(2e-4));
}

TEST_CASE("matched drive: signs, roles, errors") {
  auto lay = reference_layout();
  DriveConfig d = matched_drive(lay, 100.0, kOmegaRf);
  CHECK(d.rf_amplitudes.size() == 4);
  CHECK(d.rf_amplitudes.at("rf_ne") == cplx{100.0, 0});
  CHECK(d.rf_amplitudes.at("rf_sw") == cplx{100.0, 0});
  CHECK(d.rf_amplitudes.at("rf_nw") == cplx{-100.0, 0});
  CHECK(d.rf_amplitudes.at("rf_se") == cplx{-100.0, 0});
  CHECK_THROWS_AS(matched_drive(lay, 100.0, 0.0), ConfigError);
}

TEST_CASE("the matched rf field vanishes on the whole z axis") {
  FieldBasis basis(reference_layout());
  DriveConfig d = matched_drive(basis.layout(), 100.0, kOmegaRf);
  double off_axis = pseudopotential(basis, d, {20e-6, 0, 175e-6});
  REQUIRE(off_axis > 0);
  for (double z : {60e-6, 120e-6, 175e-6, 240e-6, 300e-6}) {
    double psi = pseudopotential(basis, d, {0, 0, z});
    CHECK(psi < 1e-20 * off_axis);
    PseudoEval pe = pseudo_eval(basis, d, {0, 0, z});
    CHECK(pe.gradient.norm() < 1e-10 * off_axis / 20e-6);
    // planar-isotropic curvature, exactly zero along the axis
    CHECK(pe.hessian(0, 0) == doctest::Approx(pe.hessian(1, 1)).epsilon(1e-10));
    CHECK(pe.hessian(0, 0) > 0);
    double hscale = pe.hessian.norm();
    CHECK(std::abs(pe.hessian(2, 2)) < 1e-10 * hscale);
    CHECK(std::abs(pe.hessian(0, 1)) < 1e-10 * hscale);
    CHECK(std::abs(pe.hessian(0, 2)) < 1e-10 * hscale);
  }
}

TEST_CASE("pseudopotential derivatives agree with finite differences") {
  FieldBasis basis(reference_layout());
  DriveConfig d = matched_drive(basis.layout(), 100.0, kOmegaRf);
  // complex variant exercises the cross terms too
  DriveConfig dc_mismatched = d;
  dc_mismatched.rf_amplitudes["rf_nw"] = cplx{-101.0, 2.0};

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> xy(-60e-6, 60e-6);
  std::uniform_real_distribution<double> zz(90e-6, 260e-6);
  for (const DriveConfig* drv : {&d, &dc_mismatched}) {
    for (int i = 0; i < 4; ++i) {
      Vec3 p{xy(rng), xy(rng), zz(rng)};
      PseudoEval pe = pseudo_eval(basis, *drv, p);
      auto f = [&](const Vec3& q) { return pseudopotential(basis, *drv, q); };
      Vec3 g = grad_fd(f, p, 3e-7);
      Mat3 h = hessian_fd(f, p, 3e-7);
      double gs = std::max(g.norm(), pe.value / 50e-6);
      double hs = std::max(h.norm(), pe.value / (50e-6 * 50e-6));
      CHECK((pe.gradient - g).norm() < 1e-6 * gs);
      CHECK((pe.hessian - h).norm() < 1e-5 * hs);
    }
  }
}

TEST_CASE("total potential = pseudopotential + dc energy") {
  FieldBasis basis(reference_layout());
  DriveConfig d = matched_drive(basis.layout(), 80.0, kOmegaRf);
  d.dc_voltages = {{"dc_center", 2.0}, {"dc_outer_n", -1.0}};
  Vec3 p{15e-6, -10e-6, 140e-6};
  PseudoEval tot = total_potential(basis, d, p);
  PseudoEval rf = pseudo_eval(basis, d, p);
  double phi =
      basis.superpose(basis.coeffs(d.dc_voltages), p, 0).potential;
  CHECK(tot.value ==
        doctest::Approx(rf.value + d.ion.charge * phi).epsilon(1e-12));
  auto f = [&](const Vec3& q) {
    return pseudopotential(basis, d, q) +
           d.ion.charge *
               basis.superpose(basis.coeffs(d.dc_voltages), q, 0).potential;
  };
  Mat3 h = hessian_fd(f, p, 3e-7);
  CHECK((tot.hessian - h).norm() < 1e-5 * h.norm());
}

TEST_CASE("rf null search") {
  FieldBasis basis(reference_layout());

  SUBCASE("matched drive converges to the axis") {
    DriveConfig d = matched_drive(basis.layout(), 100.0, kOmegaRf);
    Eigen::Vector2d xy =
        find_rf_null(basis, d, 175e-6, {30e-6, -25e-6}, 1e-9);
    CHECK(xy.norm() < 1e-12);
  }

  SUBCASE("amplitude imbalance leaves a common-mode axial field, not a null") {
    // raising one diagonal pair keeps E_x = E_y = 0 on the axis (each pair
    // is point-symmetric through it) but leaves E_z proportional to the
    // common mode, so no in-plane point reaches a true null
    DriveConfig d = matched_drive(basis.layout(), 100.0, kOmegaRf);
    d.rf_amplitudes["rf_ne"] = 103.0;
    d.rf_amplitudes["rf_sw"] = 103.0;
    auto rf = basis.coeffs(d.rf_amplitudes);
    Vec3c e_axis = -basis.superpose(rf, Vec3{0, 0, 175e-6}, 1).gradient;
    CHECK(std::abs(e_axis[0]) < 1e-9);
    CHECK(std::abs(e_axis[1]) < 1e-9);
    CHECK(std::abs(e_axis[2]) > 100.0); // V/m, the common-mode residual
    CHECK_THROWS_AS(find_rf_null(basis, d, 175e-6, {0, 0}, 1e-9),
                    NumericalError);
  }

  SUBCASE("phase mismatch leaves no true null") {
    DriveConfig d = matched_drive(basis.layout(), 100.0, kOmegaRf);
    d.rf_amplitudes["rf_nw"] = 100.0 * std::polar(1.0, constants::pi + 0.02);
    d.rf_amplitudes["rf_se"] = 100.0 * std::polar(1.0, constants::pi + 0.02);
    CHECK_THROWS_AS(find_rf_null(basis, d, 175e-6, {0, 0}, 1e-9),
                    NumericalError);
  }

  SUBCASE("bad height") {
    DriveConfig d = matched_drive(basis.layout(), 100.0, kOmegaRf);
    CHECK_THROWS_AS(find_rf_null(basis, d, -1e-6, {0, 0}), ModelDomainError);
  }
}

TEST_CASE("operating point: frequencies, Mathieu parameters, consistency") {
  FieldBasis basis(reference_layout());
  OperatingPointSpec spec; // 175 um, 1.0 MHz planar, 1.2 MHz vertical, 10% split
  OperatingPoint op = plan_operating_point(basis, spec);

  INFO("rf amplitude = ", op.rf_amplitude, " V zero-to-peak");
  CHECK(op.rf_amplitude > 30.0);
  CHECK(op.rf_amplitude < 500.0);

  const TrapSolution& m = op.modes;
  CHECK(m.x_like.omega ==
        doctest::Approx(omega_from_MHz(1.0)).epsilon(1e-6));
  CHECK(m.y_like.omega ==
        doctest::Approx(omega_from_MHz(1.1)).epsilon(1e-4));
  CHECK(m.vertical.omega ==
        doctest::Approx(omega_from_MHz(1.2)).epsilon(1e-4));
  CHECK(std::abs(m.vertical.axis[2]) > 0.9999);
  CHECK(std::abs(m.x_like.axis[0]) > 0.999);
  CHECK(m.warnings.empty());

  // Mathieu: planar modes share the rf drive, the axial mode sees none
  CHECK(m.x_like.mathieu_q == doctest::Approx(m.y_like.mathieu_q).epsilon(1e-6));
  CHECK(m.x_like.mathieu_q < 0.3);
  CHECK(m.vertical.mathieu_q < 1e-8 * m.x_like.mathieu_q + 1e-12);
  CHECK(m.x_like.stable);
  CHECK(m.y_like.stable);
  CHECK(m.vertical.stable);

  // lowest-order secular relation omega = (Omega/2) sqrt(a + q^2/2)
  for (int i = 0; i < 3; ++i) {
    const AxisMode& mm = m.mode(i);
    double pred = 0.5 * spec.rf_omega *
                  std::sqrt(mm.mathieu_a + 0.5 * mm.mathieu_q * mm.mathieu_q);
    CHECK(mm.omega == doctest::Approx(pred).epsilon(0.02));
  }

  // vertical mode is dc-only: a_z fixes it exactly
  double wz_from_a = 0.5 * spec.rf_omega * std::sqrt(m.vertical.mathieu_a);
  CHECK(m.vertical.omega == doctest::Approx(wz_from_a).epsilon(1e-9));
}

TEST_CASE("total Hessian from mode analysis matches finite differences") {
  FieldBasis basis(reference_layout());
  OperatingPointSpec spec;
  spec.tilt = 4.0 * constants::pi / 180.0;
  OperatingPoint op = plan_operating_point(basis, spec);

  for (const Vec3& p :
       {Vec3{0, 0, 175e-6}, Vec3{8e-6, -5e-6, 180e-6}}) {
    TrapSolution sol = mode_analysis(basis, op.drive, p);
    auto f = [&](const Vec3& q) {
      return total_potential(basis, op.drive, q).value;
    };
    Mat3 h = hessian_fd(f, p, 3e-7);
    CHECK((sol.total_hessian - h).norm() < 1e-5 * h.norm());
  }
}

TEST_CASE("tilted operating point mixes planar and vertical axes") {
  FieldBasis basis(reference_layout());
  OperatingPointSpec spec;
  spec.tilt = 4.0 * constants::pi / 180.0;
  OperatingPoint op = plan_operating_point(basis, spec);
  // target met on the tilt-plane mode
  CHECK(op.modes.x_like.omega ==
        doctest::Approx(omega_from_MHz(1.0)).epsilon(1e-6));
  // its axis now has a z component; the out-of-plane mode stays put
  CHECK(std::abs(op.modes.x_like.axis[2]) > 0.01);
  CHECK(std::abs(op.modes.y_like.axis[2]) < 1e-6);
  CHECK(std::abs(op.modes.y_like.axis[1]) > 0.9999);
}

TEST_CASE("stationarity warning away from equilibrium") {
  FieldBasis basis(reference_layout());
  OperatingPoint op = plan_operating_point(basis, {});
  TrapSolution sol = mode_analysis(basis, op.drive, {5e-6, 0, 175e-6});
  bool warned = false;
  for (const auto& w : sol.warnings)
    warned |= w.find("not stationary") != std::string::npos;
  CHECK(warned);
}

TEST_CASE("instability reporting") {
  FieldBasis basis(reference_layout());

  SUBCASE("anti-confining curvature flags the mode") {
    // dc-only planar anti-confinement with no rf to hold it
    OperatingPoint op = plan_operating_point(basis, {});
    DriveConfig d = op.drive;
    for (auto& [k, v] : d.rf_amplitudes) v = 1e-6 * v; // essentially off
    TrapSolution sol = mode_analysis(basis, d, {0, 0, 175e-6});
    CHECK(!sol.x_like.stable);
    CHECK(!sol.y_like.stable);
    CHECK(sol.vertical.stable);
    CHECK(!sol.warnings.empty());
  }

  SUBCASE("Mathieu q past the stability edge") {
    // same spatial field but a much slower drive blows up q = 2qE''/(m W^2)
    OperatingPoint op = plan_operating_point(basis, {});
    DriveConfig d = op.drive;
    d.rf_omega = kOmegaRf / 8.0;
    TrapSolution sol = mode_analysis(basis, d, {0, 0, 175e-6});
    CHECK(sol.x_like.mathieu_q > 0.908);
    CHECK(!sol.x_like.stable);
    bool warned = false;
    for (const auto& w : sol.warnings)
      warned |= w.find("Mathieu") != std::string::npos;
    CHECK(warned);
  }
}

TEST_CASE("planar rf depth: positive and falling with height") {
  FieldBasis basis(reference_layout());
  DriveConfig d = matched_drive(basis.layout(), 100.0, kOmegaRf);
  double d100 = planar_rf_depth(basis, d, 100e-6);
  double d175 = planar_rf_depth(basis, d, 175e-6);
  double d250 = planar_rf_depth(basis, d, 250e-6);
  INFO("depth(100um) = ", d100 / constants::elementary_charge, " eV");
  CHECK(d100 > 0);
  CHECK(d100 > d175);
  CHECK(d175 > d250);
  CHECK_THROWS_AS(planar_rf_depth(basis, d, -1.0), ModelDomainError);
}

TEST_CASE("mode depth along principal axes at the working point") {
  FieldBasis basis(reference_layout());
  OperatingPoint op = plan_operating_point(basis, {});
  TrapSolution sol = mode_analysis(basis, op.drive, {0, 0, 175e-6},
                                   {.compute_depth = true});
  REQUIRE(sol.vertical.depth.has_value());
  CHECK(*sol.vertical.depth > 0);
  REQUIRE(sol.x_like.depth.has_value());
  CHECK(*sol.x_like.depth > 0);
}

TEST_CASE("operating-point planning rejects unreachable targets") {
  FieldBasis basis(reference_layout());
  OperatingPointSpec spec;
  spec.v_max = 20.0; // far too little drive for a 1 MHz planar mode
  CHECK_THROWS_AS(plan_operating_point(basis, spec), ModelDomainError);

  // a tiny planar target is still reachable: the planar curvature sweeps
  // from dc anti-confinement up through zero as the drive rises
  OperatingPointSpec spec2;
  spec2.planar_freq = omega_from_MHz(0.05);
  OperatingPoint weak = plan_operating_point(basis, spec2);
  CHECK(weak.modes.x_like.omega ==
        doctest::Approx(omega_from_MHz(0.05)).epsilon(1e-4));
  CHECK(weak.rf_amplitude < plan_operating_point(basis, {}).rf_amplitude);

  OperatingPointSpec spec3;
  spec3.height = -5e-6;
  CHECK_THROWS_AS(plan_operating_point(basis, spec3), ConfigError);
}

TEST_CASE("rf_amplitude_for_target wrapper matches the full plan") {
  FieldBasis basis(reference_layout());
  OperatingPoint op = plan_operating_point(basis, {});
  double v = rf_amplitude_for_target(basis, 175e-6, omega_from_MHz(1.0));
  CHECK(v == doctest::Approx(op.rf_amplitude).epsilon(1e-12));
}
