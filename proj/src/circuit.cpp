#include "fourrf/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "fourrf/errors.hpp"

namespace fourrf {

namespace {

constexpr cplx j{0.0, 1.0};

struct ArmSolution {
  cplx v1, v2, v3; // node phasors
  cplx i_src;      // current out of the EMF
};

// nodes: n1 (behind C1), n2 (electrode), n3 (pickoff)
ArmSolution solve_arm(const ArmComponents& a, double omega, cplx emf) {
  const cplx y_src = 1.0 / (a.r_loss + j * omega * a.l_sec);
  const cplx y_c1 = j * omega * a.c1;
  const cplx y_l1 = 1.0 / (j * omega * a.l1);
  const cplx y_sh = j * omega * (a.cv + a.c_trap);
  const cplx y_c2 = j * omega * a.c2;
  const cplx y_c3 = j * omega * a.c3;

  Eigen::Matrix3cd y;
  y << y_src + y_c1, -y_c1, 0,
       -y_c1, y_c1 + y_l1 + y_sh + y_c2, -y_c2,
       0, -y_c2, y_c2 + y_c3;
  Eigen::Vector3cd rhs(y_src * emf, 0, 0);

  Eigen::FullPivLU<Eigen::Matrix3cd> lu(y);
  if (!lu.isInvertible())
    throw NumericalError("resonator nodal matrix is singular");
  const Eigen::Vector3cd v = lu.solve(rhs);
  return {v[0], v[1], v[2], (emf - v[0]) * y_src};
}

// crude resonance estimate: series L against C1 in series with the shunts
double resonance_estimate(const ArmComponents& a) {
  const double c_shunt = a.cv + a.c_trap + a.c2 * a.c3 / (a.c2 + a.c3);
  const double c_total = 1.0 / (1.0 / a.c1 + 1.0 / c_shunt);
  return 1.0 / std::sqrt(a.l_sec * c_total); // rad/s
}

// maximize a response magnitude over omega: dense pre-scan (robust to the
// double peaks of a split network) refined by brent
template <class F>
double peak_omega(F&& magnitude, double w_mid) {
  const int n = 241;
  const double lo = 0.80 * w_mid, hi = 1.25 * w_mid;
  int best = 0;
  double best_mag = -1;
  for (int i = 0; i < n; ++i) {
    const double w = lo + (hi - lo) * i / (n - 1);
    const double m = magnitude(w);
    if (m > best_mag) {
      best_mag = m;
      best = i;
    }
  }
  const double bl = lo + (hi - lo) * std::max(0, best - 1) / (n - 1);
  const double bh = lo + (hi - lo) * std::min(n - 1, best + 1) / (n - 1);
  auto neg = [&](double w) { return -magnitude(w); };
  auto r = boost::math::tools::brent_find_minima(neg, bl, bh, 45);
  return r.first;
}

double arm_resonance(const ArmComponents& a) {
  return peak_omega(
      [&](double w) { return std::abs(solve_arm(a, w, 1.0).v2); },
      resonance_estimate(a));
}

double arm_loaded_q(const ArmComponents& a, double w_res) {
  const double peak = std::abs(solve_arm(a, w_res, 1.0).v2);
  const double target = peak / std::sqrt(2.0);
  auto cross = [&](double w) {
    return std::abs(solve_arm(a, w, 1.0).v2) - target;
  };
  // expand outward until the response falls through the half-power level
  auto half_power = [&](double dir) {
    double step = w_res * 1e-4;
    double w0 = w_res, w1 = w_res + dir * step;
    while (cross(w1) > 0) {
      w0 = w1;
      step *= 2;
      w1 = w_res + dir * (w1 - w_res + step);
      if (std::abs(w1 - w_res) > 0.5 * w_res)
        throw NumericalError("loaded Q: no half-power point found");
    }
    boost::uintmax_t iters = 100;
    auto r = boost::math::tools::toms748_solve(
        cross, std::min(w0, w1), std::max(w0, w1),
        boost::math::tools::eps_tolerance<double>(40), iters);
    return 0.5 * (r.first + r.second);
  };
  const double hi = half_power(+1.0), lo = half_power(-1.0);
  return w_res / (hi - lo);
}

double wrap_angle(double a) {
  const double two_pi = 2.0 * constants::pi;
  double r = std::remainder(a, two_pi);
  if (r <= -constants::pi)
    r += two_pi;
  return r;
}

void require_positive(double v, const char* name) {
  if (!(v > 0)) {
    std::ostringstream msg;
    msg << "resonator component " << name << " must be positive";
    throw ConfigError(msg.str());
  }
}

} // namespace

ResonatorNetwork ResonatorNetwork::reference_defaults() { return {}; }

void ResonatorNetwork::validate() const {
  for (const ArmComponents* a : {&plus, &minus}) {
    require_positive(a->c1, "C1");
    require_positive(a->l1, "L1");
    require_positive(a->c2, "C2");
    require_positive(a->c3, "C3");
    require_positive(a->cv, "CV");
    require_positive(a->c_trap, "C_trap");
    require_positive(a->l_sec, "L_sec");
    require_positive(a->r_loss, "R_loss");
    if (enforce_trimmer_range && (a->cv < 2e-12 || a->cv > 7e-12))
      throw ConfigError("trimmer CV outside its 2 - 7 pF range");
  }
  require_positive(source_amplitude, "source");
}

std::pair<ArmResponse, ArmResponse> solve_network(const ResonatorNetwork& net,
                                                  double omega) {
  if (omega <= 0)
    throw ConfigError("solve_network: frequency must be positive");
  net.validate();
  auto respond = [&](const ArmComponents& a, double emf_sign) {
    const ArmSolution s =
        solve_arm(a, omega, cplx{emf_sign * net.source_amplitude, 0});
    ArmResponse r;
    r.electrode = s.v2;
    r.pickoff = s.v3;
    r.resonance = arm_resonance(a);
    r.loaded_q = arm_loaded_q(a, r.resonance);
    return r;
  };
  return {respond(net.plus, +1.0), respond(net.minus, -1.0)};
}

MismatchResult mismatch(const ResonatorNetwork& net, double omega) {
  auto [p, m] = solve_network(net, omega);
  MismatchResult r;
  r.amplitude_ratio = std::abs(p.electrode) / std::abs(m.electrode);
  r.phase_error = wrap_angle(std::arg(p.electrode) - std::arg(m.electrode) -
                             constants::pi);
  r.common_mode = 0.5 * (p.electrode + m.electrode);
  return r;
}

double combined_resonance(const ResonatorNetwork& net) {
  net.validate();
  const double guess =
      0.5 * (resonance_estimate(net.plus) + resonance_estimate(net.minus));
  return peak_omega(
      [&](double w) {
        const cplx vp =
            solve_arm(net.plus, w, cplx{net.source_amplitude, 0}).v2;
        const cplx vm =
            solve_arm(net.minus, w, cplx{-net.source_amplitude, 0}).v2;
        return 0.5 * std::abs(vp - vm);
      },
      guess);
}

std::vector<BetaSweepPoint> beta_vs_resonance(
    const ResonatorNetwork& net, const FieldBasis& basis,
    const DriveConfig& drive_template, const Vec3& trap_point,
    const ProbeGeometry& probe, const std::vector<double>& cv_plus_values) {
  if (cv_plus_values.empty())
    throw ConfigError("beta_vs_resonance: empty trimmer sweep");
  double v_target = 0;
  for (const auto& [name, amp] : drive_template.rf_amplitudes)
    v_target = std::max(v_target, std::abs(amp));
  if (v_target <= 0)
    throw ConfigError("beta_vs_resonance: drive template has no rf amplitude");

  // one calibration at the network as handed in: the differential drive at
  // resonance reproduces the template amplitude; the scale then stays fixed
  // across the sweep, the way a fixed generator level would
  const double w0 = combined_resonance(net);
  const auto [p0, m0] = solve_network(net, w0);
  const double scale =
      v_target / (0.5 * std::abs(p0.electrode - m0.electrode));

  const auto& layout = basis.layout();
  const auto plus_pads = layout.names_with_role(Role::rf_plus);
  const auto minus_pads = layout.names_with_role(Role::rf_minus);

  std::vector<BetaSweepPoint> table;
  table.reserve(cv_plus_values.size());
  for (double cv : cv_plus_values) {
    ResonatorNetwork tuned = net;
    tuned.plus.cv = cv;
    const double w = combined_resonance(tuned);
    const auto [p, m] = solve_network(tuned, w);

    std::map<std::string, cplx> rf;
    for (const auto& name : plus_pads)
      rf[name] = scale * p.electrode;
    for (const auto& name : minus_pads)
      rf[name] = scale * m.electrode;
    const Vec3c e_res = -basis.superpose(rf, trap_point, 1).gradient;

    BetaSweepPoint row;
    row.cv = cv;
    row.resonance_hz = w / (2.0 * constants::pi);
    row.amplitude_ratio = std::abs(p.electrode) / std::abs(m.electrode);
    row.phase_error_rad = wrap_angle(std::arg(p.electrode) -
                                     std::arg(m.electrode) - constants::pi);
    row.beta = modulation_index(e_res, drive_template.ion, w, probe);
    table.push_back(row);
  }
  return table;
}

// ---------------------------------------------------------------------------
// netlist io
// ---------------------------------------------------------------------------

namespace {

double* component_slot(ArmComponents& a, const std::string& name) {
  if (name == "C1") return &a.c1;
  if (name == "L1") return &a.l1;
  if (name == "C2") return &a.c2;
  if (name == "C3") return &a.c3;
  if (name == "CV") return &a.cv;
  if (name == "C_trap") return &a.c_trap;
  if (name == "L_sec") return &a.l_sec;
  if (name == "R_loss") return &a.r_loss;
  return nullptr;
}

// unit -> (scale, dimension); dimension must match the component kind
struct Unit {
  double scale;
  char dim; // 'F', 'H', 'R', 'V'
};

const std::map<std::string, Unit>& unit_table() {
  static const std::map<std::string, Unit> table = {
      {"F", {1.0, 'F'}},    {"pF", {1e-12, 'F'}}, {"nF", {1e-9, 'F'}},
      {"uF", {1e-6, 'F'}},  {"H", {1.0, 'H'}},    {"uH", {1e-6, 'H'}},
      {"mH", {1e-3, 'H'}},  {"nH", {1e-9, 'H'}},  {"ohm", {1.0, 'R'}},
      {"Ohm", {1.0, 'R'}},  {"V", {1.0, 'V'}},
  };
  return table;
}

char dimension_of(const std::string& name) {
  if (name == "L1" || name == "L_sec") return 'H';
  if (name == "R_loss") return 'R';
  if (name == "source") return 'V';
  return 'F';
}

} // namespace

ResonatorNetwork load_netlist(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open netlist file: " + path);
  ResonatorNetwork net;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    std::istringstream ls(line);
    std::string name, arm, unit;
    double value;
    if (!(ls >> name))
      continue; // blank
    auto fail = [&](const std::string& what) {
      std::ostringstream msg;
      msg << path << ":" << lineno << ": " << what;
      throw ConfigError(msg.str());
    };
    if (!(ls >> arm >> value >> unit))
      fail("expected '<component> <arm> <value> <unit>'");
    std::string extra;
    if (ls >> extra)
      fail("trailing token '" + extra + "'");
    const auto u = unit_table().find(unit);
    if (u == unit_table().end())
      fail("unknown unit '" + unit + "'");
    if (u->second.dim != dimension_of(name))
      fail("unit '" + unit + "' does not fit component '" + name + "'");
    const double v = value * u->second.scale;
    if (name == "source") {
      if (arm != "both")
        fail("source must use arm 'both'");
      net.source_amplitude = v;
      continue;
    }
    std::vector<ArmComponents*> arms;
    if (arm == "+")
      arms = {&net.plus};
    else if (arm == "-")
      arms = {&net.minus};
    else if (arm == "both")
      arms = {&net.plus, &net.minus};
    else
      fail("arm must be '+', '-' or 'both'");
    for (ArmComponents* a : arms) {
      double* slot = component_slot(*a, name);
      if (!slot)
        fail("unknown component '" + name + "'");
      *slot = v;
    }
  }
  net.validate();
  return net;
}

void save_netlist(const ResonatorNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write netlist file: " + path);
  out << "# two-arm resonator netlist: <component> <arm> <value> <unit>\n";
  char buf[96];
  auto emit = [&](const char* name, char arm, double value, double scale,
                  const char* unit) {
    std::snprintf(buf, sizeof buf, "%-7s %c %.9g %s\n", name, arm,
                  value / scale, unit);
    out << buf;
  };
  const ArmComponents* arms[2] = {&net.plus, &net.minus};
  const char tag[2] = {'+', '-'};
  for (int i = 0; i < 2; ++i) {
    const ArmComponents& a = *arms[i];
    emit("C1", tag[i], a.c1, 1e-9, "nF");
    emit("L1", tag[i], a.l1, 1e-3, "mH");
    emit("C2", tag[i], a.c2, 1e-12, "pF");
    emit("C3", tag[i], a.c3, 1e-12, "pF");
    emit("CV", tag[i], a.cv, 1e-12, "pF");
    emit("C_trap", tag[i], a.c_trap, 1e-12, "pF");
    emit("L_sec", tag[i], a.l_sec, 1e-6, "uH");
    emit("R_loss", tag[i], a.r_loss, 1.0, "ohm");
  }
  std::snprintf(buf, sizeof buf, "%-7s both %.9g V\n", "source",
                net.source_amplitude);
  out << buf;
  if (!out)
    throw ConfigError("failed writing netlist file: " + path);
}

} // namespace fourrf
