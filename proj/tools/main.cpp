// fourrf: scenario-driven command-line front end for the trap toolkit.
// Every command reads an optional JSON scenario (physical quantities carry
// unit suffixes: _um, _MHz, _V, ...), runs one pipeline, and writes a plain
// delimited table with a '#' metadata header.  Identical scenario + seed
// gives byte-identical output; grid points may be computed concurrently but
// land in preallocated slots, so --threads never changes the bytes.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "json.hpp"

#include "fourrf/circuit.hpp"
#include "fourrf/constants.hpp"
#include "fourrf/dcsolve.hpp"
#include "fourrf/dynamics.hpp"
#include "fourrf/efield.hpp"
#include "fourrf/errors.hpp"
#include "fourrf/geometry.hpp"
#include "fourrf/pseudo.hpp"
#include "fourrf/thermo.hpp"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace fourrf;

constexpr const char* kVersion = "0.1.0";

#ifndef FOURRF_DATA_DIR
#define FOURRF_DATA_DIR ""
#endif

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// scenario file: a flat JSON object with typed, unit-suffixed keys.  Every
// read is recorded (resolved defaults included) so the output header can
// echo the effective configuration; unread keys are rejected at the end.
// ---------------------------------------------------------------------------

struct RunCommon {
  std::string scenario_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 1;
};

class Scenario {
public:
  Scenario() : root_(json::object()) {}

  static Scenario from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    Scenario s;
    try {
      s.root_ = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    if (!s.root_.is_object())
      throw ConfigError(path + ": scenario must be a JSON object");
    s.dir_ = fs::path(path).parent_path();
    s.file_ = fs::path(path).filename().string();
    return s;
  }

  const std::string& filename() const { return file_; }

  bool has(const std::string& key) const { return root_.contains(key); }

  double num(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return record(key, fallback);
    return record(key, as_number(key, *v));
  }

  double req_num(const std::string& key) {
    const json* v = find(key);
    if (!v) throw ConfigError(missing_msg(key));
    return record(key, as_number(key, *v));
  }

  long long integer(const std::string& key, long long fallback) {
    const json* v = find(key);
    if (!v) {
      effective_[key] = fallback;
      return fallback;
    }
    if (!v->is_number_integer())
      throw ConfigError("scenario key \"" + key + "\" must be an integer");
    effective_[key] = *v;
    return v->get<long long>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (!v) {
      effective_[key] = fallback;
      return fallback;
    }
    if (!v->is_boolean())
      throw ConfigError("scenario key \"" + key + "\" must be a boolean");
    effective_[key] = *v;
    return v->get<bool>();
  }

  std::string str(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    if (!v) {
      effective_[key] = fallback;
      return fallback;
    }
    if (!v->is_string())
      throw ConfigError("scenario key \"" + key + "\" must be a string");
    effective_[key] = *v;
    return v->get<std::string>();
  }

  std::vector<double> num_list(const std::string& key,
                               std::vector<double> fallback) {
    const json* v = find(key);
    if (!v) {
      effective_[key] = fallback;
      return fallback;
    }
    if (!v->is_array())
      throw ConfigError("scenario key \"" + key + "\" must be an array");
    std::vector<double> out;
    for (const auto& e : *v) out.push_back(as_number(key, e));
    effective_[key] = out;
    return out;
  }

  // path-valued key, resolved relative to the scenario file's directory
  std::optional<std::string> opt_path(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string())
      throw ConfigError("scenario key \"" + key + "\" must be a path string");
    effective_[key] = *v;
    fs::path p = v->get<std::string>();
    if (p.is_relative() && !dir_.empty()) p = dir_ / p;
    return p.string();
  }

  // --seed beats the scenario key beats zero
  std::uint64_t seed(const RunCommon& rc) {
    const json* v = find("seed");
    std::uint64_t s = rc.seed_set  ? rc.seed
                      : v          ? v->get<std::uint64_t>()
                                   : 0;
    effective_["seed"] = s;
    return s;
  }

  // record a value the command computed itself (shows up in the echo only)
  void note(const std::string& key, double value) { effective_[key] = value; }

  void finish() const {
    std::vector<std::string> unknown;
    for (auto it = root_.begin(); it != root_.end(); ++it)
      if (!seen_.count(it.key())) unknown.push_back(it.key());
    if (unknown.empty()) return;
    std::string msg = "unknown scenario key(s):";
    for (const auto& k : unknown) msg += " \"" + k + "\"";
    msg += " (unit suffixes are mandatory: _um, _MHz, _V, ...)";
    throw ConfigError(msg);
  }

  std::string echo() const { return effective_.dump(); }

private:
  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = root_.find(key);
    return it == root_.end() ? nullptr : &*it;
  }

  static double as_number(const std::string& key, const json& v) {
    if (!v.is_number())
      throw ConfigError("scenario key \"" + key + "\" must be a number");
    return v.get<double>();
  }

  double record(const std::string& key, double v) {
    effective_[key] = v;
    return v;
  }

  std::string missing_msg(const std::string& key) const {
    std::string msg = "missing required scenario key \"" + key + "\"";
    auto stem = key.substr(0, key.find('_'));
    for (auto it = root_.begin(); it != root_.end(); ++it)
      if (it.key() != key && it.key().rfind(stem, 0) == 0)
        msg += " (found \"" + it.key() + "\"; unit suffixes are mandatory)";
    return msg;
  }

  json root_;
  json effective_ = json::object();
  std::set<std::string> seen_;
  fs::path dir_;
  std::string file_;
};

Scenario load_scenario(const RunCommon& rc) {
  return rc.scenario_path.empty() ? Scenario()
                                  : Scenario::from_file(rc.scenario_path);
}

// layout precedence: scenario key, FOURRF_LAYOUT env var, built-in reference
ElectrodeLayout resolve_layout(Scenario& s, std::string* desc) {
  if (auto p = s.opt_path("layout_file")) {
    *desc = "file:" + fs::path(*p).filename().string();
    return load_layout_file(*p);
  }
  if (const char* env = std::getenv("FOURRF_LAYOUT"); env && *env) {
    *desc = "env:" + fs::path(env).filename().string();
    return load_layout_file(env);
  }
  *desc = "builtin:reference";
  return reference_layout();
}

// ---------------------------------------------------------------------------
// output table with '#' metadata header
// ---------------------------------------------------------------------------

class Table {
public:
  explicit Table(std::string command) : command_(std::move(command)) {}

  void meta(const std::string& key, const std::string& value) {
    meta_.emplace_back(key, value);
  }
  void meta(const std::string& key, double value) { meta(key, fmt_g(value)); }

  void columns(std::vector<std::string> names) { columns_ = std::move(names); }

  void row(const std::vector<double>& vals) {
    std::vector<std::string> r;
    r.reserve(vals.size());
    for (double v : vals) r.push_back(fmt_g(v));
    rows_.push_back(std::move(r));
  }
  void row_raw(std::vector<std::string> r) { rows_.push_back(std::move(r)); }

  fs::path write(const RunCommon& rc, Scenario& s) {
    std::string name = s.str("output_file", default_name());
    s.finish();
    fs::path dir = rc.out_dir.empty() ? fs::path(".") : fs::path(rc.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    fs::path path = dir / name;
    std::ofstream out(path, std::ios::binary); // '\n' endings everywhere
    if (!out) throw ConfigError("cannot open output file: " + path.string());
    out << "# fourrf " << command_ << "\n";
    out << "# version = " << kVersion << "\n";
    out << "# eigen = " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION
        << "." << EIGEN_MINOR_VERSION << "\n";
    if (!s.filename().empty()) out << "# scenario_file = " << s.filename() << "\n";
    out << "# scenario = " << s.echo() << "\n";
    for (const auto& [k, v] : meta_) out << "# " << k << " = " << v << "\n";
    out << "# columns:";
    for (const auto& c : columns_) out << " " << c;
    out << "\n";
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i)
        out << (i ? "\t" : "") << r[i];
      out << "\n";
    }
    out.flush();
    if (!out) throw ConfigError("write failed: " + path.string());
    std::printf("wrote %s (%zu rows)\n", path.string().c_str(), rows_.size());
    return path;
  }

private:
  std::string default_name() const {
    std::string n = command_;
    std::replace(n.begin(), n.end(), '-', '_');
    return n + ".tsv";
  }

  std::string command_;
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

// work-stealing loop over [0, n); results must go into preallocated slots
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& body) {
  threads = std::max(1u, std::min(threads, 64u));
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr first;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  std::size_t n_workers = std::min<std::size_t>(threads, n);
  for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

std::vector<double> linspace(double lo, double hi, long long n) {
  if (n < 1) throw ConfigError("grid needs at least one point");
  std::vector<double> v(static_cast<std::size_t>(n));
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  for (long long i = 0; i < n; ++i)
    v[static_cast<std::size_t>(i)] = lo + (hi - lo) * double(i) / double(n - 1);
  return v;
}

TiltPlane plane_from(const std::string& s) {
  if (s == "xz") return TiltPlane::xz;
  if (s == "yz") return TiltPlane::yz;
  throw ConfigError("tilt_plane must be \"xz\" or \"yz\", got \"" + s + "\"");
}

double deg_to_rad(double d) { return d * constants::pi / 180.0; }

// operating-point settings shared by several commands
OperatingPointSpec spec_from_scenario(Scenario& s) {
  OperatingPointSpec sp;
  sp.height = from_um(s.num("height_um", 175.0));
  sp.rf_omega = omega_from_MHz(s.num("rf_MHz", 18.1));
  sp.vertical_freq = omega_from_MHz(s.num("vertical_MHz", 1.2));
  sp.planar_freq = omega_from_MHz(s.num("planar_MHz", 1.0));
  sp.splitting = s.num("splitting", 0.1);
  sp.tilt = deg_to_rad(s.num("tilt_deg", 0.0));
  sp.plane = plane_from(s.str("tilt_plane", "xz"));
  return sp;
}

// rf drive amplitude: explicit zero-to-peak or peak-to-peak volts
double rf_amplitude(Scenario& s, double fallback_zero_to_peak) {
  bool has_amp = s.has("rf_amplitude_V"), has_vpp = s.has("rf_vpp_V");
  if (has_amp && has_vpp)
    throw ConfigError("give rf_amplitude_V or rf_vpp_V, not both");
  if (has_vpp) return s.req_num("rf_vpp_V") / 2.0;
  return s.num("rf_amplitude_V", fallback_zero_to_peak);
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

void run_potential_map(const RunCommon& rc) {
  Scenario s = load_scenario(rc);
  std::string layout_desc;
  ElectrodeLayout layout = resolve_layout(s, &layout_desc);
  FieldBasis basis(layout);

  std::string plane = s.str("plane", "xy");
  double amp = rf_amplitude(s, 100.0);
  double rf_omega = omega_from_MHz(s.num("rf_MHz", 18.1));
  DriveConfig drive = matched_drive(layout, amp, rf_omega);
  std::vector<cplx> rf = basis.coeffs(drive.rf_amplitudes);

  std::vector<double> a, b;
  double fixed = 0;
  if (plane == "xy") {
    a = linspace(s.num("x_min_um", -300.0), s.num("x_max_um", 300.0),
                 s.integer("nx", 121));
    b = linspace(s.num("y_min_um", -300.0), s.num("y_max_um", 300.0),
                 s.integer("ny", 121));
    fixed = s.num("height_um", 175.0);
  } else if (plane == "xz") {
    a = linspace(s.num("x_min_um", -300.0), s.num("x_max_um", 300.0),
                 s.integer("nx", 121));
    b = linspace(s.num("z_min_um", 20.0), s.num("z_max_um", 400.0),
                 s.integer("nz", 96));
    fixed = s.num("y_um", 0.0);
  } else if (plane == "yz") {
    a = linspace(s.num("y_min_um", -300.0), s.num("y_max_um", 300.0),
                 s.integer("ny", 121));
    b = linspace(s.num("z_min_um", 20.0), s.num("z_max_um", 400.0),
                 s.integer("nz", 96));
    fixed = s.num("x_um", 0.0);
  } else {
    throw ConfigError("plane must be \"xy\", \"xz\" or \"yz\"");
  }

  std::vector<double> psi(a.size() * b.size());
  parallel_for(psi.size(), rc.threads, [&](std::size_t i) {
    std::size_t ia = i / b.size(), ib = i % b.size();
    Vec3 p;
    if (plane == "xy")
      p = {from_um(a[ia]), from_um(b[ib]), from_um(fixed)};
    else if (plane == "xz")
      p = {from_um(a[ia]), from_um(fixed), from_um(b[ib])};
    else
      p = {from_um(fixed), from_um(a[ia]), from_um(b[ib])};
    PhasorEval ev = basis.superpose(rf, p, 1);
    psi[i] = pseudopotential_from_field(ev.field().squaredNorm(), drive.ion,
                                        rf_omega) /
             constants::elementary_charge;
  });

  Table t("potential-map");
  t.meta("seed", fmt_g(double(s.seed(rc))));
  t.meta("layout", layout_desc);
  t.columns({"x_um", "y_um", "z_um", "psi_eV"});
  for (std::size_t i = 0; i < psi.size(); ++i) {
    std::size_t ia = i / b.size(), ib = i % b.size();
    double x, y, z;
    if (plane == "xy")
      x = a[ia], y = b[ib], z = fixed;
    else if (plane == "xz")
      x = a[ia], y = fixed, z = b[ib];
    else
      x = fixed, y = a[ia], z = b[ib];
    t.row({x, y, z, psi[i]});
  }
  t.write(rc, s);
}

void run_null_scan(const RunCommon& rc) {
  Scenario s = load_scenario(rc);
  std::string layout_desc;
  ElectrodeLayout layout = resolve_layout(s, &layout_desc);
  FieldBasis basis(layout);

  double amp = rf_amplitude(s, 100.0);
  double rf_omega = omega_from_MHz(s.num("rf_MHz", 18.1));
  double x_ref = from_um(s.num("x_ref_um", 50.0));
  std::vector<double> z = linspace(s.num("z_min_um", 50.0),
                                   s.num("z_max_um", 300.0),
                                   s.integer("n_heights", 26));
  DriveConfig drive = matched_drive(layout, amp, rf_omega);
  std::vector<cplx> rf = basis.coeffs(drive.rf_amplitudes);

  std::vector<double> e_axis(z.size()), e_ref(z.size());
  parallel_for(z.size(), rc.threads, [&](std::size_t i) {
    Vec3 on{0, 0, from_um(z[i])}, off{x_ref, 0, from_um(z[i])};
    e_axis[i] = basis.superpose(rf, on, 1).field().norm();
    e_ref[i] = basis.superpose(rf, off, 1).field().norm();
  });

  Table t("null-scan");
  t.meta("seed", fmt_g(double(s.seed(rc))));
  t.meta("layout", layout_desc);
  t.columns({"z_um", "e_axis_V_per_m", "e_ref_V_per_m", "ratio"});
  for (std::size_t i = 0; i < z.size(); ++i)
    t.row({z[i], e_axis[i], e_ref[i],
           e_ref[i] > 0 ? e_axis[i] / e_ref[i] : 0.0});
  t.write(rc, s);
}

void run_modes(const RunCommon& rc) {
  Scenario s = load_scenario(rc);
  std::string layout_desc;
  ElectrodeLayout layout = resolve_layout(s, &layout_desc);
  FieldBasis basis(layout);

  OperatingPointSpec sp = spec_from_scenario(s);
  OperatingPoint op = plan_operating_point(basis, sp);

  Table t("modes");
  t.meta("seed", fmt_g(double(s.seed(rc))));
  t.meta("layout", layout_desc);
  t.meta("rf_amplitude_V", op.rf_amplitude);
  t.meta("equilibrium_um",
         fmt_g(to_um(op.modes.equilibrium.x())) + " " +
             fmt_g(to_um(op.modes.equilibrium.y())) + " " +
             fmt_g(to_um(op.modes.equilibrium.z())));
  t.meta("dc_residual_rel", op.dc.residual_rel);
  for (const auto& [name, v] : op.dc.voltages) t.meta("dc." + name, v);
  for (const auto& w : op.modes.warnings) t.meta("warning", w);
  t.columns({"mode", "freq_MHz", "mathieu_q", "mathieu_a", "stable", "axis_x",
             "axis_y", "axis_z"});
  auto emit = [&](const char* name, const AxisMode& m) {
    t.row_raw({name, fmt_g(MHz_from_omega(m.omega)), fmt_g(m.mathieu_q),
               fmt_g(m.mathieu_a), m.stable ? "1" : "0", fmt_g(m.axis.x()),
               fmt_g(m.axis.y()), fmt_g(m.axis.z())});
  };
  emit("x_like", op.modes.x_like);
  emit("y_like", op.modes.y_like);
  emit("vertical", op.modes.vertical);
  t.write(rc, s);
}

void run_rf_power_curve(const RunCommon& rc) {
  Scenario s = load_scenario(rc);
  std::string layout_desc;
  ElectrodeLayout layout = resolve_layout(s, &layout_desc);
  FieldBasis basis(layout);

  OperatingPointSpec base = spec_from_scenario(s);
  std::vector<double> heights = linspace(s.num("height_min_um", 50.0),
                                         s.num("height_max_um", 300.0),
                                         s.integer("n_heights", 26));
  std::vector<double> tilts = s.num_list("tilts_deg", {0.0, 4.0});
  if (tilts.empty()) throw ConfigError("tilts_deg must not be empty");

  std::vector<double> volts(heights.size() * tilts.size());
  parallel_for(volts.size(), rc.threads, [&](std::size_t i) {
    std::size_t ih = i / tilts.size(), it = i % tilts.size();
    volts[i] = rf_amplitude_for_target(basis, from_um(heights[ih]),
                                       base.planar_freq,
                                       deg_to_rad(tilts[it]), base);
  });

  Table t("rf-power-curve");
  t.meta("seed", fmt_g(double(s.seed(rc))));
  t.meta("layout", layout_desc);
  std::vector<std::string> cols{"height_um"};
  for (double td : tilts) cols.push_back("v_rf_V_tilt" + fmt_g(td) + "deg");
  t.columns(cols);
  for (std::size_t ih = 0; ih < heights.size(); ++ih) {
    std::vector<double> r{heights[ih]};
    for (std::size_t it = 0; it < tilts.size(); ++it)
      r.push_back(volts[ih * tilts.size() + it]);
    t.row(r);
  }
  t.write(rc, s);
}

void run_dc_solve(const RunCommon& rc) {
  Scenario s = load_scenario(rc);
  std::string layout_desc;
  ElectrodeLayout layout = resolve_layout(s, &layout_desc);
  FieldBasis basis(layout);

  OperatingPointSpec sp = spec_from_scenario(s);
  const Ion ion = sp.ion;

  // same curvature target an operating point uses: vertical confinement c,
  // planar split that weakens the tilt-plane partner, then the tilt rotation
  double c = ion.mass * sp.vertical_freq * sp.vertical_freq / ion.charge;
  double ratio = 1.0 + sp.splitting;
  double split = ion.mass * sp.planar_freq * sp.planar_freq *
                 (ratio * ratio - 1.0) / (2.0 * ion.charge);
  Mat3 h = Mat3::Zero();
  if (sp.plane == TiltPlane::xz) {
    h(0, 0) = -c / 2 - split;
    h(1, 1) = -c / 2 + split;
  } else {
    h(0, 0) = -c / 2 + split;
    h(1, 1) = -c / 2 - split;
  }
  h(2, 2) = c;

  DcTarget target;
  target.point = {from_um(s.num("x_um", 0.0)), from_um(s.num("y_um", 0.0)),
                  sp.height};
  target.hessian = tilt_target(h, sp.tilt, sp.plane);
  DcSolution sol = solve_dc(basis, target);

  Table t("dc-solve");
  t.meta("seed", fmt_g(double(s.seed(rc))));
  t.meta("layout", layout_desc);
  t.meta("residual_norm", sol.residual_norm);
  t.meta("residual_rel", sol.residual_rel);
  t.meta("rank", fmt_g(double(sol.rank)));
  t.meta("achieved_field_V_per_m",
         fmt_g(sol.achieved_field.x()) + " " + fmt_g(sol.achieved_field.y()) +
             " " + fmt_g(sol.achieved_field.z()));
  try {
    double zeq = equilibrium_on_null(basis, sol.voltages, ion,
                                     0.3 * sp.height, 3.0 * sp.height);
    t.meta("equilibrium_z_um", to_um(zeq));
  } catch (const std::runtime_error& e) {
    t.meta("equilibrium_z_um", std::string("none (") + e.what() + ")");
  }
  t.columns({"electrode", "voltage_V"});
  for (const auto& [name, v] : sol.voltages) t.row_raw({name, fmt_g(v)});
  t.write(rc, s);
}

// resonator network from a netlist plus scenario-level tweaks
ResonatorNetwork network_from_scenario(Scenario& s) {
  ResonatorNetwork net;
  if (auto p = s.opt_path("netlist_file"))
    net = load_netlist(*p);
  else
    net = ResonatorNetwork::reference_defaults();
  net.plus.cv = 1e-12 * s.num("cv_plus_pF", 1e12 * net.plus.cv);
  net.minus.cv = 1e-12 * s.num("cv_minus_pF", 1e12 * net.minus.cv);
  net.minus.r_loss *= s.num("r_loss_minus_scale", 1.0);
  net.validate();
  return net;
}

void run_circuit_sweep(const RunCommon& rc) {
  Scenario s = load_scenario(rc);
  std::string layout_desc;
  ElectrodeLayout layout = resolve_layout(s, &layout_desc);
  FieldBasis basis(layout);

  ResonatorNetwork net = network_from_scenario(s);
  double center = 1e-12 * s.num("sweep_center_pF", 1e12 * net.plus.cv);
  double span = 1e-15 * s.num("sweep_span_fF", 24.0); // half-span about center
  long long n = s.integer("n_points", 49);
  if (n < 2) throw ConfigError("n_points must be >= 2");
  std::vector<double> cvs(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i)
    cvs[static_cast<std::size_t>(i)] =
        center - span + 2.0 * span * double(i) / double(n - 1);

  double height = from_um(s.num("height_um", 175.0));
  double rf_omega = omega_from_MHz(s.num("rf_MHz", 18.1));
  double amp = s.has("rf_amplitude_V")
                   ? s.req_num("rf_amplitude_V")
                   : rf_amplitude_for_target(
                         basis, height, omega_from_MHz(s.num("planar_MHz", 1.0)));
  s.note("rf_amplitude_V", amp);
  DriveConfig drive = matched_drive(layout, amp, rf_omega);
  ProbeGeometry probe = ProbeGeometry::vertical_729();

  std::vector<BetaSweepPoint> pts = beta_vs_resonance(
      net, basis, drive, Vec3{0, 0, height}, probe, cvs);

  Table t("circuit-sweep");
  t.meta("seed", fmt_g(double(s.seed(rc))));
  t.meta("layout", layout_desc);
  t.meta("probe", "vertical_729");
  t.columns({"cv_plus_pF", "f_res_MHz", "amplitude_ratio", "phase_error_mrad",
             "beta"});
  for (const auto& p : pts)
    t.row({1e12 * p.cv, 1e-6 * p.resonance_hz, p.amplitude_ratio,
           1e3 * p.phase_error_rad, p.beta});
  t.write(rc, s);
}

void run_beta(const RunCommon& rc) {
  Scenario s = load_scenario(rc);
  std::string layout_desc;
  ElectrodeLayout layout = resolve_layout(s, &layout_desc);
  FieldBasis basis(layout);

  double height = from_um(s.num("height_um", 175.0));
  double rf_omega = omega_from_MHz(s.num("rf_MHz", 18.1));
  double amp = s.has("rf_amplitude_V")
                   ? s.req_num("rf_amplitude_V")
                   : rf_amplitude_for_target(
                         basis, height, omega_from_MHz(s.num("planar_MHz", 1.0)));
  s.note("rf_amplitude_V", amp);
  DriveConfig drive = matched_drive(layout, amp, rf_omega);
  ProbeGeometry probe = ProbeGeometry::vertical_729();

  Table t("beta");
  t.meta("seed", fmt_g(double(s.seed(rc))));
  t.meta("layout", layout_desc);
  t.meta("probe", "vertical_729");
  t.columns({"f_res_MHz", "amplitude_ratio", "phase_error_mrad", "beta",
             "sideband_ratio"});

  bool direct = s.has("amplitude_ratio") || s.has("phase_error_mrad");
  if (direct) {
    // mismatch given directly: scale/rotate the minus-arm phasors
    double r = s.num("amplitude_ratio", 1.0);
    double phase = 1e-3 * s.num("phase_error_mrad", 0.0);
    if (!(r > 0)) throw ConfigError("amplitude_ratio must be > 0");
    cplx minus_scale = (1.0 / r) * std::exp(cplx(0.0, phase));
    for (auto& [name, v] : drive.rf_amplitudes)
      if (v.real() < 0) v *= minus_scale;
    PhasorEval ev = basis.superpose(drive.rf_amplitudes, Vec3{0, 0, height}, 1);
    double beta = modulation_index(ev.field(), drive.ion, rf_omega, probe);
    t.meta("mode", "direct-mismatch");
    t.row({MHz_from_omega(rf_omega), r, 1e3 * phase, beta,
           beta_to_sideband_ratio(beta)});
  } else {
    ResonatorNetwork net = network_from_scenario(s);
    std::vector<BetaSweepPoint> pt = beta_vs_resonance(
        net, basis, drive, Vec3{0, 0, height}, probe, {net.plus.cv});
    t.meta("mode", "circuit");
    t.row({1e-6 * pt[0].resonance_hz, pt[0].amplitude_ratio,
           1e3 * pt[0].phase_error_rad, pt[0].beta,
           beta_to_sideband_ratio(pt[0].beta)});
  }
  t.write(rc, s);
}

void run_trajectory(const RunCommon& rc) {
  Scenario s = load_scenario(rc);
  std::string layout_desc;
  ElectrodeLayout layout = resolve_layout(s, &layout_desc);
  FieldBasis basis(layout);

  OperatingPointSpec sp = spec_from_scenario(s);
  OperatingPoint op = plan_operating_point(basis, sp);
  s.note("rf_amplitude_V", op.rf_amplitude);

  Vec3 x0{from_um(s.num("dx_um", 1.0)), from_um(s.num("dy_um", 0.0)),
          sp.height + from_um(s.num("dz_um", 0.0))};
  Vec3 v0{s.num("vx_m_per_s", 0.0), s.num("vy_m_per_s", 0.0),
          s.num("vz_m_per_s", 0.0)};
  double duration = 1e-6 * s.num("duration_us", 20.0);

  IntegrateOptions opts;
  std::string stepper = s.str("stepper", "adaptive");
  if (stepper == "adaptive")
    opts.kind = StepperKind::adaptive;
  else if (stepper == "leapfrog")
    opts.kind = StepperKind::leapfrog;
  else
    throw ConfigError("stepper must be \"adaptive\" or \"leapfrog\"");
  opts.sample_dt = 1e-9 * s.num("sample_ns", 0.0);
  opts.fixed_dt = 1e-9 * s.num("fixed_dt_ns", 0.0);

  Trajectory tr = integrate_motion(basis, op.drive, x0, v0, duration, opts);

  Table t("trajectory");
  t.meta("seed", fmt_g(double(s.seed(rc))));
  t.meta("layout", layout_desc);
  t.meta("stepper", stepper);
  t.meta("n_steps", fmt_g(double(tr.n_steps)));
  t.columns({"t_us", "x_um", "y_um", "z_um", "vx_m_per_s", "vy_m_per_s",
             "vz_m_per_s"});
  for (std::size_t i = 0; i < tr.size(); ++i)
    t.row({1e6 * tr.t[i], to_um(tr.position[i].x()), to_um(tr.position[i].y()),
           to_um(tr.position[i].z()), tr.velocity[i].x(), tr.velocity[i].y(),
           tr.velocity[i].z()});
  t.write(rc, s);
}

void run_thermometry(const RunCommon& rc) {
  Scenario s = load_scenario(rc);

  SidebandScan sc;
  sc.mode_omega = omega_from_MHz(s.num("mode_MHz", 1.0));
  sc.rabi_carrier = 2.0 * constants::pi * 1e3 * s.num("rabi_carrier_kHz", 50.0);
  sc.shots = static_cast<int>(s.integer("shots", 100));
  Ion ion = Ion::ca40();
  sc.eta = s.has("eta") ? s.req_num("eta")
                        : lamb_dicke(ion, ProbeGeometry::vertical_729(),
                                     sc.mode_omega);
  s.note("eta", sc.eta);
  double t_probe_us = s.num("probe_time_us", 0.0);
  sc.probe_time = t_probe_us > 0
                      ? 1e-6 * t_probe_us
                      : 0.75 * constants::pi / (sc.eta * sc.rabi_carrier);
  s.note("probe_time_us", 1e6 * sc.probe_time);

  double span = s.num("span_kHz", 15.0), step = s.num("step_kHz", 1.0);
  if (!(step > 0) || !(span >= step))
    throw ConfigError("need span_kHz >= step_kHz > 0");
  long long half = std::llround(span / step);
  for (long long i = -half; i <= half; ++i)
    sc.detunings.push_back(2.0 * constants::pi * 1e3 * double(i) * step);

  double nbar = s.num("nbar", 0.20);
  bool analytic = s.boolean("analytic", false);
  std::uint64_t seed = s.seed(rc);

  SyntheticScan syn = synthesize_scan(sc, nbar, seed, analytic);

  ThermalEstimate est = estimate_nbar(syn.red, syn.blue);

  Table t("thermometry");
  t.meta("seed", fmt_g(double(seed)));
  t.meta("nbar_true", nbar);
  t.meta("nbar_est", est.nbar);
  t.meta("nbar_sigma", est.sigma);
  t.meta("amplitude_ratio", est.amplitude_ratio);
  t.meta("red_amp", est.red.amplitude);
  t.meta("blue_amp", est.blue.amplitude);
  t.columns({"detuning_kHz", "p_red", "p_blue"});
  for (std::size_t i = 0; i < syn.red.size(); ++i)
    t.row({syn.red[i].detuning / (2.0 * constants::pi * 1e3),
           syn.red[i].fraction, syn.blue[i].fraction});
  t.write(rc, s);
}

// ---------------------------------------------------------------------------
// figure presets: checked-in scenarios keyed by figure id
// ---------------------------------------------------------------------------

using CommandFn = void (*)(const RunCommon&);

const std::map<std::string, CommandFn>& command_table() {
  static const std::map<std::string, CommandFn> table{
      {"potential-map", run_potential_map}, {"null-scan", run_null_scan},
      {"modes", run_modes},                 {"rf-power-curve", run_rf_power_curve},
      {"dc-solve", run_dc_solve},           {"circuit-sweep", run_circuit_sweep},
      {"beta", run_beta},                   {"trajectory", run_trajectory},
      {"thermometry", run_thermometry},
  };
  return table;
}

fs::path data_dir() {
  if (const char* env = std::getenv("FOURRF_DATA"); env && *env)
    return fs::path(env);
  return fs::path(FOURRF_DATA_DIR);
}

void run_figure(const std::string& id, const RunCommon& rc) {
  struct Step {
    const char* command;
    const char* scenario;
  };
  static const std::map<std::string, std::vector<Step>> figures{
      {"1b", {{"potential-map", "fig1b.json"}}},
      {"1c", {{"potential-map", "fig1c.json"}}},
      {"2", {{"rf-power-curve", "fig2.json"}}},
      {"3b", {{"circuit-sweep", "fig3b.json"}}},
      {"4",
       {{"thermometry", "fig4_nbar017.json"},
        {"thermometry", "fig4_nbar020.json"}}},
  };
  auto it = figures.find(id);
  if (it == figures.end()) {
    std::string known;
    for (const auto& [k, v] : figures) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("unknown figure id \"" + id + "\" (known: " + known + ")");
  }
  fs::path scen_dir = data_dir() / "scenarios";
  for (const Step& step : it->second) {
    RunCommon sub = rc;
    sub.scenario_path = (scen_dir / step.scenario).string();
    if (!fs::exists(sub.scenario_path))
      throw ConfigError("scenario file not found: " + sub.scenario_path +
                        " (set FOURRF_DATA to the data directory)");
    sub.out_dir = (fs::path(rc.out_dir) / ("fig" + id)).string();
    command_table().at(step.command)(sub);
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"four-rf-electrode surface-trap toolkit"};
  app.set_version_flag("--version", std::string("fourrf ") + kVersion);
  app.require_subcommand(1);

  RunCommon rc;
  std::string figure_id;

  auto add_common = [&rc](CLI::App* cmd) {
    cmd->add_option("--scenario", rc.scenario_path,
                    "JSON scenario file (unit-suffixed keys)");
    cmd->add_option("--out", rc.out_dir, "output directory")
        ->capture_default_str();
    cmd->add_option("--seed", rc.seed, "RNG seed (overrides scenario)")
        ->each([&rc](const std::string&) { rc.seed_set = true; });
    cmd->add_option("--threads", rc.threads, "worker threads for grids")
        ->capture_default_str();
  };

  struct Sub {
    const char* name;
    const char* help;
  };
  static const Sub subs[] = {
      {"potential-map", "pseudopotential grid in a coordinate plane"},
      {"null-scan", "rf field on and off the vertical null axis"},
      {"modes", "plan an operating point and report secular modes"},
      {"rf-power-curve", "rf amplitude vs ion height at fixed planar frequency"},
      {"dc-solve", "dc voltages for a height/splitting/tilt target"},
      {"circuit-sweep", "trimmer sweep: resonance, mismatch, modulation index"},
      {"beta", "modulation index at one circuit or mismatch setting"},
      {"trajectory", "integrate one ion in the full oscillating field"},
      {"thermometry", "synthesize sideband scans and estimate nbar"},
  };
  for (const Sub& sub : subs) {
    CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
    add_common(cmd);
    cmd->callback([name = std::string(sub.name), &rc] {
      command_table().at(name)(rc);
    });
  }
  CLI::App* fig = app.add_subcommand(
      "figure", "run a checked-in scenario set (ids: 1b, 1c, 2, 3b, 4)");
  fig->add_option("id", figure_id, "figure id")->required();
  add_common(fig);
  fig->callback([&] { run_figure(figure_id, rc); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "fourrf: error [config] %s\n", e.what());
    return 2;
  } catch (const ModelDomainError& e) {
    std::fprintf(stderr, "fourrf: error [model-domain] %s\n", e.what());
    return 4;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "fourrf: error [numerical] %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fourrf: error [internal] %s\n", e.what());
    return 3;
  }
  return 0;
}
