#include "fourrf/geometry.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fourrf/constants.hpp"
#include "fourrf/errors.hpp"

namespace fourrf {

const char* to_string(Role r) {
  switch (r) {
  case Role::rf_plus: return "rf_plus";
  case Role::rf_minus: return "rf_minus";
  case Role::dc: return "dc";
  case Role::ground: return "ground";
  }
  return "?";
}

Role role_from_string(const std::string& s) {
  if (s == "rf_plus") return Role::rf_plus;
  if (s == "rf_minus") return Role::rf_minus;
  if (s == "dc") return Role::dc;
  if (s == "ground") return Role::ground;
  throw ConfigError("unknown electrode role '" + s + "'");
}

bool Rect::overlaps(const Rect& o) const {
  return x_min < o.x_max && o.x_min < x_max && y_min < o.y_max &&
         o.y_min < y_max;
}

const Electrode* ElectrodeLayout::find(const std::string& name) const {
  int i = index_of(name);
  return i < 0 ? nullptr : &electrodes[i];
}

int ElectrodeLayout::index_of(const std::string& name) const {
  for (size_t i = 0; i < electrodes.size(); ++i)
    if (electrodes[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> ElectrodeLayout::names_with_role(Role r) const {
  std::vector<std::string> out;
  for (const auto& e : electrodes)
    if (e.role == r) out.push_back(e.name);
  return out;
}

std::string ValidationReport::summary() const {
  if (ok()) return "ok";
  std::ostringstream os;
  for (const auto& v : violations) os << v.detail << "\n";
  return os.str();
}

ValidationReport validate(const ElectrodeLayout& layout) {
  ValidationReport rep;
  std::set<std::string> seen;
  for (const auto& e : layout.electrodes) {
    if (!seen.insert(e.name).second)
      rep.violations.push_back({LayoutViolation::Kind::duplicate_name,
                                "duplicate electrode name '" + e.name + "'"});
    for (const auto& r : e.rects)
      if (r.degenerate())
        rep.violations.push_back({LayoutViolation::Kind::degenerate_rect,
                                  "degenerate rectangle in '" + e.name + "'"});
  }
  // pairwise overlap between pads (and within a pad: a self-overlapping
  // union double-counts potential, so it is rejected too)
  for (size_t a = 0; a < layout.electrodes.size(); ++a) {
    const auto& ea = layout.electrodes[a];
    for (size_t i = 0; i < ea.rects.size(); ++i)
      for (size_t j = i + 1; j < ea.rects.size(); ++j)
        if (ea.rects[i].overlaps(ea.rects[j]))
          rep.violations.push_back({LayoutViolation::Kind::overlap,
                                    "self-overlap within '" + ea.name + "'"});
    for (size_t b = a + 1; b < layout.electrodes.size(); ++b) {
      const auto& eb = layout.electrodes[b];
      bool hit = false;
      for (const auto& ra : ea.rects)
        for (const auto& rb : eb.rects)
          if (ra.overlaps(rb)) hit = true;
      if (hit)
        rep.violations.push_back({LayoutViolation::Kind::overlap,
                                  "overlap between '" + ea.name + "' and '" +
                                      eb.name + "'"});
    }
  }
  bool has_plus = false, has_minus = false;
  for (const auto& e : layout.electrodes) {
    has_plus |= e.role == Role::rf_plus;
    has_minus |= e.role == Role::rf_minus;
  }
  if (!has_plus || !has_minus)
    rep.violations.push_back(
        {LayoutViolation::Kind::missing_rf,
         "layout needs at least one rf_plus and one rf_minus electrode"});
  return rep;
}

ElectrodeLayout reference_layout(const DcPadParams& dc) {
  // rf squares: 290 um side, centers (+-280, +-280) um
  const double ri = 135e-6, ro = 425e-6;
  auto square = [](double x0, double x1, double y0, double y1) {
    return Rect{x0, x1, y0, y1};
  };
  ElectrodeLayout lay;
  lay.electrodes = {
      {"rf_ne", Role::rf_plus, {square(ri, ro, ri, ro)}},
      {"rf_sw", Role::rf_plus, {square(-ro, -ri, -ro, -ri)}},
      {"rf_nw", Role::rf_minus, {square(-ro, -ri, ri, ro)}},
      {"rf_se", Role::rf_minus, {square(ri, ro, -ro, -ri)}},
      {"dc_center",
       Role::dc,
       {square(-dc.center_half, dc.center_half, -dc.center_half,
               dc.center_half)}},
      {"dc_arm_e",
       Role::dc,
       {square(dc.arm_inner, dc.arm_outer, -dc.arm_half_w, dc.arm_half_w)}},
      {"dc_arm_n",
       Role::dc,
       {square(-dc.arm_half_w, dc.arm_half_w, dc.arm_inner, dc.arm_outer)}},
      {"dc_arm_w",
       Role::dc,
       {square(-dc.arm_outer, -dc.arm_inner, -dc.arm_half_w, dc.arm_half_w)}},
      {"dc_arm_s",
       Role::dc,
       {square(-dc.arm_half_w, dc.arm_half_w, -dc.arm_outer, -dc.arm_inner)}},
      {"dc_outer_e",
       Role::dc,
       {square(dc.outer_inner, dc.outer_outer, -dc.outer_half_w,
               dc.outer_half_w)}},
      {"dc_outer_n",
       Role::dc,
       {square(-dc.outer_half_w, dc.outer_half_w, dc.outer_inner,
               dc.outer_outer)}},
      {"dc_outer_w",
       Role::dc,
       {square(-dc.outer_outer, -dc.outer_inner, -dc.outer_half_w,
               dc.outer_half_w)}},
      {"dc_outer_s",
       Role::dc,
       {square(-dc.outer_half_w, dc.outer_half_w, -dc.outer_outer,
               -dc.outer_inner)}},
  };
  return lay;
}

ElectrodeLayout load_layout(std::istream& in) {
  ElectrodeLayout lay;
  std::map<std::string, int> index;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string name, role;
    double x0, x1, y0, y1;
    if (!(ss >> name)) continue; // blank line
    if (!(ss >> role >> x0 >> x1 >> y0 >> y1))
      throw ConfigError("layout line " + std::to_string(lineno) +
                        ": expected 'name role x_min x_max y_min y_max'");
    std::string rest;
    if (ss >> rest)
      throw ConfigError("layout line " + std::to_string(lineno) +
                        ": trailing token '" + rest + "'");
    Rect r{from_um(x0), from_um(x1), from_um(y0), from_um(y1)};
    Role ro = role_from_string(role);
    auto it = index.find(name);
    if (it == index.end()) {
      index[name] = static_cast<int>(lay.electrodes.size());
      lay.electrodes.push_back({name, ro, {r}});
    } else {
      auto& e = lay.electrodes[it->second];
      if (e.role != ro)
        throw ConfigError("layout line " + std::to_string(lineno) + ": '" +
                          name + "' re-declared with role " + role);
      e.rects.push_back(r);
    }
  }
  return lay;
}

ElectrodeLayout load_layout_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open layout file '" + path + "'");
  try {
    return load_layout(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void save_layout(std::ostream& out, const ElectrodeLayout& layout) {
  out << "# electrode layout: name role x_min x_max y_min y_max (um)\n";
  char buf[256];
  for (const auto& e : layout.electrodes)
    for (const auto& r : e.rects) {
      std::snprintf(buf, sizeof buf,
                    "%-12s %-9s %14.6f %14.6f %14.6f %14.6f\n", e.name.c_str(),
                    to_string(e.role), to_um(r.x_min), to_um(r.x_max),
                    to_um(r.y_min), to_um(r.y_max));
      out << buf;
    }
}

void save_layout_file(const std::string& path, const ElectrodeLayout& layout) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write layout file '" + path + "'");
  save_layout(out, layout);
}

} // namespace fourrf
