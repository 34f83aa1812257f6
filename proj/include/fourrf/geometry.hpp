#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fourrf {

enum class Role { rf_plus, rf_minus, dc, ground };

const char* to_string(Role r);
Role role_from_string(const std::string& s);

// Axis-aligned rectangle in the z = 0 electrode plane.  SI meters.
struct Rect {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;

  double area() const { return (x_max - x_min) * (y_max - y_min); }
  bool degenerate() const { return x_max <= x_min || y_max <= y_min; }
  bool overlaps(const Rect& o) const; // open-interior intersection
};

struct Electrode {
  std::string name;
  Role role = Role::dc;
  std::vector<Rect> rects; // a pad may be a union of rectangles
};

struct ElectrodeLayout {
  std::vector<Electrode> electrodes;

  const Electrode* find(const std::string& name) const;
  int index_of(const std::string& name) const; // -1 if absent
  std::vector<std::string> names_with_role(Role r) const;
};

struct LayoutViolation {
  enum class Kind { overlap, degenerate_rect, duplicate_name, missing_rf };
  Kind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<LayoutViolation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

// Checks: no overlapping pads, no degenerate rectangles, unique names,
// and at least one electrode each of rf_plus and rf_minus role.
ValidationReport validate(const ElectrodeLayout& layout);

// Default dc pad dimensions (meters).  The four rf squares are fixed by the
// device: 290 um squares centered on the corners of a 560 um square.  The
// nine dc pads fill the cross-shaped gap and the outskirts; their sizes are
// estimates and therefore kept adjustable.
struct DcPadParams {
  double center_half = 115e-6;  // center square half-size
  double arm_inner = 135e-6;    // arm pad starts at the rf inner edge
  double arm_outer = 425e-6;    // arm pad ends at the rf outer edge
  double arm_half_w = 115e-6;   // arm pad half-width across the channel
  double outer_inner = 445e-6;  // outer pad inner edge
  double outer_outer = 795e-6;  // outer pad outer edge
  double outer_half_w = 175e-6; // outer pad half-width
};

// The vertical-linear four-rf-square trap: diagonal rf pairs driven in
// antiphase (rf_ne + rf_sw = rf_plus, rf_nw + rf_se = rf_minus), nine dc
// pads, everything else grounded plane.
ElectrodeLayout reference_layout(const DcPadParams& dc = {});

// Layout file format: '#' comments; one line per rectangle,
//   name role x_min x_max y_min y_max   (micrometers)
// repeated names extend the same electrode.
ElectrodeLayout load_layout(std::istream& in);
ElectrodeLayout load_layout_file(const std::string& path);
void save_layout(std::ostream& out, const ElectrodeLayout& layout);
void save_layout_file(const std::string& path, const ElectrodeLayout& layout);

} // namespace fourrf
