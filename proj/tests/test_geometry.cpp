#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "fourrf/constants.hpp"
#include "fourrf/errors.hpp"
#include "fourrf/geometry.hpp"

using namespace fourrf;

TEST_CASE("paper layout: structure and dimensions") {
  auto lay = reference_layout();
  CHECK(lay.electrodes.size() == 13);
  CHECK(lay.names_with_role(Role::rf_plus).size() == 2);
  CHECK(lay.names_with_role(Role::rf_minus).size() == 2);
  CHECK(lay.names_with_role(Role::dc).size() == 9);
  CHECK(validate(lay).ok());

  // rf squares: 290 um side, centers on the corners of a 560 um square
  const Electrode* ne = lay.find("rf_ne");
  REQUIRE(ne != nullptr);
  REQUIRE(ne->rects.size() == 1);
  const Rect& r = ne->rects[0];
  CHECK(r.x_max - r.x_min == doctest::Approx(290e-6).epsilon(1e-12));
  CHECK(0.5 * (r.x_min + r.x_max) == doctest::Approx(280e-6).epsilon(1e-12));
  CHECK(0.5 * (r.y_min + r.y_max) == doctest::Approx(280e-6).epsilon(1e-12));
  CHECK(ne->role == Role::rf_plus);
  // diagonal partner shares the role; the other diagonal is the return
  CHECK(lay.find("rf_sw")->role == Role::rf_plus);
  CHECK(lay.find("rf_nw")->role == Role::rf_minus);
  CHECK(lay.find("rf_se")->role == Role::rf_minus);
}

TEST_CASE("paper layout: 90-degree rotation maps onto itself with rf roles swapped") {
  auto lay = reference_layout();
  auto rot = [](const Rect& r) { // (x,y) -> (-y,x)
    return Rect{-r.y_max, -r.y_min, r.x_min, r.x_max};
  };
  auto same = [](const Rect& a, const Rect& b) {
    return std::abs(a.x_min - b.x_min) < 1e-12 &&
           std::abs(a.x_max - b.x_max) < 1e-12 &&
           std::abs(a.y_min - b.y_min) < 1e-12 &&
           std::abs(a.y_max - b.y_max) < 1e-12;
  };
  for (const auto& e : lay.electrodes)
    for (const auto& r : e.rects) {
      Rect rr = rot(r);
      bool found = false;
      for (const auto& e2 : lay.electrodes)
        for (const auto& r2 : e2.rects)
          if (same(rr, r2)) {
            found = true;
            if (e.role == Role::rf_plus) CHECK(e2.role == Role::rf_minus);
            if (e.role == Role::rf_minus) CHECK(e2.role == Role::rf_plus);
            if (e.role == Role::dc) CHECK(e2.role == Role::dc);
          }
      CHECK_MESSAGE(found, "rotated image of ", e.name, " missing");
    }
}

TEST_CASE("rect overlap semantics: open interiors") {
  Rect a{0, 1, 0, 1};
  CHECK(!a.overlaps({1, 2, 0, 1}));   // shared edge
  CHECK(!a.overlaps({0, 1, 1, 2}));   // shared edge
  CHECK(a.overlaps({0.5, 1.5, 0.5, 1.5}));
  CHECK(a.overlaps({0.25, 0.75, 0.25, 0.75})); // containment
  CHECK(!a.overlaps({2, 3, 2, 3}));
}

TEST_CASE("validate flags each violation kind") {
  ElectrodeLayout lay = reference_layout();

  SUBCASE("overlap") {
    lay.electrodes[4].rects.push_back({100e-6, 400e-6, 140e-6, 400e-6});
    auto rep = validate(lay);
    CHECK(!rep.ok());
    bool found = false;
    for (auto& v : rep.violations)
      found |= v.kind == LayoutViolation::Kind::overlap;
    CHECK(found);
  }
  SUBCASE("degenerate rectangle") {
    lay.electrodes[4].rects.push_back({0, 0, 0, 1e-6});
    auto rep = validate(lay);
    bool found = false;
    for (auto& v : rep.violations)
      found |= v.kind == LayoutViolation::Kind::degenerate_rect;
    CHECK(found);
  }
  SUBCASE("duplicate name") {
    lay.electrodes.push_back({"dc_center", Role::dc, {{900e-6, 910e-6, 0, 1e-6}}});
    auto rep = validate(lay);
    bool found = false;
    for (auto& v : rep.violations)
      found |= v.kind == LayoutViolation::Kind::duplicate_name;
    CHECK(found);
  }
  SUBCASE("missing rf role") {
    lay.electrodes.erase(lay.electrodes.begin(),
                         lay.electrodes.begin() + 2); // both rf_plus pads
    auto rep = validate(lay);
    bool found = false;
    for (auto& v : rep.violations)
      found |= v.kind == LayoutViolation::Kind::missing_rf;
    CHECK(found);
  }
}

TEST_CASE("layout file round trip") {
  auto lay = reference_layout();
  std::stringstream ss;
  save_layout(ss, lay);
  auto back = load_layout(ss);
  REQUIRE(back.electrodes.size() == lay.electrodes.size());
  for (size_t i = 0; i < lay.electrodes.size(); ++i) {
    const auto& a = lay.electrodes[i];
    const auto& b = back.electrodes[i];
    CHECK(a.name == b.name);
    CHECK(a.role == b.role);
    REQUIRE(a.rects.size() == b.rects.size());
    for (size_t j = 0; j < a.rects.size(); ++j) {
      CHECK(a.rects[j].x_min == doctest::Approx(b.rects[j].x_min).epsilon(1e-9));
      CHECK(a.rects[j].x_max == doctest::Approx(b.rects[j].x_max).epsilon(1e-9));
      CHECK(a.rects[j].y_min == doctest::Approx(b.rects[j].y_min).epsilon(1e-9));
      CHECK(a.rects[j].y_max == doctest::Approx(b.rects[j].y_max).epsilon(1e-9));
    }
  }
}

TEST_CASE("layout parser: multi-rect electrodes, comments, errors") {
  SUBCASE("repeated name extends the electrode") {
    std::stringstream ss("# comment line\n"
                         "pad dc 0 10 0 10\n"
                         "\n"
                         "pad dc 10 20 0 10  # inline comment\n"
                         "rfp rf_plus 30 40 0 10\n"
                         "rfm rf_minus 50 60 0 10\n");
    auto lay = load_layout(ss);
    REQUIRE(lay.electrodes.size() == 3);
    CHECK(lay.find("pad")->rects.size() == 2);
    CHECK(lay.find("pad")->rects[1].x_min == doctest::Approx(10e-6));
  }
  SUBCASE("unknown role") {
    std::stringstream ss("pad ac 0 10 0 10\n");
    CHECK_THROWS_AS(load_layout(ss), ConfigError);
  }
  SUBCASE("short line") {
    std::stringstream ss("pad dc 0 10 0\n");
    CHECK_THROWS_AS(load_layout(ss), ConfigError);
  }
  SUBCASE("trailing garbage") {
    std::stringstream ss("pad dc 0 10 0 10 extra\n");
    CHECK_THROWS_AS(load_layout(ss), ConfigError);
  }
  SUBCASE("role mismatch on extension") {
    std::stringstream ss("pad dc 0 10 0 10\npad rf_plus 20 30 0 10\n");
    CHECK_THROWS_AS(load_layout(ss), ConfigError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_layout_file("/nonexistent/layout.txt"), ConfigError);
  }
}

TEST_CASE("lookup helpers") {
  auto lay = reference_layout();
  CHECK(lay.index_of("rf_ne") == 0);
  CHECK(lay.index_of("nope") == -1);
  CHECK(lay.find("nope") == nullptr);
  auto dcs = lay.names_with_role(Role::dc);
  CHECK(std::find(dcs.begin(), dcs.end(), "dc_center") != dcs.end());
  CHECK(role_from_string("rf_plus") == Role::rf_plus);
  CHECK_THROWS_AS(role_from_string("bogus"), ConfigError);
  CHECK(std::string(to_string(Role::ground)) == "ground");
}
