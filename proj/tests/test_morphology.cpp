#include "morphrl/morphology.hpp"

#include "doctest.h"

#include "morphrl/textio.hpp"

#include <filesystem>
#include <string>

using morphrl::Morphology;
using morphrl::SemanticError;

#ifndef MORPHRL_SOURCE_DIR
#error "MORPHRL_SOURCE_DIR must point at the repository root"
#endif

static std::filesystem::path repo_path(const char* rel) {
  return std::filesystem::path(MORPHRL_SOURCE_DIR) / rel;
}

static Morphology mini() {
  return morphrl::load_morphology(repo_path("tests/data/mini.morph"));
}

TEST_CASE("the bundled fixture loads with every field populated") {
  const Morphology m = mini();
  CHECK(m.name == "mini");
  CHECK(m.joint_count() == 3);
  CHECK(m.trunk_mass == 9.0);
  CHECK(m.control_frequency == 50.0);
  CHECK(m.joints[0].name == "root");
  CHECK(m.joints[0].kp == 44.0);
  CHECK(m.joints[0].attach_offset == Eigen::Vector3d(0.2, 0.15, -0.04));
  CHECK(m.joints[1].axis == Eigen::Vector3d(0.0, 0.6, 0.8));
  CHECK(m.joints[1].position_lo == -2.0);
  CHECK(m.joints[1].position_hi == 1.6);
  CHECK_FALSE(m.joints[2].track_nominal);
}

TEST_CASE("serialize then parse reproduces the exact morphology") {
  const Morphology m = mini();
  const Morphology again = morphrl::parse_morphology(morphrl::serialize_morphology(m));
  CHECK(again == m);
  // Canonical form is a fixed point.
  CHECK(morphrl::serialize_morphology(again) == morphrl::serialize_morphology(m));
}

TEST_CASE("all shipped robot templates load, validate and round trip") {
  const char* names[] = {"robots/quad_a.morph",  "robots/quad_b.morph",
                         "robots/biped_a.morph", "robots/biped_b.morph",
                         "robots/hexapod.morph", "robots/humanoid.morph"};
  for (const char* rel : names) {
    CAPTURE(rel);
    const Morphology m = morphrl::load_morphology(repo_path(rel));
    CHECK(m.joint_count() >= 4);
    const Morphology again = morphrl::parse_morphology(morphrl::serialize_morphology(m));
    CHECK(again == m);
  }
}

TEST_CASE("track_nominal joints are preserved through serialization") {
  const Morphology m = morphrl::load_morphology(repo_path("robots/humanoid.morph"));
  int flagged = 0;
  for (const auto& j : m.joints) flagged += j.track_nominal ? 1 : 0;
  CHECK(flagged == 2);
  const Morphology again = morphrl::parse_morphology(morphrl::serialize_morphology(m));
  CHECK(again == m);
}

TEST_CASE("validation rejects broken morphologies by field") {
  auto expect_reject = [](Morphology m, const std::string& field_part) {
    try {
      morphrl::validate_morphology(m);
      CAPTURE(field_part);
      FAIL("expected SemanticError");
    } catch (const SemanticError& e) {
      CHECK(e.field().find(field_part) != std::string::npos);
    }
  };

  Morphology base = mini();

  Morphology m = base;
  m.trunk_mass = 0.0;
  expect_reject(m, "trunk_mass");

  m = base;
  m.trunk_inertia.y() = -0.1;
  expect_reject(m, "trunk_inertia");

  m = base;
  m.joints.clear();
  expect_reject(m, "joints");

  m = base;
  m.joints[1].axis = Eigen::Vector3d(0.0, 0.5, 0.8);  // not unit length
  expect_reject(m, "axis");

  m = base;
  m.joints[0].position_lo = 1.0;
  m.joints[0].position_hi = -1.0;
  expect_reject(m, "position");

  m = base;
  m.joints[2].nominal_position = 5.0;  // outside the limits
  expect_reject(m, "nominal");

  m = base;
  m.joints[0].torque_limit = 0.0;
  expect_reject(m, "torque");

  m = base;
  m.joints[1].kp = -1.0;
  expect_reject(m, "kp");

  m = base;
  m.joints[1].name = "root";  // duplicate
  expect_reject(m, "root");

  m = base;
  m.control_frequency = 0.0;
  expect_reject(m, "control_frequency");
}

TEST_CASE("parser reports unknown keys and missing fields") {
  const std::string good = morphrl::serialize_morphology(mini());
  CHECK_THROWS_AS(static_cast<void>(morphrl::parse_morphology(good + "bogus_key: 3\n")),
                  morphrl::ParseError);
  CHECK_THROWS_AS(static_cast<void>(morphrl::parse_morphology("name: x\n")),
                  morphrl::ParseError);
}
