#include "morphrl/textio.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

using morphrl::ParseError;
using morphrl::TextLine;
using morphrl::tokenize_kv_text;

TEST_CASE("tokenizer classifies sections, blocks and key-value lines") {
  const auto lines = tokenize_kv_text(
      "# a comment\n"
      "name: quad\n"
      "\n"
      "[ranges]\n"
      "joint hip_fl:\n"
      "  kp: 45\n");
  REQUIRE(lines.size() == 4);

  CHECK(lines[0].kind == TextLine::Kind::key_value);
  CHECK(lines[0].head == "name");
  CHECK(lines[0].value == "quad");
  CHECK(lines[0].line_no == 2);
  CHECK(lines[0].indent == 0);

  CHECK(lines[1].kind == TextLine::Kind::section);
  CHECK(lines[1].head == "ranges");
  CHECK(lines[1].line_no == 4);

  CHECK(lines[2].kind == TextLine::Kind::block);
  CHECK(lines[2].head == "joint");
  CHECK(lines[2].name == "hip_fl");

  CHECK(lines[3].kind == TextLine::Kind::key_value);
  CHECK(lines[3].head == "kp");
  CHECK(lines[3].indent == 2);
}

TEST_CASE("inline comments and surrounding whitespace are stripped") {
  const auto lines = tokenize_kv_text("mass:   12.5   # trunk\n");
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].value == "12.5");
}

TEST_CASE("malformed lines are rejected with their location") {
  CHECK_THROWS_AS(static_cast<void>(tokenize_kv_text("no colon here\n")), ParseError);
  CHECK_THROWS_AS(static_cast<void>(tokenize_kv_text("[unterminated\n")), ParseError);
  CHECK_THROWS_AS(static_cast<void>(tokenize_kv_text("9bad: 1\n")), ParseError);
  try {
    static_cast<void>(tokenize_kv_text("ok: 1\nbroken line\n"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

static TextLine kv(const std::string& value) {
  TextLine line;
  line.head = "k";
  line.value = value;
  line.line_no = 1;
  return line;
}

TEST_CASE("scalar, tuple and boolean values parse") {
  CHECK(morphrl::parse_number(kv("-3.25e2")) == -325.0);
  CHECK_THROWS_AS(static_cast<void>(morphrl::parse_number(kv("1.2x"))), ParseError);
  CHECK_THROWS_AS(static_cast<void>(morphrl::parse_number(kv(""))), ParseError);

  const auto v = morphrl::parse_vec3(kv("(1, -2.5, 3e-1)"));
  CHECK(v[0] == 1.0);
  CHECK(v[1] == -2.5);
  CHECK(v[2] == 0.3);
  CHECK_THROWS_AS(static_cast<void>(morphrl::parse_vec3(kv("(1, 2)"))), ParseError);

  const auto p = morphrl::parse_pair(kv("(-1.5, 1.5)"));
  CHECK(p.first == -1.5);
  CHECK(p.second == 1.5);
  CHECK_THROWS_AS(static_cast<void>(morphrl::parse_pair(kv("(1, 2, 3)"))), ParseError);

  CHECK(morphrl::parse_bool(kv("true")));
  CHECK(morphrl::parse_bool(kv("1")));
  CHECK_FALSE(morphrl::parse_bool(kv("false")));
  CHECK_FALSE(morphrl::parse_bool(kv("0")));
  CHECK_THROWS_AS(static_cast<void>(morphrl::parse_bool(kv("yes"))), ParseError);
}

TEST_CASE("format_double round trips exactly and prefers short forms") {
  CHECK(morphrl::format_double(0.0) == "0");
  CHECK(morphrl::format_double(-0.0) == "0");
  CHECK(morphrl::format_double(50.0) == "50");
  CHECK(morphrl::format_double(-3.0) == "-3");
  CHECK(morphrl::format_double(0.25) == "0.25");
  CHECK(morphrl::format_double(0.1) == "0.1");

  const double values[] = {1.0 / 3.0,       std::sqrt(2.0),     6.02214076e23,
                           -1.6021766e-19,  0.30000000000000004, 1e-300,
                           123456789.12345, 5e-324};
  for (double v : values) {
    const std::string s = morphrl::format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("format_vec3 output parses back through parse_vec3") {
  const std::array<double, 3> v = {0.1, -2.0, 1.0 / 3.0};
  const auto parsed = morphrl::parse_vec3(kv(morphrl::format_vec3(v)));
  CHECK(parsed[0] == v[0]);
  CHECK(parsed[1] == v[1]);
  CHECK(parsed[2] == v[2]);
}
