#include "morphrl/morphology.hpp"

#include "morphrl/textio.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace morphrl {

namespace {

Eigen::Vector3d to_vec3(const std::array<double, 3>& a) {
  return {a[0], a[1], a[2]};
}

std::array<double, 3> to_array(const Eigen::Vector3d& v) {
  return {v.x(), v.y(), v.z()};
}

bool same_vec(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return (a.array() == b.array()).all();
}

void require_positive(double v, const std::string& field) {
  if (!(v > 0.0)) {
    throw SemanticError(field, "must be > 0, got " + format_double(v));
  }
}

void require_nonneg(double v, const std::string& field) {
  if (!(v >= 0.0)) {
    throw SemanticError(field, "must be >= 0, got " + format_double(v));
  }
}

/// Tracks which keys of a block were already consumed so that duplicates and
/// missing required keys can be reported with their locations.
class KeySet {
 public:
  void mark(const TextLine& line) {
    if (!seen_.insert(line.head).second) {
      throw ParseError(line.line_no, 1, "duplicate key '" + line.head + "'");
    }
  }

  void require(const char* key, int block_line, const std::string& where) const {
    if (seen_.count(key) == 0) {
      throw ParseError(block_line, 1, where + " is missing required key '" + key + "'");
    }
  }

 private:
  std::set<std::string, std::less<>> seen_;
};

}  // namespace

bool operator==(const JointSpec& a, const JointSpec& b) {
  return a.name == b.name && same_vec(a.axis, b.axis) &&
         a.torque_limit == b.torque_limit && a.velocity_limit == b.velocity_limit &&
         a.position_lo == b.position_lo && a.position_hi == b.position_hi &&
         a.nominal_position == b.nominal_position && a.kp == b.kp && a.kd == b.kd &&
         a.damping == b.damping && a.friction == b.friction &&
         a.armature == b.armature && a.stiffness == b.stiffness &&
         same_vec(a.leverage, b.leverage) && same_vec(a.attach_offset, b.attach_offset) &&
         a.track_nominal == b.track_nominal;
}

bool operator==(const Morphology& a, const Morphology& b) {
  return a.name == b.name && a.trunk_mass == b.trunk_mass &&
         same_vec(a.trunk_inertia, b.trunk_inertia) && same_vec(a.trunk_com, b.trunk_com) &&
         same_vec(a.imu_position, b.imu_position) &&
         a.control_frequency == b.control_frequency && a.joints == b.joints;
}

void validate_morphology(const Morphology& m) {
  if (m.name.empty()) {
    throw SemanticError("name", "must not be empty");
  }
  require_positive(m.trunk_mass, "trunk_mass");
  for (int i = 0; i < 3; ++i) {
    if (!(m.trunk_inertia[i] > 0.0)) {
      throw SemanticError("trunk_inertia",
                          "all components must be > 0, got " +
                              format_vec3(to_array(m.trunk_inertia)));
    }
  }
  require_positive(m.control_frequency, "control_frequency");
  if (m.joints.empty()) {
    throw SemanticError("joints", "at least one joint is required");
  }

  std::set<std::string_view> names;
  for (const JointSpec& j : m.joints) {
    const std::string at = "joint " + j.name;
    if (j.name.empty()) {
      throw SemanticError("joint", "joint name must not be empty");
    }
    if (!names.insert(j.name).second) {
      throw SemanticError(at, "duplicate joint name");
    }
    const double norm = j.axis.norm();
    if (std::abs(norm - 1.0) > 1e-9) {
      throw SemanticError(at + ".axis",
                          "must be a unit vector, norm is " + format_double(norm));
    }
    require_positive(j.torque_limit, at + ".torque_limit");
    require_positive(j.velocity_limit, at + ".velocity_limit");
    if (!(j.position_lo < j.position_hi)) {
      throw SemanticError(at + ".position_limits",
                          "lower limit must be < upper limit, got " +
                              format_pair(j.position_lo, j.position_hi));
    }
    if (j.nominal_position < j.position_lo || j.nominal_position > j.position_hi) {
      throw SemanticError(at + ".nominal_position",
                          format_double(j.nominal_position) + " is outside position limits " +
                              format_pair(j.position_lo, j.position_hi));
    }
    require_positive(j.kp, at + ".kp");
    require_nonneg(j.kd, at + ".kd");
    require_nonneg(j.damping, at + ".damping");
    require_nonneg(j.friction, at + ".friction");
    require_nonneg(j.armature, at + ".armature");
    require_nonneg(j.stiffness, at + ".stiffness");
  }
}

Morphology parse_morphology(std::string_view text) {
  const std::vector<TextLine> lines = tokenize_kv_text(text);

  Morphology m;
  KeySet top_keys;
  JointSpec* joint = nullptr;  // currently open joint block
  int joint_block_line = 0;
  KeySet joint_keys;

  auto finish_joint = [&]() {
    if (joint == nullptr) return;
    const std::string where = "joint '" + joint->name + "'";
    joint_keys.require("axis", joint_block_line, where);
    joint_keys.require("torque_limit", joint_block_line, where);
    joint_keys.require("velocity_limit", joint_block_line, where);
    joint_keys.require("position_limits", joint_block_line, where);
    joint_keys.require("nominal_position", joint_block_line, where);
    joint_keys.require("kp", joint_block_line, where);
    joint = nullptr;
  };

  for (const TextLine& line : lines) {
    if (line.kind == TextLine::Kind::section) {
      throw ParseError(line.line_no, 1, "sections are not allowed in morphology files");
    }
    if (line.kind == TextLine::Kind::block) {
      if (line.head != "joint") {
        throw ParseError(line.line_no, 1, "unknown block '" + line.head + "'");
      }
      if (line.indent != 0) {
        throw ParseError(line.line_no, line.indent + 1,
                         "joint blocks must start at column 1");
      }
      finish_joint();
      joint = &m.joints.emplace_back();
      joint->name = line.name;
      joint_block_line = line.line_no;
      joint_keys = KeySet();
      continue;
    }

    // Key-value line: indented lines belong to the open joint block,
    // unindented ones close it and set a top-level field.
    if (line.indent > 0) {
      if (joint == nullptr) {
        throw ParseError(line.line_no, line.indent + 1,
                         "indented key outside of a joint block");
      }
      joint_keys.mark(line);
      const std::string& k = line.head;
      if (k == "axis") {
        joint->axis = to_vec3(parse_vec3(line));
      } else if (k == "torque_limit") {
        joint->torque_limit = parse_number(line);
      } else if (k == "velocity_limit") {
        joint->velocity_limit = parse_number(line);
      } else if (k == "position_limits") {
        std::tie(joint->position_lo, joint->position_hi) = parse_pair(line);
      } else if (k == "nominal_position") {
        joint->nominal_position = parse_number(line);
      } else if (k == "kp") {
        joint->kp = parse_number(line);
      } else if (k == "kd") {
        joint->kd = parse_number(line);
      } else if (k == "damping") {
        joint->damping = parse_number(line);
      } else if (k == "friction") {
        joint->friction = parse_number(line);
      } else if (k == "armature") {
        joint->armature = parse_number(line);
      } else if (k == "stiffness") {
        joint->stiffness = parse_number(line);
      } else if (k == "leverage") {
        joint->leverage = to_vec3(parse_vec3(line));
      } else if (k == "attach_offset") {
        joint->attach_offset = to_vec3(parse_vec3(line));
      } else if (k == "track_nominal") {
        joint->track_nominal = parse_bool(line);
      } else {
        throw ParseError(line.line_no, line.indent + 1, "unknown joint key '" + k + "'");
      }
      continue;
    }

    finish_joint();
    top_keys.mark(line);
    const std::string& k = line.head;
    if (k == "name") {
      m.name = line.value;
    } else if (k == "trunk_mass") {
      m.trunk_mass = parse_number(line);
    } else if (k == "trunk_inertia") {
      m.trunk_inertia = to_vec3(parse_vec3(line));
    } else if (k == "trunk_com") {
      m.trunk_com = to_vec3(parse_vec3(line));
    } else if (k == "imu_position") {
      m.imu_position = to_vec3(parse_vec3(line));
    } else if (k == "control_frequency") {
      m.control_frequency = parse_number(line);
    } else {
      throw ParseError(line.line_no, 1, "unknown key '" + k + "'");
    }
  }
  finish_joint();

  top_keys.require("name", 1, "morphology");
  top_keys.require("trunk_mass", 1, "morphology");
  top_keys.require("trunk_inertia", 1, "morphology");

  validate_morphology(m);
  return m;
}

Morphology load_morphology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open morphology file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_morphology(buf.str());
  } catch (const ParseError& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  } catch (const SemanticError& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string serialize_morphology(const Morphology& m) {
  validate_morphology(m);
  std::ostringstream out;
  out << "name: " << m.name << "\n";
  out << "trunk_mass: " << format_double(m.trunk_mass) << "\n";
  out << "trunk_inertia: " << format_vec3(to_array(m.trunk_inertia)) << "\n";
  out << "trunk_com: " << format_vec3(to_array(m.trunk_com)) << "\n";
  out << "imu_position: " << format_vec3(to_array(m.imu_position)) << "\n";
  out << "control_frequency: " << format_double(m.control_frequency) << "\n";
  for (const JointSpec& j : m.joints) {
    out << "\njoint " << j.name << ":\n";
    out << "  axis: " << format_vec3(to_array(j.axis)) << "\n";
    out << "  torque_limit: " << format_double(j.torque_limit) << "\n";
    out << "  velocity_limit: " << format_double(j.velocity_limit) << "\n";
    out << "  position_limits: " << format_pair(j.position_lo, j.position_hi) << "\n";
    out << "  nominal_position: " << format_double(j.nominal_position) << "\n";
    out << "  kp: " << format_double(j.kp) << "\n";
    out << "  kd: " << format_double(j.kd) << "\n";
    out << "  damping: " << format_double(j.damping) << "\n";
    out << "  friction: " << format_double(j.friction) << "\n";
    out << "  armature: " << format_double(j.armature) << "\n";
    out << "  stiffness: " << format_double(j.stiffness) << "\n";
    out << "  leverage: " << format_vec3(to_array(j.leverage)) << "\n";
    out << "  attach_offset: " << format_vec3(to_array(j.attach_offset)) << "\n";
    out << "  track_nominal: " << (j.track_nominal ? "1" : "0") << "\n";
  }
  return out.str();
}

}  // namespace morphrl
