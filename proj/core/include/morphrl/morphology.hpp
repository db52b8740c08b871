#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace morphrl {

/// Violation of a typed invariant, carrying the path of the offending field
/// (e.g. "joint hip_fl.axis").
class SemanticError : public std::runtime_error {
 public:
  SemanticError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Static description of one actuated joint.
struct JointSpec {
  std::string name;
  Eigen::Vector3d axis{0.0, 0.0, 1.0};
  double torque_limit = 0.0;    // N*m
  double velocity_limit = 0.0;  // rad/s
  double position_lo = 0.0;     // rad
  double position_hi = 0.0;     // rad
  double nominal_position = 0.0;
  double kp = 0.0;
  double kd = 0.5;
  double damping = 0.05;    // N*m*s/rad
  double friction = 0.01;   // N*m
  double armature = 0.01;   // kg*m^2
  double stiffness = 0.0;   // N*m/rad
  // Toy-dynamics couplings, not part of any real robot description:
  // leverage maps joint velocity to trunk velocity, attach_offset is the
  // joint's position in the trunk frame.
  Eigen::Vector3d leverage{0.0, 0.0, 0.0};
  Eigen::Vector3d attach_offset{0.0, 0.0, 0.0};
  bool track_nominal = false;  // 1 = joint must hold its nominal position

  friend bool operator==(const JointSpec&, const JointSpec&);
};

/// Nominal kinematic/dynamic description of one robot: a trunk plus an
/// ordered list of joints. Stands in for a URDF.
struct Morphology {
  std::string name;
  double trunk_mass = 0.0;  // kg
  Eigen::Vector3d trunk_inertia{0.0, 0.0, 0.0};
  Eigen::Vector3d trunk_com{0.0, 0.0, 0.0};
  Eigen::Vector3d imu_position{0.0, 0.0, 0.0};
  double control_frequency = 50.0;  // Hz
  std::vector<JointSpec> joints;

  int joint_count() const { return static_cast<int>(joints.size()); }

  friend bool operator==(const Morphology&, const Morphology&);
};

/// Throws SemanticError naming the violated field if any invariant fails.
void validate_morphology(const Morphology& m);

/// Parses the .morph text format. Throws ParseError (syntax) or
/// SemanticError (invariant violations, duplicate joints).
Morphology parse_morphology(std::string_view text);
Morphology load_morphology(const std::filesystem::path& path);

/// Canonical serialization: fixed key order, canonical float formatting.
/// parse_morphology(serialize_morphology(m)) == m for any valid m.
std::string serialize_morphology(const Morphology& m);

}  // namespace morphrl
