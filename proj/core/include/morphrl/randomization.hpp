#pragma once

#include "morphrl/morphology.hpp"
#include "morphrl/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace morphrl {

/// Width of the per-joint description vector fed to the policy.
inline constexpr int kDescWidth = 20;

/// Column indices of the description vector. Continuous limit/gain entries
/// are stored as ratios to their nominal value (1.0 on the unrandomized
/// robot); offsets are in meters, angles in radians.
enum DescEntry : int {
  kDescAxisX = 0,
  kDescAxisY = 1,
  kDescAxisZ = 2,
  kDescAttachX = 3,  // joint position relative to the IMU, m
  kDescAttachY = 4,
  kDescAttachZ = 5,
  kDescTorqueLimit = 6,
  kDescVelocityLimit = 7,
  kDescPositionLo = 8,
  kDescPositionHi = 9,
  kDescDamping = 10,
  kDescFriction = 11,
  kDescArmature = 12,  // ratio of total reflected inertia, see docs
  kDescStiffness = 13,
  kDescNominalPosition = 14,  // rad
  kDescKp = 15,
  kDescKd = 16,
  kDescActionScale = 17,
  kDescTrackNominal = 18,
  kDescJointIndex = 19,  // j / (J - 1), 0 for J = 1
};

/// Symmetric half-widths of the embodiment randomization groups at beta = 1.
/// Multiplicative groups are fractions of nominal; groups marked absolute
/// are additive in their stated unit.
struct ERRanges {
  double body_size = 0.3;
  double body_position = 0.2;
  double mass = 0.5;
  double inertia = 0.5;
  double com_offset = 0.1;  // absolute, m
  double axis_tilt = 0.15;  // absolute, rad
  double imu_offset = 0.05;  // absolute, m
  double torque_limit = 0.4;
  double velocity_limit = 0.4;
  double position_limit = 0.2;
  double damping = 0.8;
  double friction = 0.8;
  double armature = 0.8;
  double stiffness = 0.8;
  double nominal_position = 0.2;  // absolute, rad
  double kp = 0.4;
  double kd = 0.4;
  double action_scale = 0.3;
  double resample_probability_max = 0.002;  // per step at beta = 1

  void validate() const;  // throws std::invalid_argument
};

/// Hidden domain randomization on top of ER: multiplicative perturbations
/// the policy never sees, plus observation-noise scales.
struct DRRanges {
  double multiplier_half_width = 0.1;  // at beta = 1
  // Upper bounds of the per-embodiment observation noise std at beta = 1.
  double noise_joint_position = 0.01;  // rad
  double noise_joint_velocity = 0.1;   // rad/s
  double noise_lin_vel = 0.05;         // m/s
  double noise_ang_vel = 0.05;         // rad/s
  double noise_gravity = 0.02;         // of unit vector
};

struct RandomizationConfig {
  ERRanges er;
  DRRanges dr;
  // Share of the trunk inertia and of the parallel-axis term m*|r|^2 that
  // each joint sees as reflected inertia (divided by joint count).
  double inertia_share = 1.0;
  double parallel_axis_share = 1.0;
  double action_scale_nominal = 0.5;  // rad per unit action
  // Floor for every multiplicative scale so user-widened ranges can never
  // produce non-physical (zero or negative) limits and gains.
  double min_scale = 0.01;
};

/// ER draw for one joint. Scales multiply the nominal value; shifts add.
struct JointER {
  Eigen::Vector3d position_scale{1.0, 1.0, 1.0};
  Eigen::Vector3d tilt{0.0, 0.0, 0.0};  // rotation vector, rad
  double torque_scale = 1.0;
  double velocity_scale = 1.0;
  double position_limit_scale = 1.0;
  double damping_scale = 1.0;
  double friction_scale = 1.0;
  double armature_scale = 1.0;
  double stiffness_scale = 1.0;
  double nominal_shift = 0.0;  // rad
  double kp_scale = 1.0;
  double kd_scale = 1.0;
  double action_scale_scale = 1.0;
};

/// Policy-visible embodiment parameters. Mass and inertia combine a shared
/// (coupled) component and per-quantity components, each uniform in [-1, 1]
/// and averaged, so the final scale stays within the group half-width.
struct ERParams {
  Eigen::Vector3d body_size_scale{1.0, 1.0, 1.0};
  double coupled_u = 0.0;
  double mass_u = 0.0;
  double inertia_u = 0.0;
  double mass_scale = 1.0;
  double inertia_scale = 1.0;
  Eigen::Vector3d com_offset{0.0, 0.0, 0.0};  // m
  Eigen::Vector3d imu_offset{0.0, 0.0, 0.0};  // m
  std::vector<JointER> joints;
};

struct JointDR {
  double friction_mult = 1.0;
  double damping_mult = 1.0;
  double kp_mult = 1.0;
  double kd_mult = 1.0;
};

/// Policy-hidden parameters. Noise scales are stds sampled in
/// [0, beta * max] at embodiment-sampling time.
struct DRParams {
  double mass_mult = 1.0;
  std::vector<JointDR> joints;
  double noise_joint_position = 0.0;
  double noise_joint_velocity = 0.0;
  double noise_lin_vel = 0.0;
  double noise_ang_vel = 0.0;
  double noise_gravity = 0.0;
};

/// Fully composed per-joint parameters as the dynamics see them
/// (ER and DR both applied).
struct EffectiveJoint {
  Eigen::Vector3d axis;      // unit, after tilt
  Eigen::Vector3d leverage;  // after tilt
  Eigen::Vector3d attach_position;  // trunk frame, m
  Eigen::Vector3d lever_arm;        // attach_position - com, m
  double torque_limit = 0.0;
  double velocity_limit = 0.0;
  double position_lo = 0.0;
  double position_hi = 0.0;
  double nominal_position = 0.0;
  double kp = 0.0;
  double kd = 0.0;
  double damping = 0.0;
  double friction = 0.0;
  double armature = 0.0;
  double stiffness = 0.0;
  double action_scale = 0.0;
  double inertia_proxy = 0.0;  // reflected trunk inertia, kg*m^2
  bool track_nominal = false;
};

/// Stream position that produced an embodiment; replaying from it with the
/// same base and beta reproduces the instance exactly.
struct SeedTrace {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;
};

/// One concrete randomized instance of a Morphology.
struct Embodiment {
  const Morphology* base = nullptr;
  double beta = 0.0;
  ERParams er;
  DRParams dr;
  std::vector<EffectiveJoint> joints;
  double trunk_mass = 0.0;
  Eigen::Vector3d trunk_inertia{0.0, 0.0, 0.0};
  Eigen::Vector3d trunk_com{0.0, 0.0, 0.0};
  Eigen::Vector3d imu_position{0.0, 0.0, 0.0};
  // J x kDescWidth; a function of er (and base) only, never of dr.
  Eigen::MatrixXd description;
  SeedTrace seed_trace;

  int joint_count() const { return static_cast<int>(joints.size()); }
};

/// Draws a full embodiment. Deterministic given (base, beta, stream state);
/// the fixed draw order is part of the contract and documented.
Embodiment sample_embodiment(const Morphology& base, double beta,
                             RandomStream& stream, const RandomizationConfig& config);

/// Called once per environment step. With probability
/// beta * resample_probability_max replaces e with a fresh sample and
/// returns true; otherwise leaves it untouched. Consumes exactly one draw
/// for the decision either way.
bool maybe_resample(Embodiment& e, double beta, RandomStream& stream,
                    const RandomizationConfig& config);

/// Builds the J x kDescWidth description matrix from the ER parameters.
Eigen::MatrixXd build_description_vectors(const Morphology& base, const ERParams& er,
                                          const RandomizationConfig& config);

/// The effective nominal-shaped morphology under er (DR excluded), e.g. for
/// dumping randomized embodiments as .morph text.
Morphology effective_morphology(const Morphology& base, const ERParams& er,
                                const RandomizationConfig& config);

}  // namespace morphrl
