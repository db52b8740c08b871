#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "morphrl/curriculum.hpp"
#include "morphrl/morphology.hpp"
#include "morphrl/randomization.hpp"
#include "morphrl/rng.hpp"

namespace morphrl {

/// Reward terms. Each penalty coefficient is a (value at beta 0, value at
/// beta 1) pair passed through scale(). The tracking term is
///   tracking_weight * exp(-|v_xy - cmd_xy|^2 / tracking_width).
struct RewardConfig {
  double tracking_weight = 1.0;
  double tracking_width = 0.25;
  std::pair<double, double> torque_penalty{0.0, 0.02};
  std::pair<double, double> action_rate_penalty{0.0, 0.02};
  std::pair<double, double> joint_velocity_penalty{0.0, 0.01};
  std::pair<double, double> orientation_penalty{0.0, 0.25};
};

struct EnvConfig {
  int horizon = 1000;
  RewardConfig reward;
  /// Command ranges at beta 1: vx, vy (m/s) and yaw rate (rad/s). Commands
  /// are drawn uniformly from [-beta * max, beta * max] per component.
  Eigen::Vector3d command_max{0.7, 0.35, 0.6};
  /// First order lag constants (seconds) for trunk linear and angular
  /// velocity, and the coupling gains that map joint motion onto them.
  double linear_lag = 0.6;
  double angular_lag = 0.3;
  double angular_coupling = 4.0;
  double righting_gain = 8.0;
  /// Episode terminates when the trunk tilt (angle between the body z axis
  /// and world up) exceeds scale(first, second, beta) radians.
  std::pair<double, double> tilt_limit{1.0, 0.5};
  /// Lateral velocity pushes: magnitude scale(first, second, beta) m/s in a
  /// random horizontal direction, applied every push interval seconds.
  std::pair<double, double> push_magnitude{0.0, 0.5};
  double push_interval_min = 3.0;
  double push_interval_max = 5.0;
  /// A foot joint reads as in contact when its angle is below
  /// nominal - contact_threshold.
  double contact_threshold = 0.1;
  RandomizationConfig randomization;

  void validate() const;
};

struct EnvState {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  Eigen::Vector3d v{0.0, 0.0, 0.0};
  Eigen::Vector3d omega{0.0, 0.0, 0.0};
  Eigen::Quaterniond orientation{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d command{0.0, 0.0, 0.0};
  Eigen::VectorXd prev_action;
  Eigen::VectorXd foot_contact;
  int step_index = 0;
  std::int64_t next_push_step = 0;
  double sum_tracking_error = 0.0;
  double episode_return = 0.0;
};

struct StepResult {
  double reward = 0.0;
  double tracking_error = 0.0;
  bool terminated = false;
  bool truncated = false;
  bool resampled = false;
  bool numeric_error = false;
};

/// One observation snapshot. Rows are joints in morphology order.
struct Observation {
  Eigen::MatrixXd desc;               // J x 20 embodiment descriptions
  Eigen::MatrixXd obs_joint;          // J x 4: q, qd, prev action, flag
  Eigen::RowVectorXd obs_general;     // 13: v, omega, gravity, command, beta
  Eigen::MatrixXd critic_obs_joint;   // J x 5: noise free + foot contact
  Eigen::RowVectorXd critic_obs_general;  // 13, noise free
};

constexpr int kGeneralObsWidth = 13;
constexpr int kActorJointObsWidth = 4;
constexpr int kCriticJointObsWidth = 5;

/// Analytic locomotion toy. Each joint is a PD-driven 1-dof rotor; the trunk
/// is a rigid body whose linear and angular velocity follow joint motion
/// through first order lags. All dynamics run at the morphology's control
/// frequency with semi-implicit Euler integration.
///
/// Per step, with a_j the commanded action and effective joint parameters
/// from the embodiment:
///   target_j = nominal_j + action_scale_j * a_j   (nominal_j if flagged)
///   torque_j = clamp(kp_j (target_j - q_j) - kd_j qd_j, +-torque_limit_j)
///   qdd_j    = (torque_j - damping_j qd_j - friction_j sign(qd_j)
///               - stiffness_j (q_j - nominal_j)) / (inertia_proxy_j + armature_j)
///   qd_j    <- clamp(qd_j + qdd_j dt, +-velocity_limit_j)
///   q_j     <- q_j + qd_j dt, clamped to position limits (qd zeroed on clamp)
/// then, using the updated joint velocities,
///   thrust   = sum_j leverage_j qd_j / J
///   v       <- v + (thrust - v) dt / linear_lag             (+ pushes)
///   omega*   = angular_coupling / J * sum_j (r_j x leverage_j) qd_j
///              + righting_gain * (down x gravity_body)
///   omega   <- omega + (omega* - omega) dt / angular_lag
/// and the orientation quaternion integrates omega. r_j is the joint
/// attachment point relative to the center of mass and down = (0, 0, -1).
class Env {
 public:
  Env(const Morphology* base, EnvConfig config, RandomStream stream);

  /// Samples a fresh embodiment at the given beta and starts a new episode.
  void reset(double beta);
  /// Starts a new episode but keeps the current embodiment.
  void reset_episode(double beta);

  StepResult step(const Eigen::VectorXd& actions, double beta);

  /// Deterministic for a fixed step: the observation noise stream is derived
  /// from the lifetime step counter, so repeated calls return the same value.
  Observation observe(double beta) const;

  EpisodeStats episode_stats() const;

  const EnvState& state() const { return state_; }
  EnvState& mutable_state() { return state_; }
  const Embodiment& embodiment() const { return embodiment_; }
  Embodiment& mutable_embodiment() { return embodiment_; }
  const EnvConfig& config() const { return config_; }
  const Morphology& base() const { return *base_; }
  int joint_count() const { return static_cast<int>(base_->joints.size()); }
  double dt() const { return 1.0 / base_->control_frequency; }
  std::int64_t lifetime_steps() const { return lifetime_steps_; }

 private:
  void start_episode(double beta);
  void update_contacts();
  Eigen::Vector3d gravity_body() const;
  double tilt_angle() const;

  const Morphology* base_;
  EnvConfig config_;
  Embodiment embodiment_;
  EnvState state_;
  RandomStream embodiment_stream_;
  RandomStream command_stream_;
  RandomStream push_stream_;
  RandomStream noise_root_;
  std::int64_t lifetime_steps_ = 0;
};

}  // namespace morphrl
