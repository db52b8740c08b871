#include "morphrl/env.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace morphrl {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("env config: " + what);
}

void require_pair_nonneg(const std::pair<double, double>& p, const std::string& what) {
  require(p.first >= 0.0 && p.second >= 0.0, what + " must be non-negative");
}

}  // namespace

void EnvConfig::validate() const {
  require(horizon >= 1, "horizon must be at least 1");
  require(reward.tracking_weight >= 0.0, "tracking_weight must be non-negative");
  require(reward.tracking_width > 0.0, "tracking_width must be positive");
  require_pair_nonneg(reward.torque_penalty, "torque_penalty");
  require_pair_nonneg(reward.action_rate_penalty, "action_rate_penalty");
  require_pair_nonneg(reward.joint_velocity_penalty, "joint_velocity_penalty");
  require_pair_nonneg(reward.orientation_penalty, "orientation_penalty");
  require((command_max.array() >= 0.0).all(), "command_max must be non-negative");
  require(linear_lag > 0.0, "linear_lag must be positive");
  require(angular_lag > 0.0, "angular_lag must be positive");
  require(angular_coupling >= 0.0, "angular_coupling must be non-negative");
  require(righting_gain >= 0.0, "righting_gain must be non-negative");
  require(tilt_limit.first > 0.0 && tilt_limit.second > 0.0,
          "tilt_limit must be positive");
  require_pair_nonneg(push_magnitude, "push_magnitude");
  require(push_interval_min > 0.0 && push_interval_max >= push_interval_min,
          "push interval must satisfy 0 < min <= max");
  require(contact_threshold >= 0.0, "contact_threshold must be non-negative");
  randomization.er.validate();
  const DRRanges& dr = randomization.dr;
  require(dr.multiplier_half_width >= 0.0 && dr.multiplier_half_width < 1.0,
          "dr multiplier_half_width must lie in [0, 1)");
  require(dr.noise_joint_position >= 0.0 && dr.noise_joint_velocity >= 0.0 &&
              dr.noise_lin_vel >= 0.0 && dr.noise_ang_vel >= 0.0 &&
              dr.noise_gravity >= 0.0,
          "dr noise bounds must be non-negative");
  require(randomization.inertia_share >= 0.0 && randomization.parallel_axis_share >= 0.0,
          "inertia shares must be non-negative");
  require(randomization.action_scale_nominal > 0.0,
          "action_scale_nominal must be positive");
  require(randomization.min_scale > 0.0, "min_scale must be positive");
}

Env::Env(const Morphology* base, EnvConfig config, RandomStream stream)
    : base_(base), config_(std::move(config)) {
  if (base_ == nullptr) throw std::invalid_argument("env: base morphology is null");
  validate_morphology(*base_);
  config_.validate();
  embodiment_stream_ = stream.split(1);
  command_stream_ = stream.split(2);
  push_stream_ = stream.split(3);
  noise_root_ = stream.split(4);
}

void Env::reset(double beta) {
  embodiment_ = sample_embodiment(*base_, beta, embodiment_stream_, config_.randomization);
  start_episode(beta);
}

void Env::reset_episode(double beta) {
  if (embodiment_.base == nullptr) throw std::logic_error("env: reset before use");
  start_episode(beta);
}

void Env::start_episode(double beta) {
  const int j = joint_count();
  state_.q.resize(j);
  for (int i = 0; i < j; ++i) state_.q[i] = embodiment_.joints[i].nominal_position;
  state_.qd = Eigen::VectorXd::Zero(j);
  state_.v.setZero();
  state_.omega.setZero();
  state_.orientation = Eigen::Quaterniond::Identity();
  for (int c = 0; c < 3; ++c) {
    const double half = beta * config_.command_max[c];
    state_.command[c] = command_stream_.uniform(-half, half);
  }
  state_.prev_action = Eigen::VectorXd::Zero(j);
  state_.step_index = 0;
  const double interval =
      push_stream_.uniform(config_.push_interval_min, config_.push_interval_max);
  state_.next_push_step =
      std::max<std::int64_t>(1, std::llround(interval * base_->control_frequency));
  state_.sum_tracking_error = 0.0;
  state_.episode_return = 0.0;
  update_contacts();
}

void Env::update_contacts() {
  const int j = joint_count();
  state_.foot_contact = Eigen::VectorXd::Zero(j);
  const int foot = j - 1;
  const EffectiveJoint& e = embodiment_.joints[foot];
  if (state_.q[foot] < e.nominal_position - config_.contact_threshold) {
    state_.foot_contact[foot] = 1.0;
  }
}

Eigen::Vector3d Env::gravity_body() const {
  return state_.orientation.conjugate() * Eigen::Vector3d(0.0, 0.0, -1.0);
}

double Env::tilt_angle() const {
  const double c = std::clamp(-gravity_body().z(), -1.0, 1.0);
  return std::acos(c);
}

StepResult Env::step(const Eigen::VectorXd& actions, double beta) {
  if (embodiment_.base == nullptr) throw std::logic_error("env: reset before use");
  const int j = joint_count();
  if (actions.size() != j) {
    throw std::invalid_argument("env: action size " + std::to_string(actions.size()) +
                                " does not match joint count " + std::to_string(j));
  }

  StepResult out;
  if (!actions.allFinite()) {
    out.terminated = true;
    out.numeric_error = true;
    return out;
  }

  out.resampled = maybe_resample(embodiment_, beta, embodiment_stream_,
                                 config_.randomization);
  if (out.resampled) {
    for (int i = 0; i < j; ++i) state_.q[i] = embodiment_.joints[i].nominal_position;
    state_.qd.setZero();
    state_.prev_action.setZero();
  }

  const double dt = this->dt();

  Eigen::VectorXd torque(j);
  for (int i = 0; i < j; ++i) {
    const EffectiveJoint& e = embodiment_.joints[i];
    const double target =
        e.nominal_position + (e.track_nominal ? 0.0 : e.action_scale * actions[i]);
    double tau = e.kp * (target - state_.q[i]) - e.kd * state_.qd[i];
    tau = std::clamp(tau, -e.torque_limit, e.torque_limit);
    torque[i] = tau;
    const double qdd = (tau - e.damping * state_.qd[i] - e.friction * sign(state_.qd[i]) -
                        e.stiffness * (state_.q[i] - e.nominal_position)) /
                       (e.inertia_proxy + e.armature);
    double qd_new = std::clamp(state_.qd[i] + qdd * dt, -e.velocity_limit, e.velocity_limit);
    double q_new = state_.q[i] + qd_new * dt;
    if (q_new < e.position_lo) {
      q_new = e.position_lo;
      qd_new = 0.0;
    } else if (q_new > e.position_hi) {
      q_new = e.position_hi;
      qd_new = 0.0;
    }
    state_.q[i] = q_new;
    state_.qd[i] = qd_new;
  }

  Eigen::Vector3d thrust = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega_drive = Eigen::Vector3d::Zero();
  for (int i = 0; i < j; ++i) {
    const EffectiveJoint& e = embodiment_.joints[i];
    thrust += e.leverage * state_.qd[i];
    omega_drive += e.lever_arm.cross(e.leverage) * state_.qd[i];
  }
  thrust /= static_cast<double>(j);
  omega_drive *= config_.angular_coupling / static_cast<double>(j);

  state_.v += (thrust - state_.v) * (dt / config_.linear_lag);

  const Eigen::Vector3d down(0.0, 0.0, -1.0);
  const Eigen::Vector3d righting = config_.righting_gain * down.cross(gravity_body());
  const Eigen::Vector3d omega_target = omega_drive + righting;
  state_.omega += (omega_target - state_.omega) * (dt / config_.angular_lag);

  const double angle = state_.omega.norm() * dt;
  if (angle > 0.0) {
    const Eigen::Quaterniond delta(
        Eigen::AngleAxisd(angle, state_.omega.normalized()));
    state_.orientation = (state_.orientation * delta).normalized();
  }

  state_.step_index += 1;
  if (state_.step_index >= state_.next_push_step) {
    const double direction = push_stream_.uniform(0.0, 2.0 * M_PI);
    const double magnitude =
        scale(config_.push_magnitude.first, config_.push_magnitude.second, beta);
    state_.v[0] += magnitude * std::cos(direction);
    state_.v[1] += magnitude * std::sin(direction);
    const double interval =
        push_stream_.uniform(config_.push_interval_min, config_.push_interval_max);
    state_.next_push_step =
        state_.step_index +
        std::max<std::int64_t>(1, std::llround(interval * base_->control_frequency));
  }

  const double tracking_error =
      (state_.v.head<2>() - state_.command.head<2>()).norm();
  const RewardConfig& rw = config_.reward;
  const double tracking =
      rw.tracking_weight *
      std::exp(-tracking_error * tracking_error / rw.tracking_width);
  double torque_sq = 0.0, rate_sq = 0.0, qd_sq = 0.0;
  for (int i = 0; i < j; ++i) {
    const EffectiveJoint& e = embodiment_.joints[i];
    const double tn = torque[i] / e.torque_limit;
    torque_sq += tn * tn;
    const double da = actions[i] - state_.prev_action[i];
    rate_sq += da * da;
    const double vn = state_.qd[i] / e.velocity_limit;
    qd_sq += vn * vn;
  }
  const double inv_j = 1.0 / static_cast<double>(j);
  const double tilt = tilt_angle();
  const double reward =
      tracking -
      scale(rw.torque_penalty.first, rw.torque_penalty.second, beta) * torque_sq * inv_j -
      scale(rw.action_rate_penalty.first, rw.action_rate_penalty.second, beta) * rate_sq *
          inv_j -
      scale(rw.joint_velocity_penalty.first, rw.joint_velocity_penalty.second, beta) *
          qd_sq * inv_j -
      scale(rw.orientation_penalty.first, rw.orientation_penalty.second, beta) * tilt *
          tilt;

  const bool finite = state_.q.allFinite() && state_.qd.allFinite() &&
                      state_.v.allFinite() && state_.omega.allFinite() &&
                      state_.orientation.coeffs().allFinite() && std::isfinite(reward);
  if (!finite) {
    out.terminated = true;
    out.numeric_error = true;
    return out;
  }

  state_.prev_action = actions;
  state_.sum_tracking_error += tracking_error;
  state_.episode_return += reward;
  update_contacts();
  lifetime_steps_ += 1;

  out.reward = reward;
  out.tracking_error = tracking_error;
  const double tilt_max = scale(config_.tilt_limit.first, config_.tilt_limit.second, beta);
  out.terminated = tilt > tilt_max;
  out.truncated = !out.terminated && state_.step_index >= config_.horizon;
  return out;
}

Observation Env::observe(double beta) const {
  if (embodiment_.base == nullptr) throw std::logic_error("env: reset before use");
  const int j = joint_count();
  RandomStream noise = noise_root_.split(static_cast<std::uint64_t>(lifetime_steps_));
  const DRParams& dr = embodiment_.dr;

  Observation obs;
  obs.desc = embodiment_.description;
  obs.obs_joint.resize(j, kActorJointObsWidth);
  obs.critic_obs_joint.resize(j, kCriticJointObsWidth);

  Eigen::VectorXd nq(j), nqd(j);
  for (int i = 0; i < j; ++i) nq[i] = noise.normal();
  for (int i = 0; i < j; ++i) nqd[i] = noise.normal();
  Eigen::Vector3d nv, nw, ng;
  for (int c = 0; c < 3; ++c) nv[c] = noise.normal();
  for (int c = 0; c < 3; ++c) nw[c] = noise.normal();
  for (int c = 0; c < 3; ++c) ng[c] = noise.normal();

  for (int i = 0; i < j; ++i) {
    const EffectiveJoint& e = embodiment_.joints[i];
    const double flag = e.track_nominal ? 1.0 : 0.0;
    obs.obs_joint(i, 0) = state_.q[i] + dr.noise_joint_position * nq[i];
    obs.obs_joint(i, 1) = state_.qd[i] + dr.noise_joint_velocity * nqd[i];
    obs.obs_joint(i, 2) = state_.prev_action[i];
    obs.obs_joint(i, 3) = flag;
    obs.critic_obs_joint(i, 0) = state_.q[i];
    obs.critic_obs_joint(i, 1) = state_.qd[i];
    obs.critic_obs_joint(i, 2) = state_.prev_action[i];
    obs.critic_obs_joint(i, 3) = flag;
    obs.critic_obs_joint(i, 4) = state_.foot_contact[i];
  }

  // The IMU measures velocity at its own mounting point.
  const Eigen::Vector3d lever = embodiment_.imu_position - embodiment_.trunk_com;
  const Eigen::Vector3d v_meas = state_.v + state_.omega.cross(lever);
  const Eigen::Vector3d g_b = gravity_body();
  Eigen::Vector3d g_noisy = g_b + dr.noise_gravity * ng;
  const double g_norm = g_noisy.norm();
  g_noisy = g_norm > 1e-12 ? Eigen::Vector3d(g_noisy / g_norm) : g_b;

  obs.obs_general.resize(kGeneralObsWidth);
  obs.critic_obs_general.resize(kGeneralObsWidth);
  obs.obs_general.segment<3>(0) = (v_meas + dr.noise_lin_vel * nv).transpose();
  obs.obs_general.segment<3>(3) = (state_.omega + dr.noise_ang_vel * nw).transpose();
  obs.obs_general.segment<3>(6) = g_noisy.transpose();
  obs.obs_general.segment<3>(9) = state_.command.transpose();
  obs.obs_general[12] = beta;
  obs.critic_obs_general.segment<3>(0) = v_meas.transpose();
  obs.critic_obs_general.segment<3>(3) = state_.omega.transpose();
  obs.critic_obs_general.segment<3>(6) = g_b.transpose();
  obs.critic_obs_general.segment<3>(9) = state_.command.transpose();
  obs.critic_obs_general[12] = beta;
  return obs;
}

EpisodeStats Env::episode_stats() const {
  EpisodeStats stats;
  stats.length = state_.step_index;
  stats.horizon = config_.horizon;
  stats.mean_tracking_error =
      state_.step_index > 0 ? state_.sum_tracking_error / state_.step_index : 0.0;
  stats.episode_return = state_.episode_return;
  return stats;
}

}  // namespace morphrl
