#include "morphrl/randomization.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace morphrl {

namespace {

Eigen::Vector3d rotate_by_tilt(const Eigen::Vector3d& tilt, const Eigen::Vector3d& v) {
  const double angle = tilt.norm();
  if (angle < 1e-15) return v;
  return Eigen::AngleAxisd(angle, tilt / angle) * v;
}

struct TrunkEffective {
  double mass = 0.0;
  Eigen::Vector3d inertia;
  Eigen::Vector3d com;
  Eigen::Vector3d imu;
};

TrunkEffective compose_trunk(const Morphology& base, const ERParams& er, double mass_mult) {
  TrunkEffective t;
  t.mass = base.trunk_mass * er.mass_scale * mass_mult;
  t.inertia = base.trunk_inertia * er.inertia_scale;
  t.com = base.trunk_com + er.com_offset;
  t.imu = base.imu_position + er.imu_offset;
  return t;
}

double reflected_inertia(const Eigen::Vector3d& axis, const Eigen::Vector3d& lever_arm,
                         const TrunkEffective& trunk, int joint_count,
                         const RandomizationConfig& config) {
  const double about_axis = axis.dot(trunk.inertia.asDiagonal() * axis);
  return (about_axis * config.inertia_share +
          trunk.mass * lever_arm.squaredNorm() * config.parallel_axis_share) /
         joint_count;
}

EffectiveJoint compose_joint(const JointSpec& spec, const JointER& e, const JointDR* d,
                             const ERParams& er, const TrunkEffective& trunk,
                             int joint_count, const RandomizationConfig& config) {
  const double floor = config.min_scale;
  auto scaled = [floor](double nominal, double scale) {
    return nominal * std::max(scale, floor);
  };

  EffectiveJoint out;
  // Leave untilted vectors untouched so the nominal embodiment reproduces
  // the base values bit-exactly.
  const bool tilted = e.tilt.norm() >= 1e-15;
  out.axis = tilted ? rotate_by_tilt(e.tilt, spec.axis).normalized() : spec.axis;
  out.leverage = tilted ? rotate_by_tilt(e.tilt, spec.leverage) : spec.leverage;
  out.attach_position = er.body_size_scale.cwiseProduct(
      e.position_scale.cwiseProduct(spec.attach_offset));
  out.lever_arm = out.attach_position - trunk.com;

  out.torque_limit = scaled(spec.torque_limit, e.torque_scale);
  out.velocity_limit = scaled(spec.velocity_limit, e.velocity_scale);
  // Limits scale affinely around the nominal position; written as a convex
  // combination so that scale 1 is an exact identity.
  const double s_pl = std::max(e.position_limit_scale, floor);
  out.position_lo = s_pl * spec.position_lo + (1.0 - s_pl) * spec.nominal_position;
  out.position_hi = s_pl * spec.position_hi + (1.0 - s_pl) * spec.nominal_position;
  if (out.position_lo > out.position_hi) std::swap(out.position_lo, out.position_hi);
  out.nominal_position =
      std::clamp(spec.nominal_position + e.nominal_shift, out.position_lo, out.position_hi);

  out.kp = scaled(spec.kp, e.kp_scale) * (d != nullptr ? d->kp_mult : 1.0);
  out.kd = scaled(spec.kd, e.kd_scale) * (d != nullptr ? d->kd_mult : 1.0);
  out.damping = scaled(spec.damping, e.damping_scale) * (d != nullptr ? d->damping_mult : 1.0);
  out.friction = scaled(spec.friction, e.friction_scale) * (d != nullptr ? d->friction_mult : 1.0);
  out.armature = scaled(spec.armature, e.armature_scale);
  out.stiffness = scaled(spec.stiffness, e.stiffness_scale);
  out.action_scale = scaled(config.action_scale_nominal, e.action_scale_scale);
  out.inertia_proxy = reflected_inertia(out.axis, out.lever_arm, trunk, joint_count, config);
  out.track_nominal = spec.track_nominal;
  return out;
}

/// Ratio of effective to nominal; the sampled scale when the nominal is 0.
double ratio_or_scale(double effective, double nominal, double scale) {
  return nominal != 0.0 ? effective / nominal : scale;
}

}  // namespace

void ERRanges::validate() const {
  const double widths[] = {body_size,  body_position, mass,       inertia,
                           com_offset, axis_tilt,     imu_offset, torque_limit,
                           velocity_limit, position_limit, damping, friction,
                           armature,   stiffness,     nominal_position, kp,
                           kd,         action_scale};
  for (double w : widths) {
    if (!(w >= 0.0)) {
      throw std::invalid_argument("randomization ranges: half-widths must be >= 0");
    }
  }
  if (!(resample_probability_max >= 0.0 && resample_probability_max <= 1.0)) {
    throw std::invalid_argument("randomization ranges: resample probability outside [0, 1]");
  }
}

Eigen::MatrixXd build_description_vectors(const Morphology& base, const ERParams& er,
                                          const RandomizationConfig& config) {
  const int J = base.joint_count();
  if (static_cast<int>(er.joints.size()) != J) {
    throw std::invalid_argument("description vectors: er joint count mismatch");
  }
  const TrunkEffective trunk = compose_trunk(base, er, 1.0);
  const TrunkEffective trunk_nom = compose_trunk(base, ERParams{}, 1.0);

  Eigen::MatrixXd desc(J, kDescWidth);
  const double floor = config.min_scale;
  const ERParams er_nom;
  for (int j = 0; j < J; ++j) {
    const JointSpec& spec = base.joints[j];
    const JointER& e = er.joints[j];
    const EffectiveJoint c = compose_joint(spec, e, nullptr, er, trunk, J, config);
    // Nominal reference through the identical code path, so ratios are
    // exactly 1 on an unrandomized embodiment.
    const EffectiveJoint cn =
        compose_joint(spec, JointER{}, nullptr, er_nom, trunk_nom, J, config);

    desc(j, kDescAxisX) = c.axis.x();
    desc(j, kDescAxisY) = c.axis.y();
    desc(j, kDescAxisZ) = c.axis.z();
    const Eigen::Vector3d rel = c.attach_position - trunk.imu;
    desc(j, kDescAttachX) = rel.x();
    desc(j, kDescAttachY) = rel.y();
    desc(j, kDescAttachZ) = rel.z();
    desc(j, kDescTorqueLimit) = c.torque_limit / spec.torque_limit;
    desc(j, kDescVelocityLimit) = c.velocity_limit / spec.velocity_limit;
    desc(j, kDescPositionLo) = ratio_or_scale(c.position_lo, spec.position_lo, c.position_lo);
    desc(j, kDescPositionHi) = ratio_or_scale(c.position_hi, spec.position_hi, c.position_hi);
    desc(j, kDescDamping) =
        ratio_or_scale(c.damping, spec.damping, std::max(e.damping_scale, floor));
    desc(j, kDescFriction) =
        ratio_or_scale(c.friction, spec.friction, std::max(e.friction_scale, floor));
    desc(j, kDescArmature) = (c.inertia_proxy + c.armature) / (cn.inertia_proxy + cn.armature);
    desc(j, kDescStiffness) =
        ratio_or_scale(c.stiffness, spec.stiffness, std::max(e.stiffness_scale, floor));
    desc(j, kDescNominalPosition) = c.nominal_position;
    desc(j, kDescKp) = c.kp / spec.kp;
    desc(j, kDescKd) = ratio_or_scale(c.kd, spec.kd, std::max(e.kd_scale, floor));
    desc(j, kDescActionScale) = c.action_scale / config.action_scale_nominal;
    desc(j, kDescTrackNominal) = spec.track_nominal ? 1.0 : 0.0;
    desc(j, kDescJointIndex) = J > 1 ? static_cast<double>(j) / (J - 1) : 0.0;
  }
  return desc;
}

Embodiment sample_embodiment(const Morphology& base, double beta, RandomStream& stream,
                             const RandomizationConfig& config) {
  config.er.validate();
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("sample_embodiment: beta outside [0, 1]");
  }
  const ERRanges& R = config.er;
  const int J = base.joint_count();

  Embodiment out;
  out.base = &base;
  out.beta = beta;
  out.seed_trace = {stream.key(), stream.counter()};

  // Draw order is fixed: trunk groups, then per-joint ER groups in joint
  // order, then DR. Changing it changes every seeded result.
  auto u = [&stream] { return stream.uniform(-1.0, 1.0); };
  ERParams& er = out.er;
  for (int i = 0; i < 3; ++i) er.body_size_scale[i] = 1.0 + beta * R.body_size * u();
  er.coupled_u = u();
  er.mass_u = u();
  er.inertia_u = u();
  er.mass_scale = 1.0 + beta * R.mass * 0.5 * (er.coupled_u + er.mass_u);
  er.inertia_scale = 1.0 + beta * R.inertia * 0.5 * (er.coupled_u + er.inertia_u);
  for (int i = 0; i < 3; ++i) er.com_offset[i] = beta * R.com_offset * u();
  for (int i = 0; i < 3; ++i) er.imu_offset[i] = beta * R.imu_offset * u();

  er.joints.resize(J);
  for (JointER& e : er.joints) {
    for (int i = 0; i < 3; ++i) e.position_scale[i] = 1.0 + beta * R.body_position * u();
    for (int i = 0; i < 3; ++i) e.tilt[i] = beta * R.axis_tilt * u();
    e.torque_scale = 1.0 + beta * R.torque_limit * u();
    e.velocity_scale = 1.0 + beta * R.velocity_limit * u();
    e.position_limit_scale = 1.0 + beta * R.position_limit * u();
    e.damping_scale = 1.0 + beta * R.damping * u();
    e.friction_scale = 1.0 + beta * R.friction * u();
    e.armature_scale = 1.0 + beta * R.armature * u();
    e.stiffness_scale = 1.0 + beta * R.stiffness * u();
    e.nominal_shift = beta * R.nominal_position * u();
    e.kp_scale = 1.0 + beta * R.kp * u();
    e.kd_scale = 1.0 + beta * R.kd * u();
    e.action_scale_scale = 1.0 + beta * R.action_scale * u();
  }

  DRParams& dr = out.dr;
  const double hw = config.dr.multiplier_half_width;
  dr.mass_mult = 1.0 + beta * hw * u();
  dr.joints.resize(J);
  for (JointDR& d : dr.joints) {
    d.friction_mult = 1.0 + beta * hw * u();
    d.damping_mult = 1.0 + beta * hw * u();
    d.kp_mult = 1.0 + beta * hw * u();
    d.kd_mult = 1.0 + beta * hw * u();
  }
  dr.noise_joint_position = stream.uniform(0.0, beta * config.dr.noise_joint_position);
  dr.noise_joint_velocity = stream.uniform(0.0, beta * config.dr.noise_joint_velocity);
  dr.noise_lin_vel = stream.uniform(0.0, beta * config.dr.noise_lin_vel);
  dr.noise_ang_vel = stream.uniform(0.0, beta * config.dr.noise_ang_vel);
  dr.noise_gravity = stream.uniform(0.0, beta * config.dr.noise_gravity);

  const TrunkEffective trunk = compose_trunk(base, er, dr.mass_mult);
  out.trunk_mass = trunk.mass;
  out.trunk_inertia = trunk.inertia;
  out.trunk_com = trunk.com;
  out.imu_position = trunk.imu;
  out.joints.reserve(J);
  for (int j = 0; j < J; ++j) {
    out.joints.push_back(
        compose_joint(base.joints[j], er.joints[j], &dr.joints[j], er, trunk, J, config));
  }
  out.description = build_description_vectors(base, er, config);
  return out;
}

bool maybe_resample(Embodiment& e, double beta, RandomStream& stream,
                    const RandomizationConfig& config) {
  const double p = beta * config.er.resample_probability_max;
  if (!stream.bernoulli(p)) return false;
  e = sample_embodiment(*e.base, beta, stream, config);
  return true;
}

Morphology effective_morphology(const Morphology& base, const ERParams& er,
                                const RandomizationConfig& config) {
  const TrunkEffective trunk = compose_trunk(base, er, 1.0);
  Morphology m;
  m.name = base.name;
  m.trunk_mass = trunk.mass;
  m.trunk_inertia = trunk.inertia;
  m.trunk_com = trunk.com;
  m.imu_position = trunk.imu;
  m.control_frequency = base.control_frequency;
  const int J = base.joint_count();
  m.joints.reserve(J);
  for (int j = 0; j < J; ++j) {
    const EffectiveJoint c =
        compose_joint(base.joints[j], er.joints[j], nullptr, er, trunk, J, config);
    JointSpec s;
    s.name = base.joints[j].name;
    s.axis = c.axis;
    s.torque_limit = c.torque_limit;
    s.velocity_limit = c.velocity_limit;
    s.position_lo = c.position_lo;
    s.position_hi = c.position_hi;
    s.nominal_position = c.nominal_position;
    s.kp = c.kp;
    s.kd = c.kd;
    s.damping = c.damping;
    s.friction = c.friction;
    s.armature = c.armature;
    s.stiffness = c.stiffness;
    s.leverage = c.leverage;
    s.attach_offset = c.attach_position;
    s.track_nominal = c.track_nominal;
    m.joints.push_back(std::move(s));
  }
  return m;
}

}  // namespace morphrl
