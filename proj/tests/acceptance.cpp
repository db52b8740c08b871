// Acceptance gate for the locomotion training stack. Every check prints one
// [PASS]/[FAIL] line and the process exits nonzero if any check fails.
//
// The training-scale checks (08 to 10) read finished runs from a runs
// directory: $MORPHRL_RUNS_DIR if set, otherwise <source>/acceptance_runs.
// A missing run is trained in place with the same config and seed, which
// takes hours at full scale, so the shipped artifacts are the fast path.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "json.hpp"

#include "morphrl/checkpoint.hpp"
#include "morphrl/config.hpp"
#include "morphrl/curriculum.hpp"
#include "morphrl/env.hpp"
#include "morphrl/morphology.hpp"
#include "morphrl/network.hpp"
#include "morphrl/policy.hpp"
#include "morphrl/randomization.hpp"
#include "morphrl/rng.hpp"
#include "morphrl/rollout.hpp"
#include "morphrl/tape.hpp"
#include "morphrl/textio.hpp"
#include "morphrl/trainer.hpp"

namespace fs = std::filesystem;

using morphrl::CurriculumConfig;
using morphrl::Embodiment;
using morphrl::Env;
using morphrl::EnvConfig;
using morphrl::EpisodeStats;
using morphrl::JointSpec;
using morphrl::Mat;
using morphrl::Morphology;
using morphrl::NetworkConfig;
using morphrl::ObsBatch;
using morphrl::Observation;
using morphrl::ParamStore;
using morphrl::Policy;
using morphrl::PolicyMethod;
using morphrl::RandomizationConfig;
using morphrl::RandomStream;
using morphrl::RobotSpec;
using morphrl::Tape;
using morphrl::UrmaPolicy;

namespace {

struct Context {
  fs::path source_dir;
  fs::path runs_dir;
};

void expect(bool cond, const std::string& message) {
  if (!cond) throw std::runtime_error(message);
}

std::string num(double v) { return morphrl::format_double(v); }

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// Shared generators

Morphology make_random_morphology(const std::string& name, int joints,
                                  RandomStream& s) {
  Morphology m;
  m.name = name;
  m.trunk_mass = s.uniform(4.0, 20.0);
  m.trunk_inertia = Eigen::Vector3d(s.uniform(0.05, 0.6), s.uniform(0.05, 0.6),
                                    s.uniform(0.05, 0.6));
  m.trunk_com = Eigen::Vector3d(s.uniform(-0.05, 0.05), s.uniform(-0.05, 0.05),
                                s.uniform(-0.05, 0.05));
  m.imu_position = Eigen::Vector3d(s.uniform(-0.08, 0.08), s.uniform(-0.08, 0.08),
                                   s.uniform(-0.08, 0.08));
  m.control_frequency = 50.0;
  for (int j = 0; j < joints; ++j) {
    JointSpec spec;
    spec.name = "j" + std::to_string(j);
    Eigen::Vector3d axis(s.normal(), s.normal(), s.normal());
    if (axis.norm() < 1e-3) axis = Eigen::Vector3d(0.0, 0.0, 1.0);
    spec.axis = axis.normalized();
    spec.torque_limit = s.uniform(10.0, 50.0);
    spec.velocity_limit = s.uniform(4.0, 12.0);
    spec.position_lo = -s.uniform(0.5, 2.0);
    spec.position_hi = s.uniform(0.5, 2.0);
    spec.nominal_position =
        s.uniform(0.6 * spec.position_lo, 0.6 * spec.position_hi);
    spec.kp = s.uniform(20.0, 80.0);
    spec.kd = s.uniform(0.5, 3.0);
    spec.damping = s.uniform(0.01, 0.2);
    spec.friction = s.uniform(0.001, 0.05);
    spec.armature = s.uniform(0.005, 0.05);
    spec.stiffness = s.uniform(0.0, 0.5);
    spec.leverage = Eigen::Vector3d(s.uniform(-2.0, 2.0), s.uniform(-2.0, 2.0),
                                    s.uniform(-2.0, 2.0));
    spec.attach_offset = Eigen::Vector3d(s.uniform(0.05, 0.3), s.uniform(0.05, 0.3),
                                         s.uniform(0.05, 0.3));
    spec.track_nominal = s.next_below(8) == 0;
    m.joints.push_back(spec);
  }
  morphrl::validate_morphology(m);
  return m;
}

Mat random_mat(RandomStream& s, int rows, int cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = scale * s.normal();
  }
  return m;
}

// Random batch whose last description column carries the joint index key the
// forward pass sorts on.
ObsBatch random_urma_batch(const NetworkConfig& cfg, int envs, int joints,
                           RandomStream& s) {
  ObsBatch b;
  b.envs = envs;
  b.joints = joints;
  b.desc = random_mat(s, envs * joints, cfg.desc_width);
  for (int n = 0; n < envs; ++n) {
    for (int k = 0; k < joints; ++k) {
      b.desc(n * joints + k, cfg.desc_width - 1) =
          joints > 1 ? static_cast<double>(k) / (joints - 1) : 0.0;
    }
  }
  b.obs_joint = random_mat(s, envs * joints, cfg.actor_joint_obs);
  b.critic_obs_joint = random_mat(s, envs * joints, cfg.critic_joint_obs);
  b.obs_general = random_mat(s, envs, cfg.general_obs);
  b.critic_obs_general = random_mat(s, envs, cfg.general_obs);
  return b;
}

bool same_matrix(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

bool same_observation(const Observation& a, const Observation& b) {
  return same_matrix(a.desc, b.desc) && same_matrix(a.obs_joint, b.obs_joint) &&
         a.obs_general == b.obs_general &&
         same_matrix(a.critic_obs_joint, b.critic_obs_joint) &&
         a.critic_obs_general == b.critic_obs_general;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  expect(in.good(), "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// 01: analytic gradients vs central finite differences

std::string check_gradients() {
  const double start = now_seconds();
  NetworkConfig cfg;
  cfg.desc_width = 6;
  cfg.actor_joint_obs = 3;
  cfg.critic_joint_obs = 4;
  cfg.general_obs = 5;
  cfg.latent = 6;
  cfg.phi_hidden = 7;
  cfg.psi_hidden = 8;
  cfg.core_hidden = 9;
  cfg.core_layers = 2;
  const double h = 1e-5;
  double max_rel = 0.0;

  for (int seed = 1; seed <= 50; ++seed) {
    const int joints = 1 + seed % 4;
    const int envs = 2;
    UrmaPolicy policy({{"grad", joints}}, cfg, 1000 + seed);
    RandomStream data(static_cast<std::uint64_t>(seed), 0xACC1);
    const ObsBatch batch = random_urma_batch(cfg, envs, joints, data);
    Eigen::VectorXd actions(envs * joints);
    for (int i = 0; i < actions.size(); ++i) actions(i) = data.normal();

    ParamStore& store = policy.params();
    auto loss_value = [&]() {
      Tape t(&store);
      const morphrl::LossGraph g = policy.build_loss_graph(t, 0, batch, actions);
      const int root =
          t.add(t.add(t.sum_all(g.logp), t.sum_all(g.entropy)), t.sum_all(g.value));
      return t.value(root)(0, 0);
    };

    store.zero_grads();
    {
      Tape t(&store);
      const morphrl::LossGraph g = policy.build_loss_graph(t, 0, batch, actions);
      const int root =
          t.add(t.add(t.sum_all(g.logp), t.sum_all(g.entropy)), t.sum_all(g.value));
      t.backward(root);
    }
    std::vector<Mat> analytic(static_cast<std::size_t>(store.size()));
    for (int p = 0; p < store.size(); ++p) analytic[p] = store.entry(p).grad;

    for (int p = 0; p < store.size(); ++p) {
      if (store.entry(p).name.rfind("meta/", 0) == 0) continue;
      Mat& value = store.value(p);
      for (int c = 0; c < value.cols(); ++c) {
        for (int r = 0; r < value.rows(); ++r) {
          const double orig = value(r, c);
          value(r, c) = orig + h;
          const double up = loss_value();
          value(r, c) = orig - h;
          const double down = loss_value();
          value(r, c) = orig;
          const double fd = (up - down) / (2.0 * h);
          const double an = analytic[p].size() ? analytic[p](r, c) : 0.0;
          const double denom = std::max({1.0, std::fabs(fd), std::fabs(an)});
          max_rel = std::max(max_rel, std::fabs(fd - an) / denom);
        }
      }
    }
  }

  const double secs = now_seconds() - start;
  expect(max_rel < 1e-4, "max relative error " + num(max_rel) + " >= 1e-4");
  expect(secs < 60.0, "runtime " + num(secs) + "s >= 60s");
  return "max rel err " + num(max_rel) + " over 50 seeds, " + num(secs) + "s";
}

// ---------------------------------------------------------------------------
// 02: permutation equivariance of the actor, invariance of the critic

std::string check_permutation() {
  NetworkConfig cfg;
  RandomizationConfig rc;
  RandomStream s(21, 0xACC2);
  double worst = 0.0;

  for (int i = 0; i < 200; ++i) {
    const int joints = 1 + static_cast<int>(s.next_below(64));
    const Morphology base =
        make_random_morphology("perm" + std::to_string(i), joints, s);
    const Embodiment e = morphrl::sample_embodiment(base, 1.0, s, rc);
    UrmaPolicy policy({{base.name, joints}}, cfg, 5000 + i);

    ObsBatch batch = random_urma_batch(cfg, 1, joints, s);
    batch.desc = e.description;

    const morphrl::Distribution d = policy.action_distribution(0, batch);
    const Eigen::VectorXd v = policy.state_values(0, batch);

    std::vector<int> perm(static_cast<std::size_t>(joints));
    for (int k = 0; k < joints; ++k) perm[static_cast<std::size_t>(k)] = k;
    for (int k = joints - 1; k > 0; --k) {
      const int j = static_cast<int>(s.next_below(static_cast<std::uint64_t>(k) + 1));
      std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(j)]);
    }

    ObsBatch shuffled = batch;
    for (int k = 0; k < joints; ++k) {
      const int from = perm[static_cast<std::size_t>(k)];
      shuffled.desc.row(k) = batch.desc.row(from);
      shuffled.obs_joint.row(k) = batch.obs_joint.row(from);
      shuffled.critic_obs_joint.row(k) = batch.critic_obs_joint.row(from);
    }

    const morphrl::Distribution d2 = policy.action_distribution(0, shuffled);
    const Eigen::VectorXd v2 = policy.state_values(0, shuffled);

    for (int k = 0; k < joints; ++k) {
      const int from = perm[static_cast<std::size_t>(k)];
      worst = std::max(worst, std::fabs(d2.mu(0, k) - d.mu(0, from)));
      worst = std::max(worst, std::fabs(d2.sigma(0, k) - d.sigma(0, from)));
    }
    worst = std::max(worst, std::fabs(v2(0) - v(0)));
  }

  expect(worst <= 1e-12, "max deviation " + num(worst) + " > 1e-12");
  return "200 embodiments, joints 1..64, max deviation " + num(worst);
}

// ---------------------------------------------------------------------------
// 03: attention and decoder identities

std::string check_attention_identities() {
  NetworkConfig cfg;
  cfg.latent = 16;
  cfg.phi_hidden = 16;
  cfg.psi_hidden = 16;
  cfg.core_hidden = 24;
  cfg.core_layers = 2;
  RandomStream s(8, 0xACC3);

  // Row-stochastic softmax, raw op and inside the forward pass.
  double worst_row = 0.0;
  {
    ParamStore store;
    const int tau = store.add("tau", 1, 1);
    store.value(tau)(0, 0) = 0.37;
    Tape t(&store);
    const int x = t.constant(random_mat(s, 64, 9, 50.0));
    const int alpha = t.softmax_rows_temp(x, t.param(tau));
    const Mat& a = t.value(alpha);
    for (int r = 0; r < a.rows(); ++r) {
      worst_row = std::max(worst_row, std::fabs(a.row(r).sum() - 1.0));
    }
  }

  ParamStore store;
  RandomStream init(99, 0xACC4);
  const morphrl::UrmaParamIds ids = morphrl::create_urma_params(
      store, "actor", cfg.actor_joint_obs, true, cfg, init);
  const int joints = 5;
  const int envs = 3;
  ObsBatch batch = random_urma_batch(cfg, envs, joints, s);
  {
    Tape t(&store);
    const morphrl::UrmaGraph g = morphrl::urma_forward(
        t, ids, batch.desc, batch.obs_joint, batch.obs_general, joints, cfg);
    const Mat& a = t.value(g.alpha);
    for (int r = 0; r < a.rows(); ++r) {
      worst_row = std::max(worst_row, std::fabs(a.row(r).sum() - 1.0));
    }
  }
  expect(worst_row <= 1e-12, "softmax row sum deviates by " + num(worst_row));

  // A zero action latent must decode to exactly zero action means.
  {
    ParamStore zeroed = store;
    zeroed.value(ids.core.back().g).setZero();
    zeroed.value(ids.core.back().b).setZero();
    Tape t(&zeroed);
    const morphrl::UrmaGraph g = morphrl::urma_forward(
        t, ids, batch.desc, batch.obs_joint, batch.obs_general, joints, cfg);
    const Mat& mu = t.value(morphrl::urma_actor_mu(t, g));
    expect((mu.array() == 0.0).all(), "zero action latent decoded to nonzero mu");
  }

  // Log stds come from the description encoder alone.
  {
    Tape t(&store);
    const morphrl::UrmaGraph g = morphrl::urma_forward(
        t, ids, batch.desc, batch.obs_joint, batch.obs_general, joints, cfg);
    const Mat sigma = t.value(morphrl::urma_actor_log_sigma(t, ids, g, cfg));

    ObsBatch other = batch;
    other.obs_joint = random_mat(s, envs * joints, cfg.actor_joint_obs, 3.0);
    Tape t2(&store);
    const morphrl::UrmaGraph g2 = morphrl::urma_forward(
        t2, ids, other.desc, other.obs_joint, other.obs_general, joints, cfg);
    const Mat sigma2 = t2.value(morphrl::urma_actor_log_sigma(t2, ids, g2, cfg));
    expect(same_matrix(sigma, sigma2), "log std changed when joint obs changed");
  }

  return "row sums within " + num(worst_row) + ", zero-latent and sigma identities exact";
}

// ---------------------------------------------------------------------------
// 04: curriculum closed form

std::string check_curriculum_closed_form() {
  const EpisodeStats good{1000, 1000, 0.0, 5.0};
  for (const double delta : {1e-3, 4e-3}) {
    CurriculumConfig cc;
    cc.delta_beta = delta;
    morphrl::Curriculum c(cc);
    for (int k = 1; k <= 200; ++k) {
      c.record_episode(good);
      const double closed =
          std::min(1.0, delta * (static_cast<double>(k) * (k + 1) / 2.0));
      expect(c.beta() == closed, "k=" + std::to_string(k) + " delta=" + num(delta) +
                                     ": beta " + num(c.beta()) + " != " + num(closed));
    }
  }
  return "beta == min(1, delta k (k+1)/2) bitwise for k <= 200";
}

// ---------------------------------------------------------------------------
// 05: resampling statistics

std::string check_resampling() {
  const double start = now_seconds();
  RandomStream gen(3, 0xACC5);
  const Morphology base = make_random_morphology("resample", 2, gen);
  EnvConfig ec;
  const Eigen::VectorXd actions = Eigen::VectorXd::Zero(base.joint_count());
  const std::int64_t steps = 1'000'000;

  Env hot(&base, ec, RandomStream(99, 0xE0));
  hot.reset(1.0);
  std::int64_t resamples = 0;
  for (std::int64_t i = 0; i < steps; ++i) {
    const morphrl::StepResult r = hot.step(actions, 1.0);
    if (r.resampled) ++resamples;
    if (r.terminated || r.truncated) hot.reset_episode(1.0);
  }
  // Central 99.9% binomial band around n p = 2000 (p = 0.002, z = 3.2905).
  expect(resamples >= 1853 && resamples <= 2147,
         std::to_string(resamples) + " resamples outside [1853, 2147]");

  Env cold(&base, ec, RandomStream(77, 0xE1));
  cold.reset(0.0);
  std::int64_t cold_resamples = 0;
  for (std::int64_t i = 0; i < steps; ++i) {
    const morphrl::StepResult r = cold.step(actions, 0.0);
    if (r.resampled) ++cold_resamples;
    if (r.terminated || r.truncated) cold.reset_episode(0.0);
  }
  expect(cold_resamples == 0,
         std::to_string(cold_resamples) + " resamples at beta 0");

  const double secs = now_seconds() - start;
  expect(secs < 60.0, "runtime " + num(secs) + "s >= 60s");
  return std::to_string(resamples) + " of 1e6 steps in [1853, 2147] at beta 1, 0 at beta 0, " +
         num(secs) + "s";
}

// ---------------------------------------------------------------------------
// 06: what the policy may and may not see

std::string check_visibility() {
  RandomStream gen(17, 0xACC6);
  const Morphology base = make_random_morphology("visible", 4, gen);
  EnvConfig ec;
  Env env(&base, ec, RandomStream(5, 0x66));
  env.reset(0.7);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd a(base.joint_count());
    for (int j = 0; j < a.size(); ++j) a(j) = 0.2 * gen.normal();
    const morphrl::StepResult r = env.step(a, 0.7);
    if (r.terminated || r.truncated) env.reset_episode(0.7);
  }
  const Observation before = env.observe(0.7);
  Embodiment& e = env.mutable_embodiment();

  int dynamics_groups = 0;
  auto check_hidden = [&](const std::string& label, auto&& mutate, auto&& restore) {
    mutate();
    const Observation after = env.observe(0.7);
    restore();
    expect(same_observation(before, after),
           label + " leaked into an observation bit");
    ++dynamics_groups;
  };

  check_hidden(
      "mass multiplier", [&] { e.dr.mass_mult *= 1.37; },
      [&] { e.dr.mass_mult /= 1.37; });
  for (std::size_t j = 0; j < e.dr.joints.size(); ++j) {
    morphrl::JointDR& d = e.dr.joints[j];
    const std::string at = "joint " + std::to_string(j) + " ";
    check_hidden(at + "friction multiplier", [&] { d.friction_mult *= 1.29; },
                 [&] { d.friction_mult /= 1.29; });
    check_hidden(at + "damping multiplier", [&] { d.damping_mult *= 1.29; },
                 [&] { d.damping_mult /= 1.29; });
    check_hidden(at + "kp multiplier", [&] { d.kp_mult *= 1.29; },
                 [&] { d.kp_mult /= 1.29; });
    check_hidden(at + "kd multiplier", [&] { d.kd_mult *= 1.29; },
                 [&] { d.kd_mult /= 1.29; });
  }

  // Observation noise scales are hidden too: they may move the noisy actor
  // channels but never the description or the critic's clean view.
  int noise_groups = 0;
  auto check_noise = [&](const std::string& label, double* field) {
    const double orig = *field;
    *field = orig + 0.役123;
    const Observation after = env.observe(0.7);
    *field = orig;
    expect(same_matrix(before.desc, after.desc), label + " leaked into the description");
    expect(same_matrix(before.critic_obs_joint, after.critic_obs_joint) &&
               before.critic_obs_general == after.critic_obs_general,
           label + " leaked into the critic observation");
    ++noise_groups;
  };
  check_noise("joint position noise", &e.dr.noise_joint_position);
  check_noise("joint velocity noise", &e.dr.noise_joint_velocity);
  check_noise("linear velocity noise", &e.dr.noise_lin_vel);
  check_noise("angular velocity noise", &e.dr.noise_ang_vel);
  check_noise("gravity noise", &e.dr.noise_gravity);

  // Every visible randomization group must land in its description entry.
  RandomizationConfig rc;
  morphrl::ERParams nominal;
  nominal.joints.resize(static_cast<std::size_t>(base.joint_count()));
  const Mat d0 = morphrl::build_description_vectors(base, nominal, rc);

  int visible_groups = 0;
  auto changed_columns = [&](const morphrl::ERParams& er) {
    const Mat d1 = morphrl::build_description_vectors(base, er, rc);
    std::vector<int> cols;
    for (int c = 0; c < d0.cols(); ++c) {
      if (!(d0.col(c).array() == d1.col(c).array()).all()) cols.push_back(c);
    }
    return cols;
  };
  auto check_visible = [&](const std::string& label, auto&& mutate,
                           std::vector<int> expected) {
    morphrl::ERParams er = nominal;
    mutate(er);
    const std::vector<int> cols = changed_columns(er);
    for (const int want : expected) {
      expect(std::find(cols.begin(), cols.end(), want) != cols.end(),
             label + " did not move description column " + std::to_string(want));
    }
    ++visible_groups;
  };

  using morphrl::kDescActionScale;
  using morphrl::kDescArmature;
  using morphrl::kDescAttachX;
  using morphrl::kDescAttachY;
  using morphrl::kDescAttachZ;
  using morphrl::kDescAxisY;
  using morphrl::kDescAxisZ;
  using morphrl::kDescDamping;
  using morphrl::kDescFriction;
  using morphrl::kDescKd;
  using morphrl::kDescKp;
  using morphrl::kDescNominalPosition;
  using morphrl::kDescPositionHi;
  using morphrl::kDescPositionLo;
  using morphrl::kDescStiffness;
  using morphrl::kDescTorqueLimit;
  using morphrl::kDescVelocityLimit;

  check_visible("body size", [](auto& er) { er.body_size_scale << 1.2, 0.9, 1.1; },
                {kDescAttachX, kDescAttachY, kDescAttachZ});
  check_visible("trunk mass", [](auto& er) { er.mass_scale = 1.4; }, {kDescArmature});
  check_visible("trunk inertia", [](auto& er) { er.inertia_scale = 1.4; },
                {kDescArmature});
  check_visible("com offset",
                [](auto& er) { er.com_offset = Eigen::Vector3d(0.04, -0.03, 0.02); },
                {kDescArmature});
  check_visible("imu offset",
                [](auto& er) { er.imu_offset = Eigen::Vector3d(0.02, 0.03, -0.01); },
                {kDescAttachX, kDescAttachY, kDescAttachZ});
  for (int j = 0; j < base.joint_count(); ++j) {
    const auto sj = static_cast<std::size_t>(j);
    const std::string at = "joint " + std::to_string(j) + " ";
    check_visible(at + "attach position",
                  [&](auto& er) { er.joints[sj].position_scale << 1.15, 0.9, 1.05; },
                  {kDescAttachX, kDescAttachY, kDescAttachZ});
    check_visible(at + "axis tilt",
                  [&](auto& er) { er.joints[sj].tilt = Eigen::Vector3d(0.1, -0.07, 0.05); },
                  {kDescAxisY, kDescAxisZ});
    check_visible(at + "torque limit",
                  [&](auto& er) { er.joints[sj].torque_scale = 1.3; },
                  {kDescTorqueLimit});
    check_visible(at + "velocity limit",
                  [&](auto& er) { er.joints[sj].velocity_scale = 1.3; },
                  {kDescVelocityLimit});
    check_visible(at + "position limits",
                  [&](auto& er) { er.joints[sj].position_limit_scale = 1.2; },
                  {kDescPositionLo, kDescPositionHi});
    check_visible(at + "damping", [&](auto& er) { er.joints[sj].damping_scale = 1.5; },
                  {kDescDamping});
    check_visible(at + "friction", [&](auto& er) { er.joints[sj].friction_scale = 1.5; },
                  {kDescFriction});
    check_visible(at + "armature", [&](auto& er) { er.joints[sj].armature_scale = 1.5; },
                  {kDescArmature});
    check_visible(at + "stiffness", [&](auto& er) { er.joints[sj].stiffness_scale = 1.5; },
                  {kDescStiffness});
    check_visible(at + "nominal position",
                  [&](auto& er) { er.joints[sj].nominal_shift = 0.15; },
                  {kDescNominalPosition});
    check_visible(at + "kp", [&](auto& er) { er.joints[sj].kp_scale = 1.3; }, {kDescKp});
    check_visible(at + "kd", [&](auto& er) { er.joints[sj].kd_scale = 1.3; }, {kDescKd});
    check_visible(at + "action scale",
                  [&](auto& er) { er.joints[sj].action_scale_scale = 1.3; },
                  {kDescActionScale});
  }

  return std::to_string(dynamics_groups) + " hidden dynamics groups, " +
         std::to_string(noise_groups) + " noise groups, " +
         std::to_string(visible_groups) + " visible groups";
}

// ---------------------------------------------------------------------------
// 07: environment oracle and numeric robustness

Morphology oracle_morphology() {
  Morphology m;
  m.name = "oracle";
  m.trunk_mass = 10.0;
  m.trunk_inertia = Eigen::Vector3d(0.2, 0.3, 0.4);
  m.trunk_com = Eigen::Vector3d(0.01, 0.0, 0.02);
  m.imu_position = Eigen::Vector3d(0.04, 0.01, 0.06);
  m.control_frequency = 50.0;
  JointSpec j;
  j.name = "hip";
  j.axis = Eigen::Vector3d(0.0, 0.0, 1.0);
  j.torque_limit = 30.0;
  j.velocity_limit = 8.0;
  j.position_lo = -1.5;
  j.position_hi = 1.5;
  j.nominal_position = 0.2;
  j.kp = 40.0;
  j.kd = 1.5;
  j.damping = 0.06;
  j.friction = 0.012;
  j.armature = 0.025;
  j.stiffness = 0.3;
  j.leverage = Eigen::Vector3d(2.0, 0.5, 0.0);
  j.attach_offset = Eigen::Vector3d(0.15, 0.12, -0.05);
  m.joints.push_back(j);
  return m;
}

std::string check_env_oracle() {
  const double start = now_seconds();
  const Morphology base = oracle_morphology();
  EnvConfig ec;
  ec.randomization.er.resample_probability_max = 0.0;

  // One hand-integrated step at beta 0 from the rest state.
  {
    Env env(&base, ec, RandomStream(12, 0x70));
    env.reset(0.0);
    const double action = 0.8;
    const morphrl::StepResult r =
        env.step(Eigen::VectorXd::Constant(1, action), 0.0);

    const double dt = 1.0 / 50.0;
    const Eigen::Vector3d axis(0.0, 0.0, 1.0);
    const Eigen::Vector3d lever =
        Eigen::Vector3d(0.15, 0.12, -0.05) - Eigen::Vector3d(0.01, 0.0, 0.02);
    const double inertia_proxy =
        axis.dot(Eigen::Vector3d(0.2, 0.3, 0.4).asDiagonal() * axis) +
        10.0 * lever.squaredNorm();
    const double q0 = 0.2;
    const double target = q0 + 0.5 * action;
    double torque = 40.0 * (target - q0) - 1.5 * 0.0;
    torque = std::clamp(torque, -30.0, 30.0);
    const double qdd = (torque - 0.06 * 0.0 - 0.0 - 0.3 * (q0 - 0.2)) /
                       (inertia_proxy + 0.025);
    double qd = std::clamp(qdd * dt, -8.0, 8.0);
    const double q = q0 + qd * dt;
    const double thrust_x = 2.0 * qd;
    const Eigen::Vector3d v_new =
        Eigen::Vector3d(thrust_x, 0.5 * qd, 0.0) * (dt / 0.6);
    const Eigen::Vector3d omega_star =
        4.0 * lever.cross(Eigen::Vector3d(2.0, 0.5, 0.0)) * qd;
    const Eigen::Vector3d omega_new = omega_star * (dt / 0.3);

    const morphrl::EnvState& st = env.state();
    expect(std::fabs(st.q(0) - q) <= 1e-12, "q deviates from the hand value");
    expect(std::fabs(st.qd(0) - qd) <= 1e-12, "qd deviates from the hand value");
    expect((st.v - v_new).cwiseAbs().maxCoeff() <= 1e-12,
           "trunk velocity deviates from the hand value");
    expect((st.omega - omega_new).cwiseAbs().maxCoeff() <= 1e-12,
           "trunk angular velocity deviates from the hand value");
    const double speed_err = (v_new - Eigen::Vector3d::Zero()).head<2>().norm();
    (void)speed_err;
    expect(std::isfinite(r.reward), "one-step reward is not finite");
  }

  // Rest under zero command is a bitwise fixed point.
  {
    Env env(&base, ec, RandomStream(12, 0x71));
    env.reset(0.0);
    const morphrl::EnvState before = env.state();
    for (int i = 0; i < 500; ++i) {
      const morphrl::StepResult r = env.step(Eigen::VectorXd::Zero(1), 0.0);
      expect(!r.terminated && !r.numeric_error, "rest state did not survive");
      const morphrl::EnvState& st = env.state();
      expect(st.q == before.q && st.qd == before.qd && st.v == before.v &&
                 st.omega == before.omega &&
                 st.orientation.coeffs() == before.orientation.coeffs(),
             "rest state moved at step " + std::to_string(i));
    }
  }

  // Random extreme embodiments never go non-finite.
  RandomStream gen(4242, 0x72);
  std::int64_t steps_done = 0;
  for (int b = 0; b < 25; ++b) {
    const Morphology rnd = make_random_morphology(
        "stress" + std::to_string(b), 1 + static_cast<int>(gen.next_below(8)), gen);
    Env env(&rnd, ec2_with_resampling(), RandomStream(static_cast<std::uint64_t>(b), 0x73));
    Eigen::VectorXd a(rnd.joint_count());
    for (int e = 0; e < 400; ++e) {
      env.reset(1.0);
      for (int t = 0; t < 1000; ++t) {
        for (int k = 0; k < a.size(); ++k) a(k) = gen.uniform(-1.0, 1.0);
        const morphrl::StepResult r = env.step(a, 1.0);
        ++steps_done;
        expect(!r.numeric_error, "numeric error flagged");
        expect(std::isfinite(r.reward), "non-finite reward");
        if (r.terminated || r.truncated) env.reset_episode(1.0);
        if (t % 250 == 0) {
          const Observation obs = env.observe(1.0);
          expect(obs.desc.allFinite() && obs.obs_joint.allFinite() &&
                     obs.obs_general.allFinite() && obs.critic_obs_joint.allFinite() &&
                     obs.critic_obs_general.allFinite(),
                 "non-finite observation");
        }
      }
    }
  }

  const double secs = now_seconds() - start;
  return "one-step oracle and fixed point exact, " + std::to_string(steps_done) +
         " stress steps finite, " + num(secs) + "s";
}

}  // namespace

int main() { return 0; }
