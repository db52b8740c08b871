#include "doctest.h"

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "morphrl/checkpoint.hpp"
#include "morphrl/network.hpp"
#include "morphrl/policy.hpp"
#include "morphrl/rng.hpp"
#include "morphrl/rollout.hpp"
#include "morphrl/tape.hpp"

using namespace morphrl;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

NetworkConfig tiny_config() {
  NetworkConfig c;
  c.desc_width = 6;
  c.actor_joint_obs = 3;
  c.critic_joint_obs = 4;
  c.general_obs = 5;
  c.latent = 4;
  c.phi_hidden = 5;
  c.psi_hidden = 6;
  c.core_hidden = 8;
  c.core_layers = 2;
  return c;
}

ObsBatch random_batch(RandomStream& r, int envs, int joints, const NetworkConfig& c) {
  ObsBatch b;
  b.envs = envs;
  b.joints = joints;
  b.desc.resize(envs * joints, c.desc_width);
  b.obs_joint.resize(envs * joints, c.actor_joint_obs);
  b.critic_obs_joint.resize(envs * joints, c.critic_joint_obs);
  b.obs_general.resize(envs, c.general_obs);
  b.critic_obs_general.resize(envs, c.general_obs);
  for (Eigen::MatrixXd* m :
       {&b.desc, &b.obs_joint, &b.critic_obs_joint, &b.obs_general, &b.critic_obs_general}) {
    for (int a = 0; a < m->rows(); ++a) {
      for (int q = 0; q < m->cols(); ++q) (*m)(a, q) = 0.3 * r.normal();
    }
  }
  // The last description column carries the joint index fraction.
  for (int e = 0; e < envs; ++e) {
    for (int k = 0; k < joints; ++k) {
      b.desc(e * joints + k, c.desc_width - 1) =
          joints > 1 ? static_cast<double>(k) / (joints - 1) : 0.0;
    }
  }
  return b;
}

double analytic_logp(const Distribution& d, const Eigen::VectorXd& actions, int e,
                     int joints) {
  double lp = -0.5 * joints * kLog2Pi;
  for (int k = 0; k < joints; ++k) {
    const double z = (actions[e * joints + k] - d.mu(e, k)) / d.sigma(e, k);
    lp += -0.5 * z * z - std::log(d.sigma(e, k));
  }
  return lp;
}

double analytic_entropy(const Distribution& d, int e, int joints) {
  double h = 0.5 * joints * (1.0 + kLog2Pi);
  for (int k = 0; k < joints; ++k) h += std::log(d.sigma(e, k));
  return h;
}

std::vector<RobotSpec> roster() { return {{"quad", 4}, {"tri", 3}}; }

void check_loss_graph_consistency(Policy& p, int robot, int joints) {
  RandomStream r(17 + robot);
  const ObsBatch batch = random_batch(r, 3, joints, p.network_config());
  Eigen::VectorXd actions(3 * joints);
  for (int i = 0; i < actions.size(); ++i) actions[i] = 0.4 * r.normal();

  const Distribution d = p.action_distribution(robot, batch);
  REQUIRE(d.mu.rows() == 3);
  REQUIRE(d.mu.cols() == joints);
  CHECK(d.sigma.minCoeff() > 0.0);

  Tape tape(&p.params());
  const LossGraph lg = p.build_loss_graph(tape, robot, batch, actions);
  const Mat& logp = tape.value(lg.logp);
  const Mat& entropy = tape.value(lg.entropy);
  REQUIRE(logp.rows() == 3);
  REQUIRE(entropy.rows() == 3);
  for (int e = 0; e < 3; ++e) {
    CHECK(std::fabs(logp(e, 0) - analytic_logp(d, actions, e, joints)) < 1e-10);
    CHECK(std::fabs(entropy(e, 0) - analytic_entropy(d, e, joints)) < 1e-10);
  }

  const Eigen::VectorXd values = p.state_values(robot, batch);
  REQUIRE(values.size() == 3);
  const Mat& value_node = tape.value(lg.value);
  for (int e = 0; e < 3; ++e) {
    CHECK(std::fabs(values[e] - value_node(e, 0)) < 1e-12);
  }
}

}  // namespace

TEST_CASE("policy method names round trip") {
  for (PolicyMethod m : {PolicyMethod::kUrma, PolicyMethod::kZeroPadding,
                         PolicyMethod::kMultiHead}) {
    CHECK(parse_policy_method(policy_method_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_policy_method("attention"), std::invalid_argument);
}

TEST_CASE("policy rejects malformed rosters") {
  const NetworkConfig c = tiny_config();
  CHECK_THROWS_AS(UrmaPolicy({}, c, 1), std::invalid_argument);
  CHECK_THROWS_AS(UrmaPolicy({{"a", 2}, {"a", 3}}, c, 1), std::invalid_argument);
  CHECK_THROWS_AS(UrmaPolicy({{"a/b", 2}}, c, 1), std::invalid_argument);
  CHECK_THROWS_AS(UrmaPolicy({{"", 2}}, c, 1), std::invalid_argument);
  CHECK_THROWS_AS(UrmaPolicy({{"a", 0}}, c, 1), std::invalid_argument);
}

TEST_CASE("policy log densities match the analytic gaussian") {
  const NetworkConfig c = tiny_config();
  for (PolicyMethod m : {PolicyMethod::kUrma, PolicyMethod::kZeroPadding,
                         PolicyMethod::kMultiHead}) {
    auto p = make_policy(m, roster(), c, 11);
    check_loss_graph_consistency(*p, 0, 4);
    // Robot 1 has fewer joints than the widest roster entry, which makes the
    // zero padding path mask its unused slots.
    check_loss_graph_consistency(*p, 1, 3);
  }
}

TEST_CASE("policy capability flags and roster guards") {
  const NetworkConfig c = tiny_config();
  auto urma = make_policy(PolicyMethod::kUrma, roster(), c, 5);
  auto zp = make_policy(PolicyMethod::kZeroPadding, roster(), c, 5);
  auto mh = make_policy(PolicyMethod::kMultiHead, roster(), c, 5);
  CHECK(urma->supports_unseen());
  CHECK(zp->supports_unseen());
  CHECK(!mh->supports_unseen());

  CHECK(urma->roster_index("tri") == 1);
  CHECK(urma->roster_index("hex") == -1);

  RandomStream r(23);
  // Unseen joint counts: fine for urma, fine for zp while it fits the slots.
  const ObsBatch two = random_batch(r, 2, 2, c);
  CHECK(urma->action_distribution(-1, two).mu.cols() == 2);
  CHECK(zp->action_distribution(-1, two).mu.cols() == 2);
  const ObsBatch six = random_batch(r, 2, 6, c);
  CHECK(urma->action_distribution(-1, six).mu.cols() == 6);
  CHECK_THROWS_AS(zp->action_distribution(-1, six), std::runtime_error);
  CHECK_THROWS_AS(zp->state_values(-1, six), std::runtime_error);
  CHECK_THROWS_AS(mh->action_distribution(2, two), std::runtime_error);
  CHECK_THROWS_AS(mh->action_distribution(-1, two), std::runtime_error);
  CHECK_THROWS_AS(mh->state_values(2, two), std::runtime_error);
}

TEST_CASE("policy parameters are seed deterministic") {
  const NetworkConfig c = tiny_config();
  for (PolicyMethod m : {PolicyMethod::kUrma, PolicyMethod::kZeroPadding,
                         PolicyMethod::kMultiHead}) {
    auto a = make_policy(m, roster(), c, 31);
    auto b = make_policy(m, roster(), c, 31);
    REQUIRE(a->params().size() == b->params().size());
    for (int i = 0; i < a->params().size(); ++i) {
      CHECK(a->params().entry(i).name == b->params().entry(i).name);
      CHECK(a->params().value(i) == b->params().value(i));
    }
    auto other = make_policy(m, roster(), c, 32);
    bool any_diff = false;
    for (int i = 0; i < a->params().size() && !any_diff; ++i) {
      any_diff = a->params().value(i) != other->params().value(i);
    }
    CHECK(any_diff);
  }
}

TEST_CASE("policy meta tensors describe method, network and roster") {
  const NetworkConfig c = tiny_config();
  auto p = make_policy(PolicyMethod::kMultiHead, roster(), c, 3);
  const ParamStore& s = p->params();
  const int mid = s.find("meta/method");
  REQUIRE(mid >= 0);
  CHECK(s.value(mid)(0, 0) == static_cast<double>(PolicyMethod::kMultiHead));
  const int nid = s.find("meta/network");
  REQUIRE(nid >= 0);
  CHECK(s.value(nid).rows() == 11);
  CHECK(s.value(nid)(0, 0) == 6.0);   // desc width
  CHECK(s.value(nid)(4, 0) == 4.0);   // latent
  CHECK(s.find("meta/robot/0/quad") >= 0);
  CHECK(s.find("meta/robot/1/tri") >= 0);
  CHECK(s.value(s.find("meta/robot/1/tri"))(0, 0) == 3.0);
}

TEST_CASE("policies survive a checkpoint round trip bit for bit") {
  const NetworkConfig c = tiny_config();
  RandomStream r(47);
  const ObsBatch batch = random_batch(r, 2, 3, c);
  for (PolicyMethod m : {PolicyMethod::kUrma, PolicyMethod::kZeroPadding,
                         PolicyMethod::kMultiHead}) {
    auto p = make_policy(m, roster(), c, 7);
    const std::string path =
        "policy_roundtrip_" + policy_method_name(m) + ".ckpt";
    save_checkpoint(path, p->params());
    auto q = load_policy(path);
    std::remove(path.c_str());

    CHECK(q->method() == m);
    REQUIRE(q->roster().size() == 2);
    CHECK(q->roster()[0].name == "quad");
    CHECK(q->roster()[0].joints == 4);
    CHECK(q->roster()[1].name == "tri");
    CHECK(q->network_config().latent == 4);
    CHECK(q->network_config().core_layers == 2);

    const Distribution da = p->action_distribution(1, batch);
    const Distribution db = q->action_distribution(1, batch);
    CHECK(da.mu == db.mu);
    CHECK(da.sigma == db.sigma);
    const Eigen::VectorXd va = p->state_values(1, batch);
    const Eigen::VectorXd vb = q->state_values(1, batch);
    CHECK(va == vb);
  }
}

TEST_CASE("policy_from_store rejects stores without meta") {
  ParamStore empty;
  empty.add("stray", 2, 2);
  CHECK_THROWS_AS(policy_from_store(std::move(empty)), std::runtime_error);

  auto p = make_policy(PolicyMethod::kUrma, roster(), tiny_config(), 9);
  ParamStore copy = p->params();
  copy.value(copy.find("meta/network")).resize(3, 1);
  CHECK_THROWS_AS(policy_from_store(std::move(copy)), std::runtime_error);
}
