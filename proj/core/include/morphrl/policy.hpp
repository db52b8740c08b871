#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "morphrl/network.hpp"
#include "morphrl/rollout.hpp"
#include "morphrl/tape.hpp"

namespace morphrl {

enum class PolicyMethod { kUrma = 0, kZeroPadding = 1, kMultiHead = 2 };

PolicyMethod parse_policy_method(const std::string& name);
std::string policy_method_name(PolicyMethod method);

/// Identity of one training robot as the policy sees it.
struct RobotSpec {
  std::string name;
  int joints = 0;
};

struct Distribution {
  Eigen::MatrixXd mu;     // N x J
  Eigen::MatrixXd sigma;  // N x J
};

/// Node ids of one training forward pass on a caller-owned tape.
struct LossGraph {
  int logp = -1;     // [N x 1] log density of the taken actions
  int entropy = -1;  // [N x 1] per-environment entropy
  int value = -1;    // [N x 1]
};

/// An actor-critic over a fixed roster of robots. `robot` is the index into
/// the roster; architectures without per-robot parameters ignore it, which
/// is what allows evaluating them on morphologies outside the roster.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual PolicyMethod method() const = 0;
  /// Whether the policy can act on a robot that is not in its roster.
  virtual bool supports_unseen() const = 0;

  virtual Distribution action_distribution(int robot, const ObsBatch& batch) = 0;
  virtual Eigen::VectorXd state_values(int robot, const ObsBatch& batch) = 0;
  /// actions is (N*J), joint-major within each environment, matching
  /// RolloutBuffer layout.
  virtual LossGraph build_loss_graph(Tape& tape, int robot, const ObsBatch& batch,
                                     const Eigen::VectorXd& actions) = 0;

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const std::vector<RobotSpec>& roster() const { return robots_; }
  const NetworkConfig& network_config() const { return config_; }
  int roster_index(const std::string& name) const;  // -1 if absent

 protected:
  Policy(std::vector<RobotSpec> robots, NetworkConfig config);
  void add_meta();

  ParamStore store_;
  std::vector<RobotSpec> robots_;
  NetworkConfig config_;
};

/// One shared embodiment-aware network for every robot: attention over
/// per-joint description encodings aggregates joints permutation-invariantly,
/// and the same description encodings decode per-joint actions.
class UrmaPolicy : public Policy {
 public:
  UrmaPolicy(std::vector<RobotSpec> robots, NetworkConfig config, std::uint64_t seed);
  UrmaPolicy(std::vector<RobotSpec> robots, NetworkConfig config, ParamStore store);

  PolicyMethod method() const override { return PolicyMethod::kUrma; }
  bool supports_unseen() const override { return true; }
  Distribution action_distribution(int robot, const ObsBatch& batch) override;
  Eigen::VectorXd state_values(int robot, const ObsBatch& batch) override;
  LossGraph build_loss_graph(Tape& tape, int robot, const ObsBatch& batch,
                             const Eigen::VectorXd& actions) override;

 private:
  UrmaParamIds actor_;
  UrmaParamIds critic_;
};

/// Flat-input baseline: observations and descriptions of all joints are
/// concatenated into fixed slots sized for the largest roster robot; smaller
/// robots zero-pad the remaining slots. Action means come out of one wide
/// head, masked down to the robot's real joints.
class ZeroPaddingPolicy : public Policy {
 public:
  ZeroPaddingPolicy(std::vector<RobotSpec> robots, NetworkConfig config,
                    std::uint64_t seed);
  ZeroPaddingPolicy(std::vector<RobotSpec> robots, NetworkConfig config,
                    ParamStore store);

  PolicyMethod method() const override { return PolicyMethod::kZeroPadding; }
  /// Works for any robot whose joint count fits the padded slots.
  bool supports_unseen() const override { return true; }
  Distribution action_distribution(int robot, const ObsBatch& batch) override;
  Eigen::VectorXd state_values(int robot, const ObsBatch& batch) override;
  LossGraph build_loss_graph(Tape& tape, int robot, const ObsBatch& batch,
                             const Eigen::VectorXd& actions) override;

  int max_joints() const { return max_joints_; }

 private:
  int max_joints_ = 0;
  std::vector<LayerParamIds> actor_layers_;
  LayerParamIds actor_mu_;
  int actor_log_std_ = -1;
  std::vector<LayerParamIds> critic_layers_;
  LayerParamIds critic_value_;
};

/// Shared-trunk baseline with per-robot input and output heads. Has no way
/// to act on a robot outside its roster.
class MultiHeadPolicy : public Policy {
 public:
  MultiHeadPolicy(std::vector<RobotSpec> robots, NetworkConfig config,
                  std::uint64_t seed);
  MultiHeadPolicy(std::vector<RobotSpec> robots, NetworkConfig config,
                  ParamStore store);

  PolicyMethod method() const override { return PolicyMethod::kMultiHead; }
  bool supports_unseen() const override { return false; }
  Distribution action_distribution(int robot, const ObsBatch& batch) override;
  Eigen::VectorXd state_values(int robot, const ObsBatch& batch) override;
  LossGraph build_loss_graph(Tape& tape, int robot, const ObsBatch& batch,
                             const Eigen::VectorXd& actions) override;

 private:
  struct RobotHeads {
    LayerParamIds actor_in;
    LayerParamIds actor_mu;
    int actor_log_std = -1;
    LayerParamIds critic_in;
    LayerParamIds critic_value;
  };
  std::vector<LayerParamIds> actor_trunk_;
  std::vector<LayerParamIds> critic_trunk_;
  std::vector<RobotHeads> heads_;
};

std::unique_ptr<Policy> make_policy(PolicyMethod method, std::vector<RobotSpec> robots,
                                    const NetworkConfig& config, std::uint64_t seed);

/// Rebuilds a policy from a checkpointed parameter store using the embedded
/// meta tensors (method, roster, network dimensions).
std::unique_ptr<Policy> policy_from_store(ParamStore store);
std::unique_ptr<Policy> load_policy(const std::string& path);

}  // namespace morphrl
