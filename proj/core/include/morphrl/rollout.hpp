#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "morphrl/env.hpp"

namespace morphrl {

/// Observations of N same-morphology environments stacked for batched
/// network evaluation. Joint-level rows are ordered env-major: row n * J + k
/// is joint k of environment n. General rows are one per environment.
struct ObsBatch {
  int envs = 0;
  int joints = 0;
  Eigen::MatrixXd desc;                // (N*J) x 20
  Eigen::MatrixXd obs_joint;           // (N*J) x 4
  Eigen::MatrixXd critic_obs_joint;    // (N*J) x 5
  Eigen::MatrixXd obs_general;         // N x 13
  Eigen::MatrixXd critic_obs_general;  // N x 13
};

ObsBatch stack_observations(const std::vector<Observation>& observations);

/// Gathers the given environment rows (and their joint rows) into a new batch.
ObsBatch gather_batch(const ObsBatch& batch, const std::vector<int>& env_rows);

/// On-policy storage for one robot: T steps of N environments with J joints.
/// Env-step e = t * N + n indexes per-step quantities; its joint rows are
/// e * J + k. next_values must hold, per env-step, the critic value used for
/// bootstrapping: 0 when the step terminated, the value of the pre-reset
/// observation when it truncated, and the value of the successor observation
/// otherwise (for the last stored step, of the observation after the rollout).
struct RolloutBuffer {
  int steps = 0;
  int envs = 0;
  int joints = 0;

  Eigen::MatrixXd desc;
  Eigen::MatrixXd obs_joint;
  Eigen::MatrixXd critic_obs_joint;
  Eigen::MatrixXd obs_general;
  Eigen::MatrixXd critic_obs_general;

  Eigen::VectorXd actions;  // (T*N*J)
  Eigen::VectorXd logp;     // (T*N)
  Eigen::VectorXd values;
  Eigen::VectorXd rewards;
  Eigen::VectorXd next_values;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
  std::vector<std::uint8_t> terminated;  // episode boundary, no bootstrap
  std::vector<std::uint8_t> truncated;   // episode boundary with bootstrap

  void resize(int steps_in, int envs_in, int joints_in);
  void write_obs(int t, const ObsBatch& batch);
  int env_steps() const { return steps * envs; }
  ObsBatch gather_obs(const std::vector<int>& env_steps_idx) const;
};

/// Generalized advantage estimation over the buffer, writing advantages and
/// returns. Boundaries stop the recursion; truncated steps still bootstrap
/// through next_values.
void compute_gae(RolloutBuffer& buffer, double gamma, double lambda);

}  // namespace morphrl
