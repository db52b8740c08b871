#include "morphrl/rollout.hpp"

#include <stdexcept>

namespace morphrl {

ObsBatch stack_observations(const std::vector<Observation>& observations) {
  if (observations.empty()) throw std::invalid_argument("stack_observations: empty batch");
  const int n = static_cast<int>(observations.size());
  const int j = static_cast<int>(observations[0].obs_joint.rows());
  ObsBatch batch;
  batch.envs = n;
  batch.joints = j;
  batch.desc.resize(n * j, observations[0].desc.cols());
  batch.obs_joint.resize(n * j, observations[0].obs_joint.cols());
  batch.critic_obs_joint.resize(n * j, observations[0].critic_obs_joint.cols());
  batch.obs_general.resize(n, observations[0].obs_general.size());
  batch.critic_obs_general.resize(n, observations[0].critic_obs_general.size());
  for (int i = 0; i < n; ++i) {
    const Observation& o = observations[i];
    if (o.obs_joint.rows() != j) {
      throw std::invalid_argument("stack_observations: mixed joint counts");
    }
    batch.desc.middleRows(i * j, j) = o.desc;
    batch.obs_joint.middleRows(i * j, j) = o.obs_joint;
    batch.critic_obs_joint.middleRows(i * j, j) = o.critic_obs_joint;
    batch.obs_general.row(i) = o.obs_general;
    batch.critic_obs_general.row(i) = o.critic_obs_general;
  }
  return batch;
}

ObsBatch gather_batch(const ObsBatch& batch, const std::vector<int>& env_rows) {
  const int n = static_cast<int>(env_rows.size());
  const int j = batch.joints;
  ObsBatch out;
  out.envs = n;
  out.joints = j;
  out.desc.resize(n * j, batch.desc.cols());
  out.obs_joint.resize(n * j, batch.obs_joint.cols());
  out.critic_obs_joint.resize(n * j, batch.critic_obs_joint.cols());
  out.obs_general.resize(n, batch.obs_general.cols());
  out.critic_obs_general.resize(n, batch.critic_obs_general.cols());
  for (int i = 0; i < n; ++i) {
    const int e = env_rows[i];
    out.desc.middleRows(i * j, j) = batch.desc.middleRows(e * j, j);
    out.obs_joint.middleRows(i * j, j) = batch.obs_joint.middleRows(e * j, j);
    out.critic_obs_joint.middleRows(i * j, j) = batch.critic_obs_joint.middleRows(e * j, j);
    out.obs_general.row(i) = batch.obs_general.row(e);
    out.critic_obs_general.row(i) = batch.critic_obs_general.row(e);
  }
  return out;
}

void RolloutBuffer::resize(int steps_in, int envs_in, int joints_in) {
  steps = steps_in;
  envs = envs_in;
  joints = joints_in;
  const int rows = steps * envs;
  desc.resize(rows * joints, kDescWidth);
  obs_joint.resize(rows * joints, kActorJointObsWidth);
  critic_obs_joint.resize(rows * joints, kCriticJointObsWidth);
  obs_general.resize(rows, kGeneralObsWidth);
  critic_obs_general.resize(rows, kGeneralObsWidth);
  actions.resize(rows * joints);
  logp.resize(rows);
  values.resize(rows);
  rewards.resize(rows);
  next_values.resize(rows);
  advantages.resize(rows);
  returns.resize(rows);
  terminated.assign(rows, 0);
  truncated.assign(rows, 0);
}

void RolloutBuffer::write_obs(int t, const ObsBatch& batch) {
  desc.middleRows(t * envs * joints, envs * joints) = batch.desc;
  obs_joint.middleRows(t * envs * joints, envs * joints) = batch.obs_joint;
  critic_obs_joint.middleRows(t * envs * joints, envs * joints) = batch.critic_obs_joint;
  obs_general.middleRows(t * envs, envs) = batch.obs_general;
  critic_obs_general.middleRows(t * envs, envs) = batch.critic_obs_general;
}

ObsBatch RolloutBuffer::gather_obs(const std::vector<int>& env_steps_idx) const {
  ObsBatch out;
  const int n = static_cast<int>(env_steps_idx.size());
  const int j = joints;
  out.envs = n;
  out.joints = j;
  out.desc.resize(n * j, desc.cols());
  out.obs_joint.resize(n * j, obs_joint.cols());
  out.critic_obs_joint.resize(n * j, critic_obs_joint.cols());
  out.obs_general.resize(n, obs_general.cols());
  out.critic_obs_general.resize(n, critic_obs_general.cols());
  for (int i = 0; i < n; ++i) {
    const int e = env_steps_idx[i];
    out.desc.middleRows(i * j, j) = desc.middleRows(e * j, j);
    out.obs_joint.middleRows(i * j, j) = obs_joint.middleRows(e * j, j);
    out.critic_obs_joint.middleRows(i * j, j) = critic_obs_joint.middleRows(e * j, j);
    out.obs_general.row(i) = obs_general.row(e);
    out.critic_obs_general.row(i) = critic_obs_general.row(e);
  }
  return out;
}

void compute_gae(RolloutBuffer& buffer, double gamma, double lambda) {
  for (int n = 0; n < buffer.envs; ++n) {
    double acc = 0.0;
    for (int t = buffer.steps - 1; t >= 0; --t) {
      const int e = t * buffer.envs + n;
      const bool boundary = buffer.terminated[e] != 0 || buffer.truncated[e] != 0;
      const double delta =
          buffer.rewards[e] + gamma * buffer.next_values[e] - buffer.values[e];
      acc = delta + gamma * lambda * (boundary ? 0.0 : acc);
      buffer.advantages[e] = acc;
      buffer.returns[e] = acc + buffer.values[e];
    }
  }
}

}  // namespace morphrl
