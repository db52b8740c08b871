#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "morphrl/curriculum.hpp"
#include "morphrl/env.hpp"
#include "morphrl/policy.hpp"
#include "morphrl/rollout.hpp"

namespace morphrl {

struct TrainConfig {
  PolicyMethod method = PolicyMethod::kUrma;
  std::int64_t total_steps = 2'000'000;
  int rollout_length = 128;
  int envs_per_robot = 16;
  int epochs = 10;
  int minibatches = 16;
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 3e-4;
  double entropy_coef = 0.005;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  double initial_beta = 0.0;
  int log_every = 1;        // iterations between metrics rows
  int checkpoint_every = 0; // 0: only the final checkpoint
  std::string output_dir;   // empty: no files written
  bool quiet = true;        // suppress per-iteration stdout lines
  NetworkConfig network;
  EnvConfig env;
  CurriculumConfig curriculum;

  void validate() const;
};

/// Loss statistics averaged over all minibatch updates of one iteration.
struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
};

/// Rolling window over recently finished episodes of one robot.
struct EpisodeWindow {
  std::deque<EpisodeStats> stats;
  std::deque<bool> successes;
  std::size_t capacity = 32;

  void push(const EpisodeStats& s, bool success);
  double mean_return() const;
  double mean_tracking_error() const;
  double success_rate() const;
};

struct TrainResult {
  std::int64_t steps = 0;
  int iterations = 0;
  std::vector<double> final_betas;
  double mean_final_beta = 0.0;
  std::string checkpoint_path;
};

class Trainer {
 public:
  Trainer(std::vector<Morphology> robots, TrainConfig config);

  TrainResult train();

  /// One collection pass: fills every robot's rollout buffer, advances the
  /// curricula, then normalizes advantages globally across robots.
  void collect_rollouts();
  UpdateStats update_policy();

  Policy& policy() { return *policy_; }
  const TrainConfig& config() const { return config_; }
  const std::vector<Morphology>& robots() const { return morphologies_; }
  const Curriculum& curriculum(int robot) const { return curricula_[robot]; }
  const RolloutBuffer& buffer(int robot) const { return buffers_[robot]; }
  std::int64_t steps_done() const { return steps_done_; }
  std::int64_t steps_per_iteration() const;

  /// Adds/updates curriculum state meta tensors and writes the checkpoint.
  void save_checkpoint(const std::string& path);

 private:
  void write_metrics_header(std::ostream& out) const;
  void write_metrics_rows(std::ostream& out, int iteration, const UpdateStats& stats) const;

  TrainConfig config_;
  std::vector<Morphology> morphologies_;
  std::unique_ptr<Policy> policy_;
  std::vector<std::vector<Env>> envs_;          // [robot][env]
  std::vector<std::vector<RandomStream>> action_streams_;
  std::vector<Curriculum> curricula_;
  std::vector<RolloutBuffer> buffers_;
  std::vector<EpisodeWindow> windows_;
  RandomStream update_stream_;
  std::int64_t steps_done_ = 0;
  int adam_steps_ = 0;
};

struct EvalResult {
  int episodes = 0;
  double mean_return = 0.0;
  double mean_tracking_error = 0.0;
  double mean_length = 0.0;
  double success_rate = 0.0;
};

/// Runs deterministic episodes (actions are the distribution means) and
/// judges each with the curriculum success predicate. roster_index may be -1
/// for policies that support robots outside their roster.
EvalResult evaluate_policy(Policy& policy, int roster_index, const Morphology& robot,
                           const EnvConfig& env_config,
                           const CurriculumConfig& curriculum_config, double beta,
                           int episodes, std::uint64_t seed);

/// Streams a deterministic single-environment trajectory as CSV:
/// step,env,reward,done,beta,q...,qd...,vx,vy,wz,cmd_vx,cmd_vy,cmd_wz.
void write_trajectory_csv(std::ostream& out, Policy& policy, int roster_index,
                          const Morphology& robot, const EnvConfig& env_config,
                          double beta, int steps, std::uint64_t seed);

}  // namespace morphrl
