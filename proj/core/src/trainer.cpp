#include "morphrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "morphrl/checkpoint.hpp"
#include "morphrl/textio.hpp"

namespace morphrl {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("train config: " + what);
}

Mat column(const Eigen::VectorXd& x) {
  Mat m(x.size(), 1);
  m.col(0) = x;
  return m;
}

double gaussian_logp(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& mu,
                     const Eigen::RowVectorXd& sigma) {
  double lp = -0.5 * static_cast<double>(a.size()) * kLog2Pi;
  for (int k = 0; k < a.size(); ++k) {
    const double z = (a[k] - mu[k]) / sigma[k];
    lp += -0.5 * z * z - std::log(sigma[k]);
  }
  return lp;
}

}  // namespace

void TrainConfig::validate() const {
  require(total_steps >= 1, "total_steps must be positive");
  require(rollout_length >= 1, "rollout_length must be positive");
  require(envs_per_robot >= 1, "envs_per_robot must be positive");
  require(epochs >= 1, "epochs must be positive");
  require(minibatches >= 1, "minibatches must be positive");
  require(minibatches <= rollout_length * envs_per_robot,
          "minibatches cannot exceed env-steps per robot");
  require(clip > 0.0, "clip must be positive");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(entropy_coef >= 0.0, "entropy_coef must be non-negative");
  require(value_coef >= 0.0, "value_coef must be non-negative");
  require(max_grad_norm > 0.0, "max_grad_norm must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must lie in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(initial_beta >= 0.0 && initial_beta <= 1.0, "initial_beta must lie in [0, 1]");
  require(log_every >= 1, "log_every must be positive");
  require(checkpoint_every >= 0, "checkpoint_every must be non-negative");
  require(curriculum.delta_beta > 0.0, "delta_beta must be positive");
  require(curriculum.min_episode_fraction >= 0.0 && curriculum.min_episode_fraction <= 1.0,
          "min_episode_fraction must lie in [0, 1]");
  require(curriculum.max_tracking_error >= 0.0,
          "max_tracking_error must be non-negative");
  network.validate();
  env.validate();
}

void EpisodeWindow::push(const EpisodeStats& s, bool success) {
  stats.push_back(s);
  successes.push_back(success);
  while (stats.size() > capacity) {
    stats.pop_front();
    successes.pop_front();
  }
}

double EpisodeWindow::mean_return() const {
  if (stats.empty()) return 0.0;
  double sum = 0.0;
  for (const EpisodeStats& s : stats) sum += s.episode_return;
  return sum / static_cast<double>(stats.size());
}

double EpisodeWindow::mean_tracking_error() const {
  if (stats.empty()) return 0.0;
  double sum = 0.0;
  for (const EpisodeStats& s : stats) sum += s.mean_tracking_error;
  return sum / static_cast<double>(stats.size());
}

double EpisodeWindow::success_rate() const {
  if (successes.empty()) return 0.0;
  double sum = 0.0;
  for (bool s : successes) sum += s ? 1.0 : 0.0;
  return sum / static_cast<double>(successes.size());
}

Trainer::Trainer(std::vector<Morphology> robots, TrainConfig config)
    : config_(std::move(config)), morphologies_(std::move(robots)) {
  config_.validate();
  if (morphologies_.empty()) throw std::invalid_argument("trainer: no robots");

  std::vector<RobotSpec> roster;
  for (const Morphology& m : morphologies_) {
    validate_morphology(m);
    roster.push_back({m.name, static_cast<int>(m.joints.size())});
  }
  policy_ = make_policy(config_.method, roster, config_.network, config_.seed);

  const RandomStream env_base(config_.seed, 1);
  const RandomStream action_base(config_.seed, 2);
  update_stream_ = RandomStream(config_.seed, 3);

  const int n_robots = static_cast<int>(morphologies_.size());
  envs_.resize(n_robots);
  action_streams_.resize(n_robots);
  buffers_.resize(n_robots);
  windows_.resize(n_robots);
  for (int r = 0; r < n_robots; ++r) {
    Curriculum c(config_.curriculum);
    c.restore(config_.initial_beta, 0, 0);
    curricula_.push_back(c);
    for (int n = 0; n < config_.envs_per_robot; ++n) {
      const std::uint64_t child =
          static_cast<std::uint64_t>(r) * config_.envs_per_robot + n;
      envs_[r].emplace_back(&morphologies_[r], config_.env, env_base.split(child));
      action_streams_[r].push_back(action_base.split(child));
      envs_[r][n].reset(curricula_[r].beta());
    }
  }
}

std::int64_t Trainer::steps_per_iteration() const {
  return static_cast<std::int64_t>(morphologies_.size()) * config_.envs_per_robot *
         config_.rollout_length;
}

void Trainer::collect_rollouts() {
  const int steps = config_.rollout_length;
  const int n_envs = config_.envs_per_robot;
  const int n_robots = static_cast<int>(morphologies_.size());

  for (int r = 0; r < n_robots; ++r) {
    const int joints = static_cast<int>(morphologies_[r].joints.size());
    RolloutBuffer& buf = buffers_[r];
    buf.resize(steps, n_envs, joints);
    std::vector<Observation> obs(n_envs);

    for (int t = 0; t < steps; ++t) {
      const double beta = curricula_[r].beta();
      for (int n = 0; n < n_envs; ++n) obs[n] = envs_[r][n].observe(beta);
      const ObsBatch batch = stack_observations(obs);
      const Distribution dist = policy_->action_distribution(r, batch);
      if (!dist.mu.allFinite() || !dist.sigma.allFinite()) {
        throw NumericError("actor produced a non-finite distribution for robot " +
                           morphologies_[r].name);
      }
      const Eigen::VectorXd values = policy_->state_values(r, batch);
      buf.write_obs(t, batch);

      for (int n = 0; n < n_envs; ++n) {
        const int e = t * n_envs + n;
        Eigen::RowVectorXd action(joints);
        for (int k = 0; k < joints; ++k) {
          action[k] = dist.mu(n, k) + dist.sigma(n, k) * action_streams_[r][n].normal();
          buf.actions[e * joints + k] = action[k];
        }
        buf.logp[e] = gaussian_logp(action, dist.mu.row(n), dist.sigma.row(n));
        buf.values[e] = values[n];
      }

      std::vector<int> truncated_envs;
      std::vector<Observation> truncated_obs;
      for (int n = 0; n < n_envs; ++n) {
        const int e = t * n_envs + n;
        const Eigen::VectorXd action =
            buf.actions.segment(static_cast<Eigen::Index>(e) * joints, joints);
        const StepResult res = envs_[r][n].step(action, beta);
        if (res.numeric_error) {
          throw NumericError("environment for robot " + morphologies_[r].name +
                             " reached a non-finite state");
        }
        buf.rewards[e] = res.reward;
        buf.terminated[e] = res.terminated ? 1 : 0;
        buf.truncated[e] = res.truncated ? 1 : 0;
        if (res.terminated || res.truncated) {
          if (res.truncated) {
            truncated_envs.push_back(n);
            truncated_obs.push_back(envs_[r][n].observe(beta));
          }
          const EpisodeStats stats = envs_[r][n].episode_stats();
          const bool success = curricula_[r].is_success(stats);
          curricula_[r].record_episode(stats);
          windows_[r].push(stats, success);
          envs_[r][n].reset(curricula_[r].beta());
        }
      }
      if (!truncated_envs.empty()) {
        const ObsBatch tb = stack_observations(truncated_obs);
        const Eigen::VectorXd tv = policy_->state_values(r, tb);
        for (std::size_t i = 0; i < truncated_envs.size(); ++i) {
          buf.next_values[t * n_envs + truncated_envs[i]] = tv[static_cast<int>(i)];
        }
      }
    }

    // Bootstrap values for every non-boundary step.
    const double beta = curricula_[r].beta();
    for (int n = 0; n < n_envs; ++n) obs[n] = envs_[r][n].observe(beta);
    const Eigen::VectorXd final_values = policy_->state_values(r, stack_observations(obs));
    for (int t = 0; t < steps; ++t) {
      for (int n = 0; n < n_envs; ++n) {
        const int e = t * n_envs + n;
        if (buf.terminated[e]) {
          buf.next_values[e] = 0.0;
        } else if (!buf.truncated[e]) {
          buf.next_values[e] =
              t + 1 < steps ? buf.values[(t + 1) * n_envs + n] : final_values[n];
        }
      }
    }
    compute_gae(buf, config_.gamma, config_.gae_lambda);
  }
  steps_done_ += steps_per_iteration();

  double sum = 0.0;
  std::int64_t count = 0;
  for (const RolloutBuffer& buf : buffers_) {
    sum += buf.advantages.sum();
    count += buf.advantages.size();
  }
  const double mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (const RolloutBuffer& buf : buffers_) {
    var += (buf.advantages.array() - mean).square().sum();
  }
  const double inv_std = 1.0 / (std::sqrt(var / static_cast<double>(count)) + 1e-8);
  for (RolloutBuffer& buf : buffers_) {
    buf.advantages = (buf.advantages.array() - mean) * inv_std;
  }
}

UpdateStats Trainer::update_policy() {
  const int n_robots = static_cast<int>(morphologies_.size());
  const int env_steps = config_.rollout_length * config_.envs_per_robot;
  ParamStore& store = policy_->params();

  UpdateStats total;
  std::int64_t stat_rows = 0;
  int updates = 0;

  std::vector<std::vector<int>> perm(n_robots);
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    for (int r = 0; r < n_robots; ++r) {
      perm[r].resize(env_steps);
      std::iota(perm[r].begin(), perm[r].end(), 0);
      for (int i = env_steps - 1; i > 0; --i) {
        const int k = static_cast<int>(update_stream_.next_below(i + 1));
        std::swap(perm[r][i], perm[r][k]);
      }
    }

    for (int m = 0; m < config_.minibatches; ++m) {
      Tape tape(&store);
      store.zero_grads();
      int sum_obj = -1, sum_verr = -1, sum_ent = -1;
      int total_rows = 0;
      double kl_sum = 0.0;
      double pl_sum = 0.0, vl_sum = 0.0, ent_sum = 0.0;
      std::int64_t clip_count = 0;

      for (int r = 0; r < n_robots; ++r) {
        const RolloutBuffer& buf = buffers_[r];
        const int begin = static_cast<int>(static_cast<std::int64_t>(m) * env_steps /
                                           config_.minibatches);
        const int end = static_cast<int>(static_cast<std::int64_t>(m + 1) * env_steps /
                                         config_.minibatches);
        const std::vector<int> idx(perm[r].begin() + begin, perm[r].begin() + end);
        const int rows = static_cast<int>(idx.size());
        if (rows == 0) continue;
        const int joints = buf.joints;

        const ObsBatch batch = buf.gather_obs(idx);
        Eigen::VectorXd actions(static_cast<Eigen::Index>(rows) * joints);
        Eigen::VectorXd old_logp(rows), adv(rows), ret(rows);
        for (int i = 0; i < rows; ++i) {
          const int e = idx[i];
          actions.segment(static_cast<Eigen::Index>(i) * joints, joints) =
              buf.actions.segment(static_cast<Eigen::Index>(e) * joints, joints);
          old_logp[i] = buf.logp[e];
          adv[i] = buf.advantages[e];
          ret[i] = buf.returns[e];
        }

        const LossGraph g = policy_->build_loss_graph(tape, r, batch, actions);
        const int lp_old = tape.constant(column(old_logp));
        const int diff = tape.sub(g.logp, lp_old);
        const int ratio = tape.exp_of(diff);
        const int adv_node = tape.constant(column(adv));
        const int surr_raw = tape.mul(ratio, adv_node);
        const int surr_clip =
            tape.mul(tape.clamp(ratio, 1.0 - config_.clip, 1.0 + config_.clip), adv_node);
        const int objective = tape.min2(surr_raw, surr_clip);
        const int verr = tape.sub(g.value, tape.constant(column(ret)));

        const int s_obj = tape.sum_all(objective);
        const int s_verr = tape.sum_all(tape.square(verr));
        const int s_ent = tape.sum_all(g.entropy);
        sum_obj = sum_obj < 0 ? s_obj : tape.add(sum_obj, s_obj);
        sum_verr = sum_verr < 0 ? s_verr : tape.add(sum_verr, s_verr);
        sum_ent = sum_ent < 0 ? s_ent : tape.add(sum_ent, s_ent);
        total_rows += rows;

        const Mat& diff_v = tape.value(diff);
        const Mat& ratio_v = tape.value(ratio);
        kl_sum += -diff_v.sum();
        pl_sum += -tape.value(s_obj)(0, 0);
        vl_sum += 0.5 * tape.value(s_verr)(0, 0);
        ent_sum += tape.value(s_ent)(0, 0);
        for (int i = 0; i < rows; ++i) {
          if (std::abs(ratio_v(i, 0) - 1.0) > config_.clip) clip_count += 1;
        }
      }
      if (total_rows == 0) continue;

      const int combined = tape.axpb(tape.axpb(sum_obj, sum_verr, -1.0, 0.5 * config_.value_coef),
                                     sum_ent, 1.0, -config_.entropy_coef);
      const int loss = tape.scale(combined, 1.0 / static_cast<double>(total_rows));
      tape.backward(loss);
      const double grad_norm = store.grad_norm();
      if (!std::isfinite(grad_norm)) {
        throw NumericError("non-finite gradient norm during policy update");
      }
      store.clip_grads(config_.max_grad_norm);
      adam_steps_ += 1;
      store.adam_step(config_.learning_rate, config_.adam_beta1, config_.adam_beta2,
                      config_.adam_eps, adam_steps_);

      total.policy_loss += pl_sum / total_rows;
      total.value_loss += vl_sum / total_rows;
      total.entropy += ent_sum / total_rows;
      total.kl += kl_sum / total_rows;
      total.clip_fraction += static_cast<double>(clip_count) / total_rows;
      stat_rows += total_rows;
      updates += 1;
    }
  }

  if (updates > 0) {
    total.policy_loss /= updates;
    total.value_loss /= updates;
    total.entropy /= updates;
    total.kl /= updates;
    total.clip_fraction /= updates;
  }
  return total;
}

void Trainer::write_metrics_header(std::ostream& out) const {
  out << "iteration,steps,robot,beta,mean_return,mean_tracking_error,success_rate,"
         "policy_loss,value_loss,entropy,kl,clip_frac\n";
}

void Trainer::write_metrics_rows(std::ostream& out, int iteration,
                                 const UpdateStats& stats) const {
  for (std::size_t r = 0; r < morphologies_.size(); ++r) {
    out << iteration << ',' << steps_done_ << ',' << morphologies_[r].name << ','
        << format_double(curricula_[r].beta()) << ','
        << format_double(windows_[r].mean_return()) << ','
        << format_double(windows_[r].mean_tracking_error()) << ','
        << format_double(windows_[r].success_rate()) << ','
        << format_double(stats.policy_loss) << ',' << format_double(stats.value_loss)
        << ',' << format_double(stats.entropy) << ',' << format_double(stats.kl) << ','
        << format_double(stats.clip_fraction) << '\n';
  }
}

TrainResult Trainer::train() {
  const std::int64_t per_iter = steps_per_iteration();
  const int iterations =
      static_cast<int>((config_.total_steps + per_iter - 1) / per_iter);

  std::ofstream metrics;
  if (!config_.output_dir.empty()) {
    std::filesystem::create_directories(config_.output_dir);
    metrics.open(config_.output_dir + "/metrics.csv", std::ios::trunc);
    if (!metrics) {
      throw std::runtime_error("cannot write " + config_.output_dir + "/metrics.csv");
    }
    write_metrics_header(metrics);
  }

  for (int it = 1; it <= iterations; ++it) {
    collect_rollouts();
    const UpdateStats stats = update_policy();
    if (metrics.is_open() && (it % config_.log_every == 0 || it == iterations)) {
      write_metrics_rows(metrics, it, stats);
      metrics.flush();
    }
    if (!config_.quiet) {
      double beta_sum = 0.0;
      for (const Curriculum& c : curricula_) beta_sum += c.beta();
      std::cout << "iter " << it << "/" << iterations << " steps " << steps_done_
                << " mean_beta " << format_double(beta_sum / curricula_.size())
                << " policy_loss " << format_double(stats.policy_loss) << " value_loss "
                << format_double(stats.value_loss) << std::endl;
    }
    if (!config_.output_dir.empty() && config_.checkpoint_every > 0 &&
        it % config_.checkpoint_every == 0 && it != iterations) {
      char name[32];
      std::snprintf(name, sizeof name, "checkpoint_%06d.ckpt", it);
      save_checkpoint(config_.output_dir + "/" + name);
    }
  }

  TrainResult result;
  result.steps = steps_done_;
  result.iterations = iterations;
  for (const Curriculum& c : curricula_) result.final_betas.push_back(c.beta());
  result.mean_final_beta =
      std::accumulate(result.final_betas.begin(), result.final_betas.end(), 0.0) /
      static_cast<double>(result.final_betas.size());
  if (!config_.output_dir.empty()) {
    result.checkpoint_path = config_.output_dir + "/checkpoint.ckpt";
    save_checkpoint(result.checkpoint_path);
  }
  return result;
}

void Trainer::save_checkpoint(const std::string& path) {
  ParamStore& store = policy_->params();
  for (std::size_t r = 0; r < curricula_.size(); ++r) {
    const std::string name = "meta/curriculum/" + std::to_string(r);
    int id = store.find(name);
    if (id < 0) id = store.add(name, 3, 1);
    Mat& v = store.value(id);
    v(0, 0) = curricula_[r].beta();
    v(1, 0) = curricula_[r].consecutive_successes();
    v(2, 0) = curricula_[r].consecutive_failures();
  }
  morphrl::save_checkpoint(path, store);
}

EvalResult evaluate_policy(Policy& policy, int roster_index, const Morphology& robot,
                           const EnvConfig& env_config,
                           const CurriculumConfig& curriculum_config, double beta,
                           int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be positive");
  if (roster_index < 0 && !policy.supports_unseen()) {
    throw std::invalid_argument(
        "evaluate_policy: this policy cannot act on robots outside its roster");
  }
  const Curriculum judge(curriculum_config);
  Env env(&robot, env_config, RandomStream(seed, 0x6576616c));

  EvalResult result;
  result.episodes = episodes;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(beta);
    bool done = false;
    while (!done) {
      const ObsBatch batch = stack_observations({env.observe(beta)});
      const Distribution dist = policy.action_distribution(roster_index, batch);
      const StepResult res = env.step(dist.mu.row(0).transpose(), beta);
      if (res.numeric_error) {
        throw NumericError("evaluation reached a non-finite state on robot " + robot.name);
      }
      done = res.terminated || res.truncated;
    }
    const EpisodeStats stats = env.episode_stats();
    result.mean_return += stats.episode_return;
    result.mean_tracking_error += stats.mean_tracking_error;
    result.mean_length += stats.length;
    result.success_rate += judge.is_success(stats) ? 1.0 : 0.0;
  }
  result.mean_return /= episodes;
  result.mean_tracking_error /= episodes;
  result.mean_length /= episodes;
  result.success_rate /= episodes;
  return result;
}

void write_trajectory_csv(std::ostream& out, Policy& policy, int roster_index,
                          const Morphology& robot, const EnvConfig& env_config,
                          double beta, int steps, std::uint64_t seed) {
  if (steps < 1) throw std::invalid_argument("trajectory: steps must be positive");
  if (roster_index < 0 && !policy.supports_unseen()) {
    throw std::invalid_argument(
        "trajectory: this policy cannot act on robots outside its roster");
  }
  const int joints = static_cast<int>(robot.joints.size());
  Env env(&robot, env_config, RandomStream(seed, 0x74726a));
  env.reset(beta);

  out << "step,env,reward,done,beta";
  for (int k = 0; k < joints; ++k) out << ",q" << k;
  for (int k = 0; k < joints; ++k) out << ",qd" << k;
  out << ",vx,vy,wz,cmd_vx,cmd_vy,cmd_wz\n";

  for (int t = 0; t < steps; ++t) {
    const ObsBatch batch = stack_observations({env.observe(beta)});
    const Distribution dist = policy.action_distribution(roster_index, batch);
    const StepResult res = env.step(dist.mu.row(0).transpose(), beta);
    if (res.numeric_error) {
      throw NumericError("trajectory reached a non-finite state on robot " + robot.name);
    }
    const EnvState& s = env.state();
    const bool done = res.terminated || res.truncated;
    out << t << ",0," << format_double(res.reward) << ',' << (done ? 1 : 0) << ','
        << format_double(beta);
    for (int k = 0; k < joints; ++k) out << ',' << format_double(s.q[k]);
    for (int k = 0; k < joints; ++k) out << ',' << format_double(s.qd[k]);
    out << ',' << format_double(s.v.x()) << ',' << format_double(s.v.y()) << ','
        << format_double(s.omega.z()) << ',' << format_double(s.command.x()) << ','
        << format_double(s.command.y()) << ',' << format_double(s.command.z()) << '\n';
    if (done) env.reset(beta);
  }
}

}  // namespace morphrl
