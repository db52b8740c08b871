#include "morphrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "morphrl/checkpoint.hpp"

namespace morphrl {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLogStdInit = -0.5;

Mat column(const Eigen::VectorXd& x) {
  Mat m(x.size(), 1);
  m.col(0) = x;
  return m;
}

LayerParamIds locate_layer(const ParamStore& store, const std::string& name, int in,
                           int out) {
  LayerParamIds ids;
  ids.g = store.find(name + "/g");
  ids.v = store.find(name + "/v");
  ids.b = store.find(name + "/b");
  if (ids.g < 0 || ids.v < 0 || ids.b < 0) {
    throw std::runtime_error("checkpoint is missing layer " + name);
  }
  const Mat& v = store.value(ids.v);
  if (v.rows() != out || v.cols() != in || store.value(ids.g).rows() != out ||
      store.value(ids.b).rows() != out) {
    throw std::runtime_error("checkpoint layer " + name + " has unexpected shape");
  }
  return ids;
}

int locate_row_param(const ParamStore& store, const std::string& name, int cols) {
  const int id = store.find(name);
  if (id < 0) throw std::runtime_error("checkpoint is missing tensor " + name);
  const Mat& v = store.value(id);
  if (v.rows() != 1 || v.cols() != cols) {
    throw std::runtime_error("checkpoint tensor " + name + " has unexpected shape");
  }
  return id;
}

/// Flattens one environment's general row plus per-joint description and
/// observation rows into fixed-width slots, zero padding unused slots.
Mat assemble_flat_input(const ObsBatch& batch, bool critic, int slots) {
  const Mat& joint = critic ? batch.critic_obs_joint : batch.obs_joint;
  const Mat& general = critic ? batch.critic_obs_general : batch.obs_general;
  const int n = batch.envs;
  const int j = batch.joints;
  const int gw = static_cast<int>(general.cols());
  const int dw = static_cast<int>(batch.desc.cols());
  const int jw = static_cast<int>(joint.cols());
  Mat x = Mat::Zero(n, gw + slots * (dw + jw));
  for (int e = 0; e < n; ++e) {
    x.block(e, 0, 1, gw) = general.row(e);
    for (int k = 0; k < j; ++k) {
      const int base = gw + k * (dw + jw);
      x.block(e, base, 1, dw) = batch.desc.row(e * j + k);
      x.block(e, base + dw, 1, jw) = joint.row(e * j + k);
    }
  }
  return x;
}

int mlp_forward(Tape& tape, const Mat& input, const std::vector<LayerParamIds>& layers) {
  int h = tape.constant(input);
  for (const LayerParamIds& layer : layers) {
    h = tape.elu(wn_forward(tape, h, layer));
  }
  return h;
}

/// logp and entropy of a diagonal Gaussian over `real` of the `slots`
/// columns; mu and log_sigma are [N x slots] nodes, actions [N x slots] with
/// zeros in the padded columns.
struct WideGaussian {
  int logp;
  int entropy;
};

WideGaussian wide_gaussian(Tape& tape, int mu, int log_sigma, const Mat& actions,
                           int real, int slots) {
  const int n = static_cast<int>(actions.rows());
  const int a = tape.constant(actions);
  const int diff = tape.sub(a, mu);
  const int z = tape.mul(diff, tape.exp_of(tape.neg(log_sigma)));
  int zsq = tape.square(z);
  int ls = log_sigma;
  if (real != slots) {
    Mat mask = Mat::Zero(n, slots);
    mask.leftCols(real).setOnes();
    const int m = tape.constant(mask);
    zsq = tape.mul(zsq, m);
    ls = tape.mul(ls, m);
  }
  const int ls_sum = tape.row_sum(ls);
  WideGaussian out;
  out.logp = tape.add_const(tape.axpb(tape.row_sum(zsq), ls_sum, -0.5, -1.0),
                            -0.5 * real * kLog2Pi);
  out.entropy = tape.add_const(ls_sum, 0.5 * real * (1.0 + kLog2Pi));
  return out;
}

}  // namespace

PolicyMethod parse_policy_method(const std::string& name) {
  if (name == "urma") return PolicyMethod::kUrma;
  if (name == "zero_padding") return PolicyMethod::kZeroPadding;
  if (name == "multi_head") return PolicyMethod::kMultiHead;
  throw std::invalid_argument("unknown policy method: " + name);
}

std::string policy_method_name(PolicyMethod method) {
  switch (method) {
    case PolicyMethod::kUrma: return "urma";
    case PolicyMethod::kZeroPadding: return "zero_padding";
    case PolicyMethod::kMultiHead: return "multi_head";
  }
  throw std::invalid_argument("unknown policy method");
}

Policy::Policy(std::vector<RobotSpec> robots, NetworkConfig config)
    : robots_(std::move(robots)), config_(config) {
  config_.validate();
  if (robots_.empty()) throw std::invalid_argument("policy: empty robot roster");
  for (std::size_t i = 0; i < robots_.size(); ++i) {
    const RobotSpec& r = robots_[i];
    if (r.name.empty() || r.name.find('/') != std::string::npos) {
      throw std::invalid_argument("policy: robot name must be non-empty without '/'");
    }
    if (r.joints < 1) throw std::invalid_argument("policy: robot needs at least one joint");
    for (std::size_t k = 0; k < i; ++k) {
      if (robots_[k].name == r.name) {
        throw std::invalid_argument("policy: duplicate robot name " + r.name);
      }
    }
  }
}

int Policy::roster_index(const std::string& name) const {
  for (std::size_t i = 0; i < robots_.size(); ++i) {
    if (robots_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void Policy::add_meta() {
  const int method_id = store_.add("meta/method", 1, 1);
  store_.value(method_id)(0, 0) = static_cast<double>(method());
  const int net_id = store_.add("meta/network", 11, 1);
  Mat& net = store_.value(net_id);
  net << config_.desc_width, config_.actor_joint_obs, config_.critic_joint_obs,
      config_.general_obs, config_.latent, config_.phi_hidden, config_.psi_hidden,
      config_.core_hidden, config_.core_layers, config_.log_std_min, config_.log_std_max;
  for (std::size_t i = 0; i < robots_.size(); ++i) {
    const int id = store_.add("meta/robot/" + std::to_string(i) + "/" + robots_[i].name,
                              1, 1);
    store_.value(id)(0, 0) = static_cast<double>(robots_[i].joints);
  }
}

UrmaPolicy::UrmaPolicy(std::vector<RobotSpec> robots, NetworkConfig config,
                       std::uint64_t seed)
    : Policy(std::move(robots), config) {
  RandomStream stream(seed, 0x6e6574);
  actor_ = create_urma_params(store_, "actor", config_.actor_joint_obs, true, config_,
                              stream);
  critic_ = create_urma_params(store_, "critic", config_.critic_joint_obs, false,
                               config_, stream);
  add_meta();
}

UrmaPolicy::UrmaPolicy(std::vector<RobotSpec> robots, NetworkConfig config,
                       ParamStore store)
    : Policy(std::move(robots), config) {
  store_ = std::move(store);
  actor_ = locate_urma_params(store_, "actor", config_.actor_joint_obs, true, config_);
  critic_ = locate_urma_params(store_, "critic", config_.critic_joint_obs, false,
                               config_);
}

Distribution UrmaPolicy::action_distribution(int, const ObsBatch& batch) {
  Tape tape(&store_);
  const UrmaGraph g = urma_forward(tape, actor_, batch.desc, batch.obs_joint,
                                   batch.obs_general, batch.joints, config_);
  const int mu_id = urma_actor_mu(tape, g);
  const int ls_id = urma_actor_log_sigma(tape, actor_, g, config_);
  const Mat& mu = tape.value(mu_id);
  const Mat& ls = tape.value(ls_id);
  Distribution d;
  d.mu.resize(batch.envs, batch.joints);
  d.sigma.resize(batch.envs, batch.joints);
  for (int e = 0; e < batch.envs; ++e) {
    for (int k = 0; k < batch.joints; ++k) {
      d.mu(e, k) = mu(e * batch.joints + k, 0);
      d.sigma(e, k) = std::exp(ls(e * batch.joints + k, 0));
    }
  }
  return d;
}

Eigen::VectorXd UrmaPolicy::state_values(int, const ObsBatch& batch) {
  Tape tape(&store_);
  const UrmaGraph g = urma_forward(tape, critic_, batch.desc, batch.critic_obs_joint,
                                   batch.critic_obs_general, batch.joints, config_);
  return tape.value(urma_value(tape, critic_, g)).col(0);
}

LossGraph UrmaPolicy::build_loss_graph(Tape& tape, int, const ObsBatch& batch,
                                       const Eigen::VectorXd& actions) {
  const int j = batch.joints;
  const UrmaGraph ga = urma_forward(tape, actor_, batch.desc, batch.obs_joint,
                                    batch.obs_general, j, config_);
  const int mu = urma_actor_mu(tape, ga);
  const int log_sigma = urma_actor_log_sigma(tape, actor_, ga, config_);

  const int a = tape.constant(column(actions));
  const int diff = tape.sub(a, mu);
  const int z = tape.mul(diff, tape.exp_of(tape.neg(log_sigma)));
  const int zsq = tape.sum_groups(tape.square(z), j);  // [N x 1]
  const int lss = tape.sum_groups(log_sigma, j);

  LossGraph out;
  out.logp = tape.add_const(tape.axpb(zsq, lss, -0.5, -1.0), -0.5 * j * kLog2Pi);
  out.entropy = tape.add_const(lss, 0.5 * j * (1.0 + kLog2Pi));

  const UrmaGraph gc = urma_forward(tape, critic_, batch.desc, batch.critic_obs_joint,
                                    batch.critic_obs_general, j, config_);
  out.value = urma_value(tape, critic_, gc);
  return out;
}

ZeroPaddingPolicy::ZeroPaddingPolicy(std::vector<RobotSpec> robots, NetworkConfig config,
                                     std::uint64_t seed)
    : Policy(std::move(robots), config) {
  for (const RobotSpec& r : robots_) max_joints_ = std::max(max_joints_, r.joints);
  RandomStream stream(seed, 0x7a70);
  const double gain = std::sqrt(2.0);
  int in = config_.general_obs + max_joints_ * (config_.desc_width + config_.actor_joint_obs);
  for (int i = 0; i < config_.core_layers; ++i) {
    actor_layers_.push_back(add_wn_layer(store_, "zp/actor/l" + std::to_string(i), in,
                                         config_.core_hidden, gain, stream));
    in = config_.core_hidden;
  }
  actor_mu_ = add_wn_layer(store_, "zp/actor/mu", config_.core_hidden, max_joints_,
                           0.01, stream);
  actor_log_std_ = store_.add("zp/actor/log_std", 1, max_joints_);
  store_.value(actor_log_std_).setConstant(kLogStdInit);
  in = config_.general_obs + max_joints_ * (config_.desc_width + config_.critic_joint_obs);
  for (int i = 0; i < config_.core_layers; ++i) {
    critic_layers_.push_back(add_wn_layer(store_, "zp/critic/l" + std::to_string(i), in,
                                          config_.core_hidden, gain, stream));
    in = config_.core_hidden;
  }
  critic_value_ = add_wn_layer(store_, "zp/critic/value", config_.core_hidden, 1, 1.0,
                               stream);
  add_meta();
}

ZeroPaddingPolicy::ZeroPaddingPolicy(std::vector<RobotSpec> robots, NetworkConfig config,
                                     ParamStore store)
    : Policy(std::move(robots), config) {
  store_ = std::move(store);
  for (const RobotSpec& r : robots_) max_joints_ = std::max(max_joints_, r.joints);
  int in = config_.general_obs + max_joints_ * (config_.desc_width + config_.actor_joint_obs);
  for (int i = 0; i < config_.core_layers; ++i) {
    actor_layers_.push_back(
        locate_layer(store_, "zp/actor/l" + std::to_string(i), in, config_.core_hidden));
    in = config_.core_hidden;
  }
  actor_mu_ = locate_layer(store_, "zp/actor/mu", config_.core_hidden, max_joints_);
  actor_log_std_ = locate_row_param(store_, "zp/actor/log_std", max_joints_);
  in = config_.general_obs + max_joints_ * (config_.desc_width + config_.critic_joint_obs);
  for (int i = 0; i < config_.core_layers; ++i) {
    critic_layers_.push_back(
        locate_layer(store_, "zp/critic/l" + std::to_string(i), in, config_.core_hidden));
    in = config_.core_hidden;
  }
  critic_value_ = locate_layer(store_, "zp/critic/value", config_.core_hidden, 1);
}

Distribution ZeroPaddingPolicy::action_distribution(int, const ObsBatch& batch) {
  if (batch.joints > max_joints_) {
    throw std::runtime_error("zero_padding: robot has more joints than the padded slots");
  }
  Tape tape(&store_);
  const int h = mlp_forward(tape, assemble_flat_input(batch, false, max_joints_),
                            actor_layers_);
  const int mu_id = wn_forward(tape, h, actor_mu_);
  const int ls_id = tape.clamp(tape.param(actor_log_std_), config_.log_std_min,
                               config_.log_std_max);
  const Mat& mu = tape.value(mu_id);
  const Mat& ls = tape.value(ls_id);
  Distribution d;
  d.mu = mu.leftCols(batch.joints);
  d.sigma.resize(batch.envs, batch.joints);
  for (int k = 0; k < batch.joints; ++k) {
    d.sigma.col(k).setConstant(std::exp(ls(0, k)));
  }
  return d;
}

Eigen::VectorXd ZeroPaddingPolicy::state_values(int, const ObsBatch& batch) {
  if (batch.joints > max_joints_) {
    throw std::runtime_error("zero_padding: robot has more joints than the padded slots");
  }
  Tape tape(&store_);
  const int h = mlp_forward(tape, assemble_flat_input(batch, true, max_joints_),
                            critic_layers_);
  return tape.value(wn_forward(tape, h, critic_value_)).col(0);
}

LossGraph ZeroPaddingPolicy::build_loss_graph(Tape& tape, int, const ObsBatch& batch,
                                              const Eigen::VectorXd& actions) {
  if (batch.joints > max_joints_) {
    throw std::runtime_error("zero_padding: robot has more joints than the padded slots");
  }
  const int n = batch.envs;
  const int j = batch.joints;
  const int h = mlp_forward(tape, assemble_flat_input(batch, false, max_joints_),
                            actor_layers_);
  const int mu = wn_forward(tape, h, actor_mu_);
  const int ls = tape.repeat_rows(
      tape.clamp(tape.param(actor_log_std_), config_.log_std_min, config_.log_std_max),
      n);
  Mat a = Mat::Zero(n, max_joints_);
  for (int e = 0; e < n; ++e) {
    for (int k = 0; k < j; ++k) a(e, k) = actions[e * j + k];
  }
  const WideGaussian wg = wide_gaussian(tape, mu, ls, a, j, max_joints_);
  LossGraph out;
  out.logp = wg.logp;
  out.entropy = wg.entropy;
  const int hc = mlp_forward(tape, assemble_flat_input(batch, true, max_joints_),
                             critic_layers_);
  out.value = wn_forward(tape, hc, critic_value_);
  return out;
}

MultiHeadPolicy::MultiHeadPolicy(std::vector<RobotSpec> robots, NetworkConfig config,
                                 std::uint64_t seed)
    : Policy(std::move(robots), config) {
  RandomStream stream(seed, 0x6d68);
  const double gain = std::sqrt(2.0);
  const int trunk_layers = std::max(1, config_.core_layers - 1);
  for (int i = 0; i < trunk_layers; ++i) {
    actor_trunk_.push_back(add_wn_layer(store_, "mh/actor/trunk" + std::to_string(i),
                                        config_.core_hidden, config_.core_hidden, gain,
                                        stream));
    critic_trunk_.push_back(add_wn_layer(store_, "mh/critic/trunk" + std::to_string(i),
                                         config_.core_hidden, config_.core_hidden, gain,
                                         stream));
  }
  for (const RobotSpec& r : robots_) {
    RobotHeads h;
    const int actor_in =
        config_.general_obs + r.joints * (config_.desc_width + config_.actor_joint_obs);
    const int critic_in =
        config_.general_obs + r.joints * (config_.desc_width + config_.critic_joint_obs);
    h.actor_in = add_wn_layer(store_, "mh/actor/in/" + r.name, actor_in,
                              config_.core_hidden, gain, stream);
    h.actor_mu = add_wn_layer(store_, "mh/actor/mu/" + r.name, config_.core_hidden,
                              r.joints, 0.01, stream);
    h.actor_log_std = store_.add("mh/actor/log_std/" + r.name, 1, r.joints);
    store_.value(h.actor_log_std).setConstant(kLogStdInit);
    h.critic_in = add_wn_layer(store_, "mh/critic/in/" + r.name, critic_in,
                               config_.core_hidden, gain, stream);
    h.critic_value = add_wn_layer(store_, "mh/critic/value/" + r.name,
                                  config_.core_hidden, 1, 1.0, stream);
    heads_.push_back(h);
  }
  add_meta();
}

MultiHeadPolicy::MultiHeadPolicy(std::vector<RobotSpec> robots, NetworkConfig config,
                                 ParamStore store)
    : Policy(std::move(robots), config) {
  store_ = std::move(store);
  const int trunk_layers = std::max(1, config_.core_layers - 1);
  for (int i = 0; i < trunk_layers; ++i) {
    actor_trunk_.push_back(locate_layer(store_, "mh/actor/trunk" + std::to_string(i),
                                        config_.core_hidden, config_.core_hidden));
    critic_trunk_.push_back(locate_layer(store_, "mh/critic/trunk" + std::to_string(i),
                                         config_.core_hidden, config_.core_hidden));
  }
  for (const RobotSpec& r : robots_) {
    RobotHeads h;
    const int actor_in =
        config_.general_obs + r.joints * (config_.desc_width + config_.actor_joint_obs);
    const int critic_in =
        config_.general_obs + r.joints * (config_.desc_width + config_.critic_joint_obs);
    h.actor_in = locate_layer(store_, "mh/actor/in/" + r.name, actor_in,
                              config_.core_hidden);
    h.actor_mu = locate_layer(store_, "mh/actor/mu/" + r.name, config_.core_hidden,
                              r.joints);
    h.actor_log_std = locate_row_param(store_, "mh/actor/log_std/" + r.name, r.joints);
    h.critic_in = locate_layer(store_, "mh/critic/in/" + r.name, critic_in,
                               config_.core_hidden);
    h.critic_value = locate_layer(store_, "mh/critic/value/" + r.name,
                                  config_.core_hidden, 1);
    heads_.push_back(h);
  }
}

Distribution MultiHeadPolicy::action_distribution(int robot, const ObsBatch& batch) {
  if (robot < 0 || robot >= static_cast<int>(heads_.size())) {
    throw std::runtime_error("multi_head: robot is not in the training roster");
  }
  const RobotHeads& heads = heads_[robot];
  Tape tape(&store_);
  int h = tape.elu(wn_forward(
      tape, tape.constant(assemble_flat_input(batch, false, batch.joints)),
      heads.actor_in));
  for (const LayerParamIds& layer : actor_trunk_) {
    h = tape.elu(wn_forward(tape, h, layer));
  }
  const int mu_id = wn_forward(tape, h, heads.actor_mu);
  const int ls_id = tape.clamp(tape.param(heads.actor_log_std), config_.log_std_min,
                               config_.log_std_max);
  const Mat& mu = tape.value(mu_id);
  const Mat& ls = tape.value(ls_id);
  Distribution d;
  d.mu = mu;
  d.sigma.resize(batch.envs, batch.joints);
  for (int k = 0; k < batch.joints; ++k) {
    d.sigma.col(k).setConstant(std::exp(ls(0, k)));
  }
  return d;
}

Eigen::VectorXd MultiHeadPolicy::state_values(int robot, const ObsBatch& batch) {
  if (robot < 0 || robot >= static_cast<int>(heads_.size())) {
    throw std::runtime_error("multi_head: robot is not in the training roster");
  }
  const RobotHeads& heads = heads_[robot];
  Tape tape(&store_);
  int h = tape.elu(wn_forward(
      tape, tape.constant(assemble_flat_input(batch, true, batch.joints)),
      heads.critic_in));
  for (const LayerParamIds& layer : critic_trunk_) {
    h = tape.elu(wn_forward(tape, h, layer));
  }
  return tape.value(wn_forward(tape, h, heads.critic_value)).col(0);
}

LossGraph MultiHeadPolicy::build_loss_graph(Tape& tape, int robot, const ObsBatch& batch,
                                            const Eigen::VectorXd& actions) {
  if (robot < 0 || robot >= static_cast<int>(heads_.size())) {
    throw std::runtime_error("multi_head: robot is not in the training roster");
  }
  const RobotHeads& heads = heads_[robot];
  const int n = batch.envs;
  const int j = batch.joints;
  int h = tape.elu(wn_forward(
      tape, tape.constant(assemble_flat_input(batch, false, batch.joints)),
      heads.actor_in));
  for (const LayerParamIds& layer : actor_trunk_) {
    h = tape.elu(wn_forward(tape, h, layer));
  }
  const int mu = wn_forward(tape, h, heads.actor_mu);
  const int ls = tape.repeat_rows(
      tape.clamp(tape.param(heads.actor_log_std), config_.log_std_min,
                 config_.log_std_max),
      n);
  Mat a(n, j);
  for (int e = 0; e < n; ++e) {
    for (int k = 0; k < j; ++k) a(e, k) = actions[e * j + k];
  }
  const WideGaussian wg = wide_gaussian(tape, mu, ls, a, j, j);
  LossGraph out;
  out.logp = wg.logp;
  out.entropy = wg.entropy;
  int hc = tape.elu(wn_forward(
      tape, tape.constant(assemble_flat_input(batch, true, batch.joints)),
      heads.critic_in));
  for (const LayerParamIds& layer : critic_trunk_) {
    hc = tape.elu(wn_forward(tape, hc, layer));
  }
  out.value = wn_forward(tape, hc, heads.critic_value);
  return out;
}

std::unique_ptr<Policy> make_policy(PolicyMethod method, std::vector<RobotSpec> robots,
                                    const NetworkConfig& config, std::uint64_t seed) {
  switch (method) {
    case PolicyMethod::kUrma:
      return std::make_unique<UrmaPolicy>(std::move(robots), config, seed);
    case PolicyMethod::kZeroPadding:
      return std::make_unique<ZeroPaddingPolicy>(std::move(robots), config, seed);
    case PolicyMethod::kMultiHead:
      return std::make_unique<MultiHeadPolicy>(std::move(robots), config, seed);
  }
  throw std::invalid_argument("unknown policy method");
}

std::unique_ptr<Policy> policy_from_store(ParamStore store) {
  const int method_id = store.find("meta/method");
  const int net_id = store.find("meta/network");
  if (method_id < 0 || net_id < 0) {
    throw std::runtime_error("checkpoint is missing policy meta tensors");
  }
  const Mat& net = store.value(net_id);
  if (net.rows() != 11 || net.cols() != 1) {
    throw std::runtime_error("checkpoint meta/network has unexpected shape");
  }
  NetworkConfig config;
  config.desc_width = static_cast<int>(net(0, 0));
  config.actor_joint_obs = static_cast<int>(net(1, 0));
  config.critic_joint_obs = static_cast<int>(net(2, 0));
  config.general_obs = static_cast<int>(net(3, 0));
  config.latent = static_cast<int>(net(4, 0));
  config.phi_hidden = static_cast<int>(net(5, 0));
  config.psi_hidden = static_cast<int>(net(6, 0));
  config.core_hidden = static_cast<int>(net(7, 0));
  config.core_layers = static_cast<int>(net(8, 0));
  config.log_std_min = net(9, 0);
  config.log_std_max = net(10, 0);

  std::vector<std::pair<int, RobotSpec>> found;
  const std::string prefix = "meta/robot/";
  for (int i = 0; i < store.size(); ++i) {
    const std::string& name = store.entry(i).name;
    if (name.rfind(prefix, 0) != 0) continue;
    const std::size_t sep = name.find('/', prefix.size());
    if (sep == std::string::npos) {
      throw std::runtime_error("malformed roster tensor " + name);
    }
    RobotSpec spec;
    spec.name = name.substr(sep + 1);
    spec.joints = static_cast<int>(store.value(i)(0, 0));
    found.emplace_back(std::stoi(name.substr(prefix.size(), sep - prefix.size())), spec);
  }
  if (found.empty()) throw std::runtime_error("checkpoint has no robot roster");
  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<RobotSpec> robots;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (found[i].first != static_cast<int>(i)) {
      throw std::runtime_error("checkpoint roster indices are not contiguous");
    }
    robots.push_back(found[i].second);
  }

  const auto method = static_cast<PolicyMethod>(static_cast<int>(store.value(method_id)(0, 0)));
  switch (method) {
    case PolicyMethod::kUrma:
      return std::make_unique<UrmaPolicy>(std::move(robots), config, std::move(store));
    case PolicyMethod::kZeroPadding:
      return std::make_unique<ZeroPaddingPolicy>(std::move(robots), config,
                                                 std::move(store));
    case PolicyMethod::kMultiHead:
      return std::make_unique<MultiHeadPolicy>(std::move(robots), config,
                                               std::move(store));
  }
  throw std::runtime_error("checkpoint has an unknown policy method");
}

std::unique_ptr<Policy> load_policy(const std::string& path) {
  return policy_from_store(load_checkpoint(path));
}

}  // namespace morphrl
