#include "morphrl/network.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace morphrl {

namespace {

constexpr double kHiddenGain = 1.4142135623730951;  // sqrt(2)
constexpr double kSmallHeadGain = 0.01;
constexpr double kLogStdBiasInit = -0.5;

void check(bool cond, const std::string& message) {
  if (!cond) throw std::invalid_argument("network: " + message);
}

}  // namespace

void NetworkConfig::validate() const {
  check(desc_width > 0 && actor_joint_obs > 0 && critic_joint_obs > 0 && general_obs > 0,
        "observation widths must be positive");
  check(latent > 0 && phi_hidden > 0 && psi_hidden > 0 && core_hidden > 0,
        "layer widths must be positive");
  check(core_layers >= 1, "core must have at least one hidden layer");
  check(log_std_min < log_std_max, "log-std clamp range is empty");
}

Mat orthogonal_init(int rows, int cols, double gain, RandomStream& stream) {
  const int n = std::max(rows, cols);
  const int m = std::min(rows, cols);
  Mat a(n, m);
  for (int c = 0; c < m; ++c) {
    for (int r = 0; r < n; ++r) a(r, c) = stream.normal();
  }
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(n, m);
  // Fix the sign ambiguity of the factorization so the result is a
  // deterministic function of the stream.
  const Mat r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  for (int c = 0; c < m; ++c) {
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  Mat w = rows >= cols ? q : Mat(q.transpose());
  return gain * w;
}

LayerParamIds add_wn_layer(ParamStore& store, const std::string& name, int in, int out,
                           double gain, RandomStream& stream, double bias_init) {
  LayerParamIds ids;
  ids.g = store.add(name + "/g", out, 1);
  ids.v = store.add(name + "/v", out, in);
  ids.b = store.add(name + "/b", out, 1);
  store.value(ids.v) = orthogonal_init(out, in, gain, stream);
  store.value(ids.g) = store.value(ids.v).rowwise().norm();
  store.value(ids.b).setConstant(bias_init);
  return ids;
}

int wn_forward(Tape& tape, int x, const LayerParamIds& layer) {
  return tape.linear_wn(x, tape.param(layer.g), tape.param(layer.v), tape.param(layer.b));
}

UrmaParamIds create_urma_params(ParamStore& store, const std::string& prefix,
                                int joint_obs_width, bool actor_head,
                                const NetworkConfig& config, RandomStream& stream) {
  config.validate();
  UrmaParamIds p;
  p.prefix = prefix;
  p.joint_obs_width = joint_obs_width;
  p.actor_head = actor_head;

  p.phi.push_back(add_wn_layer(store, prefix + "/phi0", config.desc_width,
                               config.phi_hidden, kHiddenGain, stream));
  p.phi.push_back(
      add_wn_layer(store, prefix + "/phi1", config.phi_hidden, config.latent, 1.0, stream));
  p.log_tau = store.add(prefix + "/log_tau", 1, 1);  // tau = 1 at init

  p.psi.push_back(add_wn_layer(store, prefix + "/psi0", joint_obs_width,
                               config.psi_hidden, kHiddenGain, stream));
  p.psi.push_back(add_wn_layer(store, prefix + "/psi1", config.psi_hidden,
                               config.psi_hidden, kHiddenGain, stream));
  p.psi.push_back(
      add_wn_layer(store, prefix + "/psi2", config.psi_hidden, config.latent, 1.0, stream));

  int in = config.general_obs + config.latent;
  for (int i = 0; i < config.core_layers; ++i) {
    p.core.push_back(add_wn_layer(store, prefix + "/core" + std::to_string(i), in,
                                  config.core_hidden, kHiddenGain, stream));
    in = config.core_hidden;
  }
  // The core output feeds the dot-product decoder; a small actor gain keeps
  // initial action means near zero.
  p.core.push_back(add_wn_layer(store, prefix + "/core" + std::to_string(config.core_layers),
                                in, config.latent, actor_head ? kSmallHeadGain : 1.0,
                                stream));

  if (actor_head) {
    p.head = add_wn_layer(store, prefix + "/log_std", config.latent, 1, kSmallHeadGain,
                          stream, kLogStdBiasInit);
  } else {
    p.head = add_wn_layer(store, prefix + "/value", config.latent, 1, 1.0, stream);
  }
  return p;
}

UrmaParamIds locate_urma_params(const ParamStore& store, const std::string& prefix,
                                int joint_obs_width, bool actor_head,
                                const NetworkConfig& config) {
  config.validate();
  auto locate_layer = [&store](const std::string& name, int in, int out) {
    LayerParamIds ids;
    ids.g = store.find(name + "/g");
    ids.v = store.find(name + "/v");
    ids.b = store.find(name + "/b");
    if (ids.g < 0 || ids.v < 0 || ids.b < 0) {
      throw std::runtime_error("checkpoint is missing tensor " + name);
    }
    const Mat& v = store.value(ids.v);
    if (v.rows() != out || v.cols() != in) {
      throw std::runtime_error(
          "checkpoint tensor " + name + "/v has shape " + std::to_string(v.rows()) + "x" +
          std::to_string(v.cols()) + ", expected " + std::to_string(out) + "x" +
          std::to_string(in));
    }
    return ids;
  };

  UrmaParamIds p;
  p.prefix = prefix;
  p.joint_obs_width = joint_obs_width;
  p.actor_head = actor_head;
  p.phi.push_back(locate_layer(prefix + "/phi0", config.desc_width, config.phi_hidden));
  p.phi.push_back(locate_layer(prefix + "/phi1", config.phi_hidden, config.latent));
  p.log_tau = store.find(prefix + "/log_tau");
  if (p.log_tau < 0) throw std::runtime_error("checkpoint is missing tensor " + prefix + "/log_tau");
  p.psi.push_back(locate_layer(prefix + "/psi0", joint_obs_width, config.psi_hidden));
  p.psi.push_back(locate_layer(prefix + "/psi1", config.psi_hidden, config.psi_hidden));
  p.psi.push_back(locate_layer(prefix + "/psi2", config.psi_hidden, config.latent));
  int in = config.general_obs + config.latent;
  for (int i = 0; i <= config.core_layers; ++i) {
    const int out = i < config.core_layers ? config.core_hidden : config.latent;
    p.core.push_back(locate_layer(prefix + "/core" + std::to_string(i), in, out));
    in = out;
  }
  p.head = locate_layer(prefix + (actor_head ? "/log_std" : "/value"), config.latent, 1);
  return p;
}

UrmaGraph urma_forward(Tape& tape, const UrmaParamIds& params, const Mat& desc,
                       const Mat& obs_joint, const Mat& obs_general, int joints,
                       const NetworkConfig& config) {
  const int N = static_cast<int>(desc.rows());
  check(joints >= 1, "forward needs at least one joint");
  check(N % joints == 0, "row count not divisible by joint count");
  const int B = N / joints;
  check(obs_joint.rows() == N, "obs_joint row mismatch");
  check(obs_general.rows() == B, "obs_general row mismatch");
  check(desc.cols() == config.desc_width, "description width mismatch");
  check(obs_joint.cols() == params.joint_obs_width, "joint observation width mismatch");
  check(obs_general.cols() == config.general_obs, "general observation width mismatch");

  UrmaGraph g;
  g.joints = joints;

  // Sort each environment block by the joint-index entry (always the last
  // description column) so the summation order (and thus the result,
  // bitwise) does not depend on how the caller ordered the rows.
  const int index_col = config.desc_width - 1;
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  for (int b = 0; b < B; ++b) {
    auto begin = order.begin() + static_cast<std::ptrdiff_t>(b) * joints;
    std::stable_sort(begin, begin + joints, [&](int x, int y) {
      return desc(x, index_col) < desc(y, index_col);
    });
  }
  bool identity = true;
  for (int i = 0; i < N; ++i) {
    if (order[i] != i) {
      identity = false;
      break;
    }
  }

  int desc_node = tape.constant(desc);
  int obs_node = tape.constant(obs_joint);
  if (!identity) {
    g.order = order;
    g.inverse.resize(N);
    for (int i = 0; i < N; ++i) g.inverse[order[i]] = i;
    desc_node = tape.gather_rows(desc_node, order);
    obs_node = tape.gather_rows(obs_node, order);
  }

  int h = tape.elu(wn_forward(tape, desc_node, params.phi[0]));
  g.phi = wn_forward(tape, h, params.phi[1]);
  g.alpha = tape.softmax_rows_temp(g.phi, tape.param(params.log_tau));

  h = tape.elu(wn_forward(tape, obs_node, params.psi[0]));
  h = tape.elu(wn_forward(tape, h, params.psi[1]));
  const int psi = wn_forward(tape, h, params.psi[2]);

  const int zbar = tape.sum_groups(tape.mul(g.alpha, psi), joints);

  int core = tape.concat_cols(tape.constant(obs_general), zbar);
  const int n_core = static_cast<int>(params.core.size());
  for (int i = 0; i < n_core - 1; ++i) {
    core = tape.elu(wn_forward(tape, core, params.core[i]));
  }
  g.latent = wn_forward(tape, core, params.core[n_core - 1]);
  return g;
}

int urma_actor_mu(Tape& tape, const UrmaGraph& graph) {
  int mu = tape.attend_dot(graph.latent, graph.alpha, graph.joints);
  if (!graph.inverse.empty()) mu = tape.gather_rows(mu, graph.inverse);
  return mu;
}

int urma_actor_log_sigma(Tape& tape, const UrmaParamIds& params, const UrmaGraph& graph,
                         const NetworkConfig& config) {
  int ls = wn_forward(tape, graph.phi, params.head);
  ls = tape.clamp(ls, config.log_std_min, config.log_std_max);
  if (!graph.inverse.empty()) ls = tape.gather_rows(ls, graph.inverse);
  return ls;
}

int urma_value(Tape& tape, const UrmaParamIds& params, const UrmaGraph& graph) {
  return wn_forward(tape, graph.latent, params.head);
}

}  // namespace morphrl
