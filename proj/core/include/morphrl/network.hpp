#pragma once

#include "morphrl/randomization.hpp"
#include "morphrl/rng.hpp"
#include "morphrl/tape.hpp"

#include <string>
#include <vector>

namespace morphrl {

/// Widths of the embodiment-aware actor-critic. Defaults are the shapes the
/// training experiments run with; tests shrink them for speed.
struct NetworkConfig {
  int desc_width = kDescWidth;  // per-joint description entries
  int actor_joint_obs = 4;      // q, qd, previous action, track flag
  int critic_joint_obs = 5;     // + foot contact
  int general_obs = 13;         // v(3), w(3), gravity(3), command(3), beta
  int latent = 128;             // L_d, shared latent width
  int phi_hidden = 128;         // description encoder hidden width
  int psi_hidden = 256;         // observation encoder hidden width
  int core_hidden = 256;
  int core_layers = 5;
  double log_std_min = -5.0;
  double log_std_max = 2.0;

  void validate() const;  // throws std::invalid_argument
};

/// Parameter ids of one WeightNorm dense layer in a ParamStore.
struct LayerParamIds {
  int g = -1;
  int v = -1;
  int b = -1;
};

/// Parameter ids of one complete network (actor or critic): description
/// encoder f_phi with temperature tau, observation encoder f_psi, core
/// h_theta, and a scalar head (log-std for the actor, value for the critic).
struct UrmaParamIds {
  std::string prefix;
  int joint_obs_width = 0;
  bool actor_head = false;
  std::vector<LayerParamIds> phi;
  std::vector<LayerParamIds> psi;
  std::vector<LayerParamIds> core;
  LayerParamIds head;
  int log_tau = -1;
};

/// Node ids of a forward pass. Per-joint tensors live in sorted row space:
/// rows are reordered by the joint-index description entry per environment
/// block so the reduction order is independent of input permutation.
struct UrmaGraph {
  int phi = -1;     // [N x latent], encoder output before temperature
  int alpha = -1;   // [N x latent], attention weights
  int latent = -1;  // [B x latent], core output
  int joints = 0;
  std::vector<int> order;    // sorted row -> original row; empty if identity
  std::vector<int> inverse;  // original row -> sorted row; empty if identity
};

/// Orthogonal init scaled by gain (rows of the result are orthonormal times
/// gain when rows <= cols, columns otherwise).
Mat orthogonal_init(int rows, int cols, double gain, RandomStream& stream);

/// Adds one WeightNorm dense layer: v orthogonally initialized, g set to the
/// row norms of v so the initial effective weights equal v exactly.
LayerParamIds add_wn_layer(ParamStore& store, const std::string& name, int in, int out,
                           double gain, RandomStream& stream, double bias_init = 0.0);

/// Dense layer application on the tape (pushes the three param nodes).
int wn_forward(Tape& tape, int x, const LayerParamIds& layer);

UrmaParamIds create_urma_params(ParamStore& store, const std::string& prefix,
                                int joint_obs_width, bool actor_head,
                                const NetworkConfig& config, RandomStream& stream);

/// Re-binds ids against an existing store (e.g. after checkpoint load);
/// throws std::runtime_error naming the first missing or misshaped tensor.
UrmaParamIds locate_urma_params(const ParamStore& store, const std::string& prefix,
                                int joint_obs_width, bool actor_head,
                                const NetworkConfig& config);

/// Shared forward: joint encoder with attention, summation into the joint
/// latent, core network. desc/obs_joint are [N x w] with N = B * joints;
/// obs_general is [B x general_obs].
UrmaGraph urma_forward(Tape& tape, const UrmaParamIds& params, const Mat& desc,
                       const Mat& obs_joint, const Mat& obs_general, int joints,
                       const NetworkConfig& config);

/// Per-joint action means, [N x 1] in original row order.
int urma_actor_mu(Tape& tape, const UrmaGraph& graph);
/// Per-joint clamped log standard deviations, [N x 1] in original row order.
int urma_actor_log_sigma(Tape& tape, const UrmaParamIds& params, const UrmaGraph& graph,
                         const NetworkConfig& config);
/// State values, [B x 1].
int urma_value(Tape& tape, const UrmaParamIds& params, const UrmaGraph& graph);

}  // namespace morphrl
