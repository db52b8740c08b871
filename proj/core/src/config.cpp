#include "morphrl/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "morphrl/textio.hpp"

namespace morphrl {

namespace {

std::int64_t parse_integer(const TextLine& line) {
  const double v = parse_number(line);
  const double r = std::nearbyint(v);
  if (std::abs(v - r) > 1e-9 || std::abs(r) > 9.0e15) {
    throw ParseError(line.line_no, line.indent + 1,
                     "key '" + line.head + "' expects an integer");
  }
  return static_cast<std::int64_t>(r);
}

std::uint64_t parse_u64(const TextLine& line) {
  const std::string& v = line.value;
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError(line.line_no, line.indent + 1,
                     "key '" + line.head + "' expects an unsigned integer");
  }
  errno = 0;
  char* end = nullptr;
  const unsigned long long parsed = std::strtoull(v.c_str(), &end, 10);
  if (errno != 0 || end != v.c_str() + v.size()) {
    throw ParseError(line.line_no, line.indent + 1,
                     "key '" + line.head + "' is out of range");
  }
  return parsed;
}

[[noreturn]] void unknown_key(const TextLine& line, const std::string& section) {
  throw ParseError(line.line_no, line.indent + 1,
                   "unknown key '" + line.head + "' in [" + section + "]");
}

bool handle_train_key(RunConfig& config, const TextLine& line) {
  TrainConfig& t = config.train;
  const std::string& k = line.head;
  if (k == "method") {
    try {
      t.method = parse_policy_method(line.value);
    } catch (const std::invalid_argument& err) {
      throw ParseError(line.line_no, line.indent + 1, err.what());
    }
  } else if (k == "total_steps") {
    t.total_steps = parse_integer(line);
  } else if (k == "rollout_length") {
    t.rollout_length = static_cast<int>(parse_integer(line));
  } else if (k == "envs_per_robot") {
    t.envs_per_robot = static_cast<int>(parse_integer(line));
  } else if (k == "epochs") {
    t.epochs = static_cast<int>(parse_integer(line));
  } else if (k == "minibatches") {
    t.minibatches = static_cast<int>(parse_integer(line));
  } else if (k == "clip") {
    t.clip = parse_number(line);
  } else if (k == "gamma") {
    t.gamma = parse_number(line);
  } else if (k == "gae_lambda") {
    t.gae_lambda = parse_number(line);
  } else if (k == "learning_rate") {
    t.learning_rate = parse_number(line);
  } else if (k == "entropy_coef") {
    t.entropy_coef = parse_number(line);
  } else if (k == "value_coef") {
    t.value_coef = parse_number(line);
  } else if (k == "max_grad_norm") {
    t.max_grad_norm = parse_number(line);
  } else if (k == "adam_beta1") {
    t.adam_beta1 = parse_number(line);
  } else if (k == "adam_beta2") {
    t.adam_beta2 = parse_number(line);
  } else if (k == "adam_eps") {
    t.adam_eps = parse_number(line);
  } else if (k == "seed") {
    t.seed = parse_u64(line);
  } else if (k == "initial_beta") {
    t.initial_beta = parse_number(line);
  } else if (k == "log_every") {
    t.log_every = static_cast<int>(parse_integer(line));
  } else if (k == "checkpoint_every") {
    t.checkpoint_every = static_cast<int>(parse_integer(line));
  } else if (k == "output") {
    t.output_dir = line.value;
  } else if (k == "latent") {
    t.network.latent = static_cast<int>(parse_integer(line));
  } else if (k == "phi_hidden") {
    t.network.phi_hidden = static_cast<int>(parse_integer(line));
  } else if (k == "psi_hidden") {
    t.network.psi_hidden = static_cast<int>(parse_integer(line));
  } else if (k == "core_hidden") {
    t.network.core_hidden = static_cast<int>(parse_integer(line));
  } else if (k == "core_layers") {
    t.network.core_layers = static_cast<int>(parse_integer(line));
  } else {
    return false;
  }
  return true;
}

bool handle_ranges_key(RunConfig& config, const TextLine& line) {
  RandomizationConfig& r = config.train.env.randomization;
  const std::string& k = line.head;
  if (k == "body_size") r.er.body_size = parse_number(line);
  else if (k == "body_position") r.er.body_position = parse_number(line);
  else if (k == "mass") r.er.mass = parse_number(line);
  else if (k == "inertia") r.er.inertia = parse_number(line);
  else if (k == "com_offset") r.er.com_offset = parse_number(line);
  else if (k == "axis_tilt") r.er.axis_tilt = parse_number(line);
  else if (k == "imu_offset") r.er.imu_offset = parse_number(line);
  else if (k == "torque_limit") r.er.torque_limit = parse_number(line);
  else if (k == "velocity_limit") r.er.velocity_limit = parse_number(line);
  else if (k == "position_limit") r.er.position_limit = parse_number(line);
  else if (k == "damping") r.er.damping = parse_number(line);
  else if (k == "friction") r.er.friction = parse_number(line);
  else if (k == "armature") r.er.armature = parse_number(line);
  else if (k == "stiffness") r.er.stiffness = parse_number(line);
  else if (k == "nominal_position") r.er.nominal_position = parse_number(line);
  else if (k == "kp") r.er.kp = parse_number(line);
  else if (k == "kd") r.er.kd = parse_number(line);
  else if (k == "action_scale") r.er.action_scale = parse_number(line);
  else if (k == "resample_probability_max") r.er.resample_probability_max = parse_number(line);
  else if (k == "dr_multiplier") r.dr.multiplier_half_width = parse_number(line);
  else if (k == "noise_joint_position") r.dr.noise_joint_position = parse_number(line);
  else if (k == "noise_joint_velocity") r.dr.noise_joint_velocity = parse_number(line);
  else if (k == "noise_lin_vel") r.dr.noise_lin_vel = parse_number(line);
  else if (k == "noise_ang_vel") r.dr.noise_ang_vel = parse_number(line);
  else if (k == "noise_gravity") r.dr.noise_gravity = parse_number(line);
  else if (k == "inertia_share") r.inertia_share = parse_number(line);
  else if (k == "parallel_axis_share") r.parallel_axis_share = parse_number(line);
  else if (k == "action_scale_nominal") r.action_scale_nominal = parse_number(line);
  else if (k == "min_scale") r.min_scale = parse_number(line);
  else return false;
  return true;
}

bool handle_curriculum_key(RunConfig& config, const TextLine& line) {
  CurriculumConfig& c = config.train.curriculum;
  const std::string& k = line.head;
  if (k == "delta_beta") c.delta_beta = parse_number(line);
  else if (k == "min_episode_fraction") c.min_episode_fraction = parse_number(line);
  else if (k == "max_tracking_error") c.max_tracking_error = parse_number(line);
  else if (k == "min_return") c.min_return = parse_number(line);
  else return false;
  return true;
}

bool handle_env_key(RunConfig& config, const TextLine& line) {
  EnvConfig& e = config.train.env;
  const std::string& k = line.head;
  if (k == "horizon") e.horizon = static_cast<int>(parse_integer(line));
  else if (k == "tracking_weight") e.reward.tracking_weight = parse_number(line);
  else if (k == "tracking_width") e.reward.tracking_width = parse_number(line);
  else if (k == "torque_penalty") e.reward.torque_penalty = parse_pair(line);
  else if (k == "action_rate_penalty") e.reward.action_rate_penalty = parse_pair(line);
  else if (k == "joint_velocity_penalty") e.reward.joint_velocity_penalty = parse_pair(line);
  else if (k == "orientation_penalty") e.reward.orientation_penalty = parse_pair(line);
  else if (k == "command_max") {
    const auto v = parse_vec3(line);
    e.command_max = Eigen::Vector3d(v[0], v[1], v[2]);
  } else if (k == "linear_lag") e.linear_lag = parse_number(line);
  else if (k == "angular_lag") e.angular_lag = parse_number(line);
  else if (k == "angular_coupling") e.angular_coupling = parse_number(line);
  else if (k == "righting_gain") e.righting_gain = parse_number(line);
  else if (k == "tilt_limit") e.tilt_limit = parse_pair(line);
  else if (k == "push_magnitude") e.push_magnitude = parse_pair(line);
  else if (k == "push_interval") {
    const auto v = parse_pair(line);
    e.push_interval_min = v.first;
    e.push_interval_max = v.second;
  } else if (k == "contact_threshold") e.contact_threshold = parse_number(line);
  else return false;
  return true;
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  RunConfig config;
  std::string section = "train";
  std::set<std::string> seen;

  for (const TextLine& line : tokenize_kv_text(text)) {
    if (line.kind == TextLine::Kind::section) {
      if (line.head != "train" && line.head != "ranges" && line.head != "curriculum" &&
          line.head != "env" && line.head != "robots") {
        throw ParseError(line.line_no, line.indent + 1,
                         "unknown section [" + line.head + "]");
      }
      section = line.head;
      continue;
    }
    if (line.kind == TextLine::Kind::block) {
      throw ParseError(line.line_no, line.indent + 1,
                       "blocks are not allowed in run configs");
    }

    if (section == "robots") {
      if (line.head == "robot") {
        config.robots.push_back(line.value);
        continue;
      }
      if (line.head == "holdout") {
        config.holdouts.push_back(line.value);
        continue;
      }
      unknown_key(line, section);
    }

    if (!seen.insert(section + "/" + line.head).second) {
      throw ParseError(line.line_no, line.indent + 1,
                       "duplicate key '" + line.head + "' in [" + section + "]");
    }
    bool handled = false;
    if (section == "train") handled = handle_train_key(config, line);
    else if (section == "ranges") handled = handle_ranges_key(config, line);
    else if (section == "curriculum") handled = handle_curriculum_key(config, line);
    else if (section == "env") handled = handle_env_key(config, line);
    if (!handled) unknown_key(line, section);
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  RunConfig config = parse_run_config(buffer.str());

  const std::filesystem::path base = path.parent_path();
  auto resolve = [&base](std::string& p) {
    std::filesystem::path fp(p);
    if (fp.is_relative()) p = (base / fp).string();
  };
  for (std::string& p : config.robots) resolve(p);
  for (std::string& p : config.holdouts) resolve(p);
  return config;
}

}  // namespace morphrl
