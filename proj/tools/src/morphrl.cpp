#include <Eigen/Core>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"

#include "morphrl/checkpoint.hpp"
#include "morphrl/config.hpp"
#include "morphrl/env.hpp"
#include "morphrl/morphology.hpp"
#include "morphrl/policy.hpp"
#include "morphrl/randomization.hpp"
#include "morphrl/textio.hpp"
#include "morphrl/trainer.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

void apply_thread_env() {
  const char* value = std::getenv("MORPHRL_THREADS");
  if (value == nullptr || *value == '\0') return;
  const int threads = std::atoi(value);
  if (threads > 0) Eigen::setNbThreads(threads);
}

std::vector<morphrl::Morphology> load_robots(const std::vector<std::string>& paths) {
  std::vector<morphrl::Morphology> robots;
  robots.reserve(paths.size());
  for (const std::string& path : paths) {
    robots.push_back(morphrl::load_morphology(path));
  }
  return robots;
}

struct TrainArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string output;
  std::string method;
  std::int64_t steps = 0;
  bool verbose = false;
};

int cmd_train(const TrainArgs& args, bool seed_set, bool out_set, bool method_set,
              bool steps_set) {
  morphrl::RunConfig run = morphrl::load_run_config(args.config_path);
  if (seed_set) run.train.seed = args.seed;
  if (out_set) run.train.output_dir = args.output;
  if (method_set) run.train.method = morphrl::parse_policy_method(args.method);
  if (steps_set) run.train.total_steps = args.steps;
  run.train.quiet = !args.verbose;
  if (run.robots.empty()) {
    throw std::invalid_argument("config lists no robots in [robots]");
  }
  if (run.train.output_dir.empty()) {
    run.train.output_dir =
        "runs/" + std::filesystem::path(args.config_path).stem().string();
  }

  morphrl::Trainer trainer(load_robots(run.robots), run.train);
  const auto t0 = std::chrono::steady_clock::now();
  const morphrl::TrainResult result = trainer.train();
  const double wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::json manifest;
  manifest["command"] = "train";
  manifest["version"] = kVersion;
  manifest["config"] = args.config_path;
  manifest["method"] = morphrl::policy_method_name(run.train.method);
  manifest["seed"] = run.train.seed;
  manifest["total_steps_requested"] = run.train.total_steps;
  manifest["steps_completed"] = result.steps;
  manifest["iterations"] = result.iterations;
  manifest["mean_final_beta"] = result.mean_final_beta;
  manifest["wall_seconds"] = wall_seconds;
  manifest["checkpoint"] = result.checkpoint_path;
  manifest["metrics"] = run.train.output_dir + "/metrics.csv";
  manifest["holdouts"] = run.holdouts;
  manifest["robots"] = nlohmann::json::array();
  for (std::size_t r = 0; r < trainer.robots().size(); ++r) {
    manifest["robots"].push_back({{"name", trainer.robots()[r].name},
                                  {"path", run.robots[r]},
                                  {"joints", trainer.robots()[r].joints.size()},
                                  {"final_beta", result.final_betas[r]}});
  }
  std::ofstream mf(run.train.output_dir + "/run_manifest.json", std::ios::trunc);
  mf << manifest.dump(2) << '\n';

  std::cout << "steps: " << result.steps << '\n'
            << "iterations: " << result.iterations << '\n'
            << "mean_final_beta: " << morphrl::format_double(result.mean_final_beta)
            << '\n'
            << "checkpoint: " << result.checkpoint_path << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string robot;
  std::string config_path;
  int episodes = 16;
  double beta = 0.3;
  std::uint64_t seed = 7;
};

int cmd_eval(const EvalArgs& args) {
  std::unique_ptr<morphrl::Policy> policy = morphrl::load_policy(args.checkpoint);
  const morphrl::Morphology robot = morphrl::load_morphology(args.robot);
  morphrl::EnvConfig env_config;
  morphrl::CurriculumConfig curriculum_config;
  if (!args.config_path.empty()) {
    const morphrl::RunConfig run = morphrl::load_run_config(args.config_path);
    env_config = run.train.env;
    curriculum_config = run.train.curriculum;
  }
  const int roster_index = policy->roster_index(robot.name);
  const morphrl::EvalResult result =
      morphrl::evaluate_policy(*policy, roster_index, robot, env_config,
                               curriculum_config, args.beta, args.episodes, args.seed);
  std::cout << "robot: " << robot.name << '\n'
            << "beta: " << morphrl::format_double(args.beta) << '\n'
            << "episodes: " << result.episodes << '\n'
            << "mean_return: " << morphrl::format_double(result.mean_return) << '\n'
            << "mean_tracking_error: "
            << morphrl::format_double(result.mean_tracking_error) << '\n'
            << "mean_length: " << morphrl::format_double(result.mean_length) << '\n'
            << "success_rate: " << morphrl::format_double(result.success_rate) << '\n';
  return kExitOk;
}

struct GenerateArgs {
  std::string robot;
  std::string config_path;
  std::string out_dir = ".";
  double beta = 1.0;
  int count = 1;
  std::uint64_t seed = 7;
};

int cmd_generate(const GenerateArgs& args) {
  const morphrl::Morphology base = morphrl::load_morphology(args.robot);
  morphrl::RandomizationConfig randomization;
  if (!args.config_path.empty()) {
    randomization = morphrl::load_run_config(args.config_path).train.env.randomization;
  }
  std::filesystem::create_directories(args.out_dir);
  morphrl::RandomStream stream(args.seed, 0x67656e);
  for (int i = 0; i < args.count; ++i) {
    const morphrl::Embodiment e =
        morphrl::sample_embodiment(base, args.beta, stream, randomization);
    morphrl::Morphology variant = morphrl::effective_morphology(base, e.er, randomization);
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "_%03d", i);
    variant.name += suffix;
    const std::string path = args.out_dir + "/" + variant.name + ".morph";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << morphrl::serialize_morphology(variant);
    std::cout << path << " joints: " << variant.joints.size()
              << " trunk_mass: " << morphrl::format_double(variant.trunk_mass) << '\n';
  }
  return kExitOk;
}

struct InspectArgs {
  std::string checkpoint;
  std::string robot;
  std::string config_path;
  std::string out;
  int steps = 1000;
  double beta = 0.3;
  std::uint64_t seed = 7;
};

int cmd_inspect(const InspectArgs& args) {
  if (args.robot.empty()) {
    const morphrl::ParamStore store = morphrl::load_checkpoint(args.checkpoint);
    std::unique_ptr<morphrl::Policy> policy = morphrl::policy_from_store(store);
    std::cout << "method: " << morphrl::policy_method_name(policy->method()) << '\n'
              << "parameters: " << policy->params().parameter_count() << '\n'
              << "tensors: " << store.size() << '\n';
    for (const morphrl::RobotSpec& spec : policy->roster()) {
      std::cout << "robot: " << spec.name << " joints: " << spec.joints << '\n';
    }
    for (int i = 0; i < store.size(); ++i) {
      const auto& entry = store.entry(i);
      std::cout << "tensor: " << entry.name << ' ' << entry.value.rows() << 'x'
                << entry.value.cols() << '\n';
    }
    return kExitOk;
  }

  std::unique_ptr<morphrl::Policy> policy = morphrl::load_policy(args.checkpoint);
  const morphrl::Morphology robot = morphrl::load_morphology(args.robot);
  morphrl::EnvConfig env_config;
  if (!args.config_path.empty()) {
    env_config = morphrl::load_run_config(args.config_path).train.env;
  }
  const int roster_index = policy->roster_index(robot.name);
  if (args.out.empty()) {
    morphrl::write_trajectory_csv(std::cout, *policy, roster_index, robot, env_config,
                                  args.beta, args.steps, args.seed);
  } else {
    std::ofstream out(args.out, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + args.out);
    morphrl::write_trajectory_csv(out, *policy, roster_index, robot, env_config,
                                  args.beta, args.steps, args.seed);
    std::cout << "trajectory: " << args.out << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training allocates and frees same-sized tape buffers every iteration;
  // keeping them on the heap instead of handing pages back roughly halves
  // the wall-clock cost of an update on glibc.
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, -1);
#endif
  apply_thread_env();

  CLI::App app{"Embodiment-randomized locomotion training on a toy analytic simulator"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a policy from a run config");
  train->add_option("--config", train_args.config_path, "Run config file")->required();
  CLI::Option* train_seed = train->add_option("--seed", train_args.seed, "Override seed");
  CLI::Option* train_out =
      train->add_option("--out", train_args.output, "Override output directory");
  CLI::Option* train_method = train->add_option(
      "--method", train_args.method, "Override method: urma, zero_padding, multi_head");
  CLI::Option* train_steps =
      train->add_option("--steps", train_args.steps, "Override total environment steps");
  train->add_flag("--verbose", train_args.verbose, "Print per-iteration progress");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a morphology");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval->add_option("--robot", eval_args.robot, "Morphology file")->required();
  eval->add_option("--config", eval_args.config_path, "Run config for env settings");
  eval->add_option("--episodes", eval_args.episodes, "Episodes to run");
  eval->add_option("--beta", eval_args.beta, "Difficulty coefficient in [0, 1]");
  eval->add_option("--seed", eval_args.seed, "Evaluation seed");

  GenerateArgs gen_args;
  CLI::App* gen =
      app.add_subcommand("generate", "Sample randomized embodiments as .morph files");
  gen->add_option("--robot", gen_args.robot, "Base morphology file")->required();
  gen->add_option("--config", gen_args.config_path, "Run config for randomization ranges");
  gen->add_option("--out", gen_args.out_dir, "Output directory");
  gen->add_option("--beta", gen_args.beta, "Difficulty coefficient in [0, 1]");
  gen->add_option("--count", gen_args.count, "Number of embodiments");
  gen->add_option("--seed", gen_args.seed, "Sampling seed");

  InspectArgs inspect_args;
  CLI::App* inspect =
      app.add_subcommand("inspect", "Describe a checkpoint or dump a trajectory");
  inspect->add_option("--checkpoint", inspect_args.checkpoint, "Checkpoint file")
      ->required();
  inspect->add_option("--robot", inspect_args.robot,
                      "Morphology file; enables the trajectory dump");
  inspect->add_option("--config", inspect_args.config_path, "Run config for env settings");
  inspect->add_option("--out", inspect_args.out, "Trajectory CSV path (default stdout)");
  inspect->add_option("--steps", inspect_args.steps, "Steps to simulate");
  inspect->add_option("--beta", inspect_args.beta, "Difficulty coefficient in [0, 1]");
  inspect->add_option("--seed", inspect_args.seed, "Trajectory seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (app.got_subcommand(train)) {
      return cmd_train(train_args, train_seed->count() > 0, train_out->count() > 0,
                       train_method->count() > 0, train_steps->count() > 0);
    }
    if (app.got_subcommand(eval)) return cmd_eval(eval_args);
    if (app.got_subcommand(gen)) return cmd_generate(gen_args);
    if (app.got_subcommand(inspect)) return cmd_inspect(inspect_args);
  } catch (const morphrl::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const morphrl::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::runtime_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
