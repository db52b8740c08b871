#pragma once

#include <limits>

namespace morphrl {

/// Thresholds that decide whether a finished episode counts as a success,
/// plus the base step size of the difficulty coefficient.
struct CurriculumConfig {
  double delta_beta = 1e-3;
  double min_episode_fraction = 0.9;  // of the episode horizon
  double max_tracking_error = 0.25;   // mean |v - cmd| over the episode, m/s
  // Disabled by default; set to a finite value to also require a minimum
  // episode return.
  double min_return = -std::numeric_limits<double>::infinity();
};

/// Linear interpolation between a component's value at beta 0 and at beta 1.
/// Every quantity attached to the curriculum (randomization ranges, pushes,
/// terminations, penalties, commands) goes through this one function.
double scale(double value_at_zero, double value_at_one, double beta);

/// Per-episode summary fed back into the curriculum.
struct EpisodeStats {
  int length = 0;   // steps survived
  int horizon = 0;  // maximum episode length
  double mean_tracking_error = 0.0;
  double episode_return = 0.0;
};

/// Single-coefficient performance-based curriculum. One difficulty value
/// beta in [0, 1] scales every source of randomization and disturbance.
/// After each episode beta moves by n * delta_beta where n is the current
/// streak of consecutive successes (up) or failures (down), so sustained
/// performance accelerates the schedule instead of stepping linearly. A
/// streak of k successes from beta = 0 lands exactly on
/// min(1, delta_beta * k * (k + 1) / 2).
class Curriculum {
 public:
  explicit Curriculum(const CurriculumConfig& config = {}) : config_(config) {}

  bool is_success(const EpisodeStats& stats) const;

  /// Records one finished episode and updates beta.
  void record_episode(const EpisodeStats& stats);

  double beta() const { return beta_; }
  int consecutive_successes() const { return successes_; }
  int consecutive_failures() const { return failures_; }
  const CurriculumConfig& config() const { return config_; }

  /// Restores progress from a checkpoint.
  void restore(double beta, int successes, int failures);

 private:
  CurriculumConfig config_;
  double beta_ = 0.0;
  // Beta at the start of the current streak; the triangular offset is
  // applied to this anchor rather than accumulated episode by episode.
  double streak_base_ = 0.0;
  int successes_ = 0;
  int failures_ = 0;
};

}  // namespace morphrl
