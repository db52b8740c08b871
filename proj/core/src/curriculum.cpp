#include "morphrl/curriculum.hpp"

#include <algorithm>
#include <stdexcept>

namespace morphrl {

double scale(double value_at_zero, double value_at_one, double beta) {
  return value_at_zero + (value_at_one - value_at_zero) * beta;
}

bool Curriculum::is_success(const EpisodeStats& stats) const {
  if (stats.horizon <= 0 || stats.length < 0 || stats.length > stats.horizon) {
    throw std::invalid_argument("curriculum: episode length/horizon out of range");
  }
  const double min_length = config_.min_episode_fraction * stats.horizon;
  return stats.length >= min_length &&
         stats.mean_tracking_error <= config_.max_tracking_error &&
         stats.episode_return >= config_.min_return;
}

namespace {

// n * (n + 1) / 2 as a double; exact for every streak length that matters.
double triangle(int n) { return static_cast<double>(n) * (n + 1) / 2.0; }

}  // namespace

void Curriculum::record_episode(const EpisodeStats& stats) {
  // Anchoring the streak at its starting beta and applying the triangular
  // offset in one expression keeps beta bitwise equal to
  // min(1, delta * k (k + 1) / 2) over an unbroken run from zero, instead
  // of accumulating a rounding error per episode.
  if (is_success(stats)) {
    if (successes_ == 0) streak_base_ = beta_;
    successes_ += 1;
    failures_ = 0;
    beta_ = streak_base_ + config_.delta_beta * triangle(successes_);
  } else {
    if (failures_ == 0) streak_base_ = beta_;
    failures_ += 1;
    successes_ = 0;
    beta_ = streak_base_ - config_.delta_beta * triangle(failures_);
  }
  beta_ = std::clamp(beta_, 0.0, 1.0);
}

void Curriculum::restore(double beta, int successes, int failures) {
  if (beta < 0.0 || beta > 1.0) {
    throw std::invalid_argument("curriculum: beta outside [0, 1]");
  }
  if (successes < 0 || failures < 0 || (successes > 0 && failures > 0)) {
    throw std::invalid_argument("curriculum: invalid streak counters");
  }
  beta_ = beta;
  successes_ = successes;
  failures_ = failures;
  streak_base_ = beta;
  if (successes > 0) streak_base_ = beta - config_.delta_beta * triangle(successes);
  if (failures > 0) streak_base_ = beta + config_.delta_beta * triangle(failures);
}

}  // namespace morphrl
