#pragma once

#include "vidmatch/grid.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vidmatch {

/// Mask per (observation, aligned background) pair.
struct ForegroundMask {
  Mask grid;
};

/// Per-pixel vote fusion over r hypotheses. grid == (votes / r > tau_v).
struct FusedMask {
  Mask grid;
  VoteGrid votes;
  int r = 0;
  int min_votes = 0;  // votes >= min_votes  <=>  votes / r > tau_v
};

/// Pixel noise of one subtraction hypothesis: a true-foreground pixel is
/// reported as foreground with probability p1, a true-background pixel as
/// background with probability p2.
struct NoiseModel {
  double p1 = 0.9;
  double p2 = 0.9;

  double beta() const { return p1 + p2 - 1.0; }
  void validate() const;
};

struct VoteParams {
  double tau_s = 0.1;  // subtraction threshold
  double tau_v = 0.5;  // vote-fraction threshold

  void validate() const;
};

/// Foreground where the largest per-channel absolute difference exceeds tau_s.
ForegroundMask subtract(const PixelGrid<double>& observation, const PixelGrid<double>& aligned,
                        double tau_s);

/// Smallest vote count whose fraction of r is strictly above tau_v.
int min_votes_for(double tau_v, int r);

FusedMask vote_fuse(std::span<const ForegroundMask> masks, double tau_v);

/// Subtract the observation from every aligned background and fuse the results.
FusedMask extract_foreground(const PixelGrid<double>& observation,
                             std::span<const PixelGrid<double>> aligned_backgrounds,
                             const VoteParams& params);

struct VoteErrorRow {
  int r = 0;
  // Direct Monte-Carlo misclassification rates.
  double fg_error = 0.0;
  double bg_error = 0.0;
  double empirical_error = 0.0;  // max of the two classes
  // Importance-sampled estimates (exponentially tilted votes); resolve rates
  // far below 1 / trials.
  double fg_error_is = 0.0;
  double bg_error_is = 0.0;
  double estimated_error = 0.0;  // max of the two classes
  double estimated_error_se = 0.0;
  // Bounds. chernoff_bound is exp(-(beta^2 / 8 p1) r), reported only when
  // t = p1 - beta / 2; otherwise the two per-class exponents are what applies.
  std::optional<double> chernoff_bound;
  double fg_exponent_bound = 0.0;  // exp(-((t - p1)^2 / 2 p1) r)
  double bg_exponent_bound = 0.0;  // exp(-((t - (1 - p2))^2 / 2 (1 - p2)) r)
  double sampling_sigma = 0.0;     // binomial sd of the direct rate at the bound
};

struct VoteErrorReport {
  NoiseModel model;
  double t = 0.0;
  std::size_t trials = 0;
  std::vector<VoteErrorRow> rows;
  // Least-squares fit of log(estimated_error) against r over rows with a
  // positive estimate.
  double log_slope = 0.0;
  double log_r_squared = 0.0;
  std::size_t fitted_points = 0;
};

/// Monte-Carlo of the voting rule under the (p1, p2) model: for each r, draws
/// r independent votes for a foreground-truth and a background-truth pixel
/// and classifies with votes / r > t.
VoteErrorReport simulate_vote_error(const NoiseModel& model, double t,
                                    const std::vector<int>& r_values, std::size_t trials,
                                    std::uint64_t seed);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace vidmatch
