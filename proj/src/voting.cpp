#include "vidmatch/voting.hpp"

#include "vidmatch/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vidmatch {

void NoiseModel::validate() const {
  if (!(p1 > 0 && p1 <= 1) || !(p2 > 0 && p2 <= 1))
    throw std::invalid_argument("NoiseModel: p1, p2 must lie in (0,1]");
  if (!(beta() > 0)) throw std::invalid_argument("NoiseModel: p1 + p2 must exceed 1");
}

void VoteParams::validate() const {
  if (!(tau_v > 0 && tau_v < 1)) throw std::invalid_argument("VoteParams: tau_v must be in (0,1)");
  if (!std::isfinite(tau_s)) throw std::invalid_argument("VoteParams: tau_s must be finite");
}

ForegroundMask subtract(const PixelGrid<double>& observation, const PixelGrid<double>& aligned,
                        double tau_s) {
  if (observation.width() != aligned.width() || observation.height() != aligned.height() ||
      observation.channel_count() != aligned.channel_count())
    throw std::invalid_argument("subtract: grid dimensions differ");
  Channel<double> diff = (observation.channel(0) - aligned.channel(0)).abs();
  for (std::size_t c = 1; c < observation.channel_count(); ++c)
    diff = diff.max((observation.channel(c) - aligned.channel(c)).abs());
  return {diff > tau_s};
}

int min_votes_for(double tau_v, int r) {
  int c = static_cast<int>(std::floor(tau_v * r));
  // Guard against floating error in tau_v * r.
  while (c > 0 && static_cast<double>(c) / r > tau_v) --c;
  while (static_cast<double>(c) / r <= tau_v) ++c;
  return c;
}

FusedMask vote_fuse(std::span<const ForegroundMask> masks, double tau_v) {
  if (masks.empty()) throw std::invalid_argument("vote_fuse: no masks");
  const auto rows = masks.front().grid.rows();
  const auto cols = masks.front().grid.cols();
  FusedMask out;
  out.votes = VoteGrid::Zero(rows, cols);
  for (const auto& m : masks) {
    if (m.grid.rows() != rows || m.grid.cols() != cols)
      throw std::invalid_argument("vote_fuse: mask dimensions differ");
    out.votes += m.grid.cast<int>();
  }
  out.r = static_cast<int>(masks.size());
  out.min_votes = min_votes_for(tau_v, out.r);
  out.grid = out.votes.cast<double>() / static_cast<double>(out.r) > tau_v;
  return out;
}

FusedMask extract_foreground(const PixelGrid<double>& observation,
                             std::span<const PixelGrid<double>> aligned_backgrounds,
                             const VoteParams& params) {
  if (aligned_backgrounds.empty())
    throw std::invalid_argument("extract_foreground: no aligned backgrounds");
  std::vector<ForegroundMask> masks;
  masks.reserve(aligned_backgrounds.size());
  for (const auto& b : aligned_backgrounds) masks.push_back(subtract(observation, b, params.tau_s));
  return vote_fuse(masks, params.tau_v);
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need >= 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

namespace {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

// Rate of {count / r > t} != truth, where count ~ Binomial(r, p_vote) and
// truth says whether the pixel is foreground. Votes are drawn from q instead
// of p_vote and reweighted by the likelihood ratio.
Estimate tilted_error(Rng& rng, int r, double p_vote, double q, double t, bool truth_fg,
                      std::size_t trials) {
  if (p_vote <= 0.0 || p_vote >= 1.0 || q <= 0.0 || q >= 1.0) {
    // Degenerate vote distribution: the outcome is deterministic.
    const int count = p_vote >= 1.0 ? r : 0;
    const bool fg = static_cast<double>(count) / r > t;
    return {fg != truth_fg ? 1.0 : 0.0, 0.0};
  }
  const double log_hit = std::log(p_vote / q);
  const double log_miss = std::log((1.0 - p_vote) / (1.0 - q));
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < trials; ++s) {
    int count = 0;
    for (int v = 0; v < r; ++v) count += rng.bernoulli(q) ? 1 : 0;
    const bool fg = static_cast<double>(count) / r > t;
    if (fg == truth_fg) continue;
    const double w = std::exp(count * log_hit + (r - count) * log_miss);
    sum += w;
    sum_sq += w * w;
  }
  const double n = static_cast<double>(trials);
  const double mean = sum / n;
  const double var = std::max(sum_sq / n - mean * mean, 0.0);
  return {mean, std::sqrt(var / n)};
}

double direct_error(Rng& rng, int r, double p_vote, double t, bool truth_fg, std::size_t trials) {
  std::size_t wrong = 0;
  for (std::size_t s = 0; s < trials; ++s) {
    int count = 0;
    for (int v = 0; v < r; ++v) count += rng.bernoulli(p_vote) ? 1 : 0;
    const bool fg = static_cast<double>(count) / r > t;
    if (fg != truth_fg) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(trials);
}

}  // namespace

VoteErrorReport simulate_vote_error(const NoiseModel& model, double t,
                                    const std::vector<int>& r_values, std::size_t trials,
                                    std::uint64_t seed) {
  model.validate();
  const double lo = 1.0 - model.p2, hi = model.p1;
  if (!(t > lo && t < hi))
    throw std::invalid_argument("simulate_vote_error: t must lie in (1 - p2, p1)");
  if (trials == 0) throw std::invalid_argument("simulate_vote_error: trials must be > 0");

  VoteErrorReport report;
  report.model = model;
  report.t = t;
  report.trials = trials;
  const double beta = model.beta();
  const bool canonical = std::abs(t - (model.p1 - beta / 2.0)) < 1e-12;
  const double fg_rate = (t - model.p1) * (t - model.p1) / (2.0 * model.p1);
  const double q_bg = 1.0 - model.p2;  // chance a background pixel gets a foreground vote
  const double bg_rate = q_bg > 0 ? (t - q_bg) * (t - q_bg) / (2.0 * q_bg) : INFINITY;

  std::vector<double> fit_r, fit_log;
  for (std::size_t idx = 0; idx < r_values.size(); ++idx) {
    const int r = r_values[idx];
    if (r < 1) throw std::invalid_argument("simulate_vote_error: r must be >= 1");
    VoteErrorRow row;
    row.r = r;
    Rng direct_rng(derive_seed(seed, {0x646972ULL, static_cast<std::uint64_t>(r)}));
    row.fg_error = direct_error(direct_rng, r, model.p1, t, true, trials);
    row.bg_error = direct_error(direct_rng, r, q_bg, t, false, trials);
    row.empirical_error = std::max(row.fg_error, row.bg_error);

    // Tilting the vote probability to the threshold puts the error event at
    // the centre of the sampling distribution.
    Rng tilt_rng(derive_seed(seed, {0x746c74ULL, static_cast<std::uint64_t>(r)}));
    const auto fg = tilted_error(tilt_rng, r, model.p1, t, t, true, trials);
    const auto bg = tilted_error(tilt_rng, r, q_bg, t, t, false, trials);
    row.fg_error_is = fg.mean;
    row.bg_error_is = bg.mean;
    const auto& worst = fg.mean >= bg.mean ? fg : bg;
    row.estimated_error = worst.mean;
    row.estimated_error_se = worst.se;

    row.fg_exponent_bound = std::exp(-fg_rate * r);
    row.bg_exponent_bound = std::exp(-bg_rate * r);
    const double reference =
        canonical ? std::exp(-(beta * beta / (8.0 * model.p1)) * r)
                  : std::max(row.fg_exponent_bound, row.bg_exponent_bound);
    if (canonical) row.chernoff_bound = reference;
    row.sampling_sigma = std::sqrt(reference * (1.0 - reference) / static_cast<double>(trials));

    if (row.estimated_error > 0) {
      fit_r.push_back(static_cast<double>(r));
      fit_log.push_back(std::log(row.estimated_error));
    }
    report.rows.push_back(row);
  }
  report.fitted_points = fit_r.size();
  if (fit_r.size() >= 2) {
    const auto fit = fit_line(fit_r, fit_log);
    report.log_slope = fit.slope;
    report.log_r_squared = fit.r_squared;
  }
  return report;
}

}  // namespace vidmatch
