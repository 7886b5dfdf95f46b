#pragma once

#include "vidmatch/rng.hpp"
#include "vidmatch/sequence.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

namespace vidmatch {

/// Scene constants behind the matching guarantees: consecutive-frame bound
/// (delta), completeness bound (epsilon), strong-match bound (psi), local
/// search radius (gamma) and stride (k).
struct AssumptionParams {
  double delta = 0.0;
  double epsilon = 0.0;
  double psi = 0.0;
  Index gamma = 1;
  Index k = 1;

  void validate() const {
    if (!(delta > 0) || !(epsilon > 0) || !(psi > 0))
      throw std::invalid_argument("delta, epsilon and psi must be positive");
    if (gamma < 1 || k < 1) throw std::invalid_argument("gamma and k must be >= 1");
  }

  /// Ordering the analysis expects (psi >= epsilon > delta). Violations are
  /// reported as warnings, never errors.
  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    if (!(epsilon > delta)) out.push_back("epsilon <= delta: completeness bound not above step bound");
    if (!(psi >= epsilon)) out.push_back("psi < epsilon: strong-match bound below completeness bound");
    return out;
  }
};

/// Background frames within psi of one foreground frame, ascending by index.
struct StrongMatchSet {
  Index fg_index = 0;
  std::vector<Index> bg_indices;
  std::vector<double> distances;

  bool empty() const { return bg_indices.empty(); }
  std::size_t size() const { return bg_indices.size(); }
};

struct SmoothnessReport {
  double max_step = 0.0;
  std::vector<Index> violations;  // i such that d(x_i, x_{i+1}) > delta
};

struct CompletenessReport {
  std::vector<Index> uncovered;  // foreground ids with no background within epsilon
  double worst_best_distance = 0.0;
  std::vector<double> best_distance;  // min_j d(f_i, b_j), one per foreground frame
};

template <typename Scalar>
SmoothnessReport audit_smoothness(const FrameSequence<Scalar>& seq,
                                  const DistanceMetric<Scalar>& metric, double delta) {
  if (seq.size() < 2) throw std::invalid_argument("smoothness audit needs >= 2 frames");
  SmoothnessReport report;
  for (Index i = 1; i < seq.size(); ++i) {
    const double step = static_cast<double>(metric(seq.frame(i), seq.frame(i + 1)));
    report.max_step = std::max(report.max_step, step);
    if (step > delta) report.violations.push_back(i);
  }
  return report;
}

/// Exhaustive O(nm) scan; the reference the matching algorithms are checked against.
template <typename Scalar>
CompletenessReport audit_completeness(const FrameSequence<Scalar>& fg,
                                      const FrameSequence<Scalar>& bg,
                                      const DistanceMetric<Scalar>& metric, double epsilon) {
  metric.check_shape(fg, bg);
  CompletenessReport report;
  report.best_distance.reserve(static_cast<std::size_t>(fg.size()));
  for (Index i = 1; i <= fg.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 1; j <= bg.size(); ++j)
      best = std::min(best, static_cast<double>(metric(fg.frame(i), bg.frame(j))));
    report.best_distance.push_back(best);
    report.worst_best_distance = std::max(report.worst_best_distance, best);
    if (best > epsilon) report.uncovered.push_back(i);
  }
  return report;
}

template <typename Scalar>
StrongMatchSet strong_matches_bruteforce(const FrameView<Scalar>& f,
                                         const FrameSequence<Scalar>& bg,
                                         const DistanceMetric<Scalar>& metric, double psi) {
  StrongMatchSet out;
  out.fg_index = f.id;
  for (Index j = 1; j <= bg.size(); ++j) {
    const double d = static_cast<double>(metric(f, bg.frame(j)));
    if (d <= psi) {
      out.bg_indices.push_back(j);
      out.distances.push_back(d);
    }
  }
  return out;
}

/// delta := largest consecutive step over both sequences.
template <typename Scalar>
double estimate_delta(const FrameSequence<Scalar>& fg, const FrameSequence<Scalar>& bg,
                      const DistanceMetric<Scalar>& metric) {
  const double inf = std::numeric_limits<double>::infinity();
  return std::max(audit_smoothness(fg, metric, inf).max_step,
                  audit_smoothness(bg, metric, inf).max_step);
}

/// epsilon := max over foreground of the best background distance.
template <typename Scalar>
double estimate_epsilon(const FrameSequence<Scalar>& fg, const FrameSequence<Scalar>& bg,
                        const DistanceMetric<Scalar>& metric) {
  return audit_completeness(fg, bg, metric, std::numeric_limits<double>::infinity())
      .worst_best_distance;
}

struct TriangleAudit {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double violation_rate() const {
    return samples == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(samples);
  }
};

/// Samples triples (f_a, b_x, b_y) and checks d(f_a, b_y) <= d(f_a, b_x) + d(b_x, b_y),
/// the form of the inequality the stride bounds rely on. Requires a background
/// self-distance source (descriptors or a self table).
template <typename Scalar>
TriangleAudit audit_triangle_inequality(const FrameSequence<Scalar>& fg,
                                        const FrameSequence<Scalar>& bg,
                                        const DistanceMetric<Scalar>& metric,
                                        std::size_t samples, std::uint64_t seed,
                                        double tolerance = 1e-9) {
  Rng rng(seed);
  TriangleAudit audit;
  audit.samples = samples;
  for (std::size_t s = 0; s < samples; ++s) {
    const Index a = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(fg.size())));
    const Index x = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(bg.size())));
    const Index y = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(bg.size())));
    const double direct = static_cast<double>(metric(fg.frame(a), bg.frame(y)));
    const double via = static_cast<double>(metric(fg.frame(a), bg.frame(x))) +
                       static_cast<double>(metric(bg.frame(x), bg.frame(y)));
    if (direct > via * (1.0 + tolerance) + tolerance) ++audit.violations;
  }
  return audit;
}

}  // namespace vidmatch
