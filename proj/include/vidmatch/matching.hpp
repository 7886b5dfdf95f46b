#pragma once

#include "vidmatch/assumptions.hpp"
#include "vidmatch/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace vidmatch {

enum class Provenance { anchor, propagated, tracked_gap };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::anchor: return "anchor";
    case Provenance::propagated: return "propagated";
    case Provenance::tracked_gap: return "tracked-gap";
  }
  return "?";
}

/// The assignment pi: [1,n] -> [1,m] with per-frame distances.
///
/// `distance_evaluations` counts the metric calls the search itself made.
/// Filling `per_frame_distance` for frames that copied an anchor's match costs
/// one extra call each; those are tallied separately in
/// `annotation_evaluations` so the search count stays comparable with the
/// anchor-grid budget.
struct MatchAssignment {
  std::vector<Index> pi;
  std::vector<double> per_frame_distance;
  std::vector<Provenance> provenance;
  std::size_t distance_evaluations = 0;
  std::size_t annotation_evaluations = 0;

  Index size() const { return static_cast<Index>(pi.size()); }
  Index match(Index fg_id) const { return pi.at(static_cast<std::size_t>(fg_id - 1)); }
};

struct MatchCost {
  double average_cost = 0.0;
  double max_cost = 0.0;
};

/// Multiples of k in [1, length] together with 1 and length, ascending, no duplicates.
inline std::vector<Index> anchor_set(Index length, Index k) {
  if (length < 1) throw std::invalid_argument("anchor_set: empty range");
  if (k < 1) throw std::invalid_argument("anchor_set: stride must be >= 1");
  std::vector<Index> out{1};
  for (Index v = k; v <= length; v += k)
    if (v != out.back()) out.push_back(v);
  if (out.back() != length) out.push_back(length);
  return out;
}

/// Closest anchor to i; ties go to the smaller anchor.
inline Index nearest_anchor(const std::vector<Index>& anchors, Index i) {
  auto hi = std::lower_bound(anchors.begin(), anchors.end(), i);
  if (hi == anchors.end()) return anchors.back();
  if (*hi == i || hi == anchors.begin()) return *hi;
  auto lo = std::prev(hi);
  return (i - *lo) <= (*hi - i) ? *lo : *hi;
}

namespace detail {

template <typename Scalar>
struct CountedMetric {
  const FrameSequence<Scalar>& fg;
  const FrameSequence<Scalar>& bg;
  const DistanceMetric<Scalar>& metric;
  std::size_t calls = 0;

  double operator()(Index i, Index j) {
    ++calls;
    return static_cast<double>(metric(fg.frame(i), bg.frame(j)));
  }
};

inline void check_stride(Index k, Index n, Index m) {
  if (k < 1 || k > std::min(n, m))
    throw std::invalid_argument("stride k=" + std::to_string(k) + " outside [1," +
                                std::to_string(std::min(n, m)) + "]");
}

}  // namespace detail

/// Exhaustive argmin per foreground frame. Optimal for the average cost.
template <typename Scalar>
MatchAssignment naive_match(const FrameSequence<Scalar>& fg, const FrameSequence<Scalar>& bg,
                            const DistanceMetric<Scalar>& metric) {
  metric.check_shape(fg, bg);
  detail::CountedMetric<Scalar> d{fg, bg, metric};
  MatchAssignment out;
  for (Index i = 1; i <= fg.size(); ++i) {
    Index best = 1;
    double best_d = d(i, 1);
    for (Index j = 2; j <= bg.size(); ++j) {
      const double dij = d(i, j);
      if (dij < best_d) {
        best_d = dij;
        best = j;
      }
    }
    out.pi.push_back(best);
    out.per_frame_distance.push_back(best_d);
    out.provenance.push_back(Provenance::anchor);
  }
  out.distance_evaluations = d.calls;
  return out;
}

/// Stride-k matching: only anchor foreground frames are compared, and only
/// against anchor background frames. Every other foreground frame copies the
/// match of its nearest anchor.
template <typename Scalar>
MatchAssignment near_linear_match(const FrameSequence<Scalar>& fg,
                                  const FrameSequence<Scalar>& bg,
                                  const DistanceMetric<Scalar>& metric, Index k) {
  metric.check_shape(fg, bg);
  detail::check_stride(k, fg.size(), bg.size());
  const auto fg_anchors = anchor_set(fg.size(), k);
  const auto bg_anchors = anchor_set(bg.size(), k);

  detail::CountedMetric<Scalar> d{fg, bg, metric};
  const auto n = static_cast<std::size_t>(fg.size());
  MatchAssignment out;
  out.pi.assign(n, 0);
  out.per_frame_distance.assign(n, 0.0);
  out.provenance.assign(n, Provenance::propagated);

  for (Index i : fg_anchors) {
    Index best = bg_anchors.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (Index j : bg_anchors) {
      const double dij = d(i, j);
      if (dij < best_d) {
        best_d = dij;
        best = j;
      }
    }
    out.pi[static_cast<std::size_t>(i - 1)] = best;
    out.per_frame_distance[static_cast<std::size_t>(i - 1)] = best_d;
    out.provenance[static_cast<std::size_t>(i - 1)] = Provenance::anchor;
  }
  out.distance_evaluations = d.calls;

  std::size_t annotations = 0;
  for (Index i = 1; i <= fg.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i - 1);
    if (out.provenance[idx] == Provenance::anchor) continue;
    out.pi[idx] = out.pi[static_cast<std::size_t>(nearest_anchor(fg_anchors, i) - 1)];
    out.per_frame_distance[idx] = static_cast<double>(metric(fg.frame(i), bg.frame(out.pi[idx])));
    ++annotations;
  }
  out.annotation_evaluations = annotations;
  return out;
}

/// Upper bound on the search evaluations of near_linear_match.
inline std::size_t near_linear_budget(Index n, Index m, Index k) {
  return static_cast<std::size_t>((n / k + 2) * (m / k + 2));
}

struct LocalSearchResult {
  StrongMatchSet matches;
  Index best_index = 0;  // argmin over every background frame evaluated
  double best_distance = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
};

/// Coarse-to-fine strong-match search for one foreground frame: probe the
/// stride-k background anchors, then scan [j - gamma, j + gamma] around every
/// probe that is a strong match. Each background frame is evaluated at most
/// once. gamma = 0 reduces to the probes alone.
template <typename Scalar>
LocalSearchResult local_search(const FrameView<Scalar>& f, const FrameSequence<Scalar>& bg,
                               const DistanceMetric<Scalar>& metric, Index k, Index gamma,
                               double psi) {
  if (k < 1) throw std::invalid_argument("local_search: k must be >= 1");
  if (gamma < 0) throw std::invalid_argument("local_search: gamma must be >= 0");
  if (!(psi >= 0)) throw std::invalid_argument("local_search: psi must be >= 0");
  const Index m = bg.size();
  std::vector<double> seen(static_cast<std::size_t>(m), std::numeric_limits<double>::quiet_NaN());
  LocalSearchResult out;

  auto eval = [&](Index j) {
    auto& slot = seen[static_cast<std::size_t>(j - 1)];
    if (std::isnan(slot)) {
      slot = static_cast<double>(metric(f, bg.frame(j)));
      ++out.evaluations;
    }
    return slot;
  };

  const auto probes = anchor_set(m, std::min(k, m));
  for (Index j : probes) eval(j);
  for (Index j : probes) {
    if (seen[static_cast<std::size_t>(j - 1)] > psi) continue;
    for (Index x = std::max<Index>(1, j - gamma); x <= std::min(m, j + gamma); ++x) eval(x);
  }

  out.matches.fg_index = f.id;
  for (Index j = 1; j <= m; ++j) {
    const double dj = seen[static_cast<std::size_t>(j - 1)];
    if (std::isnan(dj)) continue;
    if (dj < out.best_distance) {
      out.best_distance = dj;
      out.best_index = j;
    }
    if (dj <= psi) {
      out.matches.bg_indices.push_back(j);
      out.matches.distances.push_back(dj);
    }
  }
  return out;
}

template <typename Scalar>
StrongMatchSet local_search_match(const FrameView<Scalar>& f, const FrameSequence<Scalar>& bg,
                                  const DistanceMetric<Scalar>& metric, Index k, Index gamma,
                                  double psi) {
  if (gamma < 1) throw std::invalid_argument("local_search_match: gamma must be >= 1");
  if (!(psi > 0)) throw std::invalid_argument("local_search_match: psi must be > 0");
  return local_search(f, bg, metric, k, gamma, psi).matches;
}

struct PipelineOptions {
  Index fg_stride = 1;
  Index bg_stride = 1;
  Index gamma = 1;  // 0 disables the local window scan
  double psi = 0.0;
};

/// Strong-match sets for every foreground frame. `source[i]` is the
/// foreground anchor whose search produced frame i's set.
struct PipelineResult {
  MatchAssignment assignment;
  std::vector<StrongMatchSet> strong;
  std::vector<Index> source;
};

/// Strided foreground, local search per foreground anchor, and
/// nearest-anchor propagation for the rest. Frames whose anchor found no
/// strong match are tagged tracked-gap; pi still records the best background
/// frame the search saw.
template <typename Scalar>
PipelineResult strided_pipeline(const FrameSequence<Scalar>& fg, const FrameSequence<Scalar>& bg,
                                const DistanceMetric<Scalar>& metric,
                                const PipelineOptions& opt) {
  metric.check_shape(fg, bg);
  detail::check_stride(opt.fg_stride, fg.size(), fg.size());
  detail::check_stride(opt.bg_stride, bg.size(), bg.size());
  const auto n = static_cast<std::size_t>(fg.size());
  const auto anchors = anchor_set(fg.size(), opt.fg_stride);

  PipelineResult out;
  auto& a = out.assignment;
  a.pi.assign(n, 0);
  a.per_frame_distance.assign(n, 0.0);
  a.provenance.assign(n, Provenance::propagated);
  out.strong.resize(n);
  out.source.assign(n, 0);

  for (Index i : anchors) {
    auto found = local_search(fg.frame(i), bg, metric, opt.bg_stride, opt.gamma, opt.psi);
    const auto idx = static_cast<std::size_t>(i - 1);
    a.distance_evaluations += found.evaluations;
    a.pi[idx] = found.best_index;
    a.per_frame_distance[idx] = found.best_distance;
    a.provenance[idx] = found.matches.empty() ? Provenance::tracked_gap : Provenance::anchor;
    out.strong[idx] = std::move(found.matches);
    out.source[idx] = i;
  }

  for (Index i = 1; i <= fg.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i - 1);
    if (out.source[idx] == i) continue;
    const Index near = nearest_anchor(anchors, i);
    const auto nidx = static_cast<std::size_t>(near - 1);
    a.pi[idx] = a.pi[nidx];
    a.per_frame_distance[idx] = static_cast<double>(metric(fg.frame(i), bg.frame(a.pi[idx])));
    ++a.annotation_evaluations;
    a.provenance[idx] =
        out.strong[nidx].empty() ? Provenance::tracked_gap : Provenance::propagated;
    out.strong[idx] = out.strong[nidx];
    out.strong[idx].fg_index = i;
    out.source[idx] = near;
  }
  return out;
}

/// Local search on both sequences with a shared stride k.
template <typename Scalar>
PipelineResult full_pipeline_match(const FrameSequence<Scalar>& fg,
                                   const FrameSequence<Scalar>& bg,
                                   const DistanceMetric<Scalar>& metric, Index k, Index gamma,
                                   double psi) {
  if (gamma < 1) throw std::invalid_argument("full_pipeline_match: gamma must be >= 1");
  if (!(psi > 0)) throw std::invalid_argument("full_pipeline_match: psi must be > 0");
  return strided_pipeline(fg, bg, metric, PipelineOptions{k, k, gamma, psi});
}

/// Recomputes C(pi) from the metric, ignoring stored per-frame distances.
template <typename Scalar>
MatchCost matching_cost(const MatchAssignment& assignment, const FrameSequence<Scalar>& fg,
                        const FrameSequence<Scalar>& bg, const DistanceMetric<Scalar>& metric) {
  if (assignment.size() != fg.size())
    throw std::invalid_argument("assignment length does not match foreground");
  MatchCost cost;
  double sum = 0.0;
  for (Index i = 1; i <= fg.size(); ++i) {
    const double d = static_cast<double>(metric(fg.frame(i), bg.frame(assignment.match(i))));
    sum += d;
    cost.max_cost = std::max(cost.max_cost, d);
  }
  cost.average_cost = sum / static_cast<double>(fg.size());
  return cost;
}

/// Aggregates of the stored per-frame distances (for cross-checking matching_cost).
inline MatchCost stored_cost(const MatchAssignment& assignment) {
  MatchCost cost;
  double sum = 0.0;
  for (double d : assignment.per_frame_distance) {
    sum += d;
    cost.max_cost = std::max(cost.max_cost, d);
  }
  if (!assignment.per_frame_distance.empty())
    cost.average_cost = sum / static_cast<double>(assignment.per_frame_distance.size());
  return cost;
}

struct BoundAuditRow {
  Index k = 1;
  double cost = 0.0;             // C(pi_k)
  double bound = 0.0;            // C(pi*) + k delta
  double epsilon_bound = 0.0;    // epsilon + k delta
  double anchor_excess = 0.0;    // max over anchors of d(f_i, b_pi(i)) - min_j d(f_i, b_j)
  bool anchor_within_half = true;  // anchor_excess <= k delta / 2
  bool satisfied = false;        // cost <= bound within tolerance
  bool epsilon_satisfied = false;
  std::size_t evaluations = 0;
  std::size_t budget = 0;        // (floor(n/k)+2)(floor(m/k)+2)
  double speedup = 0.0;          // naive evaluations / evaluations
};

struct BoundAuditReport {
  double delta = 0.0;
  double epsilon = 0.0;
  double cost_naive = 0.0;
  std::size_t naive_evaluations = 0;
  std::vector<BoundAuditRow> rows;

  bool all_satisfied() const {
    return std::all_of(rows.begin(), rows.end(), [](const BoundAuditRow& r) {
      return r.satisfied && r.epsilon_satisfied && r.evaluations <= r.budget;
    });
  }
};

inline constexpr double kBoundTolerance = 1e-9;

inline bool within_bound(double value, double bound) {
  return value <= bound + kBoundTolerance * std::max(1.0, std::abs(bound));
}

/// Checks C(near_linear(k)) <= C(naive) + k delta for each k. delta and
/// epsilon are the caller's claimed constants; pass measured values to audit
/// an instance, or understated ones to see violations reported.
template <typename Scalar>
BoundAuditReport bound_audit(const FrameSequence<Scalar>& fg, const FrameSequence<Scalar>& bg,
                             const DistanceMetric<Scalar>& metric, double delta, double epsilon,
                             const std::vector<Index>& ks) {
  if (!metric.is_metric())
    throw std::invalid_argument("bound_audit: bounds hold only for metric distances");
  BoundAuditReport report;
  report.delta = delta;
  report.epsilon = epsilon;
  const auto naive = naive_match(fg, bg, metric);
  report.cost_naive = matching_cost(naive, fg, bg, metric).average_cost;
  report.naive_evaluations = naive.distance_evaluations;

  for (Index k : ks) {
    const auto approx = near_linear_match(fg, bg, metric, k);
    BoundAuditRow row;
    row.k = k;
    row.cost = matching_cost(approx, fg, bg, metric).average_cost;
    row.bound = report.cost_naive + static_cast<double>(k) * delta;
    row.epsilon_bound = epsilon + static_cast<double>(k) * delta;
    row.satisfied = within_bound(row.cost, row.bound);
    row.epsilon_satisfied = within_bound(row.cost, row.epsilon_bound);
    for (Index i = 1; i <= fg.size(); ++i) {
      const auto idx = static_cast<std::size_t>(i - 1);
      if (approx.provenance[idx] != Provenance::anchor) continue;
      row.anchor_excess = std::max(row.anchor_excess, approx.per_frame_distance[idx] -
                                                          naive.per_frame_distance[idx]);
    }
    row.anchor_within_half = within_bound(row.anchor_excess, 0.5 * static_cast<double>(k) * delta);
    row.evaluations = approx.distance_evaluations;
    row.budget = near_linear_budget(fg.size(), bg.size(), k);
    row.speedup = static_cast<double>(report.naive_evaluations) /
                  static_cast<double>(std::max<std::size_t>(1, row.evaluations));
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace vidmatch
