#pragma once

#include "vidmatch/io.hpp"
#include "vidmatch/matching.hpp"
#include "vidmatch/simulator.hpp"
#include "vidmatch/tracking.hpp"
#include "vidmatch/voting.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vidmatch::eval {

/// Extraction pipelines compared in the experiments.
///  correspondence-only  stride-k probing, no tracking
///  forward              + forward mask propagation into gaps
///  forward-reverse      + forward and reverse passes, intersected
///  local-search-bg      every fg frame, strided bg probes + local window, fwd+rev
///  local-search-both    strided fg and bg + local window, fwd+rev
enum class Mode { correspondence_only, forward, forward_reverse, local_search_bg, local_search_both };

const char* to_string(Mode m);
Mode parse_mode(const std::string& s);
std::vector<Mode> all_modes();

struct ExperimentConfig {
  std::vector<double> perturbation_levels{0.0, 0.05, 0.10, 0.20, 0.30, 0.40};
  std::size_t trials_per_level = 10;
  std::vector<Index> k_sweep{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<Mode> modes = all_modes();
  std::uint64_t seed = 20130923;
  std::string output_dir = "vidmatch-out";

  // Synthetic substrate.
  Index frames = 100;
  int num_keypoints = 8;
  double radius = 1.0;
  Index width = 64;
  Index height = 64;
  double psi = 0.2;  // absolute strong-match bound; <= 0 means 2 * max(epsilon, delta)
  Index gamma = 0;   // local search radius; 0 means ceil(psi / delta)

  // Extraction.
  double tau_s = 0.1;
  double tau_v = 0.5;
  // Alignment noise of one hypothesis at distance >= psi; scales linearly to
  // noise-free at distance 0.
  double p1 = 0.85;
  double p2 = 0.97;

  std::vector<double> sweep_levels{0.05, 0.10};    // experiment 3
  std::vector<double> heatmap_levels{0.05, 0.10};  // experiment 2

  // Certification.
  std::size_t certify_instances = 100;
  std::vector<Index> certify_k{2, 5, 10};
  double delta_scale = 1.0;  // multiplies the measured delta handed to the audits
  std::size_t uniform_trials = 20000;
  std::size_t vote_trials = 100000;
  std::vector<int> vote_r{5, 10, 15, 20, 25, 30, 35, 40, 45, 50};

  // Benchmark.
  std::vector<Index> bench_sizes{100, 1000, 10000};
  std::vector<Index> bench_k{1, 10};

  std::size_t workers = 0;  // 0 = hardware concurrency

  void validate() const;
};

/// Applies `key = value` pairs; unknown keys and malformed values throw ConfigError.
void apply_config(ExperimentConfig& config, const io::KeyValues& kv);
ExperimentConfig load_config(const io::fs::path& path);
/// Canonical key = value form (sorted keys).
io::KeyValues to_key_values(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);

struct PrecisionRecall {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> precision() const;
  std::optional<double> recall() const;
  PrecisionRecall& operator+=(const PrecisionRecall& o);
};

PrecisionRecall confusion(const Mask& predicted, const Mask& truth);

struct RunResult {
  PrecisionRecall counts;
  std::size_t evaluations = 0;
  std::size_t gap_frames = 0;
  double mean_hypotheses = 0.0;
};

/// Subtraction masks of one instance, generated lazily per (fg, bg) pair and
/// shared by every mode and stride evaluated on it.
class HypothesisCache {
public:
  HypothesisCache(const sim::SimInstance& instance, const ExperimentConfig& config);
  const ForegroundMask& get(Index fg_id, Index bg_id);
  /// Aligned background for (fg_id, bg_id): truth background with labels
  /// flipped at the distance-dependent noise rate.
  PixelGrid<double> aligned_background(Index fg_id, Index bg_id) const;
  const PixelGrid<double>& observation(Index fg_id) const;

private:
  const sim::SimInstance& inst_;
  const ExperimentConfig& cfg_;
  std::vector<PixelGrid<double>> observations_;
  std::vector<std::vector<std::optional<ForegroundMask>>> cache_;
};

struct PipelineMasks {
  MaskSequence masks;             // final per-frame prediction (empty mask where none)
  PipelineResult matching;
  std::vector<GapSegment> gaps;
};

PipelineMasks run_pipeline(const sim::SimInstance& instance, Mode mode, Index k,
                           const ExperimentConfig& config, HypothesisCache& cache);

RunResult evaluate_instance(const sim::SimInstance& instance, Mode mode, Index k,
                            const ExperimentConfig& config, HypothesisCache& cache);

sim::PathSpec path_spec(const ExperimentConfig& config, double level, std::uint64_t seed);
sim::SceneSpec scene_spec(const ExperimentConfig& config);
sim::SimInstance make_instance(const ExperimentConfig& config, double level, std::size_t trial);

/// Runs fn(i) for i in [0, count) on a bounded pool. Results must be written
/// to per-index slots; scheduling never changes them.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

// Experiment tables ---------------------------------------------------------

struct SummaryRow {
  double level = 0.0;
  Index k = 1;
  Mode mode = Mode::correspondence_only;
  std::size_t trials = 0;
  double precision = 0.0;  // mean over trials with defined precision
  double recall = 0.0;
  std::size_t precision_na = 0;
  std::size_t recall_na = 0;
  double evaluations = 0.0;  // mean per trial
  double gap_frames = 0.0;
};

struct Table {
  std::string header;  // comment line, without the leading "# "
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
};

std::vector<SummaryRow> experiment1(const ExperimentConfig& config);
std::vector<SummaryRow> experiment3(const ExperimentConfig& config);
Table summary_table(const std::vector<SummaryRow>& rows, const std::string& name,
                    const ExperimentConfig& config, bool with_k);

struct HeatmapResult {
  double level = 0.0;
  Eigen::ArrayXXd likelihood;  // fraction of trials with d(f_i, b_j) <= psi
  double mean_delta = 0.0;
  double psi = 0.0;
  double gamma = 0.0;  // psi / mean delta
  double mean_run_length = 0.0;
  std::size_t runs = 0;
};

/// Strong-match likelihood across instances. `reversed` reverses both
/// sequences before thresholding.
Eigen::ArrayXXd strong_heatmap(const std::vector<sim::SimInstance>& instances, double psi,
                               bool reversed = false);

/// Mean length of maximal runs of strong matches along rows.
double mean_run_length(const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& strong,
                       std::size_t* runs = nullptr);

std::vector<HeatmapResult> experiment2(const ExperimentConfig& config);

// Certification ---------------------------------------------------------------

struct CertifyCheck {
  std::string id;
  std::string parameters;
  double observed = 0.0;
  double bound = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

/// Stride audit aggregated over the certification instances for one k.
struct StrideAuditSummary {
  Index k = 1;
  std::size_t instances = 0;
  std::size_t satisfied = 0;          // C(k) <= C* + k delta
  std::size_t epsilon_satisfied = 0;  // C(k) <= epsilon + k delta
  std::size_t anchor_within_half = 0;
  double max_excess_ratio = 0.0;      // max (C(k) - C*) / (k delta)
  std::size_t max_evaluations = 0;
  std::size_t budget = 0;             // at n = m = frames
  double min_speedup = 0.0;
};

struct CertifyReport {
  std::vector<CertifyCheck> checks;
  std::vector<StrideAuditSummary> stride;
  VoteErrorReport vote;

  bool all_passed() const;
  Table table(const ExperimentConfig& config) const;
  Table stride_table(const ExperimentConfig& config) const;
  Table vote_table(const ExperimentConfig& config) const;
};

/// Check ids, one per certified result.
const std::vector<std::string>& certified_results();

CertifyReport certify(const ExperimentConfig& config);

// Benchmark ---------------------------------------------------------------------

struct BenchRow {
  Index n = 0;
  Index k = 1;
  std::string algorithm;
  std::size_t evaluations = 0;
  double ratio = 0.0;      // naive evaluations / evaluations
  double predicted = 0.0;  // k^2
  bool within_factor_two = true;
  double wall_ms = 0.0;
};

std::vector<BenchRow> bench(const ExperimentConfig& config);
Table bench_table(const std::vector<BenchRow>& rows, const ExperimentConfig& config);

}  // namespace vidmatch::eval
