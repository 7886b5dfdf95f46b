#pragma once

#include "vidmatch/assumptions.hpp"
#include "vidmatch/grid.hpp"
#include "vidmatch/sequence.hpp"

#include <cstdint>
#include <vector>

namespace vidmatch::sim {

/// Camera path parameters. Both paths are sampled at the same angular
/// parameter so zero perturbation gives identical sequences.
struct PathSpec {
  int num_keypoints = 8;
  double radius = 1.0;
  double perturbation_fraction = 0.0;  // key-point displacement, fraction of radius
  Index frames = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Synthetic scene: a sphere near the circle centre seen by a pinhole camera
/// that aims at the centre (plus the pose's heading deviation).
struct SceneSpec {
  Index width = 64;
  Index height = 64;
  double object_x = 0.2;       // in units of radius
  double object_y = 0.1;
  double object_radius = 0.3;  // projects to 0.15 * width at nominal distance
  double focal = 0.5;          // in units of width

  void validate() const;
};

/// Camera pose decoded from a descriptor (x, y, radius * heading deviation).
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // absolute, radians
};

Pose pose_from_descriptor(const Eigen::Ref<const Vector<double>>& features, double radius);

/// Circle of the given radius; descriptor (x, y, 0), consecutive step is the
/// chord 2 r sin(pi / frames).
FrameSequence<double> generate_background_path(const PathSpec& spec);

/// Circle plus a closed cubic-spline displacement field through randomly
/// perturbed key points (position offset uniform in a disk of radius
/// perturbation * r, heading deviation uniform in +-perturbation rad).
FrameSequence<double> generate_foreground_path(const PathSpec& spec);

/// Exact background step for a spec.
double background_step(const PathSpec& spec);

/// Closed natural (periodic) cubic spline through values at knots 0..K-1 with period K.
class PeriodicSpline {
public:
  explicit PeriodicSpline(std::vector<double> values);
  double operator()(double t) const;

private:
  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives at knots
};

/// Projected object disk for one camera pose.
struct Projection {
  bool visible = false;
  double u = 0.0;       // centre column (continuous)
  double v = 0.0;       // centre row
  double radius = 0.0;  // pixels
};

Projection project_object(const Pose& pose, const SceneSpec& scene, double path_radius);

Mask render_mask(const Pose& pose, const SceneSpec& scene, double path_radius);

struct SimInstance {
  PathSpec path;
  SceneSpec scene;
  FrameSequence<double> fg;
  FrameSequence<double> bg;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> truth_strong;  // n x m
  std::vector<Mask> fg_truth_masks;
  AssumptionParams params;  // measured delta, epsilon; chosen psi, gamma
};

/// Ground-truth foreground labels for every foreground pose.
std::vector<Mask> render_truth_masks(const SimInstance& instance);

/// psi <= 0 selects psi_factor * max(epsilon, delta) from the measured values,
/// so perturbation 0 still yields strong matches.
SimInstance generate_instance(const PathSpec& path, const SceneSpec& scene, double psi = 0.0,
                              double psi_factor = 2.0, Index gamma = 0);

struct TrialSet {
  std::vector<double> perturbation_levels;
  std::vector<std::vector<SimInstance>> instances;  // [level][trial]
};

/// Seed for trial `trial` at a perturbation level. Keyed on the level value so
/// the same level draws the same paths in every experiment.
std::uint64_t trial_seed(std::uint64_t seed, double level, std::size_t trial);

TrialSet generate_trials(const std::vector<double>& levels, std::size_t trials_per_level,
                         const PathSpec& base, const SceneSpec& scene, double psi,
                         std::uint64_t seed);

// Random strong-match model -----------------------------------------------

enum class NeighborModel {
  adversarial,  // neighbours recede at the full rate delta per index
  random_walk   // background frames follow a smooth planar walk with steps delta
};

/// One trial: a strong match b_i with d(f, b_i) ~ Uniform[0, psi], and the
/// distances of f to b_{i+s} for s in [-gamma, gamma].
struct UniformModelSample {
  double center_distance = 0.0;
  std::vector<double> window_distances;  // size 2 gamma + 1, index gamma is the centre
};

struct UniformModelDataset {
  double psi = 0.0;
  double delta = 0.0;
  Index gamma = 0;
  NeighborModel model = NeighborModel::adversarial;
  std::vector<UniformModelSample> samples;
};

UniformModelDataset generate_uniform_model(double psi, double delta, Index gamma,
                                           std::size_t trials, std::uint64_t seed,
                                           NeighborModel model = NeighborModel::adversarial);

struct UniformModelSummary {
  double mean_window_matches = 0.0;
  double sem_window_matches = 0.0;   // standard error of the mean
  double window_lower_bound = 0.0;   // 2(gamma+1)(1 - delta gamma / (2 psi)) - 1
  double neighbor_rate = 0.0;        // fraction of b_{i +- gamma} that are strong
  double sem_neighbor_rate = 0.0;
  double neighbor_lower_bound = 0.0; // max(psi - gamma delta, 0) / psi
};

UniformModelSummary summarize(const UniformModelDataset& data);

/// Lower bound on the expected strong matches in a window of radius gamma.
double window_match_bound(double psi, double delta, Index gamma);

}  // namespace vidmatch::sim
