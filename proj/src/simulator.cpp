#include "vidmatch/simulator.hpp"

#include "vidmatch/rng.hpp"

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vidmatch::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double a) { return std::remainder(a, kTwoPi); }

}  // namespace

void PathSpec::validate() const {
  if (num_keypoints < 4) throw std::invalid_argument("PathSpec: num_keypoints must be >= 4");
  if (!(radius > 0)) throw std::invalid_argument("PathSpec: radius must be > 0");
  if (!(perturbation_fraction >= 0 && perturbation_fraction < 1))
    throw std::invalid_argument("PathSpec: perturbation_fraction must be in [0,1)");
  if (frames < 2) throw std::invalid_argument("PathSpec: frames must be >= 2");
}

void SceneSpec::validate() const {
  if (width < 1 || height < 1) throw std::invalid_argument("SceneSpec: grid must be >= 1x1");
  if (!(object_radius > 0) || !(focal > 0))
    throw std::invalid_argument("SceneSpec: object_radius and focal must be > 0");
}

PeriodicSpline::PeriodicSpline(std::vector<double> values) : y_(std::move(values)) {
  const auto k = static_cast<Index>(y_.size());
  if (k < 3) throw std::invalid_argument("PeriodicSpline: need >= 3 knots");
  // M[i-1] + 4 M[i] + M[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]), cyclic, unit spacing.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd rhs(k);
  for (Index i = 0; i < k; ++i) {
    const Index prev = (i + k - 1) % k;
    const Index next = (i + 1) % k;
    a(i, prev) += 1.0;
    a(i, i) += 4.0;
    a(i, next) += 1.0;
    rhs(i) = 6.0 * (y_[next] - 2.0 * y_[i] + y_[prev]);
  }
  const Eigen::VectorXd m = a.partialPivLu().solve(rhs);
  m_.assign(m.data(), m.data() + k);
}

double PeriodicSpline::operator()(double t) const {
  const auto k = static_cast<double>(y_.size());
  t = std::fmod(t, k);
  if (t < 0) t += k;
  auto i = static_cast<std::size_t>(std::floor(t));
  if (i >= y_.size()) i = y_.size() - 1;
  const std::size_t j = (i + 1) % y_.size();
  const double s = t - static_cast<double>(i);
  const double a = 1.0 - s;
  return a * y_[i] + s * y_[j] + ((a * a * a - a) * m_[i] + (s * s * s - s) * m_[j]) / 6.0;
}

Pose pose_from_descriptor(const Eigen::Ref<const Vector<double>>& features, double radius) {
  if (features.size() != 3) throw std::invalid_argument("pose descriptor must be 3-D");
  Pose p;
  p.x = features(0);
  p.y = features(1);
  p.heading = std::atan2(-p.y, -p.x) + features(2) / radius;
  return p;
}

double background_step(const PathSpec& spec) {
  return 2.0 * spec.radius * std::sin(std::numbers::pi / static_cast<double>(spec.frames));
}

FrameSequence<double> generate_background_path(const PathSpec& spec) {
  spec.validate();
  Matrix<double> f(3, spec.frames);
  for (Index i = 0; i < spec.frames; ++i) {
    const double theta = kTwoPi * static_cast<double>(i) / static_cast<double>(spec.frames);
    f(0, i) = spec.radius * std::cos(theta);
    f(1, i) = spec.radius * std::sin(theta);
    f(2, i) = 0.0;
  }
  return FrameSequence<double>(std::move(f), SequenceKind::background);
}

FrameSequence<double> generate_foreground_path(const PathSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, {0x66676b6579ULL}));
  const auto k = static_cast<std::size_t>(spec.num_keypoints);
  std::vector<double> dx(k), dy(k), dh(k);
  const double reach = spec.perturbation_fraction * spec.radius;
  for (std::size_t i = 0; i < k; ++i) {
    const double rho = reach * std::sqrt(rng.uniform());
    const double phi = kTwoPi * rng.uniform();
    dx[i] = rho * std::cos(phi);
    dy[i] = rho * std::sin(phi);
    dh[i] = spec.perturbation_fraction * rng.uniform(-1.0, 1.0);
  }
  const PeriodicSpline sx(dx), sy(dy), sh(dh);

  Matrix<double> f(3, spec.frames);
  for (Index i = 0; i < spec.frames; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(spec.frames);
    const double theta = kTwoPi * u;
    const double t = u * static_cast<double>(k);
    f(0, i) = spec.radius * std::cos(theta) + sx(t);
    f(1, i) = spec.radius * std::sin(theta) + sy(t);
    f(2, i) = spec.radius * sh(t);
  }
  return FrameSequence<double>(std::move(f), SequenceKind::foreground);
}

Projection project_object(const Pose& pose, const SceneSpec& scene, double path_radius) {
  const double ox = scene.object_x * path_radius - pose.x;
  const double oy = scene.object_y * path_radius - pose.y;
  const double cx = std::cos(pose.heading), cy = std::sin(pose.heading);
  const double depth = ox * cx + oy * cy;
  const double lateral = -ox * cy + oy * cx;  // positive to the camera's left
  const double rho = scene.object_radius * path_radius;
  Projection p;
  if (depth <= rho) return p;
  const double focal_px = scene.focal * static_cast<double>(scene.width);
  p.visible = true;
  p.u = 0.5 * static_cast<double>(scene.width) - focal_px * lateral / depth;
  p.v = 0.5 * static_cast<double>(scene.height);
  p.radius = focal_px * rho / depth;
  return p;
}

Mask render_mask(const Pose& pose, const SceneSpec& scene, double path_radius) {
  Mask m = empty_mask(scene.height, scene.width);
  const auto p = project_object(pose, scene, path_radius);
  if (!p.visible) return m;
  const double r2 = p.radius * p.radius;
  for (Index row = 0; row < scene.height; ++row) {
    const double dv = static_cast<double>(row) + 0.5 - p.v;
    for (Index col = 0; col < scene.width; ++col) {
      const double du = static_cast<double>(col) + 0.5 - p.u;
      m(row, col) = du * du + dv * dv <= r2;
    }
  }
  return m;
}

std::vector<Mask> render_truth_masks(const SimInstance& instance) {
  std::vector<Mask> out;
  out.reserve(static_cast<std::size_t>(instance.fg.size()));
  for (Index i = 1; i <= instance.fg.size(); ++i)
    out.push_back(render_mask(pose_from_descriptor(instance.fg.frame(i).features,
                                                   instance.path.radius),
                              instance.scene, instance.path.radius));
  return out;
}

SimInstance generate_instance(const PathSpec& path, const SceneSpec& scene, double psi,
                              double psi_factor, Index gamma) {
  path.validate();
  scene.validate();
  SimInstance inst;
  inst.path = path;
  inst.scene = scene;
  inst.bg = generate_background_path(path);
  inst.fg = generate_foreground_path(path);

  const auto metric = DistanceMetric<double>::euclidean();
  const Matrix<double> table = distance_table(inst.fg, inst.bg, metric);
  inst.params.delta = estimate_delta(inst.fg, inst.bg, metric);
  inst.params.epsilon = table.rowwise().minCoeff().maxCoeff();
  if (psi <= 0) psi = psi_factor * std::max(inst.params.epsilon, inst.params.delta);
  inst.params.psi = psi;
  inst.params.gamma =
      gamma > 0 ? gamma
                : std::max<Index>(1, static_cast<Index>(std::ceil(psi / inst.params.delta)));
  inst.params.k = 1;
  inst.truth_strong = table.array() <= psi;
  inst.fg_truth_masks = render_truth_masks(inst);
  return inst;
}

std::uint64_t trial_seed(std::uint64_t seed, double level, std::size_t trial) {
  return derive_seed(seed, {0x747269616cULL, std::bit_cast<std::uint64_t>(level), trial});
}

TrialSet generate_trials(const std::vector<double>& levels, std::size_t trials_per_level,
                         const PathSpec& base, const SceneSpec& scene, double psi,
                         std::uint64_t seed) {
  TrialSet set;
  set.perturbation_levels = levels;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    std::vector<SimInstance> row;
    for (std::size_t t = 0; t < trials_per_level; ++t) {
      PathSpec spec = base;
      spec.perturbation_fraction = levels[l];
      spec.seed = trial_seed(seed, levels[l], t);
      row.push_back(generate_instance(spec, scene, psi));
    }
    set.instances.push_back(std::move(row));
  }
  return set;
}

double window_match_bound(double psi, double delta, Index gamma) {
  const double g = static_cast<double>(gamma);
  return 2.0 * (g + 1.0) * (1.0 - delta * g / (2.0 * psi)) - 1.0;
}

UniformModelDataset generate_uniform_model(double psi, double delta, Index gamma,
                                           std::size_t trials, std::uint64_t seed,
                                           NeighborModel model) {
  if (!(psi > 0) || !(delta > 0)) throw std::invalid_argument("psi and delta must be > 0");
  if (gamma < 0) throw std::invalid_argument("gamma must be >= 0");
  UniformModelDataset data;
  data.psi = psi;
  data.delta = delta;
  data.gamma = gamma;
  data.model = model;
  data.samples.reserve(trials);
  const auto width = static_cast<std::size_t>(2 * gamma + 1);
  const auto g = static_cast<std::size_t>(gamma);

  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, {t}));
    UniformModelSample s;
    s.center_distance = psi * rng.uniform();
    s.window_distances.assign(width, 0.0);
    s.window_distances[g] = s.center_distance;
    if (model == NeighborModel::adversarial) {
      for (std::size_t o = 1; o <= g; ++o) {
        const double d = s.center_distance + static_cast<double>(o) * delta;
        s.window_distances[g + o] = d;
        s.window_distances[g - o] = d;
      }
    } else {
      // f at the origin, b_i at distance center_distance; each side walks
      // away from b_i in steps of exactly delta with a slowly turning heading.
      const double phi = kTwoPi * rng.uniform();
      const double bx = s.center_distance * std::cos(phi);
      const double by = s.center_distance * std::sin(phi);
      for (int side : {-1, 1}) {
        double x = bx, y = by;
        double heading = kTwoPi * rng.uniform();
        for (std::size_t o = 1; o <= g; ++o) {
          heading = wrap_angle(heading + rng.uniform(-0.5, 0.5));
          x += delta * std::cos(heading);
          y += delta * std::sin(heading);
          const std::size_t idx = side > 0 ? g + o : g - o;
          s.window_distances[idx] = std::hypot(x, y);
        }
      }
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

UniformModelSummary summarize(const UniformModelDataset& data) {
  UniformModelSummary out;
  out.window_lower_bound = window_match_bound(data.psi, data.delta, data.gamma);
  out.neighbor_lower_bound =
      std::max(data.psi - static_cast<double>(data.gamma) * data.delta, 0.0) / data.psi;
  const auto n = static_cast<double>(data.samples.size());
  if (data.samples.empty()) return out;

  double sum = 0.0, sum_sq = 0.0, neighbor_hits = 0.0, neighbor_total = 0.0;
  const auto g = static_cast<std::size_t>(data.gamma);
  for (const auto& s : data.samples) {
    double count = 0.0;
    for (double d : s.window_distances) count += d <= data.psi ? 1.0 : 0.0;
    sum += count;
    sum_sq += count * count;
    if (g > 0) {
      neighbor_hits += (s.window_distances.front() <= data.psi ? 1.0 : 0.0) +
                       (s.window_distances[2 * g] <= data.psi ? 1.0 : 0.0);
      neighbor_total += 2.0;
    }
  }
  out.mean_window_matches = sum / n;
  const double var = n > 1 ? (sum_sq - n * out.mean_window_matches * out.mean_window_matches) / (n - 1) : 0.0;
  out.sem_window_matches = std::sqrt(std::max(var, 0.0) / n);
  if (neighbor_total > 0) {
    out.neighbor_rate = neighbor_hits / neighbor_total;
    out.sem_neighbor_rate = std::sqrt(out.neighbor_rate * (1.0 - out.neighbor_rate) / neighbor_total);
  }
  return out;
}

}  // namespace vidmatch::sim
