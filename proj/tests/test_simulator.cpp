#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vidmatch/matching.hpp"
#include "vidmatch/simulator.hpp"

#include <cmath>
#include <numbers>

using namespace vidmatch;

namespace {

sim::PathSpec spec(double level, std::uint64_t seed, Index frames = 100) {
  sim::PathSpec p;
  p.perturbation_fraction = level;
  p.seed = seed;
  p.frames = frames;
  return p;
}

const auto metric = DistanceMetric<double>::euclidean();

}  // namespace

TEST_CASE("background circle with four frames") {
  const auto bg = sim::generate_background_path(spec(0.0, 1, 4));
  const double expected[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (Index i = 0; i < 4; ++i) {
    CHECK(bg.features()(0, i) == doctest::Approx(expected[i][0]).epsilon(1e-12));
    CHECK(bg.features()(1, i) == doctest::Approx(expected[i][1]).epsilon(1e-12));
    CHECK(bg.features()(2, i) == 0.0);
  }
  const auto rep = audit_smoothness(bg, metric, std::sqrt(2.0) + 1e-12);
  CHECK(rep.max_step == doctest::Approx(std::sqrt(2.0)));
  CHECK(rep.violations.empty());
  CHECK(sim::background_step(spec(0.0, 1, 4)) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("measured background step matches the analytic step") {
  for (Index frames : {10, 100, 1000}) {
    auto s = spec(0.0, 3, frames);
    s.radius = 2.5;
    const auto bg = sim::generate_background_path(s);
    const auto rep = audit_smoothness(bg, metric, sim::background_step(s) + 1e-9);
    CHECK(std::abs(rep.max_step - sim::background_step(s)) < 1e-6);
    CHECK(rep.violations.empty());
  }
}

TEST_CASE("paths are reproducible per seed") {
  const auto a = sim::generate_instance(spec(0.2, 42), sim::SceneSpec{});
  const auto b = sim::generate_instance(spec(0.2, 42), sim::SceneSpec{});
  const auto c = sim::generate_instance(spec(0.2, 43), sim::SceneSpec{});
  CHECK(a.fg.features() == b.fg.features());
  CHECK(a.bg.features() == b.bg.features());
  CHECK((a.truth_strong == b.truth_strong).all());
  for (std::size_t i = 0; i < a.fg_truth_masks.size(); ++i)
    CHECK((a.fg_truth_masks[i] == b.fg_truth_masks[i]).all());
  CHECK(a.fg.features() != c.fg.features());
}

TEST_CASE("zero perturbation reproduces the background") {
  const auto inst = sim::generate_instance(spec(0.0, 9), sim::SceneSpec{});
  CHECK((inst.fg.features() - inst.bg.features()).cwiseAbs().maxCoeff() < 1e-12);
  const auto naive = naive_match(inst.fg, inst.bg, metric);
  CHECK(matching_cost(naive, inst.fg, inst.bg, metric).average_cost < 1e-12);
  const double delta = inst.params.delta;
  for (Index k = 1; k <= 10; ++k) {
    const auto nl = near_linear_match(inst.fg, inst.bg, metric, k);
    CHECK(within_bound(matching_cost(nl, inst.fg, inst.bg, metric).average_cost,
                       static_cast<double>(k) * delta));
  }
}

TEST_CASE("foreground key points stay within the perturbation radius") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto s = spec(0.1, seed, 80);
    s.num_keypoints = 8;
    const auto fg = sim::generate_foreground_path(s);
    const auto bg = sim::generate_background_path(s);
    // Frames at multiples of frames / K sit exactly on key points.
    for (Index kp = 0; kp < 8; ++kp) {
      const Index i = kp * 10;
      const double offset = (fg.features().col(i).head<2>() - bg.features().col(i).head<2>()).norm();
      CHECK(offset <= 0.1 + 1e-12);
      CHECK(std::abs(fg.features()(2, i)) <= 0.1 + 1e-12);
    }
  }
}

TEST_CASE("best background distance grows with perturbation") {
  double previous = -1.0;
  for (double level : {0.0, 0.05, 0.1, 0.2, 0.3}) {
    double mean = 0.0;
    for (std::size_t t = 0; t < 10; ++t) {
      const auto inst = sim::generate_instance(spec(level, sim::trial_seed(7, level, t)), sim::SceneSpec{});
      mean += distance_table(inst.fg, inst.bg, metric).rowwise().minCoeff().mean() / 10.0;
    }
    CHECK(mean > previous);
    previous = mean;
  }
}

TEST_CASE("truth strong matrix equals thresholded distances") {
  const auto inst = sim::generate_instance(spec(0.1, 4), sim::SceneSpec{}, 0.15);
  const Matrix<double> d = distance_table(inst.fg, inst.bg, metric);
  for (Index i = 0; i < d.rows(); ++i)
    for (Index j = 0; j < d.cols(); ++j) CHECK(inst.truth_strong(i, j) == (d(i, j) <= 0.15));
  CHECK(inst.params.psi == 0.15);
  CHECK(inst.params.gamma == static_cast<Index>(std::ceil(0.15 / inst.params.delta)));
  for (const auto& m : inst.fg_truth_masks) {
    CHECK(m.rows() == 64);
    CHECK(m.cols() == 64);
  }
}

TEST_CASE("default psi scales the measured completeness bound") {
  const auto inst = sim::generate_instance(spec(0.1, 4), sim::SceneSpec{}, 0.0, 2.0);
  CHECK(inst.params.psi == doctest::Approx(2.0 * std::max(inst.params.epsilon, inst.params.delta)));
  const auto flat = sim::generate_instance(spec(0.0, 4), sim::SceneSpec{}, 0.0, 2.0);
  CHECK(flat.params.psi == doctest::Approx(2.0 * flat.params.delta));
  CHECK(flat.truth_strong.count() > 0);
}

TEST_CASE("masks") {
  const sim::SceneSpec scene;
  const sim::Pose behind{0.0, 0.0, std::atan2(-0.1, -0.2)};  // facing away from the object
  CHECK_FALSE(sim::render_mask(behind, scene, 1.0).any());
  const sim::Pose inside{0.2, 0.1, 0.0};
  CHECK_FALSE(sim::render_mask(inside, scene, 1.0).any());

  const auto bg = sim::generate_background_path(spec(0.0, 1));
  const auto p1 = sim::pose_from_descriptor(bg.frame(17).features, 1.0);
  const auto p2 = sim::pose_from_descriptor(bg.frame(17).features, 1.0);
  CHECK((sim::render_mask(p1, scene, 1.0) == sim::render_mask(p2, scene, 1.0)).all());
  CHECK(sim::render_mask(p1, scene, 1.0).any());
}

TEST_CASE("mask centroid moves continuously with the pose") {
  const sim::SceneSpec scene;
  const double focal_px = scene.focal * static_cast<double>(scene.width);
  for (double level : {0.0, 0.1, 0.3}) {
    const auto inst = sim::generate_instance(spec(level, 21), scene);
    const double delta = inst.params.delta;
    const Vector<double> obj = (Vector<double>(2) << scene.object_x, scene.object_y).finished();
    double pos_min = INFINITY, dist_min = INFINITY, tan_max = 0.0;
    for (Index i = 1; i <= inst.fg.size(); ++i) {
      const auto f = inst.fg.frame(i).features;
      pos_min = std::min(pos_min, f.head<2>().norm());
      dist_min = std::min(dist_min, (f.head<2>() - obj).norm() - scene.object_radius);
      const auto pr = sim::project_object(sim::pose_from_descriptor(f, 1.0), scene, 1.0);
      tan_max = std::max(tan_max, std::abs(pr.u - 0.5 * static_cast<double>(scene.width)) / focal_px);
    }
    // The bearing of the object changes by at most delta / |pos| (heading
    // towards the centre) + delta / r (heading deviation) + delta / distance
    // (parallax); u = W/2 - f tan(bearing). One pixel for rasterization.
    const double bound = focal_px * (1 + tan_max * tan_max) * delta *
                             (1.0 / pos_min + 1.0 / inst.path.radius + 1.0 / dist_min) + 1.0;
    for (std::size_t i = 0; i + 1 < inst.fg_truth_masks.size(); ++i) {
      const auto a = centroid(inst.fg_truth_masks[i]);
      const auto b = centroid(inst.fg_truth_masks[i + 1]);
      REQUIRE(a);
      REQUIRE(b);
      CHECK(std::hypot(a->x - b->x, a->y - b->y) <= bound);
    }
  }
}

TEST_CASE("periodic spline interpolates and wraps") {
  const std::vector<double> y{0.0, 1.0, -0.5, 2.0, 0.3};
  const sim::PeriodicSpline s(y);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(s(static_cast<double>(i)) == doctest::Approx(y[i]));
  CHECK(s(5.0) == doctest::Approx(y[0]));
  CHECK(s(1.37) == doctest::Approx(s(6.37)));
  // Continuous first derivative across the wrap point.
  const double h = 1e-6;
  CHECK((s(h) - s(0.0)) / h == doctest::Approx((s(5.0) - s(5.0 - h)) / h).epsilon(1e-3));
}

TEST_CASE("trial sets") {
  const auto set = sim::generate_trials({0.05, 0.1}, 3, spec(0.0, 0, 30), sim::SceneSpec{}, 0.2, 11);
  REQUIRE(set.instances.size() == 2);
  for (const auto& row : set.instances) CHECK(row.size() == 3);
  CHECK(set.instances[1][2].path.seed == sim::trial_seed(11, 0.1, 2));
  CHECK(sim::trial_seed(11, 0.1, 2) != sim::trial_seed(11, 0.1, 1));
  CHECK(sim::trial_seed(11, 0.1, 2) != sim::trial_seed(11, 0.05, 2));
}

TEST_CASE("spec validation") {
  auto s = spec(0.0, 1);
  s.frames = 1;
  CHECK_THROWS_AS(sim::generate_background_path(s), std::invalid_argument);
  s = spec(1.0, 1);
  CHECK_THROWS_AS(sim::generate_foreground_path(s), std::invalid_argument);
  s = spec(0.1, 1);
  s.num_keypoints = 3;
  CHECK_THROWS_AS(sim::generate_foreground_path(s), std::invalid_argument);
}

TEST_CASE("uniform strong-match model") {
  CHECK(sim::window_match_bound(1.0, 0.1, 2) == doctest::Approx(4.4));
  CHECK(sim::window_match_bound(1.0, 0.1, 10) == doctest::Approx(10.0));

  for (auto model : {sim::NeighborModel::adversarial, sim::NeighborModel::random_walk}) {
    auto summary = sim::summarize(sim::generate_uniform_model(1.0, 0.1, 2, 10000, 5, model));
    CHECK(summary.neighbor_lower_bound == doctest::Approx(0.8));
    CHECK(summary.neighbor_rate >= summary.neighbor_lower_bound - 3 * summary.sem_neighbor_rate);
    CHECK(summary.mean_window_matches >= 4.4 - 3 * summary.sem_window_matches);

    summary = sim::summarize(sim::generate_uniform_model(1.0, 0.1, 10, 10000, 6, model));
    CHECK(summary.mean_window_matches >= 10.0 - 3 * summary.sem_window_matches);
  }

  // gamma * delta >= psi: the neighbour bound is vacuous and the adversarial
  // neighbour is never strong.
  const auto vac = sim::summarize(sim::generate_uniform_model(1.0, 0.25, 4, 5000, 7));
  CHECK(vac.neighbor_lower_bound == 0.0);
  CHECK(vac.neighbor_rate == doctest::Approx(0.0).epsilon(0.01));

  const auto data = sim::generate_uniform_model(1.0, 0.1, 3, 1000, 8);
  for (const auto& s : data.samples) {
    CHECK(s.center_distance >= 0.0);
    CHECK(s.center_distance <= 1.0);
    REQUIRE(s.window_distances.size() == 7);
    CHECK(s.window_distances[3] == s.center_distance);
    for (std::size_t o = 0; o < 7; ++o) {
      const double steps = std::abs(static_cast<double>(o) - 3.0);
      CHECK(s.window_distances[o] <= s.center_distance + steps * 0.1 + 1e-12);
    }
  }
}

TEST_CASE("local search recall on uniform-model instances") {
  // Background: planar walk with steps of exactly delta. The foreground frame
  // sits at a uniform distance in [0, psi] from a random background frame.
  const double psi = 1.0, delta = 0.1;
  const Index gamma = 10, m = 200;
  Rng rng(314);
  double recall = 0.0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    Matrix<double> b(2, m);
    b.col(0).setZero();
    double heading = rng.uniform(0.0, 2 * std::numbers::pi);
    for (Index j = 1; j < m; ++j) {
      heading += rng.uniform(-0.3, 0.3);
      b(0, j) = b(0, j - 1) + delta * std::cos(heading);
      b(1, j) = b(1, j - 1) + delta * std::sin(heading);
    }
    const FrameSequence<double> bg(b, SequenceKind::background);
    const Index centre = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(m)));
    const double r = psi * rng.uniform(), phi = rng.uniform(0.0, 2 * std::numbers::pi);
    Matrix<double> f(2, 1);
    f << b(0, centre - 1) + r * std::cos(phi), b(1, centre - 1) + r * std::sin(phi);
    const FrameSequence<double> fg(f, SequenceKind::foreground);
    const auto found = local_search_match(fg.frame(1), bg, metric, gamma, gamma, psi);
    const auto oracle = strong_matches_bruteforce(fg.frame(1), bg, metric, psi);
    REQUIRE_FALSE(oracle.empty());
    recall += static_cast<double>(found.size()) / static_cast<double>(oracle.size()) / trials;
  }
  CHECK(recall >= sim::window_match_bound(psi, delta, gamma) / static_cast<double>(2 * gamma + 1));
}
