#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "vidmatch/assumptions.hpp"

#include <set>

using namespace vidmatch;
using vidmatch::testing::from_rows;
using vidmatch::testing::random_walk;

namespace {
constexpr auto FG = SequenceKind::foreground;
constexpr auto BG = SequenceKind::background;
}

TEST_CASE("euclidean distance") {
  const auto metric = DistanceMetric<double>::euclidean();
  const auto a = from_rows({{0, 0}, {3, 4}}, FG);
  const auto b = from_rows({{0, 0}, {3, 4}}, BG);
  CHECK(distance(a.frame(1), b.frame(1), metric) == 0.0);
  CHECK(distance(a.frame(1), b.frame(2), metric) == doctest::Approx(5.0));
  CHECK(distance(a.descriptor(2), b.descriptor(1), metric) == doctest::Approx(5.0));

  const auto c = from_rows({{0, 0, 0}}, BG);
  CHECK_THROWS_AS(distance(a.frame(1), c.frame(1), metric), std::invalid_argument);
  CHECK_THROWS_AS(metric.check_shape(a, c), std::invalid_argument);
}

TEST_CASE("precomputed distance is a table lookup") {
  Matrix<double> m(3, 4);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 4; ++j) m(i, j) = 10.0 * static_cast<double>(i + 1) + static_cast<double>(j + 1);
  const auto metric = DistanceMetric<double>::precomputed(m);
  const auto fg = FrameSequence<double>::placeholder(3, FG);
  const auto bg = FrameSequence<double>::placeholder(4, BG);
  CHECK(metric(fg.frame(2), bg.frame(3)) == 23.0);
  CHECK(metric(bg.frame(3), fg.frame(2)) == 23.0);
  CHECK_FALSE(metric.is_metric());
  CHECK_NOTHROW(metric.check_shape(fg, bg));
  CHECK_THROWS_AS(metric.check_shape(fg, FrameSequence<double>::placeholder(5, BG)), std::invalid_argument);
  CHECK_THROWS_AS(metric(fg.frame(1), fg.frame(2)), std::invalid_argument);

  const auto too_small = DistanceMetric<double>::precomputed(Matrix<double>::Ones(2, 2));
  CHECK_THROWS_AS(too_small(fg.frame(3), bg.frame(1)), std::out_of_range);

  Matrix<double> negative = m;
  negative(0, 0) = -1;
  CHECK_THROWS_AS(DistanceMetric<double>::precomputed(negative), std::invalid_argument);
  Matrix<double> nan = m;
  nan(1, 1) = std::nan("");
  CHECK_THROWS_AS(DistanceMetric<double>::precomputed(nan), std::invalid_argument);
  CHECK_THROWS_AS(DistanceMetric<double>::precomputed(m, Matrix<double>::Zero(2, 2)), std::invalid_argument);
}

TEST_CASE("frame sequence invariants") {
  Matrix<double> bad(2, 2);
  bad << 1, 2, std::numeric_limits<double>::infinity(), 0;
  CHECK_THROWS_AS(FrameSequence<double>(bad, FG), std::invalid_argument);
  CHECK_THROWS_AS(FrameSequence<double>(Matrix<double>(2, 0), FG), std::invalid_argument);

  const auto s = from_rows({{1}, {2}, {3}}, FG);
  CHECK(s.size() == 3);
  CHECK(s.dim() == 1);
  CHECK_THROWS_AS(s.frame(0), std::out_of_range);
  CHECK_THROWS_AS(s.frame(4), std::out_of_range);
  const auto r = s.reversed();
  CHECK(r.frame(1).features(0) == 3.0);
  CHECK(r.frame(3).features(0) == 1.0);
  CHECK(s.cast<float>().frame(2).features(0) == 2.0f);
}

TEST_CASE("smoothness audit") {
  const auto metric = DistanceMetric<double>::euclidean();
  const auto constant = from_rows({{2, 2}, {2, 2}, {2, 2}}, FG);
  auto rep = audit_smoothness(constant, metric, 0.1);
  CHECK(rep.max_step == 0.0);
  CHECK(rep.violations.empty());

  const auto line = from_rows({{0}, {1}, {2}}, FG);
  rep = audit_smoothness(line, metric, 1.0);
  CHECK(rep.max_step == 1.0);
  CHECK(rep.violations.empty());
  rep = audit_smoothness(line, metric, 0.5);
  CHECK(rep.violations == std::vector<Index>{1, 2});

  CHECK_THROWS_AS(audit_smoothness(from_rows({{0}}, FG), metric, 1.0), std::invalid_argument);
}

TEST_CASE("completeness audit") {
  const auto metric = DistanceMetric<double>::euclidean();
  const auto seq = from_rows({{0, 0}, {1, 0}, {2, 0}}, FG);
  const auto same = from_rows({{0, 0}, {1, 0}, {2, 0}}, BG);
  auto rep = audit_completeness(seq, same, metric, 0.01);
  CHECK(rep.uncovered.empty());
  CHECK(rep.worst_best_distance == 0.0);

  const auto far = from_rows({{0, 2}}, FG);
  const auto bg = from_rows({{0, 0}, {0, 4}}, BG);
  rep = audit_completeness(far, bg, metric, 1.0);
  CHECK(rep.uncovered == std::vector<Index>{1});
  CHECK(rep.worst_best_distance == doctest::Approx(2.0));
}

TEST_CASE("completeness audit matches an independent scan") {
  const auto metric = DistanceMetric<double>::euclidean();
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto bg = random_walk(rng, 40, 3, 0.2, BG);
    const auto fg = random_walk(rng, 30, 3, 0.2, FG);
    const double eps = rng.uniform(0.1, 2.0);
    const auto rep = audit_completeness(fg, bg, metric, eps);
    std::vector<Index> expected;
    for (Index i = 0; i < fg.size(); ++i) {
      const double best = (bg.features().colwise() - fg.features().col(i)).colwise().norm().minCoeff();
      if (best > eps) expected.push_back(i + 1);
    }
    CHECK(rep.uncovered == expected);
  }
}

TEST_CASE("brute-force strong matches") {
  const auto metric = DistanceMetric<double>::euclidean();
  const auto bg = from_rows({{0}, {1}, {2}, {3}}, BG);
  const auto f = from_rows({{0.5}}, FG);
  CHECK(strong_matches_bruteforce(f.frame(1), bg, metric, 0.0).empty());
  const auto all = strong_matches_bruteforce(f.frame(1), bg, metric, 10.0);
  CHECK(all.bg_indices == std::vector<Index>{1, 2, 3, 4});
  CHECK(all.fg_index == 1);

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto b = random_walk(rng, 50, 2, 0.3, BG);
    const auto fg = random_walk(rng, 5, 2, 0.3, FG);
    const double psi = rng.uniform(0.0, 1.5);
    const Vector<double> row = distance_table(fg, b, metric).row(2).transpose();
    const auto set = strong_matches_bruteforce(fg.frame(3), b, metric, psi);
    std::vector<Index> expected;
    for (Index j = 0; j < row.size(); ++j)
      if (row(j) <= psi) expected.push_back(j + 1);
    CHECK(set.bg_indices == expected);
    for (double d : set.distances) CHECK(d <= psi);
  }
}

TEST_CASE("euclidean metric axioms on random descriptors") {
  const auto metric = DistanceMetric<double>::euclidean();
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index dim = 1 + static_cast<Index>(rng.below(6));
    Matrix<double> x(dim, 3);
    for (Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-5, 5);
    const FrameSequence<double> s(x, FG);
    const auto a = s.frame(1), b = s.frame(2), c = s.frame(3);
    CHECK(metric(a, a) == 0.0);
    CHECK(metric(a, b) == metric(b, a));
    CHECK(metric(a, c) <= metric(a, b) + metric(b, c) + 1e-12);
  }
}

TEST_CASE("triangle audit flags a non-metric table") {
  Rng rng(3);
  const auto fg = random_walk(rng, 20, 2, 0.5, FG);
  const auto bg = random_walk(rng, 20, 2, 0.5, BG);
  const auto eu = DistanceMetric<double>::euclidean();
  CHECK(audit_triangle_inequality(fg, bg, eu, 2000, 1).violations == 0);

  Matrix<double> cross = distance_table(fg, bg, eu);
  Matrix<double> self = distance_table(bg, bg, eu);
  cross *= 10.0;
  const auto broken = DistanceMetric<double>::precomputed(cross, std::nullopt, self);
  CHECK(audit_triangle_inequality(fg, bg, broken, 2000, 1).violations > 0);
}

TEST_CASE("estimates and parameter ordering") {
  const auto metric = DistanceMetric<double>::euclidean();
  const auto bg = from_rows({{0}, {1}, {3}}, BG);
  const auto fg = from_rows({{0.5}, {2.5}}, FG);
  CHECK(estimate_delta(fg, bg, metric) == doctest::Approx(2.0));
  CHECK(estimate_epsilon(fg, bg, metric) == doctest::Approx(0.5));

  AssumptionParams p{0.1, 0.5, 1.0, 2, 3};
  CHECK_NOTHROW(p.validate());
  CHECK(p.warnings().empty());
  p.epsilon = 0.05;
  CHECK_FALSE(p.warnings().empty());
  p.gamma = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
