#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vidmatch/rng.hpp"
#include "vidmatch/voting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace vidmatch;

namespace {

Mask random_mask(Rng& rng, Index h, Index w, double p) {
  Mask m(h, w);
  for (Index i = 0; i < m.size(); ++i) m(i) = rng.bernoulli(p);
  return m;
}

double binomial_pmf(int r, double p, int x) {
  return std::exp(std::lgamma(r + 1.0) - std::lgamma(x + 1.0) - std::lgamma(r - x + 1.0) +
                  x * std::log(p) + (r - x) * std::log1p(-p));
}

// P(lo <= X <= hi) for X ~ Binomial(r, p), summed term by term.
double binomial_range(int r, double p, int lo, int hi) {
  double sum = 0.0;
  for (int x = std::max(lo, 0); x <= std::min(hi, r); ++x) sum += binomial_pmf(r, p, x);
  return sum;
}

// Exact misclassification of the strict rule votes / r > t for each class.
double exact_fg_error(int r, double p1, double t) {
  return binomial_range(r, p1, 0, static_cast<int>(std::floor(t * r)));
}

double exact_bg_error(int r, double p2, double t) {
  return binomial_range(r, 1.0 - p2, static_cast<int>(std::floor(t * r)) + 1, r);
}

// Sampling tolerance on a rate from n trials; the 3/n term covers rare events
// where a single count exceeds the Gaussian band.
double rate_tolerance(double p, double n) { return 4.0 * std::sqrt(p * (1 - p) / n) + 3.0 / n; }

}  // namespace

TEST_CASE("subtract") {
  Channel<double> f = Channel<double>::Constant(4, 5, 0.3);
  CHECK_FALSE(subtract(PixelGrid<double>(f), PixelGrid<double>(f), 0.01).grid.any());

  Channel<double> b = f;
  b(2, 3) += 10.0;
  const auto m = subtract(PixelGrid<double>(f), PixelGrid<double>(b), 5.0);
  CHECK(m.grid.count() == 1);
  CHECK(m.grid(2, 3));

  // Exactly at the threshold is background.
  Channel<double> e = f;
  e(0, 0) += 0.5;
  CHECK_FALSE(subtract(PixelGrid<double>(f), PixelGrid<double>(e), 0.5).grid(0, 0));

  CHECK_THROWS_AS(subtract(PixelGrid<double>(f), PixelGrid<double>(Channel<double>::Zero(5, 4)), 0.1),
                  std::invalid_argument);
}

TEST_CASE("subtract matches a per-pixel loop on random multi-channel grids") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const Index h = 1 + static_cast<Index>(rng.below(8)), w = 1 + static_cast<Index>(rng.below(8));
    const std::size_t channels = 1 + rng.below(3);
    std::vector<Channel<double>> a(channels), b(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      a[c] = Channel<double>(h, w);
      b[c] = Channel<double>(h, w);
      for (Index i = 0; i < a[c].size(); ++i) {
        a[c](i) = rng.uniform();
        b[c](i) = rng.uniform();
      }
    }
    const double tau = rng.uniform(0.0, 0.8);
    const auto m = subtract(PixelGrid<double>(a), PixelGrid<double>(b), tau);
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        double worst = 0.0;
        for (std::size_t c = 0; c < channels; ++c) worst = std::max(worst, std::abs(a[c](y, x) - b[c](y, x)));
        CHECK(m.grid(y, x) == (worst > tau));
      }
  }
}

TEST_CASE("vote threshold count") {
  CHECK(min_votes_for(0.5, 1) == 1);
  CHECK(min_votes_for(0.5, 3) == 2);
  CHECK(min_votes_for(0.5, 4) == 3);  // 2/4 is not above one half
  CHECK(min_votes_for(0.7, 3) == 3);
  CHECK(min_votes_for(0.7, 10) == 8);
  CHECK(min_votes_for(0.0, 5) == 1);
  for (int r = 1; r <= 60; ++r)
    for (double tau : {0.1, 0.25, 0.3, 0.5, 0.6, 0.75, 0.9}) {
      const int c = min_votes_for(tau, r);
      CHECK(static_cast<double>(c) / r > tau);
      CHECK(static_cast<double>(c - 1) / r <= tau);
    }
}

TEST_CASE("vote fusion examples") {
  Rng rng(3);
  const ForegroundMask single{random_mask(rng, 6, 7, 0.4)};
  for (double tau : {0.0, 0.3, 0.99}) {
    const std::vector<ForegroundMask> one{single};
    CHECK((vote_fuse(one, tau).grid == single.grid).all());
  }

  Mask on = Mask::Constant(1, 1, true), off = Mask::Constant(1, 1, false);
  const std::vector<ForegroundMask> three{{on}, {on}, {off}};
  CHECK(vote_fuse(three, 0.5).grid(0, 0));
  CHECK_FALSE(vote_fuse(three, 0.7).grid(0, 0));
  CHECK(vote_fuse(three, 0.5).votes(0, 0) == 2);
  CHECK(vote_fuse(three, 0.5).r == 3);

  CHECK_THROWS_AS(vote_fuse(std::vector<ForegroundMask>{}, 0.5), std::invalid_argument);
  const std::vector<ForegroundMask> mixed{{Mask::Constant(2, 2, true)}, {Mask::Constant(2, 3, true)}};
  CHECK_THROWS_AS(vote_fuse(mixed, 0.5), std::invalid_argument);
}

TEST_CASE("vote fusion equals an independent recount") {
  Rng rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index h = 1 + static_cast<Index>(rng.below(6)), w = 1 + static_cast<Index>(rng.below(6));
    const int r = 1 + static_cast<int>(rng.below(12));
    std::vector<ForegroundMask> masks;
    for (int i = 0; i < r; ++i) masks.push_back({random_mask(rng, h, w, rng.uniform())});
    const double tau = static_cast<double>(rng.below(11)) / 10.0 * 0.98 + 0.01;
    const auto fused = vote_fuse(masks, tau);
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        int votes = 0;
        for (const auto& m : masks) votes += m.grid(y, x) ? 1 : 0;
        CHECK(fused.votes(y, x) == votes);
        CHECK(fused.grid(y, x) == (votes * 1.0 / r > tau));
        CHECK(fused.grid(y, x) == (votes >= fused.min_votes));
      }
  }
}

TEST_CASE("vote fusion properties") {
  Rng rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const int r = 1 + static_cast<int>(rng.below(9));
    std::vector<ForegroundMask> masks;
    for (int i = 0; i < r; ++i) masks.push_back({random_mask(rng, 5, 5, 0.5)});
    const double tau = rng.uniform(0.05, 0.95);
    const auto base = vote_fuse(masks, tau);

    auto shuffled = masks;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + static_cast<long>(rng.below(static_cast<std::uint64_t>(r))),
                shuffled.end());
    CHECK((vote_fuse(shuffled, tau).grid == base.grid).all());

    auto more = masks;
    more.push_back({Mask::Constant(5, 5, true)});
    CHECK((vote_fuse(more, tau).votes >= base.votes).all());

    const double higher = std::min(0.99, tau + rng.uniform(0.0, 0.5));
    const auto stricter = vote_fuse(masks, higher);
    CHECK((stricter.grid <= base.grid).all());

    const std::vector<ForegroundMask> copies(static_cast<std::size_t>(r), masks.front());
    CHECK((vote_fuse(copies, tau).grid == masks.front().grid).all());
  }
}

TEST_CASE("foreground extraction") {
  Channel<double> obs = Channel<double>::Zero(8, 8);
  obs.block(2, 2, 3, 3) = 1.0;
  const std::vector<PixelGrid<double>> same(3, PixelGrid<double>(obs));
  CHECK_FALSE(extract_foreground(PixelGrid<double>(obs), same, {}).grid.any());

  const std::vector<PixelGrid<double>> clean{PixelGrid<double>(Channel<double>::Zero(8, 8))};
  const auto fused = extract_foreground(PixelGrid<double>(obs), clean, {});
  CHECK((fused.grid == (obs > 0.5)).all());
  CHECK_THROWS_AS(extract_foreground(PixelGrid<double>(obs), std::vector<PixelGrid<double>>{}, {}),
                  std::invalid_argument);
}

TEST_CASE("fusing more noisy hypotheses improves pixel accuracy") {
  Mask truth = Mask::Constant(32, 32, false);
  truth.block(8, 8, 12, 16) = true;
  const double p1 = 0.85, p2 = 0.97;
  std::vector<double> accuracy;
  for (int r = 1; r <= 10; ++r) {
    double acc = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
      std::vector<ForegroundMask> hyps;
      for (int h = 0; h < r; ++h) {
        Mask m(truth.rows(), truth.cols());
        for (Index i = 0; i < m.size(); ++i) m(i) = truth(i) ? rng.bernoulli(p1) : !rng.bernoulli(p2);
        hyps.push_back({m});
      }
      acc += (vote_fuse(hyps, 0.5).grid == truth).cast<double>().mean() / 10.0;
    }
    accuracy.push_back(acc);
  }
  // Odd r avoids the tie penalty of the strict rule at even r.
  for (int r = 3; r <= 9; r += 2) CHECK(accuracy[static_cast<std::size_t>(r - 1)] > accuracy[static_cast<std::size_t>(r - 3)] - 1e-3);
  CHECK(accuracy[9] > accuracy[0]);
  CHECK(accuracy[8] > accuracy[0]);
}

TEST_CASE("noise model") {
  CHECK(NoiseModel{0.9, 0.9}.beta() == doctest::Approx(0.8));
  CHECK_NOTHROW(NoiseModel{0.9, 0.9}.validate());
  CHECK_THROWS_AS((NoiseModel{0.4, 0.6}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((NoiseModel{1.2, 0.9}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((VoteParams{0.1, 1.0}.validate()), std::invalid_argument);
}

TEST_CASE("vote error simulation") {
  const auto perfect = simulate_vote_error({1.0, 1.0}, 0.3, {1, 5, 20}, 10000, 1);
  for (const auto& row : perfect.rows) {
    CHECK(row.empirical_error == 0.0);
    CHECK(row.estimated_error == 0.0);
  }

  CHECK_THROWS_AS(simulate_vote_error({0.9, 0.9}, 0.95, {5}, 10000, 1), std::invalid_argument);
  CHECK_THROWS_AS(simulate_vote_error({0.9, 0.9}, 0.05, {5}, 10000, 1), std::invalid_argument);

  const std::vector<int> rs{5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  const auto rep = simulate_vote_error({0.9, 0.9}, 0.5, rs, 100000, 7);
  REQUIRE(rep.rows.size() == rs.size());
  const auto& last = rep.rows.back();
  REQUIRE(last.chernoff_bound);
  CHECK(*last.chernoff_bound == doctest::Approx(std::exp(-(0.64 / 7.2) * 50)));
  CHECK(*last.chernoff_bound == doctest::Approx(0.0117).epsilon(0.01));
  for (const auto& row : rep.rows) {
    CHECK(row.empirical_error <= *row.chernoff_bound + 3 * row.sampling_sigma);
    CHECK(row.estimated_error <= *row.chernoff_bound);
  }
  CHECK(rep.log_slope < 0);
  CHECK(rep.log_r_squared >= 0.9);
  CHECK(rep.fitted_points == rs.size());

  // Off the canonical threshold only the per-class exponents are reported.
  const auto off = simulate_vote_error({0.9, 0.9}, 0.6, {10}, 10000, 7);
  CHECK_FALSE(off.rows[0].chernoff_bound);
  CHECK(off.rows[0].fg_exponent_bound == doctest::Approx(std::exp(-(0.09 / 1.8) * 10)));
  CHECK(off.rows[0].bg_exponent_bound == doctest::Approx(std::exp(-(0.25 / 0.2) * 10)));
}

TEST_CASE("vote error estimates agree with exact binomial tails") {
  for (auto [p1, p2, t] : {std::tuple{0.9, 0.9, 0.5}, std::tuple{0.85, 0.97, 0.5}, std::tuple{0.8, 0.7, 0.45}}) {
    const auto rep = simulate_vote_error({p1, p2}, t, {3, 8, 15, 30}, 100000, 99);
    for (const auto& row : rep.rows) {
      const double fg = exact_fg_error(row.r, p1, t);
      const double bg = exact_bg_error(row.r, p2, t);
      CHECK(std::abs(row.fg_error - fg) <= rate_tolerance(fg, 100000.0));
      CHECK(std::abs(row.bg_error - bg) <= rate_tolerance(bg, 100000.0));
      CHECK(row.fg_error_is == doctest::Approx(fg).epsilon(0.05));
      CHECK(row.bg_error_is == doctest::Approx(bg).epsilon(0.05));
    }
  }
}

TEST_CASE("line fit") {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r_squared == doctest::Approx(1.0));
  CHECK_THROWS_AS(fit_line(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
}
