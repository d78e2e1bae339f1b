#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ipp/errors.hpp"
#include "ipp/gp.hpp"
#include "oracles.hpp"

using namespace ipp;

namespace {

SampleSet random_set(std::mt19937_64& rng, int n, int extent) {
  std::uniform_int_distribution<int> coord(0, extent - 1);
  std::uniform_real_distribution<double> val(0.0, 1.0);
  SampleSet s;
  while (static_cast<int>(s.size()) < n) {
    const Cell c{coord(rng), coord(rng)};
    if (std::find(s.locations.begin(), s.locations.end(), c) == s.locations.end()) s.add(c, val(rng));
  }
  return s;
}

std::vector<Cell> random_cells(std::mt19937_64& rng, int n, int extent) {
  std::uniform_int_distribution<int> coord(0, extent - 1);
  std::vector<Cell> q;
  for (int i = 0; i < n; ++i) q.push_back({coord(rng), coord(rng)});
  return q;
}

}  // namespace

TEST_CASE("rbf") {
  const KernelParams kp{1.0, 2.0};
  CHECK(rbf({3, 3}, {3, 3}, kp) == 1.0);
  CHECK(rbf({0, 0}, {0, 2}, kp) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ell(0.5, 10.0), s0(0.1, 3.0);
  for (int t = 0; t < 500; ++t) {
    const auto q = random_cells(rng, 2, 60);
    const KernelParams p{s0(rng), ell(rng)};
    CHECK(std::abs(rbf(q[0], q[1], p) - oracle::kernel(q[0], q[1], p.sigma0, p.lengthscale)) <= 1e-12);
  }
}

TEST_CASE("empty data gives the prior") {
  const std::vector<Cell> q{{0, 0}, {5, 7}};
  const Posterior p = predict({}, {1.0, 4.0}, kDefaultNoise, q);
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK(p.mean[i] == 0.0);
    CHECK(p.variance[i] == 1.0);
  }
  CHECK_THROWS_AS(log_marginal_likelihood({}, {1.0, 4.0}, kDefaultNoise), ContractError);
  CHECK_THROWS_AS(fit_lengthscale({}, {}, kDefaultNoise), ContractError);
}

TEST_CASE("near-interpolation at a sampled cell") {
  SampleSet s;
  s.add({2, 2}, 0.7);
  s.add({6, 3}, 0.1);
  const std::vector<Cell> q{{2, 2}};
  const Posterior p = predict(s, {1.0, 3.0}, 1e-5, q);
  CHECK(std::abs(p.mean[0] - 0.7) < 1e-3);
  CHECK(p.variance[0] < 1e-3);
}

TEST_CASE("predict matches the dense-inverse oracle") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> ell(0.5, 10.0);
  for (int t = 0; t < 30; ++t) {
    const SampleSet s = random_set(rng, 10, 25);
    const auto q = random_cells(rng, 20, 25);
    const KernelParams kp{1.0, ell(rng)};
    const double noise = 1e-2;
    const Posterior p = predict(s, kp, noise, q);
    const auto o = oracle::dense_gp(s.locations, s.values, 1.0, kp.lengthscale, p.noise, q);
    for (std::size_t i = 0; i < q.size(); ++i) {
      CHECK(std::abs(p.mean[i] - o.mean[i]) <= 1e-8);
      CHECK(std::abs(p.variance[i] - std::max(o.variance[i], kVarianceFloor)) <= 1e-8);
    }
    CHECK(std::abs(log_marginal_likelihood(s, kp, noise) - o.lml) <= 1e-8);
  }
}

TEST_CASE("log marginal likelihood closed forms") {
  SampleSet one;
  one.add({4, 4}, 0.0);
  const double n = kDefaultNoise;
  const double expect = -0.5 * std::log(1.0 + n * n) - 0.5 * std::log(2.0 * std::numbers::pi);
  CHECK(log_marginal_likelihood(one, {1.0, 3.0}, n) == doctest::Approx(expect).epsilon(1e-14));

  // A duplicated set with different values at the copies is less likely than the
  // original (evaluated without merging); the library merges copies, keeping the latest value.
  std::mt19937_64 rng(9);
  const SampleSet base = random_set(rng, 8, 12);
  SampleSet doubled = base;
  SampleSet latest;
  std::uniform_real_distribution<double> val(0.0, 1.0);
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double v = val(rng);
    doubled.add(base.locations[i], v);
    latest.add(base.locations[i], v);
  }
  const double sigma_n = 0.05;
  const auto o1 = oracle::dense_gp(base.locations, base.values, 1.0, 3.0, sigma_n, {});
  const auto o2 = oracle::dense_gp(doubled.locations, doubled.values, 1.0, 3.0, sigma_n, {});
  CHECK(o2.lml < o1.lml);
  CHECK(log_marginal_likelihood(doubled, {1.0, 3.0}, sigma_n) == log_marginal_likelihood(latest, {1.0, 3.0}, sigma_n));
}

TEST_CASE("deduplicate keeps first-seen order and the latest value") {
  SampleSet s;
  s.add({1, 1}, 0.1);
  s.add({2, 2}, 0.2);
  s.add({1, 1}, 0.3);
  const SampleSet d = deduplicate(s);
  REQUIRE(d.size() == 2);
  CHECK(d.locations[0] == Cell{1, 1});
  CHECK(d.values[0] == 0.3);
  CHECK(d.values[1] == 0.2);
}

TEST_CASE("variance never exceeds the prior and never grows with data") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ell(0.5, 10.0);
  for (int t = 0; t < 100; ++t) {
    SampleSet s = random_set(rng, 12, 20);
    const auto q = random_cells(rng, 15, 20);
    const KernelParams kp{1.0, ell(rng)};
    const double noise = 1e-3;
    SampleSet fewer;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) fewer.add(s.locations[i], s.values[i]);
    const Posterior a = predict(fewer, kp, noise, q);
    const Posterior b = predict(s, kp, noise, q);
    for (std::size_t i = 0; i < q.size(); ++i) {
      CHECK(a.variance[i] <= 1.0 + 1e-9);
      CHECK(b.variance[i] <= a.variance[i] + 1e-9);
      CHECK(b.variance[i] >= 0.0);
    }
  }
}

TEST_CASE("jitter escalates on a crowded, smooth kernel") {
  SampleSet s;
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 7; ++c) s.add({r, c}, 0.5 + 0.01 * r);
  const std::vector<Cell> q{{3, 3}};
  const Posterior p = predict(s, {1.0, 10.0}, 1e-5, q);
  CHECK(p.noise >= 1e-5);
  CHECK(std::isfinite(p.mean[0]));
  CHECK_THROWS_AS(predict(s, {1.0, 10.0}, 0.0, q), ContractError);
}

TEST_CASE("fit_lengthscale tie-break and degenerate data") {
  const LengthscaleBounds b{0.5, 10.0};
  SampleSet one;
  one.add({5, 5}, 0.4);
  CHECK(fit_lengthscale(one, b, kDefaultNoise).params.lengthscale == 10.0);

  SampleSet zeros;
  for (int i = 0; i < 10; ++i) zeros.add({i, 2 * i % 7}, 0.0);
  CHECK(fit_lengthscale(zeros, b, kDefaultNoise).params.lengthscale == 10.0);
  CHECK_THROWS_AS(fit_lengthscale(one, {2.0, 1.0}, kDefaultNoise), ConfigError);
}

TEST_CASE("fit_lengthscale agrees with an exhaustive 200-point search") {
  const LengthscaleBounds b{0.5, 10.0};
  const double step = std::log(b.max / b.min) / 199.0;
  std::mt19937_64 rng(77);
  for (int t = 0; t < 8; ++t) {
    // Samples of a Gaussian bump of width 4 cells.
    const SampleSet s = random_set(rng, 25, 24);
    SampleSet bump;
    for (const Cell& c : s.locations) {
      const double d2 = std::pow(c.row - 12.0, 2) + std::pow(c.col - 12.0, 2);
      bump.add(c, std::exp(-d2 / (2.0 * 16.0)));
    }
    const double noise = 1e-3;
    double best = -1e300, best_ell = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double ell = b.min * std::exp(step * i);
      const double v = oracle::dense_gp(bump.locations, bump.values, 1.0, ell, noise, {}).lml;
      if (v > best) {
        best = v;
        best_ell = ell;
      }
    }
    const LengthscaleFit fit = fit_lengthscale(bump, b, noise);
    CHECK_FALSE(fit.fallback);
    CHECK(std::abs(std::log(fit.params.lengthscale / best_ell)) <= step + 1e-9);
    CHECK(fit.log_likelihood >= best - 1e-6);
  }
}

TEST_CASE("fit_lengthscale stays inside its bounds") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> lo(0.1, 3.0), span(0.0, 20.0);
  for (int t = 0; t < 40; ++t) {
    const SampleSet s = random_set(rng, 6, 15);
    const double a = lo(rng);
    const LengthscaleBounds b{a, a + span(rng)};
    const double ell = fit_lengthscale(s, b, 1e-3).params.lengthscale;
    CHECK(ell >= b.min);
    CHECK(ell <= b.max);
  }
}
