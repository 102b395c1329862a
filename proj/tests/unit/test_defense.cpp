#include <doctest.h>

#include <cmath>

#include "fedgbdt/defense.hpp"
#include "fedgbdt/gbdt.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fedgbdt;

TEST_CASE("budget split over 2T histograms") {
  CHECK(split_budget(200.0, 100) == doctest::Approx(1.0));
  CHECK(split_budget(50.0, 100) == doctest::Approx(0.25));
  CHECK(split_budget(2.0 * 37.0, 37) == doctest::Approx(1.0));
}

TEST_CASE("config accepts exactly one budget form") {
  DPConfig dp;
  CHECK_THROWS_AS(dp.validate(), ConfigError);
  dp.epsilon_total = 200.0;
  CHECK_NOTHROW(dp.validate());
  CHECK(dp.resolve_epsilon(100) == doctest::Approx(1.0));
  dp.epsilon_histogram = 1.0;
  CHECK_THROWS_AS(dp.validate(), ConfigError);
  dp.epsilon_total.reset();
  CHECK(dp.resolve_epsilon(100) == doctest::Approx(1.0));
  dp.clip_r = 0.0;
  CHECK_THROWS_AS(dp.validate(), ConfigError);
}

TEST_CASE("gradient clipping bounds") {
  auto [g1, h1] = clip_grad_hess(5.0, 5.0, 1.0);
  CHECK(g1 == 1.0);
  CHECK(h1 == 2.0);
  auto [g2, h2] = clip_grad_hess(-0.43, 0.24, 1.0);
  CHECK(g2 == -0.43);
  CHECK(h2 == 0.24);
  auto [g3, h3] = clip_grad_hess(-2.0, 0.1, 0.5);
  CHECK(g3 == -0.5);
  CHECK(h3 == doctest::Approx(0.1));
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    auto [g, h] = clip_grad_hess(rng.normal() * 4.0, rng.normal() * 4.0, 1.0);
    CHECK(std::fabs(g) <= 1.0);
    CHECK(h >= 0.0);
    CHECK(h <= 2.0);
  }
}

namespace {

Histogram flat_histogram(std::size_t bins) {
  Histogram h;
  h.edges = {std::vector<double>(bins - 1)};
  for (std::size_t i = 0; i + 1 < bins; ++i) h.edges[0][i] = static_cast<double>(i + 1);
  h.bins = {std::vector<BinStats>(bins)};
  return h;
}

}  // namespace

TEST_CASE("laplace noise has the right scale and distribution") {
  const double scale = 2.0;  // R = 1, epsilon = 1
  const std::size_t n = 100000;
  Histogram hist = flat_histogram(2);
  std::vector<double> draws;
  draws.reserve(n);
  Rng rng(77);
  for (std::size_t i = 0; i < n / 4; ++i) {
    Histogram noisy = dp_histogram(hist, 1.0, 1.0, rng);
    for (const auto& bin : noisy.bins[0]) {
      draws.push_back(bin.grad_sum);
      draws.push_back(bin.hess_sum);
    }
  }
  double mean = 0.0, abs_mean = 0.0;
  for (double d : draws) {
    mean += d;
    abs_mean += std::fabs(d);
  }
  mean /= static_cast<double>(draws.size());
  abs_mean /= static_cast<double>(draws.size());  // E|x| = scale for Laplace
  CHECK(mean >= -0.05);
  CHECK(mean <= 0.05);
  CHECK(abs_mean >= 1.9);
  CHECK(abs_mean <= 2.1);

  // Kolmogorov-Smirnov at significance 0.01: c(0.01) = 1.628
  double d_stat =
      oracles::ks_statistic(draws, [&](double x) { return oracles::laplace_cdf(x, scale); });
  double critical = 1.628 / std::sqrt(static_cast<double>(draws.size()));
  CHECK(d_stat < critical);
}

TEST_CASE("noise scale shrinks to nothing at huge epsilon") {
  Histogram hist = flat_histogram(4);
  hist.bins[0][1].grad_sum = 3.0;
  hist.bins[0][1].hess_sum = 1.5;
  Rng rng(9);
  Histogram noisy = dp_histogram(hist, 1e9, 1.0, rng);
  for (std::size_t b = 0; b < hist.bins[0].size(); ++b) {
    CHECK(noisy.bins[0][b].grad_sum ==
          doctest::Approx(hist.bins[0][b].grad_sum).epsilon(1e-6));
    CHECK(noisy.bins[0][b].hess_sum ==
          doctest::Approx(hist.bins[0][b].hess_sum).epsilon(1e-6));
  }
}

TEST_CASE("noise is deterministic per seed") {
  Histogram hist = flat_histogram(8);
  Rng a(123), b(123), c(124);
  Histogram na = dp_histogram(hist, 0.5, 1.0, a);
  Histogram nb = dp_histogram(hist, 0.5, 1.0, b);
  Histogram nc = dp_histogram(hist, 0.5, 1.0, c);
  bool differs = false;
  for (std::size_t i = 0; i < hist.bins[0].size(); ++i) {
    CHECK(na.bins[0][i].grad_sum == nb.bins[0][i].grad_sum);
    CHECK(na.bins[0][i].hess_sum == nb.bins[0][i].hess_sum);
    differs |= na.bins[0][i].grad_sum != nc.bins[0][i].grad_sum;
  }
  CHECK(differs);
}

TEST_CASE("total-budget configuration equals the per-histogram one") {
  Histogram hist = flat_histogram(6);
  DPConfig total;
  total.epsilon_total = 80.0;
  DPConfig per;
  per.epsilon_histogram = split_budget(80.0, 40);
  Rng a(4), b(4);
  Histogram na = dp_histogram(hist, total.resolve_epsilon(40), 1.0, a);
  Histogram nb = dp_histogram(hist, per.resolve_epsilon(40), 1.0, b);
  for (std::size_t i = 0; i < hist.bins[0].size(); ++i)
    CHECK(na.bins[0][i].grad_sum == nb.bins[0][i].grad_sum);
}
