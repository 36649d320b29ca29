#include <doctest.h>

#include <cmath>

#include "placeopt/error.hpp"
#include "placeopt/synthetic_oracle.hpp"

using namespace placeopt;

TEST_CASE("landscape generation") {
  const auto a = generate_landscape(6, 3, {2, 1, true}, 42);
  const auto b = generate_landscape(6, 3, {2, 1, true}, 42);
  CHECK(a.potentials.unary == b.potentials.unary);
  CHECK(a.potentials.pairwise == b.potentials.pairwise);
  const auto c = generate_landscape(6, 3, {2, 1, true}, 43);
  CHECK(a.potentials.unary != c.potentials.unary);

  const auto zero = generate_landscape(6, 3, {3, 2, true}, 1, 0.0);
  CHECK(oracle_score(zero, Placement{0, 1, 2, 0, 1, 2}) == 0.0);

  double sum = 0, sq = 0;
  int n = 0;
  for_each_placement(6, 3, [&](const Placement& p) {
    const double s = oracle_score(a, p);
    CHECK(s == a.potentials.score(p));
    sum += s, sq += s * s, ++n;
  });
  CHECK(n == 729);
  CHECK(sq / n - (sum / n) * (sum / n) > 0.0);
}

TEST_CASE("evaluator noise") {
  auto land = generate_landscape(5, 2, {1, 1, true}, 3);
  const Placement x{0, 1, 1, 0, 1};
  SyntheticEvaluator quiet(land);
  CHECK_FALSE(quiet.noisy());
  CHECK(quiet.score(x) == quiet.score(x));

  land.noise_sigma = 0.3;
  SyntheticEvaluator noisy(land);
  CHECK(noisy.noisy());
  const double truth = oracle_score(land, x);
  double sum = 0, sq = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double e = noisy.score(x) - truth;
    sum += e, sq += e * e;
  }
  const double var = sq / n - (sum / n) * (sum / n);
  CHECK(std::abs(sum / n) < 4 * 0.3 / std::sqrt(n));
  // Sample variance of a normal has relative sd sqrt(2/n).
  CHECK(std::abs(var / 0.09 - 1) < 4 * std::sqrt(2.0 / n));

  // Streams are keyed by placement, not by call order.
  SyntheticEvaluator first(land), second(land);
  const Placement y{1, 1, 1, 1, 1};
  const double fx = first.score(x);
  const double fy = first.score(y);
  CHECK(second.score(y) == fy);
  CHECK(second.score(x) == fx);

  SyntheticEvaluator off(land, false);
  CHECK(off.score(x) == truth);
}

TEST_CASE("brute force enumeration") {
  const auto land = generate_landscape(6, 3, {2, 2, true}, 9);
  const CostModel cost({1.0, 0.5, 0.2});
  const auto bf = brute_force_frontier(land.potentials, cost);
  CHECK(bf.enumerated == 729);
  CHECK(bf.solutions.size() == 28);
  const auto dp = solve_all_allocations(land.potentials);
  for (std::size_t i = 0; i < bf.solutions.size(); ++i) {
    CHECK(bf.solutions[i].allocation == dp.solutions[i].allocation);
    CHECK(bf.solutions[i].best[0].placement == dp.solutions[i].best[0].placement);
  }

  const auto single = generate_landscape(4, 1, {2, 1, true}, 2);
  const auto one = brute_force_frontier(single.potentials, CostModel({1.0}));
  CHECK(one.frontier.size() == 1);

  const auto big = generate_landscape(13, 3, {1, 1, true}, 2);
  CHECK_THROWS_AS(brute_force_frontier(big.potentials, cost), ResourceError);
  CHECK_THROWS_AS(brute_force_constrained(land.potentials, cost, 0.5), InfeasibleError);
  const auto pt = brute_force_constrained(land.potentials, cost, 3.0);
  CHECK(pt.cost <= 3.0 + 1e-9);
}
