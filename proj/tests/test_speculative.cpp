#include <doctest.h>

#include <array>
#include <functional>
#include <cmath>

#include "placeopt/error.hpp"
#include "placeopt/rng.hpp"
#include "placeopt/speculative.hpp"
#include "placeopt/synthetic_oracle.hpp"

using namespace placeopt;

namespace {

constexpr int V = 3;
using Table = std::array<std::array<double, V>, V>;  // [previous token][next token]

// Context-dependent draft and target over a 3-token vocabulary.
const Table kP{{{0.6, 0.3, 0.1}, {0.2, 0.5, 0.3}, {0.25, 0.25, 0.5}}};
const Table kQ{{{0.3, 0.3, 0.4}, {0.1, 0.8, 0.1}, {0.5, 0.2, 0.3}}};

int draw(Rng& rng, const std::array<double, V>& dist) {
  double u = rng.uniform01();
  for (int v = 0; v < V - 1; ++v) {
    if (u < dist[static_cast<std::size_t>(v)]) return v;
    u -= dist[static_cast<std::size_t>(v)];
  }
  return V - 1;
}

// P(first i drafts accepted) summed over i, by enumerating token sequences:
// accepting token x at a position has probability min(p(x), q(x)).
double exact_n_bar(int gamma, int prev, int depth = 0) {
  if (depth == gamma) return 0.0;
  double total = 0.0;
  for (int x = 0; x < V; ++x) {
    const double m = std::min(kP[prev][x], kQ[prev][x]);
    if (m > 0) total += m * (1.0 + exact_n_bar(gamma, x, depth + 1));
  }
  return total;
}

// One speculative step: draft from q, accept with min(1, p/q), on rejection
// resample from the normalized residual max(p - q, 0). Returns accepted count.
int simulate_step(Rng& rng, int gamma, int prev) {
  int accepted = 0;
  for (int j = 0; j < gamma; ++j) {
    const int x = draw(rng, kQ[prev]);
    if (rng.uniform01() < std::min(1.0, kP[prev][x] / kQ[prev][x])) {
      ++accepted;
      prev = x;
      continue;
    }
    std::array<double, V> residual{};
    double z = 0;
    for (int v = 0; v < V; ++v) z += residual[v] = std::max(kP[prev][v] - kQ[prev][v], 0.0);
    for (auto& r : residual) r /= z;
    (void)draw(rng, residual);
    break;
  }
  return accepted;
}

Trace target_trace(Rng& rng, int gamma, int prev) {
  Trace t;
  for (int j = 0; j < gamma; ++j) {
    const int x = draw(rng, kP[prev]);
    t.tokens.push_back({std::log(kQ[prev][x]), std::log(kP[prev][x])});
    prev = x;
  }
  return t;
}

}  // namespace

TEST_CASE("estimator is unbiased on a context-dependent model") {
  for (int gamma : {1, 3, 5}) {
    const double truth = exact_n_bar(gamma, 0);
    Rng rng(derive_seed(2024, static_cast<std::uint64_t>(gamma)));
    std::vector<Trace> traces;
    for (int s = 0; s < 100000; ++s) traces.push_back(target_trace(rng, gamma, 0));
    const auto est = estimate_acceptance(traces, gamma);
    CAPTURE(gamma);
    CHECK(est.n_steps == 100000);
    CHECK(std::abs(est.n_bar - truth) < 3 * est.std_error);
    CHECK(est.a == doctest::Approx(est.n_bar / gamma));

    double sum = 0, sq = 0;
    const int n = 100000;
    for (int s = 0; s < n; ++s) {
      const double k = simulate_step(rng, gamma, 0);
      sum += k;
      sq += k * k;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / (n - 1));
    CHECK(std::abs(mean - truth) < 3 * se);
    CHECK(std::abs(mean - est.n_bar) < 3 * std::hypot(se, est.std_error));
  }
}

TEST_CASE("step estimator edge cases") {
  std::vector<TokenLogProbs> same(8, {-1.3, -1.3});
  CHECK(step_acceptance(same) == 8.0);
  std::vector<Trace> traces{{"a", same, true}, {"b", same, true}};
  const auto est = estimate_acceptance(traces, 8);
  CHECK(est.n_bar == 8.0);
  CHECK(est.a == 1.0);
  CHECK(est.std_error == 0.0);

  auto zero = same;
  zero[0].logq = -INFINITY;
  CHECK(step_acceptance(zero) == 0.0);

  // Huge log ratios in both directions.
  std::vector<TokenLogProbs> wild{{0.0, -700.0}, {-700.0, 0.0}, {0.0, -650.0}};
  const double v = step_acceptance(wild);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(1.0 + 2 * std::exp(-700.0)));

  CHECK_THROWS_AS(step_acceptance(std::vector<TokenLogProbs>{{-1.0, 0.5}}), ValidationError);
  CHECK_THROWS_AS(step_acceptance(std::vector<TokenLogProbs>{{-1.0, -INFINITY}}), ValidationError);
}

TEST_CASE("partial steps are dropped and non-target traces rejected") {
  Trace t{"p", std::vector<TokenLogProbs>(11, {-0.5, -0.2}), true};
  const auto est = estimate_acceptance(std::vector<Trace>{t}, 4);
  CHECK(est.n_steps == 2);
  CHECK_THROWS_AS(estimate_acceptance(std::vector<Trace>{Trace{"s", t.tokens, true}}, 12), ValidationError);
  t.target_generated = false;
  CHECK_THROWS_AS(estimate_acceptance(std::vector<Trace>{t}, 4), ValidationError);
}

TEST_CASE("estimator bounds and monotonicity") {
  Rng rng(5);
  for (int t = 0; t < 500; ++t) {
    std::vector<TokenLogProbs> step;
    for (int j = 0; j < 8; ++j) step.push_back({std::log(rng.uniform01()), std::log(rng.uniform01() + 1e-12)});
    const double base = step_acceptance(step);
    CHECK(base >= 0.0);
    CHECK(base <= 8.0);
    // Move log q toward log p.
    double prev = base;
    for (double w : {0.25, 0.5, 0.75, 1.0}) {
      auto moved = step;
      for (std::size_t j = 0; j < step.size(); ++j)
        moved[j].logq = (1 - w) * step[j].logq + w * step[j].logp;
      const double v = step_acceptance(moved);
      CHECK(v >= prev - 1e-12);
      prev = v;
    }
    CHECK(prev == doctest::Approx(8.0));
  }
}

TEST_CASE("pairwise sum is order-fixed and accurate") {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / static_cast<double>(i + 1);
  double naive = 0;
  for (double x : v) naive += x;
  CHECK(pairwise_sum(v) == doctest::Approx(naive).epsilon(1e-13));
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
}

TEST_CASE("speedup formula") {
  CHECK(speculative_speedup(8.0, 8, 1e-12, 1.0) == doctest::Approx(8.0));
  CHECK(speculative_speedup(1.0, 8, 1.0, 1.0) == doctest::Approx(1.0 / 9.0));
  CHECK_THROWS_AS(speculative_speedup(1.0, 8, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(speculative_speedup(1.0, 8, 1.0, -1.0), ValidationError);
}

TEST_CASE("speedup matches a discrete-event simulation") {
  // Baseline: one target pass per token. Speculative: gamma draft passes plus
  // one verification pass per step, crediting the accepted draft tokens.
  const int gamma = 4;
  const double draft = 0.15, target = 1.0;
  Rng rng(77);
  double clock = 0, tokens = 0;
  for (int s = 0; s < 200000; ++s) {
    for (int j = 0; j < gamma; ++j) clock += draft;
    clock += target;
    tokens += simulate_step(rng, gamma, 0);
  }
  const double measured = (tokens / clock) / (1.0 / target);
  CHECK(measured == doctest::Approx(speculative_speedup(exact_n_bar(gamma, 0), gamma, draft, target)).epsilon(0.02));
}

namespace {

std::vector<EvaluationRecord> all_placements(int L, int M, const std::function<double(const Placement&)>& a) {
  std::vector<EvaluationRecord> out;
  for_each_placement(L, M, [&](const Placement& p) { out.push_back({p, a(p), {}, {}}); });
  return out;
}

}  // namespace

TEST_CASE("constant acceptance picks the cheapest draft") {
  const CostModel cost({1.0, 0.48, 0.21, 0.14});
  const auto recs = all_placements(5, 4, [](const Placement&) { return 0.7; });
  DraftSearchOptions opt;
  opt.prior.alpha = 1e-6;
  const auto res = search_draft_placement(recs, cost, 48.0, opt);
  CHECK(res.best.placement == Placement{3, 3, 3, 3, 3});
  CHECK(res.best.predicted_acceptance == doctest::Approx(0.7));
}

TEST_CASE("acceptance threshold sets the optimal draft") {
  // Making any of the first three layers cheap collapses acceptance; other
  // layers cost a little acceptance each.
  const CostModel cost({1.0, 0.1});
  const auto a = [](const Placement& x) {
    double v = 0.95;
    for (int i = 0; i < 6; ++i) v -= x[i] == 1 ? (i < 3 ? 0.6 : 0.02) : 0.0;
    return v;
  };
  const auto recs = all_placements(6, 2, a);
  DraftSearchOptions opt;
  opt.prior.alpha = 1e-8;
  const auto res = search_draft_placement(recs, cost, 6.0, opt);

  Placement best_truth;
  double best = -1;
  for_each_placement(6, 2, [&](const Placement& x) {
    const double s = speculative_speedup(8 * std::clamp(a(x), 0.0, 1.0), 8, cost.placement_cost(x), 6.0);
    if (s > best + 1e-12) best = s, best_truth = x;
  });
  CHECK(best_truth == Placement{0, 0, 0, 1, 1, 1});
  CHECK(res.best.placement == best_truth);
  CHECK(res.best.speedup == doctest::Approx(best).epsilon(1e-6));
  CHECK(res.best.cost == doctest::Approx(3.3));
}

TEST_CASE("draft frontier matches enumeration over all drafts") {
  const CostModel cost({1.0, 0.5, 0.2});
  const auto land = generate_landscape(6, 3, {2, 1, true}, 12, 0.05);
  const auto recs = all_placements(6, 3, [&](const Placement& x) { return 0.6 + oracle_score(land, x); });
  DraftSearchOptions opt;
  opt.candidates = {{2, 1, true}};
  const auto res = search_draft_placement(recs, cost, 10.0, opt);
  const auto post = fit_surrogate(recs, {2, 1, true}, opt.prior, 3);
  const auto bf = brute_force_frontier(extract_potentials(post), cost);
  REQUIRE(res.frontier.size() == bf.frontier.size());
  double best = -1;
  for (std::size_t i = 0; i < bf.frontier.size(); ++i) {
    CHECK(res.frontier[i].placement == bf.frontier[i].placement);
    const double a = std::clamp(bf.frontier[i].predicted_score, 0.0, 1.0);
    CHECK(res.frontier[i].predicted_acceptance == doctest::Approx(a).epsilon(1e-9));
    const double s = speculative_speedup(8 * a, 8, bf.frontier[i].cost, 10.0);
    CHECK(res.frontier[i].speedup == doctest::Approx(s).epsilon(1e-9));
    best = std::max(best, s);
  }
  CHECK(res.best.speedup == doctest::Approx(best).epsilon(1e-12));
}
