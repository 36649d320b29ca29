#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "placeopt/error.hpp"
#include "placeopt/landscape_analysis.hpp"
#include "placeopt/rng.hpp"

using namespace placeopt;

namespace {

std::vector<double> rank_oracle(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double x : v) less += x < v[i], equal += x == v[i];
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double w_oracle(const std::vector<std::vector<double>>& raters) {
  const double k = static_cast<double>(raters.size());
  const std::size_t n = raters.front().size();
  std::vector<double> sums(n, 0.0);
  double ties = 0;
  for (const auto& r : raters) {
    const auto ranks = rank_oracle(r);
    for (std::size_t i = 0; i < n; ++i) sums[i] += ranks[i];
    std::vector<double> sorted = r;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      ties += t * t * t - t;
      i = j;
    }
  }
  const double mean = k * (static_cast<double>(n) + 1) / 2;
  double s = 0;
  for (double v : sums) s += (v - mean) * (v - mean);
  const double nn = static_cast<double>(n);
  return 12 * s / (k * k * (nn * nn * nn - nn) - k * ties);
}

double overlap_oracle(const std::vector<double>& early, const std::vector<double>& fin, int k) {
  auto top = [&](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    return std::set<std::size_t>(idx.begin(), idx.begin() + k);
  };
  const auto a = top(early), b = top(fin);
  std::size_t common = 0;
  for (auto i : a) common += b.count(i);
  return static_cast<double>(common) / k;
}

std::vector<double> coarse(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(rng.uniform_index(8));
  return v;
}

double monotone(double x) { return std::exp(x / 3.0) + x * x * x; }

}  // namespace

TEST_CASE("spearman against the definition") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto a = coarse(rng, 20), b = coarse(rng, 20);
    const double want = pearson(rank_oracle(a), rank_oracle(b));
    CHECK(spearman_rho(a, b) == doctest::Approx(want).epsilon(1e-12));
    CHECK(spearman_rho(b, a) == doctest::Approx(want).epsilon(1e-12));
  }
  const std::vector<double> up{1, 2, 3, 4, 5}, down{9, 7, 5, 3, 1};
  CHECK(spearman_rho(up, up) == doctest::Approx(1.0));
  CHECK(spearman_rho(up, down) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(spearman_rho(up, std::vector<double>(5, 2.0)), ValidationError);
  CHECK_THROWS_AS(spearman_rho(std::vector<double>{1}, std::vector<double>{1}), ValidationError);
}

TEST_CASE("average ranks") {
  CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("kendall's W against the definition") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<std::vector<double>> raters;
    const int k = 2 + static_cast<int>(rng.uniform_index(5));
    for (int j = 0; j < k; ++j) raters.push_back(coarse(rng, 15));
    const double w = kendalls_w(raters);
    CHECK(w == doctest::Approx(w_oracle(raters)).epsilon(1e-12));
    CHECK(w >= 0.0);
    CHECK(w <= 1.0 + 1e-12);
    std::reverse(raters.begin(), raters.end() - 1);
    CHECK(kendalls_w(raters) == doctest::Approx(w).epsilon(1e-12));
  }
  std::vector<double> up(10);
  std::iota(up.begin(), up.end(), 0.0);
  std::vector<double> down(up.rbegin(), up.rend());
  CHECK(kendalls_w(std::vector<std::vector<double>>{up, up, up}) == doctest::Approx(1.0));
  CHECK(kendalls_w(std::vector<std::vector<double>>{up, down}) == doctest::Approx(0.0));
}

TEST_CASE("kendall's W tiers keep the final rater's top items") {
  Rng rng(3);
  std::vector<std::vector<double>> raters;
  for (int j = 0; j < 4; ++j) {
    std::vector<double> r(40);
    for (auto& x : r) x = rng.normal();
    raters.push_back(r);
  }
  std::vector<std::size_t> idx(40);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return raters.back()[a] > raters.back()[b]; });
  std::vector<std::vector<double>> kept(4);
  for (std::size_t i = 0; i < 10; ++i)
    for (int j = 0; j < 4; ++j) kept[static_cast<std::size_t>(j)].push_back(raters[static_cast<std::size_t>(j)][idx[i]]);
  CHECK(kendalls_w(raters, 0.25) == doctest::Approx(w_oracle(kept)).epsilon(1e-12));
  CHECK_THROWS_AS(kendalls_w(raters, 0.01), ValidationError);
  CHECK_THROWS_AS(kendalls_w(std::vector<std::vector<double>>{raters[0]}), ValidationError);
}

TEST_CASE("top-k overlap") {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto a = coarse(rng, 30), b = coarse(rng, 30);
    for (int k : {1, 5, 10, 30}) CHECK(top_k_overlap(a, b, k) == overlap_oracle(a, b, k));
  }
  const std::vector<double> a{5, 4, 3, 2, 1, 0}, b{0, 1, 2, 3, 4, 5};
  CHECK(top_k_overlap(a, a, 3) == 1.0);
  CHECK(top_k_overlap(a, b, 3) == 0.0);
  CHECK_THROWS_AS(top_k_overlap(a, b, 7), ValidationError);
}

TEST_CASE("random rankings overlap at k/n") {
  Rng rng(5);
  const int trials = 10000, n = 200, k = 10;
  std::vector<double> early(n), fin(n);
  double sum = 0, sq = 0;
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < n; ++i) early[i] = rng.uniform01(), fin[i] = rng.uniform01();
    const double o = top_k_overlap(early, fin, k);
    sum += o;
    sq += o * o;
  }
  const double mean = sum / trials;
  const double se = std::sqrt((sq / trials - mean * mean) / (trials - 1));
  CHECK(std::abs(mean - static_cast<double>(k) / n) < 4 * se);
}

TEST_CASE("rank statistics ignore monotone transforms") {
  Rng rng(6);
  std::vector<std::vector<double>> raters(3, std::vector<double>(50));
  for (auto& r : raters)
    for (auto& x : r) x = rng.normal();
  auto mapped = raters;
  for (auto& r : mapped)
    for (auto& x : r) x = monotone(x);
  CHECK(spearman_rho(mapped[0], mapped[2]) == doctest::Approx(spearman_rho(raters[0], raters[2])).epsilon(1e-12));
  CHECK(kendalls_w(mapped) == doctest::Approx(kendalls_w(raters)).epsilon(1e-12));
  CHECK(kendalls_w(mapped, 0.2) == doctest::Approx(kendalls_w(raters, 0.2)).epsilon(1e-12));
  for (int k : {5, 10, 20}) CHECK(top_k_overlap(mapped[0], mapped[2], k) == top_k_overlap(raters[0], raters[2], k));

  const auto norm = ScoreNormalization::fit(raters[1]);
  const auto n0 = norm.apply(raters[0]), n2 = norm.apply(raters[2]);
  CHECK(spearman_rho(n0, n2) == doctest::Approx(spearman_rho(raters[0], raters[2])).epsilon(1e-12));
}

TEST_CASE("score normalization") {
  const std::vector<double> ref{0, 10, 3};
  CHECK(normalize_scores(std::vector<double>{5, 10, 12}, ref) == std::vector<double>{0.5, 1.0, 1.2});
  CHECK_THROWS_AS(normalize_scores(std::vector<double>{1}, std::vector<double>{2, 2}), ValidationError);
}

namespace {

CheckpointScores synthetic(std::size_t n, int checkpoints, std::uint64_t seed) {
  Rng rng(seed);
  CheckpointScores d;
  for (int c = 0; c < checkpoints; ++c) d.checkpoints.push_back("ck" + std::to_string(c));
  std::vector<double> fin(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.placements.push_back(sample_local(rng.next_u64(), 6, 3));
    d.costs.push_back(rng.uniform01() * 10);
    fin[i] = rng.uniform01() * 100;
  }
  d.scores.assign(static_cast<std::size_t>(checkpoints), fin);
  return d;
}

}  // namespace

TEST_CASE("windows cover every placement") {
  for (auto [n, w, s] : {std::array<std::size_t, 3>{1000, 200, 1}, {1000, 200, 150}, {10, 4, 3}, {5, 9, 1}, {7, 7, 3}}) {
    const auto starts = window_starts(n, w, s);
    std::vector<int> hit(n, 0);
    for (auto st : starts)
      for (std::size_t i = st; i < std::min(n, st + w); ++i) ++hit[i];
    CHECK(std::all_of(hit.begin(), hit.end(), [](int h) { return h > 0; }));
    if (w >= n) CHECK(starts == std::vector<std::size_t>{0});
  }
  CHECK(window_starts(1000, 200, 1).size() == 801);
  CHECK_THROWS_AS(window_starts(10, 3, 4), ValidationError);
}

TEST_CASE("identical checkpoints give rho one everywhere") {
  const auto d = synthetic(300, 3, 7);
  for (const Band band : {Band{}, Band::parse("frontier:30"), Band::parse("median:20")}) {
    const auto wins = rolling_window_stability(d, 100, band, 25);
    CHECK(wins.size() == 9);
    for (const auto& w : wins) {
      REQUIRE(w.rho.size() == 2);
      for (const auto& r : w.rho) {
        REQUIRE(r.has_value());
        CHECK(*r == doctest::Approx(1.0));
      }
    }
  }
  const auto single = rolling_window_stability(d, 1000);
  CHECK(single.size() == 1);
  CHECK(single[0].size == 300);
}

TEST_CASE("drift in the top band shows up only in the frontier band") {
  auto d = synthetic(600, 3, 8);
  Rng rng(9);
  // Middle checkpoint: top placements keep their level but lose their order.
  auto& mid = d.scores[1];
  for (auto& s : mid)
    if (s >= 85) s = 85 + rng.uniform01() * 15;
  const auto all = rolling_window_stability(d, 200, Band{}, 50);
  const auto top = rolling_window_stability(d, 200, Band::parse("frontier:15"), 50);
  REQUIRE(all.size() == top.size());
  double worst_all = 1, mean_top = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    worst_all = std::min(worst_all, *all[i].rho[1]);
    CHECK(*all[i].rho[0] == doctest::Approx(1.0));
    CHECK(*top[i].rho[0] == doctest::Approx(1.0));
    mean_top += *top[i].rho[1] / static_cast<double>(top.size());
  }
  CHECK(worst_all > 0.95);
  CHECK(mean_top < 0.5);
}

TEST_CASE("undersized bands are reported, not dropped") {
  auto d = synthetic(50, 2, 10);
  const auto wins = rolling_window_stability(d, 20, Band::parse("frontier:0"), 10);
  CHECK(wins.size() == 4);
  for (const auto& w : wins) {
    CHECK(w.members == 1);
    REQUIRE(w.rho.size() == 1);
    CHECK_FALSE(w.rho[0].has_value());
  }
}

TEST_CASE("band labels") {
  CHECK(Band::parse("all").kind == BandKind::kAll);
  CHECK(Band::parse("frontier:50").delta == 50.0);
  CHECK(Band::parse("median:2.5").label() == "median:2.5");
  CHECK_THROWS_AS(Band::parse("top:5"), ValidationError);
  CHECK_THROWS_AS(Band::parse("median:-1"), ValidationError);
}

TEST_CASE("pivoting records by checkpoint") {
  std::vector<EvaluationRecord> recs;
  const std::vector<Placement> xs{{0, 1}, {1, 1}, {1, 0}};
  for (const char* ck : {"early", "late"})
    for (std::size_t i = 0; i < xs.size(); ++i)
      recs.push_back({xs[i], static_cast<double>(i) + (ck[0] == 'l'), std::string(ck), {}});
  const CostModel cost({1.0, 0.5});
  const auto d = pivot_records(recs, &cost);
  CHECK(d.checkpoints == std::vector<std::string>{"early", "late"});
  CHECK(d.placements == xs);
  CHECK(d.final_scores() == std::vector<double>{1, 2, 3});
  CHECK(d.costs == std::vector<double>{1.5, 1.0, 1.5});

  auto missing = recs;
  missing.pop_back();
  CHECK_THROWS_AS(pivot_records(missing), ValidationError);
  auto dup = recs;
  dup.push_back(recs[0]);
  CHECK_THROWS_AS(pivot_records(dup), ValidationError);
}

TEST_CASE("full report") {
  auto d = synthetic(400, 4, 11);
  Rng rng(12);
  for (std::size_t c = 0; c + 1 < d.scores.size(); ++c)
    for (auto& s : d.scores[c]) s += rng.normal() * 10.0 * static_cast<double>(3 - c);
  StabilityOptions opt;
  opt.bands = {Band{}, Band::parse("median:10")};
  opt.stride = 50;
  const auto rep = analyze_stability(d, opt);
  REQUIRE(rep.rho_vs_final.size() == 3);
  CHECK(*rep.rho_vs_final[0] < *rep.rho_vs_final[1]);
  CHECK(*rep.rho_vs_final[1] < *rep.rho_vs_final[2]);
  REQUIRE(rep.w_by_tier.size() == 5);
  for (const auto& w : rep.w_by_tier) {
    REQUIRE(w.has_value());
    CHECK(*w >= 0.0);
    CHECK(*w <= 1.0);
  }
  CHECK(rep.bands.size() == 2);
  REQUIRE(rep.overlap.size() == 3);
  for (const auto& row : rep.overlap) CHECK(row.size() == 4);
}
