#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <map>

#include "placeopt/error.hpp"
#include "placeopt/placement.hpp"
#include "placeopt/rng.hpp"

using namespace placeopt;

namespace {

double chi2_p_value(const std::vector<double>& observed, const std::vector<double>& expected) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i)
    stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

BigInt factorial(int n) {
  BigInt r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

}  // namespace

TEST_CASE("allocation_of") {
  CHECK(allocation_of(Placement(std::vector<int>(48, 0)), 4) == Allocation{48, 0, 0, 0});
  CHECK(allocation_of(Placement{0, 1, 2, 0, 1, 2}, 3) == Allocation{2, 2, 2});
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    std::vector<int> v(6);
    for (int& x : v) x = static_cast<int>(rng.uniform_index(3));
    const Placement p(v);
    const Allocation a = allocation_of(p, 3);
    for (int m = 0; m < 3; ++m) {
      int tally = 0;
      for (int i = 0; i < 6; ++i) tally += p[i] == m ? 1 : 0;
      CHECK(a[m] == tally);
    }
  }
}

TEST_CASE("count_compositions") {
  CHECK(count_compositions(48, 4) == 20825);
  CHECK(count_compositions(17, 1) == 1);
  CHECK(count_compositions(0, 3) == 1);
  int triples = 0;
  for (int a = 0; a <= 6; ++a)
    for (int b = 0; a + b <= 6; ++b) ++triples;
  CHECK(count_compositions(6, 3) == static_cast<std::uint64_t>(triples));
  CHECK(count_compositions(6, 3) == 28);
  CHECK_THROWS_AS(count_compositions(100000, 40), OverflowError);
  CHECK_THROWS_AS(count_compositions(-1, 2), ValidationError);
  CHECK_THROWS_AS(count_compositions(3, 0), ValidationError);
}

TEST_CASE("count_placements_in_allocation") {
  CHECK(count_placements_in_allocation(Allocation{48, 0, 0, 0}) == 1);
  CHECK(count_placements_in_allocation(Allocation{2, 1, 0}) == 3);
  const BigInt balanced = count_placements_in_allocation(Allocation{12, 12, 12, 12});
  const BigInt f12 = factorial(12);
  CHECK(balanced == factorial(48) / (f12 * f12 * f12 * f12));
  CHECK(static_cast<int>(std::floor(std::log10(balanced.convert_to<double>()))) == 26);
}

TEST_CASE("multinomials over all allocations sum to M^L") {
  for (int L = 0; L <= 10; ++L) {
    for (int M = 1; M <= 4; ++M) {
      BigInt total = 0;
      for (const auto& a : enumerate_allocations(L, M)) total += count_placements_in_allocation(a);
      BigInt expect = 1;
      for (int i = 0; i < L; ++i) expect *= M;
      CHECK(total == expect);
    }
  }
}

TEST_CASE("composition ranking is a bijection in ascending order") {
  const auto all = enumerate_allocations(7, 4);
  REQUIRE(all.size() == count_compositions(7, 4));
  CHECK(all.front() == Allocation{0, 0, 0, 7});
  CHECK(all.back() == Allocation{7, 0, 0, 0});
  for (std::size_t r = 0; r < all.size(); ++r) {
    CHECK(unrank_composition(r, 7, 4) == all[r]);
    CHECK(rank_composition(all[r]) == r);
    if (r > 0) CHECK(all[r - 1] < all[r]);
  }
}

TEST_CASE("local sampling") {
  for (int s = 0; s < 5; ++s) CHECK(sample_local(s, 9, 1) == Placement(std::vector<int>(9, 0)));
  CHECK(sample_local(123, 48, 4) == sample_local(123, 48, 4));

  constexpr int kDraws = 100000;
  const int L = 5, M = 4;
  std::vector<std::vector<double>> freq(L, std::vector<double>(M, 0.0));
  PlacementSampler sampler(99, L, M, SamplingScheme::kLocal);
  for (int d = 0; d < kDraws; ++d) {
    const auto p = sampler.next();
    for (int i = 0; i < L; ++i) freq[i][static_cast<std::size_t>(p[i])] += 1.0;
  }
  for (int i = 0; i < L; ++i) CHECK(chi2_p_value(freq[i], std::vector<double>(M, kDraws / double(M))) > 0.01);
}

TEST_CASE("global sampling") {
  for (int s = 0; s < 5; ++s) CHECK(sample_global(s, 9, 1) == Placement(std::vector<int>(9, 0)));
  CHECK(sample_global(5, 48, 4) == sample_global(5, 48, 4));

  constexpr int kDraws = 100000;
  std::map<Allocation, double> freq;
  for (const auto& a : enumerate_allocations(6, 3)) freq[a] = 0.0;
  PlacementSampler sampler(2024, 6, 3, SamplingScheme::kGlobal);
  for (int d = 0; d < kDraws; ++d) freq.at(allocation_of(sampler.next(), 3)) += 1.0;
  std::vector<double> obs;
  for (const auto& [a, f] : freq) obs.push_back(f);
  CHECK(obs.size() == 28);
  CHECK(chi2_p_value(obs, std::vector<double>(28, kDraws / 28.0)) > 0.01);

  // Within one allocation every ordering is equally likely.
  std::map<Placement, double> within;
  for (int d = 0; d < 60000; ++d) within[sample_within_allocation(derive_seed(7, d), Allocation{2, 1, 1})] += 1.0;
  std::vector<double> w;
  for (const auto& [p, f] : within) w.push_back(f);
  CHECK(w.size() == 12);
  CHECK(chi2_p_value(w, std::vector<double>(12, 5000.0)) > 0.01);

  // The sampler's i-th draw is the per-draw seeded sample.
  PlacementSampler again(31, 10, 3, SamplingScheme::kGlobal);
  for (int i = 0; i < 5; ++i) CHECK(again.next() == sample_global(derive_seed(31, i), 10, 3));
}

TEST_CASE("all-type-0 probability under each scheme") {
  // Global: 1/#allocations times 1/1 placement in that allocation.
  const double global = 1.0 / static_cast<double>(count_compositions(48, 4)) /
                        count_placements_in_allocation(Allocation{48, 0, 0, 0}).convert_to<double>();
  CHECK(global == doctest::Approx(1.0 / 20825));
  CHECK(std::pow(4.0, -48) < global * 1e-20);
}

TEST_CASE("conditional same-type probability") {
  CHECK(conditional_same_type_probability(48, 4, SamplingScheme::kLocal) == doctest::Approx(0.25));
  CHECK(conditional_same_type_probability(48, 4, SamplingScheme::kGlobal) == doctest::Approx(0.40).epsilon(0.005 / 0.40));

  // Exhaustive oracle: every allocation weighted equally, every placement
  // within it equally; conditional on x_0 = 0, how often is x_1 = 0.
  for (int L : {2, 3, 4, 5}) {
    for (int M : {1, 2, 3}) {
      const auto allocs = enumerate_allocations(L, M);
      double joint = 0.0, marginal = 0.0;
      for_each_placement(L, M, [&](const Placement& p) {
        const double w = 1.0 / static_cast<double>(allocs.size()) /
                         count_placements_in_allocation(allocation_of(p, M)).convert_to<double>();
        if (p[0] == 0) {
          marginal += w;
          if (p[1] == 0) joint += w;
        }
      });
      CHECK(conditional_same_type_probability(L, M, SamplingScheme::kGlobal) ==
            doctest::Approx(joint / marginal).epsilon(1e-12));
    }
  }

  for (int L = 2; L <= 12; ++L)
    for (int M = 2; M <= 5; ++M)
      CHECK(conditional_same_type_probability(L, M, SamplingScheme::kGlobal) >= 1.0 / M - 1e-15);
}

TEST_CASE("sampled placements always form valid allocations") {
  for (int i = 0; i < 200; ++i) {
    const auto p = sample_global(derive_seed(1, i), 13, 4);
    CHECK(allocation_of(p, 4).total() == 13);
    const auto q = sample_local(derive_seed(2, i), 13, 4);
    CHECK_NOTHROW(allocation_of(q, 4).validate(13));
  }
}

TEST_CASE("catalog and text forms") {
  const auto cat = MixerCatalog::standard();
  CHECK(cat.size() == 4);
  CHECK(cat.to_spec() == "FA:A,SWA:S,KDA:K,GDN:G");
  CHECK(MixerCatalog::parse(cat.to_spec()) == cat);
  CHECK(MixerCatalog::parse("X,Y").code(1) == 'Y');
  CHECK_THROWS_AS(MixerCatalog::parse("FA:A,SWA:A"), ValidationError);
  CHECK_THROWS_AS(MixerCatalog::parse("FA,FA"), ValidationError);

  const auto p = sample_local(8, 48, 4);
  const std::string codes = to_code_string(p, cat);
  CHECK(codes.size() == 48);
  CHECK(placement_from_code_string(codes, cat) == p);
  CHECK(placement_from_name_json(to_name_json(p, cat), cat) == p);
  CHECK(to_code_string(Placement{0, 1, 2, 3}, cat) == "ASKG");
  CHECK_THROWS_AS(placement_from_code_string("ASXG", cat), ValidationError);
}
