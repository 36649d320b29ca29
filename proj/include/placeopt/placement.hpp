#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

namespace placeopt {

using BigInt = boost::multiprecision::cpp_int;

/// Ordered set of mixer types with one single-character code each.
class MixerCatalog {
 public:
  MixerCatalog(std::vector<std::string> names, std::vector<char> short_codes);

  /// FA, SWA, KDA, GDN with codes A, S, K, G.
  static MixerCatalog standard();

  /// Parses "FA:A,SWA:S" or "FA,SWA" (code = first character of the name).
  static MixerCatalog parse(std::string_view spec);

  int size() const noexcept { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<char>& short_codes() const noexcept { return codes_; }
  const std::string& name(int type) const;
  char code(int type) const;
  int index_of_name(std::string_view name) const;
  int index_of_code(char code) const;
  std::string to_spec() const;

  bool operator==(const MixerCatalog&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<char> codes_;
};

/// Per-layer mixer assignment. Element i is the type index at layer i.
class Placement {
 public:
  Placement() = default;
  explicit Placement(std::vector<int> assignments) : types_(std::move(assignments)) {}
  Placement(std::initializer_list<int> assignments) : types_(assignments) {}

  int num_layers() const noexcept { return static_cast<int>(types_.size()); }
  int operator[](int layer) const { return types_[static_cast<std::size_t>(layer)]; }
  int& operator[](int layer) { return types_[static_cast<std::size_t>(layer)]; }
  const std::vector<int>& assignments() const noexcept { return types_; }

  /// Throws ValidationError unless every index is in [0, num_types).
  void validate(int num_types) const;

  auto operator<=>(const Placement&) const = default;
  bool operator==(const Placement&) const = default;

 private:
  std::vector<int> types_;
};

/// Per-type layer counts.
class Allocation {
 public:
  Allocation() = default;
  explicit Allocation(std::vector<int> counts) : counts_(std::move(counts)) {}
  Allocation(std::initializer_list<int> counts) : counts_(counts) {}

  int num_types() const noexcept { return static_cast<int>(counts_.size()); }
  int operator[](int type) const { return counts_[static_cast<std::size_t>(type)]; }
  const std::vector<int>& counts() const noexcept { return counts_; }
  int total() const;

  /// Throws ValidationError on negative counts or a wrong total.
  void validate(int num_layers) const;

  /// True when every count is 0 or at least min_count.
  bool satisfies_min_count(int min_count) const;

  std::string to_string() const;

  auto operator<=>(const Allocation&) const = default;
  bool operator==(const Allocation&) const = default;

 private:
  std::vector<int> counts_;
};

Allocation allocation_of(const Placement& placement, int num_types);

/// C(L+M-1, M-1). Throws OverflowError if the result exceeds 64 bits.
std::uint64_t count_compositions(int num_layers, int num_types);

/// Exact multinomial L! / prod n_m!.
BigInt count_placements_in_allocation(const Allocation& allocation);

/// Composition of L into M parts at the given rank in ascending
/// lexicographic order of the count vector: rank 0 is (0,...,0,L), the last
/// rank is (L,0,...,0). Bijective on [0, count_compositions(L, M)).
Allocation unrank_composition(std::uint64_t rank, int num_layers, int num_types);
std::uint64_t rank_composition(const Allocation& allocation);

/// Every composition of L into M parts in rank order.
std::vector<Allocation> enumerate_allocations(int num_layers, int num_types);

/// Uniformly random ordering of the multiset described by the allocation.
Placement sample_within_allocation(std::uint64_t seed, const Allocation& allocation);

/// Each layer i.i.d. uniform over the M types.
Placement sample_local(std::uint64_t seed, int num_layers, int num_types);

/// Allocation uniform over compositions, placement uniform within it.
Placement sample_global(std::uint64_t seed, int num_layers, int num_types);

enum class SamplingScheme { kLocal, kGlobal };

SamplingScheme parse_sampling_scheme(std::string_view name);

/// Stream of placements whose i-th draw uses derive_seed(global_seed, i).
class PlacementSampler {
 public:
  PlacementSampler(std::uint64_t global_seed, int num_layers, int num_types,
                   SamplingScheme scheme);
  Placement next();
  std::uint64_t draws() const noexcept { return index_; }

 private:
  std::uint64_t global_seed_;
  int num_layers_;
  int num_types_;
  SamplingScheme scheme_;
  std::uint64_t index_ = 0;
};

/// P(x_j = m | x_i = m), i != j, under the given scheme. Exact.
double conditional_same_type_probability(int num_layers, int num_types,
                                         SamplingScheme scheme);

std::string to_code_string(const Placement& placement, const MixerCatalog& catalog);
Placement placement_from_code_string(std::string_view codes, const MixerCatalog& catalog);
nlohmann::json to_name_json(const Placement& placement, const MixerCatalog& catalog);
Placement placement_from_name_json(const nlohmann::json& names, const MixerCatalog& catalog);

/// Calls visit(placement) for all M^L placements in lexicographic order.
template <class Visit>
void for_each_placement(int num_layers, int num_types, Visit&& visit) {
  std::vector<int> digits(static_cast<std::size_t>(num_layers), 0);
  Placement p(digits);
  while (true) {
    visit(static_cast<const Placement&>(p));
    int pos = num_layers - 1;
    while (pos >= 0 && p[pos] == num_types - 1) {
      p[pos] = 0;
      --pos;
    }
    if (pos < 0) return;
    ++p[pos];
  }
}

}  // namespace placeopt
