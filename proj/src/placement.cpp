#include "placeopt/placement.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "placeopt/error.hpp"
#include "placeopt/rng.hpp"

namespace placeopt {

MixerCatalog::MixerCatalog(std::vector<std::string> names, std::vector<char> short_codes)
    : names_(std::move(names)), codes_(std::move(short_codes)) {
  if (names_.empty()) throw ValidationError("mixer catalog must contain at least one type");
  if (names_.size() != codes_.size())
    throw ValidationError("mixer catalog needs exactly one short code per type");
  if (std::set<std::string>(names_.begin(), names_.end()).size() != names_.size())
    throw ValidationError("mixer catalog labels must be unique");
  if (std::set<char>(codes_.begin(), codes_.end()).size() != codes_.size())
    throw ValidationError("mixer catalog short codes must be unique");
  for (const auto& n : names_) {
    if (n.empty()) throw ValidationError("mixer catalog labels must be non-empty");
  }
  for (char c : codes_) {
    if (c == ',' || c == ':' || static_cast<unsigned char>(c) <= ' ')
      throw ValidationError(std::string("invalid short code '") + c + "'");
  }
}

MixerCatalog MixerCatalog::standard() {
  return MixerCatalog({"FA", "SWA", "KDA", "GDN"}, {'A', 'S', 'K', 'G'});
}

MixerCatalog MixerCatalog::parse(std::string_view spec) {
  std::vector<std::string> names;
  std::vector<char> codes;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const std::size_t end = std::min(spec.find(',', pos), spec.size());
    const std::string_view item = spec.substr(pos, end - pos);
    const std::size_t colon = item.find(':');
    if (colon == std::string_view::npos) {
      if (item.empty()) throw ValidationError("empty entry in catalog '" + std::string(spec) + "'");
      names.emplace_back(item);
      codes.push_back(item.front());
    } else {
      const std::string_view code = item.substr(colon + 1);
      if (code.size() != 1)
        throw ValidationError("short code must be one character in '" + std::string(item) + "'");
      names.emplace_back(item.substr(0, colon));
      codes.push_back(code.front());
    }
    pos = end + 1;
  }
  return MixerCatalog(std::move(names), std::move(codes));
}

const std::string& MixerCatalog::name(int type) const {
  if (type < 0 || type >= size()) throw ValidationError("type index out of range");
  return names_[static_cast<std::size_t>(type)];
}

char MixerCatalog::code(int type) const {
  if (type < 0 || type >= size()) throw ValidationError("type index out of range");
  return codes_[static_cast<std::size_t>(type)];
}

int MixerCatalog::index_of_name(std::string_view name) const {
  for (int m = 0; m < size(); ++m) {
    if (names_[static_cast<std::size_t>(m)] == name) return m;
  }
  throw ValidationError("unknown mixer type '" + std::string(name) + "'");
}

int MixerCatalog::index_of_code(char code) const {
  for (int m = 0; m < size(); ++m) {
    if (codes_[static_cast<std::size_t>(m)] == code) return m;
  }
  throw ValidationError(std::string("unknown mixer code '") + code + "'");
}

std::string MixerCatalog::to_spec() const {
  std::string out;
  for (int m = 0; m < size(); ++m) {
    if (m) out += ',';
    out += names_[static_cast<std::size_t>(m)];
    out += ':';
    out += codes_[static_cast<std::size_t>(m)];
  }
  return out;
}

void Placement::validate(int num_types) const {
  for (std::size_t i = 0; i < types_.size(); ++i) {
    if (types_[i] < 0 || types_[i] >= num_types)
      throw ValidationError("layer " + std::to_string(i) + " has type index " +
                            std::to_string(types_[i]) + " outside [0, " +
                            std::to_string(num_types) + ")");
  }
}

int Allocation::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0); }

void Allocation::validate(int num_layers) const {
  if (counts_.empty()) throw ValidationError("allocation has no types");
  for (int c : counts_) {
    if (c < 0) throw ValidationError("allocation " + to_string() + " has a negative count");
  }
  if (total() != num_layers)
    throw ValidationError("allocation " + to_string() + " does not sum to " +
                          std::to_string(num_layers));
}

bool Allocation::satisfies_min_count(int min_count) const {
  return std::all_of(counts_.begin(), counts_.end(),
                     [&](int c) { return c == 0 || c >= min_count; });
}

std::string Allocation::to_string() const {
  std::string out = "(";
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(counts_[i]);
  }
  return out + ")";
}

Allocation allocation_of(const Placement& placement, int num_types) {
  placement.validate(num_types);
  std::vector<int> counts(static_cast<std::size_t>(num_types), 0);
  for (int t : placement.assignments()) ++counts[static_cast<std::size_t>(t)];
  return Allocation(std::move(counts));
}

namespace {

std::uint64_t checked_binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  // result * (n - k + i) is always divisible by i; use 128-bit intermediates.
  boost::multiprecision::uint128_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
    if (result > UINT64_MAX)
      throw OverflowError("binomial C(" + std::to_string(n) + ", " + std::to_string(k) +
                          ") exceeds 64 bits");
  }
  return result.convert_to<std::uint64_t>();
}

}  // namespace

std::uint64_t count_compositions(int num_layers, int num_types) {
  if (num_layers < 0) throw ValidationError("number of layers must be non-negative");
  if (num_types < 1) throw ValidationError("number of types must be at least 1");
  return checked_binomial(static_cast<std::uint64_t>(num_layers + num_types - 1),
                          static_cast<std::uint64_t>(num_types - 1));
}

BigInt count_placements_in_allocation(const Allocation& allocation) {
  allocation.validate(allocation.total());
  BigInt result = 1;
  int placed = 0;
  // Product of binomials C(placed + n_m, n_m); each partial product is exact.
  for (int n : allocation.counts()) {
    for (int i = 1; i <= n; ++i) {
      result *= placed + i;
      result /= i;
    }
    placed += n;
  }
  return result;
}

Allocation unrank_composition(std::uint64_t rank, int num_layers, int num_types) {
  const std::uint64_t total = count_compositions(num_layers, num_types);
  if (rank >= total) throw ValidationError("composition rank out of range");
  std::vector<int> counts(static_cast<std::size_t>(num_types), 0);
  int remaining = num_layers;
  for (int t = 0; t + 1 < num_types; ++t) {
    const int rest = num_types - t - 1;
    int v = 0;
    for (;; ++v) {
      const std::uint64_t block = count_compositions(remaining - v, rest);
      if (rank < block) break;
      rank -= block;
    }
    counts[static_cast<std::size_t>(t)] = v;
    remaining -= v;
  }
  counts.back() = remaining;
  return Allocation(std::move(counts));
}

std::uint64_t rank_composition(const Allocation& allocation) {
  const int num_types = allocation.num_types();
  int remaining = allocation.total();
  allocation.validate(remaining);
  std::uint64_t rank = 0;
  for (int t = 0; t + 1 < num_types; ++t) {
    const int rest = num_types - t - 1;
    for (int v = 0; v < allocation[t]; ++v) rank += count_compositions(remaining - v, rest);
    remaining -= allocation[t];
  }
  return rank;
}

std::vector<Allocation> enumerate_allocations(int num_layers, int num_types) {
  const std::uint64_t total = count_compositions(num_layers, num_types);
  std::vector<Allocation> out;
  out.reserve(static_cast<std::size_t>(total));
  std::vector<int> counts(static_cast<std::size_t>(num_types), 0);
  // Odometer over the first M-1 counts in ascending lexicographic order.
  auto emit = [&](auto&& self, int t, int remaining) -> void {
    if (t + 1 == num_types) {
      counts[static_cast<std::size_t>(t)] = remaining;
      out.emplace_back(counts);
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      counts[static_cast<std::size_t>(t)] = v;
      self(self, t + 1, remaining - v);
    }
  };
  emit(emit, 0, num_layers);
  return out;
}

Placement sample_within_allocation(std::uint64_t seed, const Allocation& allocation) {
  std::vector<int> types;
  types.reserve(static_cast<std::size_t>(allocation.total()));
  for (int m = 0; m < allocation.num_types(); ++m) types.insert(types.end(), allocation[m], m);
  Rng rng(seed);
  rng.shuffle(std::span<int>(types));
  return Placement(std::move(types));
}

Placement sample_local(std::uint64_t seed, int num_layers, int num_types) {
  if (num_types < 1) throw ValidationError("number of types must be at least 1");
  if (num_layers < 0) throw ValidationError("number of layers must be non-negative");
  Rng rng(seed);
  std::vector<int> types(static_cast<std::size_t>(num_layers));
  for (auto& t : types) t = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(num_types)));
  return Placement(std::move(types));
}

Placement sample_global(std::uint64_t seed, int num_layers, int num_types) {
  const std::uint64_t total = count_compositions(num_layers, num_types);
  Rng rng(seed);
  const Allocation allocation = unrank_composition(rng.uniform_index(total), num_layers, num_types);
  return sample_within_allocation(rng.next_u64(), allocation);
}

SamplingScheme parse_sampling_scheme(std::string_view name) {
  if (name == "local") return SamplingScheme::kLocal;
  if (name == "global") return SamplingScheme::kGlobal;
  throw ValidationError("unknown sampling scheme '" + std::string(name) + "'");
}

PlacementSampler::PlacementSampler(std::uint64_t global_seed, int num_layers, int num_types,
                                   SamplingScheme scheme)
    : global_seed_(global_seed), num_layers_(num_layers), num_types_(num_types), scheme_(scheme) {
  count_compositions(num_layers, num_types);  // validates arguments
}

Placement PlacementSampler::next() {
  const std::uint64_t seed = derive_seed(global_seed_, index_++);
  return scheme_ == SamplingScheme::kLocal ? sample_local(seed, num_layers_, num_types_)
                                           : sample_global(seed, num_layers_, num_types_);
}

double conditional_same_type_probability(int num_layers, int num_types, SamplingScheme scheme) {
  if (num_layers < 2) throw ValidationError("conditional probability needs at least 2 layers");
  if (num_types < 1) throw ValidationError("number of types must be at least 1");
  if (scheme == SamplingScheme::kLocal) return 1.0 / num_types;
  if (num_types == 1) return 1.0;
  // Under allocation-uniform sampling the number of compositions with
  // n_m = k is C(L-k+M-2, M-2), so
  //   P(x_i=m, x_j=m) = E[n_m (n_m - 1)] / (L (L - 1))
  // and P(x_i=m) = 1/M by symmetry.
  const double total = static_cast<double>(count_compositions(num_layers, num_types));
  double expected = 0.0;
  for (int k = 2; k <= num_layers; ++k) {
    const double ways = static_cast<double>(count_compositions(num_layers - k, num_types - 1));
    expected += static_cast<double>(k) * (k - 1) * ways;
  }
  expected /= total;
  return num_types * expected / (static_cast<double>(num_layers) * (num_layers - 1));
}

std::string to_code_string(const Placement& placement, const MixerCatalog& catalog) {
  placement.validate(catalog.size());
  std::string out;
  out.reserve(static_cast<std::size_t>(placement.num_layers()));
  for (int t : placement.assignments()) out += catalog.code(t);
  return out;
}

Placement placement_from_code_string(std::string_view codes, const MixerCatalog& catalog) {
  std::vector<int> types;
  types.reserve(codes.size());
  for (char c : codes) types.push_back(catalog.index_of_code(c));
  return Placement(std::move(types));
}

nlohmann::json to_name_json(const Placement& placement, const MixerCatalog& catalog) {
  placement.validate(catalog.size());
  nlohmann::json out = nlohmann::json::array();
  for (int t : placement.assignments()) out.push_back(catalog.name(t));
  return out;
}

Placement placement_from_name_json(const nlohmann::json& names, const MixerCatalog& catalog) {
  if (!names.is_array()) throw ValidationError("placement JSON must be an array of type names");
  std::vector<int> types;
  for (const auto& n : names) {
    if (!n.is_string()) throw ValidationError("placement JSON entries must be strings");
    types.push_back(catalog.index_of_name(n.get<std::string>()));
  }
  return Placement(std::move(types));
}

}  // namespace placeopt
