#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "placeopt/placement.hpp"

namespace placeopt {

/// Bumped whenever the feature id layout below changes.
inline constexpr int kFeatureLayoutVersion = 1;

/// Expansion order and pairwise interaction range.
///
/// Order 1: unary indicators (plus allocation counts).
/// Order 2: adds pairwise indicators for every layer distance 1..range.
/// Order 3: adds contiguous triplet indicators on top of order 2.
struct ExpansionConfig {
  int order = 1;
  int range = 1;
  bool include_allocation_counts = true;

  void validate() const;
  /// Range has no effect at order 1; canonical form sets it to 1.
  ExpansionConfig canonical() const;
  /// "o1", "o2r1", "o3r3".
  std::string label() const;
  static ExpansionConfig parse(std::string_view label);

  /// Number of trailing layers the DP must remember.
  int memory() const;

  bool operator==(const ExpansionConfig&) const = default;
};

/// Sparse feature vector. Indices strictly increasing.
struct FeatureVector {
  std::vector<std::int32_t> indices;
  std::vector<double> values;
  std::int64_t dimension = 0;

  double dot(const std::vector<double>& dense) const;
};

/// Fixed feature-id layout for a given (config, L, M):
///
///   [unary: layer-major, type-minor]
///   [allocation counts: one per type]                       (if enabled)
///   [pairwise: distance 1..range, layer i, type pair m*M+m']  (order >= 2)
///   [triplets: layer i, types m*M*M + m'*M + m'']            (order 3)
class FeatureLayout {
 public:
  FeatureLayout(const ExpansionConfig& config, int num_layers, int num_types);

  const ExpansionConfig& config() const noexcept { return config_; }
  int num_layers() const noexcept { return layers_; }
  int num_types() const noexcept { return types_; }
  std::int64_t dimension() const noexcept { return dimension_; }

  std::int64_t unary_index(int layer, int type) const;
  std::int64_t count_index(int type) const;
  std::int64_t pair_index(int distance, int layer, int type_a, int type_b) const;
  std::int64_t triplet_index(int layer, int type_a, int type_b, int type_c) const;

  FeatureVector encode(const Placement& placement) const;

 private:
  ExpansionConfig config_;
  int layers_;
  int types_;
  std::int64_t count_offset_ = 0;
  std::vector<std::int64_t> pair_offsets_;  // indexed by distance - 1
  std::int64_t triplet_offset_ = 0;
  std::int64_t dimension_ = 0;
};

/// Exact feature dimension. Throws OverflowError past 63 bits.
std::int64_t feature_count(const ExpansionConfig& config, int num_layers, int num_types);

inline FeatureVector encode(const Placement& placement, const ExpansionConfig& config,
                            int num_types) {
  return FeatureLayout(config, placement.num_layers(), num_types).encode(placement);
}

}  // namespace placeopt
