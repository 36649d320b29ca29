#include "placeopt/cluster_expansion.hpp"

#include <algorithm>
#include <charconv>

#include "placeopt/error.hpp"

namespace placeopt {

void ExpansionConfig::validate() const {
  if (order < 1 || order > 3)
    throw ValidationError("expansion order must be 1, 2 or 3 (got " + std::to_string(order) + ")");
  if (range < 1) throw ValidationError("expansion range must be at least 1");
}

ExpansionConfig ExpansionConfig::canonical() const {
  ExpansionConfig out = *this;
  if (out.order == 1) out.range = 1;
  return out;
}

std::string ExpansionConfig::label() const {
  std::string out = "o" + std::to_string(order);
  if (order >= 2) out += "r" + std::to_string(range);
  if (!include_allocation_counts) out += "-nocounts";
  return out;
}

ExpansionConfig ExpansionConfig::parse(std::string_view label) {
  ExpansionConfig cfg;
  auto fail = [&]() -> ExpansionConfig {
    throw ValidationError("cannot parse expansion label '" + std::string(label) + "'");
  };
  std::string_view rest = label;
  constexpr std::string_view kNoCounts = "-nocounts";
  if (rest.size() > kNoCounts.size() && rest.substr(rest.size() - kNoCounts.size()) == kNoCounts) {
    cfg.include_allocation_counts = false;
    rest.remove_suffix(kNoCounts.size());
  }
  if (rest.empty() || rest.front() != 'o') return fail();
  rest.remove_prefix(1);
  const std::size_t r = rest.find('r');
  const std::string_view order_part = rest.substr(0, r);
  auto [p1, e1] = std::from_chars(order_part.data(), order_part.data() + order_part.size(), cfg.order);
  if (e1 != std::errc() || p1 != order_part.data() + order_part.size()) return fail();
  if (r != std::string_view::npos) {
    const std::string_view range_part = rest.substr(r + 1);
    auto [p2, e2] = std::from_chars(range_part.data(), range_part.data() + range_part.size(), cfg.range);
    if (e2 != std::errc() || p2 != range_part.data() + range_part.size()) return fail();
  }
  cfg.validate();
  return cfg.canonical();
}

int ExpansionConfig::memory() const {
  if (order == 1) return 0;
  if (order == 2) return range;
  return std::max(range, 2);
}

double FeatureVector::dot(const std::vector<double>& dense) const {
  double s = 0.0;
  for (std::size_t k = 0; k < indices.size(); ++k)
    s += values[k] * dense[static_cast<std::size_t>(indices[k])];
  return s;
}

namespace {

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out;
  if (__builtin_add_overflow(a, b, &out)) throw OverflowError("feature dimension overflow");
  return out;
}

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out;
  if (__builtin_mul_overflow(a, b, &out)) throw OverflowError("feature dimension overflow");
  return out;
}

}  // namespace

FeatureLayout::FeatureLayout(const ExpansionConfig& config, int num_layers, int num_types)
    : config_(config.canonical()), layers_(num_layers), types_(num_types) {
  config_.validate();
  if (num_layers < 1) throw ValidationError("number of layers must be positive");
  if (num_types < 1) throw ValidationError("number of types must be positive");
  const std::int64_t L = num_layers;
  const std::int64_t M = num_types;
  std::int64_t offset = checked_mul(L, M);
  count_offset_ = offset;
  if (config_.include_allocation_counts) offset = checked_add(offset, M);
  if (config_.order >= 2) {
    const std::int64_t m2 = checked_mul(M, M);
    for (int d = 1; d <= config_.range; ++d) {
      pair_offsets_.push_back(offset);
      offset = checked_add(offset, checked_mul(std::max<std::int64_t>(L - d, 0), m2));
    }
  }
  triplet_offset_ = offset;
  if (config_.order >= 3) {
    const std::int64_t m3 = checked_mul(checked_mul(M, M), M);
    offset = checked_add(offset, checked_mul(std::max<std::int64_t>(L - 2, 0), m3));
  }
  dimension_ = offset;
}

std::int64_t FeatureLayout::unary_index(int layer, int type) const {
  return static_cast<std::int64_t>(layer) * types_ + type;
}

std::int64_t FeatureLayout::count_index(int type) const {
  if (!config_.include_allocation_counts) throw ValidationError("layout has no count features");
  return count_offset_ + type;
}

std::int64_t FeatureLayout::pair_index(int distance, int layer, int type_a, int type_b) const {
  if (config_.order < 2 || distance < 1 || distance > config_.range)
    throw ValidationError("pair distance not in layout");
  const std::int64_t m = types_;
  return pair_offsets_[static_cast<std::size_t>(distance - 1)] + layer * m * m + type_a * m + type_b;
}

std::int64_t FeatureLayout::triplet_index(int layer, int type_a, int type_b, int type_c) const {
  if (config_.order < 3) throw ValidationError("layout has no triplet features");
  const std::int64_t m = types_;
  return triplet_offset_ + layer * m * m * m + (type_a * m + type_b) * m + type_c;
}

FeatureVector FeatureLayout::encode(const Placement& placement) const {
  if (placement.num_layers() != layers_)
    throw ValidationError("placement has " + std::to_string(placement.num_layers()) +
                          " layers, layout expects " + std::to_string(layers_));
  placement.validate(types_);
  if (dimension_ > INT32_MAX) throw OverflowError("feature dimension exceeds 32-bit ids");
  FeatureVector fv;
  fv.dimension = dimension_;
  auto push = [&](std::int64_t idx, double v) {
    fv.indices.push_back(static_cast<std::int32_t>(idx));
    fv.values.push_back(v);
  };
  for (int i = 0; i < layers_; ++i) push(unary_index(i, placement[i]), 1.0);
  if (config_.include_allocation_counts) {
    const Allocation alloc = allocation_of(placement, types_);
    for (int m = 0; m < types_; ++m) {
      if (alloc[m] > 0) push(count_index(m), alloc[m]);
    }
  }
  if (config_.order >= 2) {
    for (int d = 1; d <= config_.range; ++d) {
      for (int i = 0; i + d < layers_; ++i) push(pair_index(d, i, placement[i], placement[i + d]), 1.0);
    }
  }
  if (config_.order >= 3) {
    for (int i = 0; i + 2 < layers_; ++i)
      push(triplet_index(i, placement[i], placement[i + 1], placement[i + 2]), 1.0);
  }
  return fv;
}

std::int64_t feature_count(const ExpansionConfig& config, int num_layers, int num_types) {
  return FeatureLayout(config, num_layers, num_types).dimension();
}

}  // namespace placeopt
