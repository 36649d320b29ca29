#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "placeopt/placement.hpp"

namespace placeopt {

/// One observed (placement, score) pair.
struct EvaluationRecord {
  Placement placement;
  double score = 0.0;
  std::optional<std::string> checkpoint;
  std::optional<double> cost;
};

/// Affine map sending the reference minimum to 0 and maximum to 1.
/// The default-constructed map is the identity.
class ScoreNormalization {
 public:
  ScoreNormalization() = default;
  ScoreNormalization(double reference_min, double reference_max);

  /// Throws ValidationError when the reference set is empty or degenerate.
  static ScoreNormalization fit(std::span<const double> reference);

  double reference_min() const noexcept { return lo_; }
  double reference_max() const noexcept { return hi_; }
  bool is_identity() const noexcept { return lo_ == 0.0 && hi_ == 1.0; }

  double apply(double raw) const noexcept { return (raw - lo_) / (hi_ - lo_); }
  double invert(double normalized) const noexcept { return lo_ + normalized * (hi_ - lo_); }
  /// Factor by which spreads (standard deviations) scale under apply().
  double scale_factor() const noexcept { return 1.0 / (hi_ - lo_); }

  std::vector<double> apply(std::span<const double> raw) const;

  bool operator==(const ScoreNormalization&) const = default;

 private:
  double lo_ = 0.0;
  double hi_ = 1.0;
};

/// Min-max normalization of scores against a reference score set.
std::vector<double> normalize_scores(std::span<const double> scores,
                                     std::span<const double> reference);

}  // namespace placeopt
