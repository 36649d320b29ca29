#include "placeopt/records.hpp"

#include <algorithm>
#include <cmath>

#include "placeopt/error.hpp"

namespace placeopt {

ScoreNormalization::ScoreNormalization(double reference_min, double reference_max)
    : lo_(reference_min), hi_(reference_max) {
  if (!std::isfinite(lo_) || !std::isfinite(hi_))
    throw ValidationError("score normalization bounds must be finite");
  if (!(hi_ > lo_))
    throw ValidationError("degenerate normalization reference (max must exceed min)");
}

ScoreNormalization ScoreNormalization::fit(std::span<const double> reference) {
  if (reference.empty()) throw ValidationError("normalization reference set is empty");
  const auto [lo, hi] = std::minmax_element(reference.begin(), reference.end());
  return ScoreNormalization(*lo, *hi);
}

std::vector<double> ScoreNormalization::apply(std::span<const double> raw) const {
  std::vector<double> out;
  out.reserve(raw.size());
  for (double v : raw) out.push_back(apply(v));
  return out;
}

std::vector<double> normalize_scores(std::span<const double> scores,
                                     std::span<const double> reference) {
  return ScoreNormalization::fit(reference).apply(scores);
}

}  // namespace placeopt
