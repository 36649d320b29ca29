#pragma once

#include <span>
#include <vector>

#include "placeopt/placement.hpp"

namespace placeopt {

/// Scores placements. Implementations must return one finite score per
/// input, in input order, and throw EvaluatorError on failure.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  virtual std::vector<double> evaluate(std::span<const Placement> placements) = 0;

  /// True when repeated calls on one placement may return different scores.
  virtual bool noisy() const { return false; }
};

}  // namespace placeopt
