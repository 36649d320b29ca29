#pragma once

#include <string>

#include "placeopt/evaluator.hpp"

namespace placeopt {

/// Runs a shell command per batch: placement code strings go to its stdin,
/// one per line; one score per line is read back from its stdout.
class SubprocessEvaluator : public Evaluator {
 public:
  SubprocessEvaluator(std::string command, MixerCatalog catalog, bool noisy = false);

  std::vector<double> evaluate(std::span<const Placement> placements) override;
  bool noisy() const override { return noisy_; }

 private:
  std::string command_;
  MixerCatalog catalog_;
  bool noisy_;
};

}  // namespace placeopt
