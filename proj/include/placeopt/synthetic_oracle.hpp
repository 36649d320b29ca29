#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "placeopt/cost_model.hpp"
#include "placeopt/dp_optimizer.hpp"
#include "placeopt/evaluator.hpp"

namespace placeopt {

/// Ground-truth score landscape with optional Gaussian observation noise.
struct SyntheticLandscape {
  MRFPotentials potentials;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  double potential_scale = 1.0;
};

/// Potentials drawn i.i.d. N(0, scale^2).
SyntheticLandscape generate_landscape(int num_layers, int num_types, const ExpansionConfig& config,
                                      std::uint64_t seed, double potential_scale = 1.0,
                                      double noise_sigma = 0.0);

/// Noise-free potential sum.
double oracle_score(const SyntheticLandscape& landscape, const Placement& placement);

/// Stable 64-bit hash of the type sequence.
std::uint64_t placement_hash(const Placement& placement);

/// Evaluator backed by a landscape. Each call on a placement draws fresh
/// noise from a stream keyed by (seed, placement, per-placement call count),
/// so results do not depend on batch order.
class SyntheticEvaluator : public Evaluator {
 public:
  explicit SyntheticEvaluator(SyntheticLandscape landscape, bool with_noise = true);

  double score(const Placement& placement);
  std::vector<double> evaluate(std::span<const Placement> placements) override;
  bool noisy() const override { return with_noise_ && landscape_.noise_sigma > 0.0; }

  const SyntheticLandscape& landscape() const noexcept { return landscape_; }
  std::uint64_t calls() const noexcept { return calls_; }

 private:
  SyntheticLandscape landscape_;
  bool with_noise_;
  std::unordered_map<std::uint64_t, std::uint64_t> seen_;
  std::uint64_t calls_ = 0;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

struct BruteForceResult {
  std::vector<AllocationSolution> solutions;  // ascending allocation, top-k each
  std::vector<ParetoPoint> frontier;          // ascending cost
  std::uint64_t enumerated = 0;
};

/// Exhaustive enumeration of all M^L placements. Throws ResourceError when
/// M^L exceeds the cap.
BruteForceResult brute_force_frontier(const MRFPotentials& potentials, const CostModel& cost_model,
                                      int k = 1, std::uint64_t cap = kDefaultEnumerationCap);

/// Exhaustive budget-constrained optimum; throws InfeasibleError like the DP.
ParetoPoint brute_force_constrained(const MRFPotentials& potentials, const CostModel& cost_model,
                                    double budget, std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace placeopt
