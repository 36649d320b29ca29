#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "placeopt/cost_model.hpp"
#include "placeopt/dp_optimizer.hpp"
#include "placeopt/evaluator.hpp"
#include "placeopt/records.hpp"
#include "placeopt/surrogate.hpp"

namespace placeopt {

/// Inclusive normalized-cost interval.
struct CostBand {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double cost) const { return cost_within_budget(lo, cost) && cost_within_budget(cost, hi); }
};

struct AcquisitionConfig {
  double beta = 1.0;
  double safe_fraction = 0.7;
  std::optional<double> mean_floor_quantile;
  int pool_target = 1000;
  /// Overrides ceil(pool_target / feasible allocations) when set.
  std::optional<int> per_allocation_k;
  int candidate_min_count = 3;
  int rounds = 4;
  int evals_per_round = 500;
  /// Restricts candidates and exploration to allocations in this band.
  std::optional<CostBand> cost_band;

  void validate() const;
};

struct Candidate {
  Placement placement;
  double mean = 0.0;   // fitted units
  double scale = 0.0;  // fitted units
};

struct CandidatePool {
  std::vector<Candidate> candidates;  // ascending allocation, then DP rank
  int quota = 0;
  std::size_t feasible_allocations = 0;
};

/// Allocations with every count 0 or >= min_count, optionally inside a cost band.
std::vector<Allocation> feasible_allocations(int num_layers, int num_types, int min_count,
                                             const CostModel* cost_model = nullptr,
                                             const std::optional<CostBand>& band = std::nullopt);

/// Top `quota` surrogate placements for every feasible allocation. Placements
/// in `exclude` are skipped and the next-ranked ones taken instead.
CandidatePool generate_candidates(const SurrogatePosterior& posterior, const AcquisitionConfig& config,
                                  const CostModel* cost_model = nullptr,
                                  const std::set<Placement>* exclude = nullptr);

enum class Bucket { kSafe, kUpside };

struct Selection {
  Candidate candidate;
  Bucket bucket = Bucket::kSafe;
};

/// Safe picks rank by mean - beta*scale, upside picks by mean + beta*scale;
/// ties fall back to the mean, then to placement order. The optional mean
/// floor is applied before the quotas are split.
std::vector<Selection> select_batch(std::span<const Candidate> pool, const AcquisitionConfig& config,
                                    int budget);

/// Exploration draws: allocation uniform over the feasible set, placement
/// uniform within it. Draw i uses derive_seed(seed, i).
std::vector<Placement> sample_exploration(std::uint64_t seed, int count, int num_layers, int num_types,
                                          int min_count = 0, const CostModel* cost_model = nullptr,
                                          const std::optional<CostBand>& band = std::nullopt);

struct RefinementOptions {
  AcquisitionConfig acquisition;
  NIGPrior prior;
  std::vector<ExpansionConfig> candidates = default_expansion_candidates();
  double guard_ratio = 2.0;
  FitOptions fit;
  int num_types = 0;
  /// Score frontier placements with the evaluator at the end.
  bool validate_frontier = true;
};

struct RoundSummary {
  int round = 0;
  ExpansionConfig expansion;
  bool fell_back = false;
  std::size_t pool_size = 0;
  std::size_t evaluated = 0;
  std::size_t safe = 0;
  std::size_t upside = 0;
};

struct RefinementResult {
  SurrogatePosterior posterior;
  ExpansionConfig expansion;
  std::vector<EvaluationRecord> records;
  std::vector<ParetoPoint> frontier;
  std::vector<RoundSummary> rounds;
};

/// Called after each completed round with the records so far and the
/// posterior that drove the round.
using RoundObserver = std::function<void(const RoundSummary&, std::span<const EvaluationRecord>,
                                         const SurrogatePosterior&)>;

/// Rounds of select-expansion, fit, generate, select, evaluate, append.
/// Evaluator failures propagate as EvaluatorError after earlier rounds have
/// been reported to the observer.
RefinementResult refinement_loop(Evaluator& evaluator, std::vector<EvaluationRecord> initial_records,
                                 const CostModel& cost_model, const RefinementOptions& options,
                                 const RoundObserver& observer = {});

/// Final-stage frontier: best surrogate placement per feasible allocation,
/// non-dominated filtered.
std::vector<ParetoPoint> surrogate_frontier(const SurrogatePosterior& posterior,
                                            const CostModel& cost_model, int min_count = 0,
                                            const std::optional<CostBand>& band = std::nullopt);

}  // namespace placeopt
