#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "placeopt/cost_model.hpp"
#include "placeopt/records.hpp"
#include "placeopt/surrogate.hpp"

namespace placeopt {

inline constexpr int kDefaultGamma = 8;

/// Draft (q) and target (p) log-probabilities of one token of a completion
/// sampled from the target. logq may be -inf.
struct TokenLogProbs {
  double logq = 0.0;
  double logp = 0.0;
};

struct Trace {
  std::string prompt_id;
  std::vector<TokenLogProbs> tokens;
  bool target_generated = true;
};

struct AcceptanceEstimate {
  int gamma = kDefaultGamma;
  double n_bar = 0.0;  // expected accepted draft tokens per step
  double a = 0.0;      // n_bar / gamma
  double std_error = 0.0;
  std::int64_t n_steps = 0;
};

/// sum_{i=1}^{gamma} prod_{j<=i} min(q_j / p_j, 1), evaluated in log space.
double step_acceptance(std::span<const TokenLogProbs> step);

/// Mean of the per-step estimator over all complete gamma-token steps.
/// Trailing partial steps are dropped. Summation order is fixed.
AcceptanceEstimate estimate_acceptance(std::span<const Trace> traces, int gamma = kDefaultGamma);

/// n_bar * target_cost / (gamma * draft_cost + target_cost).
double speculative_speedup(double n_bar, int gamma, double draft_cost, double target_cost);
double speculative_speedup(const AcceptanceEstimate& estimate, double draft_cost, double target_cost);

/// Sum with a fixed binary tree of fan-in 2 over blocks of 8.
double pairwise_sum(std::span<const double> values);

struct DraftPoint {
  double cost = 0.0;
  Placement placement;
  double predicted_acceptance = 0.0;  // a, clipped to [0, 1]
  double speedup = 0.0;
};

struct DraftSearchOptions {
  int gamma = kDefaultGamma;
  NIGPrior prior;
  std::vector<ExpansionConfig> candidates = default_expansion_candidates();
  double guard_ratio = 2.0;
  int min_count = 0;
};

struct DraftSearchResult {
  ExpansionConfig expansion;
  std::vector<DraftPoint> frontier;  // ascending cost, non-dominated in (cost, a)
  DraftPoint best;                   // maximum speedup; cheapest on ties
};

/// Fits the surrogate to acceptance-rate records (score = a) and maps the
/// per-allocation optima through speculative_speedup.
DraftSearchResult search_draft_placement(std::span<const EvaluationRecord> acceptance_records,
                                         const CostModel& cost_model, double target_cost,
                                         const DraftSearchOptions& options = {});

}  // namespace placeopt
