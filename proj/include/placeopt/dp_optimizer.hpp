#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "placeopt/cluster_expansion.hpp"
#include "placeopt/cost_model.hpp"
#include "placeopt/placement.hpp"

namespace placeopt {

class SurrogatePosterior;

/// Costs closer than this (relative to max(1, |cost|)) count as equal.
inline constexpr double kCostTolerance = 1e-9;

bool costs_equal(double a, double b) noexcept;
bool cost_within_budget(double cost, double budget) noexcept;

/// Additive chain MRF over layers. The score of a placement is the sum of
/// unary terms, pairwise terms for every distance 1..range, and contiguous
/// triplet terms at order 3.
struct MRFPotentials {
  int num_layers = 0;
  int num_types = 0;
  ExpansionConfig config;
  std::vector<double> unary;                  // [layer * M + m]
  std::vector<std::vector<double>> pairwise;  // [d - 1][layer * M^2 + m * M + m']
  std::vector<double> triplet;                // [layer * M^3 + (m * M + m') * M + m'']

  static MRFPotentials zeros(int num_layers, int num_types, const ExpansionConfig& config);

  void validate() const;

  double& unary_at(int layer, int m);
  double unary_at(int layer, int m) const;
  double& pair_at(int distance, int layer, int m, int m2);
  double pair_at(int distance, int layer, int m, int m2) const;
  double& triplet_at(int layer, int m, int m2, int m3);
  double triplet_at(int layer, int m, int m2, int m3) const;

  /// Sum of all potentials touched by the placement.
  double score(const Placement& placement) const;
};

/// Folds allocation-count coefficients into the unary terms.
MRFPotentials extract_potentials(const SurrogatePosterior& posterior);

struct ScoredPlacement {
  Placement placement;
  double score = 0.0;
};

struct AllocationSolution {
  Allocation allocation;
  std::vector<ScoredPlacement> best;  // score descending, ties lexicographic
};

struct DpOptions {
  int k = 1;
  /// Refuse to run when the analytic state-table estimate exceeds this.
  std::uint64_t memory_budget_bytes = std::uint64_t{2} << 30;
};

struct DpResult {
  std::vector<AllocationSolution> solutions;  // ascending allocation order
  std::size_t final_state_count = 0;

  const AllocationSolution* find(const Allocation& allocation) const;
};

/// Upper bound on table memory for the given problem, in bytes.
double estimate_dp_memory_bytes(int num_layers, int num_types, const ExpansionConfig& config,
                                int k);

/// Exact top-k placements for every allocation in one pass over the layers.
DpResult solve_all_allocations(const MRFPotentials& potentials, const DpOptions& options = {});

struct ParetoPoint {
  double cost = 0.0;
  Placement placement;
  double predicted_score = 0.0;
  std::optional<double> validated_score;
};

/// Best placement with cost <= budget. Throws InfeasibleError naming the
/// minimum feasible cost when nothing fits.
ParetoPoint constrained_optimum(const DpResult& table, const CostModel& cost_model, double budget);
ParetoPoint constrained_optimum(const MRFPotentials& potentials, const CostModel& cost_model,
                                double budget);

/// Non-dominated per-allocation optima, strictly increasing in cost and score.
std::vector<ParetoPoint> pareto_frontier(std::span<const AllocationSolution> solutions,
                                         const CostModel& cost_model);

/// Keeps points no other point dominates; output sorted by cost.
std::vector<ParetoPoint> non_dominated(std::vector<ParetoPoint> points);

}  // namespace placeopt
