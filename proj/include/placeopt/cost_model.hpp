#pragma once

#include <optional>
#include <span>
#include <vector>

#include "placeopt/placement.hpp"

namespace placeopt {

/// One aggregate decode-throughput measurement for a mixed placement.
struct ThroughputRecord {
  Allocation allocation;
  double throughput = 0.0;  // tokens / second
};

struct CostFitStats {
  double r_squared = 0.0;       // uncentered, on the 1/throughput scale
  double mean_abs_error_frac = 0.0;  // mean |pred - obs| / obs of latency
  int n_records = 0;
};

/// Additive per-layer cost model.
///
/// Raw coefficients are latency per token per layer. Everything that leaves
/// this class (placement and allocation costs) is in normalized units where
/// the reference type costs exactly 1.
class CostModel {
 public:
  CostModel(std::vector<double> raw_coefficients, int reference_type = 0,
            std::optional<CostFitStats> fit_stats = std::nullopt, double intercept = 0.0);

  /// Builds a model directly from normalized costs (reference entry must be 1).
  static CostModel from_normalized(std::vector<double> normalized, int reference_type = 0);

  int num_types() const noexcept { return static_cast<int>(raw_.size()); }
  int reference_type() const noexcept { return reference_; }
  const std::vector<double>& raw_coefficients() const noexcept { return raw_; }
  const std::vector<double>& normalized() const noexcept { return normalized_; }
  double normalized_cost(int type) const;
  const std::optional<CostFitStats>& fit_stats() const noexcept { return stats_; }
  double intercept() const noexcept { return intercept_; }

  double placement_cost(const Placement& placement) const;
  double allocation_cost(const Allocation& allocation) const;

  /// Predicted 1/throughput in raw units, including any fitted intercept.
  double predicted_latency(const Allocation& allocation) const;

 private:
  std::vector<double> raw_;
  std::vector<double> normalized_;
  int reference_;
  std::optional<CostFitStats> stats_;
  double intercept_;
};

/// Idealized model from pure-placement throughputs: normalized c_m = thr_ref / thr_m.
/// Raw coefficients are 1 / (num_layers * thr_m).
CostModel fit_idealized(std::span<const double> pure_throughputs, int reference_type = 0,
                        int num_layers = 48);

struct RegressionOptions {
  int reference_type = 0;
  /// Adds a constant latency term. Off by default: a nonzero intercept is not
  /// attributable to layers and is excluded from placement costs.
  bool fit_intercept = false;
};

/// Ordinary least squares of 1/throughput on type counts.
CostModel fit_regression(std::span<const ThroughputRecord> records, int num_types,
                         const RegressionOptions& options = {});

/// Keeps records whose every type count is 0 or >= min_count.
std::vector<ThroughputRecord> filter_singletons(std::span<const ThroughputRecord> records,
                                                int min_count = 3);

}  // namespace placeopt
