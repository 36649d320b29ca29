#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "placeopt/cost_model.hpp"
#include "placeopt/records.hpp"

namespace placeopt {

/// Scores of a fixed placement set at every checkpoint. The last checkpoint
/// is the reference ("final") rater.
struct CheckpointScores {
  std::vector<std::string> checkpoints;
  std::vector<Placement> placements;
  std::vector<std::vector<double>> scores;  // [checkpoint][placement]
  std::vector<double> costs;                // per placement; may be empty

  std::size_t num_placements() const noexcept { return placements.size(); }
  const std::vector<double>& final_scores() const { return scores.back(); }
  void validate() const;
};

/// Groups records by checkpoint tag (first-appearance order). Every
/// placement must be scored exactly once at every checkpoint. Costs come
/// from the records, or from the cost model when given.
CheckpointScores pivot_records(std::span<const EvaluationRecord> records,
                               const CostModel* cost_model = nullptr);

/// 1-based ranks, ascending; ties get the average of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks. Throws ValidationError on length
/// mismatch, fewer than 2 items, or zero rank variance.
double spearman_rho(std::span<const double> a, std::span<const double> b);

/// Tie-corrected Kendall's W over raters (rows) ranking the same items.
/// With a tier, only the top ceil(tier * n) items by the last rater are kept
/// (ties by index).
double kendalls_w(std::span<const std::vector<double>> raters, std::optional<double> tier = std::nullopt);

/// |top_k(early) intersect top_k(final)| / k, ties broken by index.
double top_k_overlap(std::span<const double> early, std::span<const double> final_scores, int k);

enum class BandKind { kAll, kFrontier, kMedian };

struct Band {
  BandKind kind = BandKind::kAll;
  double delta = 0.0;  // absolute score distance

  std::string label() const;
  /// "all", "frontier:50", "median:25".
  static Band parse(const std::string& text);
};

struct WindowStability {
  std::size_t start = 0;  // position in cost order
  std::size_t size = 0;
  double cost_lo = 0.0;
  double cost_hi = 0.0;
  std::size_t members = 0;  // band members
  std::vector<std::optional<double>> rho;  // per non-final checkpoint; empty when undefined
};

/// Placements sorted by cost (ties by index) and cut into windows of
/// `window` consecutive placements advancing by `stride`. A final window is
/// added when the stride would skip the tail.
std::vector<WindowStability> rolling_window_stability(const CheckpointScores& data, int window = 200,
                                                      const Band& band = {}, int stride = 1);

/// Start offsets of the windows used by rolling_window_stability.
std::vector<std::size_t> window_starts(std::size_t n, std::size_t window, std::size_t stride);

struct WindowOverlap {
  std::size_t start = 0;
  std::size_t size = 0;
  std::optional<double> overlap;  // empty when the window holds fewer than k placements
};

std::vector<WindowOverlap> top_k_overlap_windows(std::span<const double> costs, std::span<const double> early,
                                                 std::span<const double> final_scores, int k, int window,
                                                 int stride = 1);

struct StabilityOptions {
  std::vector<double> tiers = {1.0, 0.5, 0.25, 0.1, 0.05};
  int window = 200;
  int stride = 1;
  std::vector<Band> bands = {Band{}};
  std::vector<int> overlap_k = {5, 10, 20, 50};
};

struct BandCurves {
  Band band;
  std::vector<WindowStability> windows;
};

struct StabilityReport {
  std::vector<std::string> checkpoints;
  std::size_t num_placements = 0;
  std::vector<std::optional<double>> rho_vs_final;  // per non-final checkpoint
  std::vector<std::optional<double>> w_by_tier;  // parallel to options.tiers
  std::vector<BandCurves> bands;             // empty when costs are unavailable
  std::vector<std::vector<std::optional<double>>> overlap;  // [checkpoint][k]
  StabilityOptions options;
};

StabilityReport analyze_stability(const CheckpointScores& data, const StabilityOptions& options = {});

}  // namespace placeopt
