#include "placeopt/synthetic_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "placeopt/error.hpp"
#include "placeopt/rng.hpp"

namespace placeopt {

SyntheticLandscape generate_landscape(int num_layers, int num_types, const ExpansionConfig& config,
                                      std::uint64_t seed, double potential_scale,
                                      double noise_sigma) {
  if (!(potential_scale >= 0.0) || !std::isfinite(potential_scale))
    throw ValidationError("potential scale must be finite and non-negative");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ValidationError("noise sigma must be finite and non-negative");
  SyntheticLandscape out;
  out.potentials = MRFPotentials::zeros(num_layers, num_types, config);
  out.noise_sigma = noise_sigma;
  out.seed = seed;
  out.potential_scale = potential_scale;
  Rng rng(derive_seed(seed, 0));
  auto fill = [&](std::vector<double>& table) {
    for (double& v : table) v = potential_scale * rng.normal();
  };
  fill(out.potentials.unary);
  for (auto& t : out.potentials.pairwise) fill(t);
  fill(out.potentials.triplet);
  return out;
}

double oracle_score(const SyntheticLandscape& landscape, const Placement& placement) {
  return landscape.potentials.score(placement);
}

std::uint64_t placement_hash(const Placement& placement) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int t : placement.assignments()) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(t));
    h *= 0x100000001b3ULL;
  }
  h ^= static_cast<std::uint64_t>(placement.num_layers());
  return mix64(h);
}

SyntheticEvaluator::SyntheticEvaluator(SyntheticLandscape landscape, bool with_noise)
    : landscape_(std::move(landscape)), with_noise_(with_noise) {
  landscape_.potentials.validate();
}

double SyntheticEvaluator::score(const Placement& placement) {
  ++calls_;
  double s = landscape_.potentials.score(placement);
  if (noisy()) {
    const std::uint64_t key = placement_hash(placement);
    const std::uint64_t n = seen_[key]++;
    Rng rng(derive_seed(derive_seed(landscape_.seed ^ 0x6e6f697365ULL, key), n));
    s += landscape_.noise_sigma * rng.normal();
  }
  return s;
}

std::vector<double> SyntheticEvaluator::evaluate(std::span<const Placement> placements) {
  std::vector<double> out;
  out.reserve(placements.size());
  for (const auto& p : placements) out.push_back(score(p));
  return out;
}

namespace {

void check_cap(int num_layers, int num_types, std::uint64_t cap) {
  const double total = std::pow(static_cast<double>(num_types), num_layers);
  if (total > static_cast<double>(cap)) {
    std::ostringstream msg;
    msg << "enumeration of " << total << " placements exceeds the cap of " << cap;
    throw ResourceError(msg.str(), total);
  }
}

bool ranks_before(const ScoredPlacement& a, const ScoredPlacement& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.placement < b.placement;
}

}  // namespace

BruteForceResult brute_force_frontier(const MRFPotentials& potentials, const CostModel& cost_model,
                                      int k, std::uint64_t cap) {
  potentials.validate();
  if (k < 1) throw ValidationError("k must be at least 1");
  const int L = potentials.num_layers;
  const int M = potentials.num_types;
  check_cap(L, M, cap);

  BruteForceResult out;
  std::map<Allocation, std::vector<ScoredPlacement>> best;
  for_each_placement(L, M, [&](const Placement& p) {
    ++out.enumerated;
    auto& list = best[allocation_of(p, M)];
    list.push_back({p, potentials.score(p)});
    std::sort(list.begin(), list.end(), ranks_before);
    if (static_cast<int>(list.size()) > k) list.pop_back();
  });

  std::vector<ParetoPoint> points;
  for (auto& [alloc, list] : best) {
    points.push_back({cost_model.allocation_cost(alloc), list.front().placement, list.front().score,
                      std::nullopt});
    out.solutions.push_back({alloc, std::move(list)});
  }

  // Pairwise dominance check, then one representative per (cost, score) tie.
  std::vector<ParetoPoint> kept;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
      if (i == j) continue;
      const bool cost_le = points[j].cost < points[i].cost || costs_equal(points[j].cost, points[i].cost);
      const bool cost_lt = cost_le && !costs_equal(points[j].cost, points[i].cost);
      const bool score_ge = points[j].predicted_score >= points[i].predicted_score;
      const bool score_gt = points[j].predicted_score > points[i].predicted_score;
      dominated = cost_le && score_ge && (cost_lt || score_gt);
    }
    if (!dominated) kept.push_back(points[i]);
  }
  std::sort(kept.begin(), kept.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (!costs_equal(a.cost, b.cost)) return a.cost < b.cost;
    return a.placement < b.placement;
  });
  for (auto& pt : kept) {
    if (!out.frontier.empty() && costs_equal(out.frontier.back().cost, pt.cost) &&
        out.frontier.back().predicted_score == pt.predicted_score)
      continue;
    out.frontier.push_back(std::move(pt));
  }
  return out;
}

ParetoPoint brute_force_constrained(const MRFPotentials& potentials, const CostModel& cost_model,
                                    double budget, std::uint64_t cap) {
  potentials.validate();
  const int L = potentials.num_layers;
  const int M = potentials.num_types;
  check_cap(L, M, cap);
  std::optional<ParetoPoint> best;
  double min_cost = std::numeric_limits<double>::infinity();
  for_each_placement(L, M, [&](const Placement& p) {
    const double cost = cost_model.placement_cost(p);
    min_cost = std::min(min_cost, cost);
    if (!cost_within_budget(cost, budget)) return;
    const double s = potentials.score(p);
    if (!best || s > best->predicted_score || (s == best->predicted_score && p < best->placement))
      best = ParetoPoint{cost, p, s, std::nullopt};
  });
  if (!best) throw InfeasibleError("no placement fits the budget", min_cost);
  return *best;
}

}  // namespace placeopt
