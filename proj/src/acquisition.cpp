#include "placeopt/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "placeopt/error.hpp"
#include "placeopt/rng.hpp"

namespace placeopt {

void AcquisitionConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be finite and >= 0");
  if (!(safe_fraction >= 0.0 && safe_fraction <= 1.0))
    throw ValidationError("safe fraction must lie in [0, 1]");
  if (mean_floor_quantile && !(*mean_floor_quantile >= 0.0 && *mean_floor_quantile <= 1.0))
    throw ValidationError("mean floor quantile must lie in [0, 1]");
  if (pool_target < 1) throw ValidationError("pool target must be positive");
  if (per_allocation_k && *per_allocation_k < 1) throw ValidationError("per-allocation k must be positive");
  if (candidate_min_count < 0) throw ValidationError("candidate min count must be >= 0");
  if (rounds < 0) throw ValidationError("rounds must be >= 0");
  if (evals_per_round < 0) throw ValidationError("evaluations per round must be >= 0");
  if (cost_band && !(cost_band->lo <= cost_band->hi)) throw ValidationError("cost band is empty");
}

std::vector<Allocation> feasible_allocations(int num_layers, int num_types, int min_count,
                                             const CostModel* cost_model,
                                             const std::optional<CostBand>& band) {
  if (band && cost_model == nullptr) throw ValidationError("a cost band needs a cost model");
  std::vector<Allocation> out;
  for (auto& a : enumerate_allocations(num_layers, num_types)) {
    if (!a.satisfies_min_count(min_count)) continue;
    if (band && !band->contains(cost_model->allocation_cost(a))) continue;
    out.push_back(std::move(a));
  }
  return out;
}

CandidatePool generate_candidates(const SurrogatePosterior& posterior, const AcquisitionConfig& config,
                                  const CostModel* cost_model, const std::set<Placement>* exclude) {
  config.validate();
  const int L = posterior.num_layers();
  const int M = posterior.num_types();
  const auto allowed =
      feasible_allocations(L, M, config.candidate_min_count, cost_model, config.cost_band);

  CandidatePool pool;
  pool.feasible_allocations = allowed.size();
  if (allowed.empty()) return pool;
  pool.quota = config.per_allocation_k.value_or(
      static_cast<int>((static_cast<std::size_t>(config.pool_target) + allowed.size() - 1) / allowed.size()));

  // Extra depth so excluded placements can be replaced by the next-ranked ones.
  std::map<Allocation, int> excluded_per_allocation;
  int extra = 0;
  if (exclude != nullptr) {
    for (const auto& p : *exclude) {
      if (p.num_layers() != L) continue;
      extra = std::max(extra, ++excluded_per_allocation[allocation_of(p, M)]);
    }
  }
  const DpResult dp = solve_all_allocations(extract_potentials(posterior), {.k = pool.quota + extra});

  std::vector<Placement> picked;
  for (const auto& alloc : allowed) {
    const AllocationSolution* sol = dp.find(alloc);
    if (sol == nullptr) continue;
    int taken = 0;
    for (const auto& sp : sol->best) {
      if (taken == pool.quota) break;
      if (exclude != nullptr && exclude->contains(sp.placement)) continue;
      picked.push_back(sp.placement);
      ++taken;
    }
  }
  const auto preds = posterior.predict_batch(picked);
  pool.candidates.reserve(picked.size());
  for (std::size_t i = 0; i < picked.size(); ++i)
    pool.candidates.push_back({std::move(picked[i]), preds[i].mean, preds[i].scale});
  return pool;
}

namespace {

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<std::size_t> ranked(std::span<const Candidate> pool, const std::vector<std::size_t>& eligible,
                                double sign, double beta) {
  std::vector<std::size_t> order = eligible;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ka = pool[a].mean + sign * beta * pool[a].scale;
    const double kb = pool[b].mean + sign * beta * pool[b].scale;
    if (ka != kb) return ka > kb;
    if (pool[a].mean != pool[b].mean) return pool[a].mean > pool[b].mean;
    return pool[a].placement < pool[b].placement;
  });
  return order;
}

}  // namespace

std::vector<Selection> select_batch(std::span<const Candidate> pool, const AcquisitionConfig& config,
                                    int budget) {
  config.validate();
  if (budget < 0) throw ValidationError("batch budget must be >= 0");
  std::vector<std::size_t> eligible;
  if (config.mean_floor_quantile && !pool.empty()) {
    std::vector<double> means;
    for (const auto& c : pool) means.push_back(c.mean);
    const double floor = quantile(std::move(means), *config.mean_floor_quantile);
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (pool[i].mean >= floor) eligible.push_back(i);
  } else {
    for (std::size_t i = 0; i < pool.size(); ++i) eligible.push_back(i);
  }

  const std::size_t total = std::min(static_cast<std::size_t>(budget), eligible.size());
  const auto n_safe = static_cast<std::size_t>(std::floor(config.safe_fraction * static_cast<double>(total) + 1e-9));

  std::vector<Selection> out;
  std::vector<bool> taken(pool.size(), false);
  for (std::size_t idx : ranked(pool, eligible, -1.0, config.beta)) {
    if (out.size() == n_safe) break;
    taken[idx] = true;
    out.push_back({pool[idx], Bucket::kSafe});
  }
  for (std::size_t idx : ranked(pool, eligible, +1.0, config.beta)) {
    if (out.size() == total) break;
    if (taken[idx]) continue;
    taken[idx] = true;
    out.push_back({pool[idx], Bucket::kUpside});
  }
  return out;
}

std::vector<Placement> sample_exploration(std::uint64_t seed, int count, int num_layers, int num_types,
                                          int min_count, const CostModel* cost_model,
                                          const std::optional<CostBand>& band) {
  if (count < 0) throw ValidationError("sample count must be >= 0");
  const auto allowed = feasible_allocations(num_layers, num_types, min_count, cost_model, band);
  if (allowed.empty() && count > 0) throw ValidationError("no allocation satisfies the exploration constraints");
  std::vector<Placement> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto& alloc = allowed[static_cast<std::size_t>(rng.uniform_index(allowed.size()))];
    out.push_back(sample_within_allocation(rng.next_u64(), alloc));
  }
  return out;
}

std::vector<ParetoPoint> surrogate_frontier(const SurrogatePosterior& posterior, const CostModel& cost_model,
                                            int min_count, const std::optional<CostBand>& band) {
  const DpResult dp = solve_all_allocations(extract_potentials(posterior));
  std::vector<AllocationSolution> kept;
  for (const auto& sol : dp.solutions) {
    if (!sol.allocation.satisfies_min_count(min_count)) continue;
    if (band && !band->contains(cost_model.allocation_cost(sol.allocation))) continue;
    kept.push_back(sol);
  }
  if (kept.empty()) throw ValidationError("no allocation satisfies the frontier constraints");
  auto frontier = pareto_frontier(kept, cost_model);
  for (auto& pt : frontier) pt.predicted_score = posterior.to_raw({pt.predicted_score, 0.0}).mean;
  return frontier;
}

namespace {

std::vector<double> checked_scores(Evaluator& evaluator, std::span<const Placement> placements) {
  std::vector<double> scores = evaluator.evaluate(placements);
  if (scores.size() != placements.size())
    throw EvaluatorError("evaluator returned " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(placements.size()) + " placements");
  for (double s : scores)
    if (!std::isfinite(s)) throw EvaluatorError("evaluator returned a non-finite score");
  return scores;
}

}  // namespace

RefinementResult refinement_loop(Evaluator& evaluator, std::vector<EvaluationRecord> initial_records,
                                 const CostModel& cost_model, const RefinementOptions& options,
                                 const RoundObserver& observer) {
  const auto& acq = options.acquisition;
  acq.validate();
  if (initial_records.empty()) throw ValidationError("refinement needs at least one initial record");
  if (options.candidates.empty()) throw ValidationError("no expansion candidates given");
  const int M = options.num_types;
  if (M != cost_model.num_types()) throw ValidationError("cost model and catalog disagree on type count");

  std::vector<EvaluationRecord> records = std::move(initial_records);
  const bool cache = !evaluator.noisy();
  std::set<Placement> evaluated;
  if (cache)
    for (const auto& r : records) evaluated.insert(r.placement);

  std::vector<RoundSummary> rounds;
  for (int round = 1; round <= acq.rounds; ++round) {
    const auto sel = select_expansion(records, options.candidates, options.prior, M, options.guard_ratio,
                                      options.fit);
    const auto posterior = fit_surrogate(records, sel.selected, options.prior, M, options.fit);
    const auto pool = generate_candidates(posterior, acq, &cost_model, cache ? &evaluated : nullptr);
    const auto batch = select_batch(pool.candidates, acq, acq.evals_per_round);

    RoundSummary summary{round, sel.selected, sel.fell_back, pool.candidates.size(), batch.size(), 0, 0};
    std::vector<Placement> placements;
    placements.reserve(batch.size());
    for (const auto& s : batch) {
      placements.push_back(s.candidate.placement);
      ++(s.bucket == Bucket::kSafe ? summary.safe : summary.upside);
    }
    if (!placements.empty()) {
      const auto scores = checked_scores(evaluator, placements);
      for (std::size_t i = 0; i < placements.size(); ++i) {
        const double cost = cost_model.placement_cost(placements[i]);
        records.push_back({placements[i], scores[i], std::nullopt, cost});
        if (cache) evaluated.insert(placements[i]);
      }
    }
    rounds.push_back(summary);
    if (observer) observer(summary, records, posterior);
  }

  const auto sel = select_expansion(records, options.candidates, options.prior, M, options.guard_ratio,
                                    options.fit);
  auto posterior = fit_surrogate(records, sel.selected, options.prior, M, options.fit);
  auto frontier = surrogate_frontier(posterior, cost_model, acq.candidate_min_count, acq.cost_band);

  if (options.validate_frontier) {
    std::map<Placement, double> known;
    if (cache)
      for (const auto& r : records) known.emplace(r.placement, r.score);
    std::vector<Placement> todo;
    for (const auto& pt : frontier)
      if (!known.contains(pt.placement)) todo.push_back(pt.placement);
    if (!todo.empty()) {
      const auto scores = checked_scores(evaluator, todo);
      for (std::size_t i = 0; i < todo.size(); ++i) known.emplace(todo[i], scores[i]);
    }
    for (auto& pt : frontier) pt.validated_score = known.at(pt.placement);
  }

  return {std::move(posterior), sel.selected, std::move(records), std::move(frontier), std::move(rounds)};
}

}  // namespace placeopt
