#include "placeopt/speculative.hpp"

#include <algorithm>
#include <cmath>

#include "placeopt/acquisition.hpp"
#include "placeopt/error.hpp"

namespace placeopt {

double step_acceptance(std::span<const TokenLogProbs> step) {
  double log_prod = 0.0;
  double total = 0.0;
  for (const auto& t : step) {
    if (std::isnan(t.logq) || t.logq > 0.0) throw ValidationError("draft log-probability must be <= 0");
    if (!std::isfinite(t.logp) || t.logp > 0.0)
      throw ValidationError("target log-probability must be finite and <= 0");
    log_prod += std::min(t.logq - t.logp, 0.0);
    if (log_prod == -INFINITY) break;
    total += std::exp(log_prod);
  }
  return total;
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 8;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

AcceptanceEstimate estimate_acceptance(std::span<const Trace> traces, int gamma) {
  if (gamma < 1) throw ValidationError("gamma must be at least 1");
  if (traces.empty()) throw ValidationError("no traces given");
  std::vector<double> per_step;
  for (const auto& tr : traces) {
    if (!tr.target_generated)
      throw ValidationError("trace '" + tr.prompt_id + "' was not generated by the target model");
    const std::size_t steps = tr.tokens.size() / static_cast<std::size_t>(gamma);
    for (std::size_t s = 0; s < steps; ++s)
      per_step.push_back(step_acceptance(
          std::span(tr.tokens).subspan(s * static_cast<std::size_t>(gamma), static_cast<std::size_t>(gamma))));
  }
  if (per_step.empty()) throw ValidationError("no complete step of gamma tokens in the traces");

  const double n = static_cast<double>(per_step.size());
  const double mean = pairwise_sum(per_step) / n;
  std::vector<double> sq(per_step.size());
  std::transform(per_step.begin(), per_step.end(), sq.begin(),
                 [mean](double v) { return (v - mean) * (v - mean); });
  const double var = per_step.size() > 1 ? pairwise_sum(sq) / (n - 1.0) : 0.0;

  AcceptanceEstimate est;
  est.gamma = gamma;
  est.n_bar = mean;
  est.a = mean / gamma;
  est.std_error = std::sqrt(var / n);
  est.n_steps = static_cast<std::int64_t>(per_step.size());
  return est;
}

double speculative_speedup(double n_bar, int gamma, double draft_cost, double target_cost) {
  if (gamma < 1) throw ValidationError("gamma must be at least 1");
  if (!(draft_cost > 0.0) || !(target_cost > 0.0))
    throw ValidationError("costs must be positive");
  return n_bar * target_cost / (gamma * draft_cost + target_cost);
}

double speculative_speedup(const AcceptanceEstimate& estimate, double draft_cost, double target_cost) {
  return speculative_speedup(estimate.n_bar, estimate.gamma, draft_cost, target_cost);
}

DraftSearchResult search_draft_placement(std::span<const EvaluationRecord> acceptance_records,
                                         const CostModel& cost_model, double target_cost,
                                         const DraftSearchOptions& options) {
  if (acceptance_records.empty()) throw ValidationError("no acceptance records given");
  const int M = cost_model.num_types();
  const auto sel = select_expansion(acceptance_records, options.candidates, options.prior, M,
                                    options.guard_ratio);
  const auto posterior = fit_surrogate(acceptance_records, sel.selected, options.prior, M);
  const auto points = surrogate_frontier(posterior, cost_model, options.min_count);

  DraftSearchResult out;
  out.expansion = sel.selected;
  for (const auto& pt : points) {
    DraftPoint d;
    d.cost = pt.cost;
    d.placement = pt.placement;
    d.predicted_acceptance = std::clamp(pt.predicted_score, 0.0, 1.0);
    d.speedup = speculative_speedup(d.predicted_acceptance * options.gamma, options.gamma, d.cost, target_cost);
    out.frontier.push_back(std::move(d));
  }
  out.best = out.frontier.front();
  for (const auto& d : out.frontier)
    if (d.speedup > out.best.speedup) out.best = d;
  return out;
}

}  // namespace placeopt
