#include "placeopt/landscape_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "placeopt/error.hpp"

namespace placeopt {

void CheckpointScores::validate() const {
  if (checkpoints.empty()) throw ValidationError("no checkpoints");
  if (scores.size() != checkpoints.size()) throw ValidationError("one score row per checkpoint required");
  for (const auto& row : scores) {
    if (row.size() != placements.size()) throw ValidationError("score row length differs from placement count");
    for (double v : row)
      if (!std::isfinite(v)) throw ValidationError("scores must be finite");
  }
  if (!costs.empty() && costs.size() != placements.size())
    throw ValidationError("cost vector length differs from placement count");
  for (double c : costs)
    if (!std::isfinite(c)) throw ValidationError("costs must be finite");
}

CheckpointScores pivot_records(std::span<const EvaluationRecord> records, const CostModel* cost_model) {
  CheckpointScores out;
  std::map<std::string, std::size_t> ck_index;
  std::map<Placement, std::size_t> pl_index;
  std::vector<std::optional<double>> record_costs;
  for (const auto& r : records) {
    if (!r.checkpoint) throw ValidationError("record without a checkpoint tag");
    if (ck_index.emplace(*r.checkpoint, out.checkpoints.size()).second) out.checkpoints.push_back(*r.checkpoint);
    if (pl_index.emplace(r.placement, out.placements.size()).second) {
      out.placements.push_back(r.placement);
      record_costs.push_back(r.cost);
    } else if (r.cost && !record_costs[pl_index[r.placement]]) {
      record_costs[pl_index[r.placement]] = r.cost;
    }
  }
  if (out.checkpoints.empty()) throw ValidationError("no records to analyze");

  const std::size_t n = out.placements.size();
  std::vector<std::vector<std::optional<double>>> grid(out.checkpoints.size(),
                                                       std::vector<std::optional<double>>(n));
  for (const auto& r : records) {
    auto& cell = grid[ck_index[*r.checkpoint]][pl_index[r.placement]];
    if (cell) throw ValidationError("duplicate score for one placement at checkpoint '" + *r.checkpoint + "'");
    cell = r.score;
  }
  for (std::size_t c = 0; c < grid.size(); ++c) {
    std::vector<double> row;
    row.reserve(n);
    for (std::size_t p = 0; p < n; ++p) {
      if (!grid[c][p]) {
        std::ostringstream msg;
        msg << "placement " << p << " has no score at checkpoint '" << out.checkpoints[c] << "'";
        throw ValidationError(msg.str());
      }
      row.push_back(*grid[c][p]);
    }
    out.scores.push_back(std::move(row));
  }

  bool have_costs = true;
  for (std::size_t p = 0; p < n; ++p) {
    if (cost_model != nullptr)
      out.costs.push_back(cost_model->placement_cost(out.placements[p]));
    else if (record_costs[p])
      out.costs.push_back(*record_costs[p]);
    else
      have_costs = false;
  }
  if (!have_costs) out.costs.clear();
  out.validate();
  return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("spearman: length mismatch");
  if (a.size() < 2) throw ValidationError("spearman: need at least 2 items");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw ValidationError("spearman: zero rank variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

namespace {

// Indices of the best `count` items by score, ties by index.
std::vector<std::size_t> top_indices(std::span<const double> scores, std::size_t count) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(std::min(count, order.size()));
  return order;
}

}  // namespace

double kendalls_w(std::span<const std::vector<double>> raters, std::optional<double> tier) {
  if (raters.size() < 2) throw ValidationError("kendall's W: need at least 2 raters");
  const std::size_t n_all = raters.front().size();
  for (const auto& r : raters)
    if (r.size() != n_all) throw ValidationError("kendall's W: raters score different item counts");

  std::vector<std::size_t> keep(n_all);
  std::iota(keep.begin(), keep.end(), 0);
  if (tier) {
    if (!(*tier > 0.0 && *tier <= 1.0)) throw ValidationError("tier must lie in (0, 1]");
    const auto count = static_cast<std::size_t>(std::ceil(*tier * static_cast<double>(n_all) - 1e-9));
    keep = top_indices(raters.back(), count);
    std::sort(keep.begin(), keep.end());
  }
  const std::size_t n = keep.size();
  if (n <= 1) throw ValidationError("kendall's W: need at least 2 items after tier filtering");

  const double k = static_cast<double>(raters.size());
  const double nn = static_cast<double>(n);
  std::vector<double> rank_sums(n, 0.0);
  double tie_term = 0.0;
  for (const auto& r : raters) {
    std::vector<double> sub;
    sub.reserve(n);
    for (std::size_t i : keep) sub.push_back(r[i]);
    const auto ranks = average_ranks(sub);
    for (std::size_t i = 0; i < n; ++i) rank_sums[i] += ranks[i];
    std::map<double, int> groups;
    for (double v : sub) ++groups[v];
    for (const auto& [v, t] : groups) tie_term += static_cast<double>(t) * t * t - t;
  }
  const double mean = k * (nn + 1.0) / 2.0;
  double s = 0.0;
  for (double rs : rank_sums) s += (rs - mean) * (rs - mean);
  const double denom = k * k * (nn * nn * nn - nn) - k * tie_term;
  if (denom <= 0.0) throw ValidationError("kendall's W: every rater ties all items");
  return std::clamp(12.0 * s / denom, 0.0, 1.0);
}

double top_k_overlap(std::span<const double> early, std::span<const double> final_scores, int k) {
  if (early.size() != final_scores.size()) throw ValidationError("top-k overlap: length mismatch");
  if (k < 1 || static_cast<std::size_t>(k) > early.size())
    throw ValidationError("top-k overlap: k must lie in [1, n]");
  auto a = top_indices(early, static_cast<std::size_t>(k));
  auto b = top_indices(final_scores, static_cast<std::size_t>(k));
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::size_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / k;
}

std::string Band::label() const {
  std::ostringstream out;
  switch (kind) {
    case BandKind::kAll: return "all";
    case BandKind::kFrontier: out << "frontier:" << delta; break;
    case BandKind::kMedian: out << "median:" << delta; break;
  }
  return out.str();
}

Band Band::parse(const std::string& text) {
  if (text == "all") return {};
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  Band b;
  if (kind == "frontier")
    b.kind = BandKind::kFrontier;
  else if (kind == "median")
    b.kind = BandKind::kMedian;
  else
    throw ValidationError("unknown band '" + text + "' (expected all, frontier:<delta> or median:<delta>)");
  if (colon == std::string::npos) throw ValidationError("band '" + text + "' needs a delta");
  try {
    std::size_t used = 0;
    b.delta = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw ValidationError("band '" + text + "' has a malformed delta");
  }
  if (!(b.delta >= 0.0) || !std::isfinite(b.delta)) throw ValidationError("band delta must be >= 0");
  return b;
}

std::vector<std::size_t> window_starts(std::size_t n, std::size_t window, std::size_t stride) {
  if (stride == 0) throw ValidationError("window stride must be positive");
  if (window == 0) throw ValidationError("window size must be positive");
  if (stride > window) throw ValidationError("window stride must not exceed the window size");
  if (window >= n) return {0};
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window <= n; s += stride) starts.push_back(s);
  if (starts.back() + window < n) starts.push_back(n - window);
  return starts;
}

namespace {

std::vector<std::size_t> cost_order(std::span<const double> costs) {
  std::vector<std::size_t> order(costs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });
  return order;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

std::vector<WindowStability> rolling_window_stability(const CheckpointScores& data, int window, const Band& band,
                                                      int stride) {
  data.validate();
  if (data.costs.empty()) throw ValidationError("rolling windows need placement costs");
  if (window < 1 || stride < 1) throw ValidationError("window and stride must be positive");
  const std::size_t n = data.num_placements();
  if (n == 0) throw ValidationError("no placements");
  const auto order = cost_order(data.costs);
  const auto& fin = data.final_scores();
  const std::size_t n_ck = data.checkpoints.size();

  std::vector<WindowStability> out;
  for (std::size_t start : window_starts(n, static_cast<std::size_t>(window), static_cast<std::size_t>(stride))) {
    const std::size_t size = std::min(static_cast<std::size_t>(window), n - start);
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(start + size));
    std::vector<double> win_final;
    for (std::size_t i : idx) win_final.push_back(fin[i]);

    std::vector<std::size_t> members;
    if (band.kind == BandKind::kAll) {
      members = idx;
    } else {
      const double anchor = band.kind == BandKind::kFrontier
                                ? *std::max_element(win_final.begin(), win_final.end())
                                : median(win_final);
      for (std::size_t i : idx) {
        const bool in = band.kind == BandKind::kFrontier ? fin[i] >= anchor - band.delta
                                                         : std::abs(fin[i] - anchor) <= band.delta;
        if (in) members.push_back(i);
      }
    }

    WindowStability ws;
    ws.start = start;
    ws.size = size;
    ws.cost_lo = data.costs[idx.front()];
    ws.cost_hi = data.costs[idx.back()];
    ws.members = members.size();
    std::vector<double> f_sub;
    for (std::size_t i : members) f_sub.push_back(fin[i]);
    for (std::size_t c = 0; c + 1 < n_ck; ++c) {
      std::vector<double> c_sub;
      for (std::size_t i : members) c_sub.push_back(data.scores[c][i]);
      try {
        ws.rho.push_back(spearman_rho(c_sub, f_sub));
      } catch (const ValidationError&) {
        ws.rho.push_back(std::nullopt);
      }
    }
    out.push_back(std::move(ws));
  }
  return out;
}

std::vector<WindowOverlap> top_k_overlap_windows(std::span<const double> costs, std::span<const double> early,
                                                 std::span<const double> final_scores, int k, int window,
                                                 int stride) {
  if (costs.size() != early.size() || early.size() != final_scores.size())
    throw ValidationError("top-k overlap: length mismatch");
  if (window < 1 || stride < 1 || k < 1) throw ValidationError("k, window and stride must be positive");
  const auto order = cost_order(costs);
  std::vector<WindowOverlap> out;
  for (std::size_t start :
       window_starts(costs.size(), static_cast<std::size_t>(window), static_cast<std::size_t>(stride))) {
    const std::size_t size = std::min(static_cast<std::size_t>(window), costs.size() - start);
    std::vector<double> e, f;
    for (std::size_t t = start; t < start + size; ++t) {
      e.push_back(early[order[t]]);
      f.push_back(final_scores[order[t]]);
    }
    WindowOverlap w{start, size, std::nullopt};
    if (static_cast<std::size_t>(k) <= size) w.overlap = top_k_overlap(e, f, k);
    out.push_back(w);
  }
  return out;
}

StabilityReport analyze_stability(const CheckpointScores& data, const StabilityOptions& options) {
  data.validate();
  StabilityReport rep;
  rep.checkpoints = data.checkpoints;
  rep.num_placements = data.num_placements();
  rep.options = options;
  const auto& fin = data.final_scores();
  const std::size_t n_ck = data.checkpoints.size();

  for (std::size_t c = 0; c + 1 < n_ck; ++c) {
    try {
      rep.rho_vs_final.push_back(spearman_rho(data.scores[c], fin));
    } catch (const ValidationError&) {
      rep.rho_vs_final.push_back(std::nullopt);
    }
  }
  for (double tier : options.tiers) {
    try {
      rep.w_by_tier.push_back(kendalls_w(data.scores, tier));
    } catch (const ValidationError&) {
      rep.w_by_tier.push_back(std::nullopt);
    }
  }
  if (!data.costs.empty()) {
    for (const auto& band : options.bands)
      rep.bands.push_back({band, rolling_window_stability(data, options.window, band, options.stride)});
  }
  for (std::size_t c = 0; c + 1 < n_ck; ++c) {
    std::vector<std::optional<double>> row;
    for (int k : options.overlap_k) {
      if (k >= 1 && static_cast<std::size_t>(k) <= data.num_placements())
        row.push_back(top_k_overlap(data.scores[c], fin, k));
      else
        row.push_back(std::nullopt);
    }
    rep.overlap.push_back(std::move(row));
  }
  return rep;
}

}  // namespace placeopt
