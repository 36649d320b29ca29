#include "placeopt/dp_optimizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "placeopt/error.hpp"
#include "placeopt/surrogate.hpp"

namespace placeopt {

bool costs_equal(double a, double b) noexcept {
  return std::abs(a - b) <= kCostTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

bool cost_within_budget(double cost, double budget) noexcept {
  return cost <= budget || costs_equal(cost, budget);
}

MRFPotentials MRFPotentials::zeros(int num_layers, int num_types, const ExpansionConfig& config) {
  MRFPotentials p;
  p.num_layers = num_layers;
  p.num_types = num_types;
  p.config = config.canonical();
  p.config.validate();
  if (num_layers < 1 || num_types < 1) throw ValidationError("potentials need L >= 1 and M >= 1");
  const auto L = static_cast<std::size_t>(num_layers);
  const auto M = static_cast<std::size_t>(num_types);
  p.unary.assign(L * M, 0.0);
  if (p.config.order >= 2) {
    for (int d = 1; d <= p.config.range; ++d) {
      const std::size_t pairs = num_layers > d ? L - static_cast<std::size_t>(d) : 0;
      p.pairwise.emplace_back(pairs * M * M, 0.0);
    }
  }
  if (p.config.order >= 3) p.triplet.assign((L > 2 ? L - 2 : 0) * M * M * M, 0.0);
  return p;
}

void MRFPotentials::validate() const {
  const MRFPotentials shape = zeros(num_layers, num_types, config);
  if (unary.size() != shape.unary.size() || pairwise.size() != shape.pairwise.size() ||
      triplet.size() != shape.triplet.size())
    throw ValidationError("potential tables do not match their configuration");
  for (std::size_t d = 0; d < pairwise.size(); ++d) {
    if (pairwise[d].size() != shape.pairwise[d].size())
      throw ValidationError("pairwise table size mismatch");
  }
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  bool ok = finite(unary) && finite(triplet);
  for (const auto& t : pairwise) ok = ok && finite(t);
  if (!ok) throw ValidationError("potentials must be finite");
}

double& MRFPotentials::unary_at(int layer, int m) {
  return unary[static_cast<std::size_t>(layer * num_types + m)];
}
double MRFPotentials::unary_at(int layer, int m) const {
  return unary[static_cast<std::size_t>(layer * num_types + m)];
}
double& MRFPotentials::pair_at(int distance, int layer, int m, int m2) {
  return pairwise[static_cast<std::size_t>(distance - 1)]
                 [static_cast<std::size_t>((layer * num_types + m) * num_types + m2)];
}
double MRFPotentials::pair_at(int distance, int layer, int m, int m2) const {
  return pairwise[static_cast<std::size_t>(distance - 1)]
                 [static_cast<std::size_t>((layer * num_types + m) * num_types + m2)];
}
double& MRFPotentials::triplet_at(int layer, int m, int m2, int m3) {
  return triplet[static_cast<std::size_t>(((layer * num_types + m) * num_types + m2) * num_types + m3)];
}
double MRFPotentials::triplet_at(int layer, int m, int m2, int m3) const {
  return triplet[static_cast<std::size_t>(((layer * num_types + m) * num_types + m2) * num_types + m3)];
}

double MRFPotentials::score(const Placement& placement) const {
  if (placement.num_layers() != num_layers)
    throw ValidationError("placement length does not match potentials");
  placement.validate(num_types);
  double s = 0.0;
  for (int i = 0; i < num_layers; ++i) s += unary_at(i, placement[i]);
  for (int d = 1; d <= static_cast<int>(pairwise.size()); ++d) {
    for (int i = 0; i + d < num_layers; ++i) s += pair_at(d, i, placement[i], placement[i + d]);
  }
  if (config.order >= 3) {
    for (int i = 0; i + 2 < num_layers; ++i)
      s += triplet_at(i, placement[i], placement[i + 1], placement[i + 2]);
  }
  return s;
}

MRFPotentials extract_potentials(const SurrogatePosterior& posterior) {
  const auto& cfg = posterior.config();
  const FeatureLayout& layout = posterior.layout();
  const auto& mu = posterior.mean();
  MRFPotentials p = MRFPotentials::zeros(posterior.num_layers(), posterior.num_types(), cfg);
  const int L = p.num_layers;
  const int M = p.num_types;
  for (int i = 0; i < L; ++i) {
    for (int m = 0; m < M; ++m) {
      double v = mu(layout.unary_index(i, m));
      // n_m = sum_i 1[x_i = m], so a count weight is a constant unary shift.
      if (cfg.include_allocation_counts) v += mu(layout.count_index(m));
      p.unary_at(i, m) = v;
    }
  }
  if (cfg.order >= 2) {
    for (int d = 1; d <= cfg.range; ++d) {
      for (int i = 0; i + d < L; ++i)
        for (int m = 0; m < M; ++m)
          for (int m2 = 0; m2 < M; ++m2) p.pair_at(d, i, m, m2) = mu(layout.pair_index(d, i, m, m2));
    }
  }
  if (cfg.order >= 3) {
    for (int i = 0; i + 2 < L; ++i)
      for (int m = 0; m < M; ++m)
        for (int m2 = 0; m2 < M; ++m2)
          for (int m3 = 0; m3 < M; ++m3)
            p.triplet_at(i, m, m2, m3) = mu(layout.triplet_index(i, m, m2, m3));
  }
  return p;
}

const AllocationSolution* DpResult::find(const Allocation& allocation) const {
  auto it = std::lower_bound(solutions.begin(), solutions.end(), allocation,
                             [](const AllocationSolution& s, const Allocation& a) { return s.allocation < a; });
  if (it == solutions.end() || it->allocation != allocation) return nullptr;
  return &*it;
}

namespace {

struct Entry {
  double score;
  std::int32_t next_state;  // state index in the following layer, -1 at the end
  std::int32_t next_rank;
  std::int32_t type;        // type assigned at this layer
};

constexpr std::size_t kStateOverheadBytes = 3 * sizeof(std::uint64_t) + sizeof(std::int32_t);

double binomial_double(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Layers are processed from last to first. The table for layer i holds
// states over suffixes x_i..x_{L-1}, keyed by the counts of the first M-1
// types and the window (x_i, ..., x_{i+w-1}), w = min(memory, L - i).
// Comparing two partial paths that share a state then reduces to comparing
// suffixes, so lexicographic tie-breaking walks forward from the front.
class AllAllocationsSolver {
 public:
  AllAllocationsSolver(const MRFPotentials& pot, int k)
      : pot_(pot), k_(k), L_(pot.num_layers), M_(pot.num_types), mem_(pot.config.memory()) {
    count_bits_ = std::bit_width(static_cast<unsigned>(L_));
    type_bits_ = std::bit_width(static_cast<unsigned>(M_ - 1));
    window_shift_ = (M_ - 1) * count_bits_;
    if (window_shift_ + mem_ * type_bits_ > 64)
      throw ValidationError("state key does not fit 64 bits for L=" + std::to_string(L_) +
                            ", M=" + std::to_string(M_));
    count_mask_ = window_shift_ >= 64 ? ~0ULL : ((1ULL << window_shift_) - 1);
    layers_.resize(static_cast<std::size_t>(L_) + 1);
  }

  DpResult run() {
    Layer& tail = layers_[static_cast<std::size_t>(L_)];
    tail.keys.push_back(0);
    tail.fill.push_back(1);
    tail.entries.assign(static_cast<std::size_t>(k_), Entry{0.0, -1, -1, -1});
    for (int i = L_ - 1; i >= 0; --i) step(i);
    return collect();
  }

 private:
  struct Layer {
    std::vector<std::uint64_t> keys;
    std::vector<std::int32_t> fill;
    std::vector<Entry> entries;  // k slots per state
  };

  const Entry& entry(int layer, std::int32_t state, std::int32_t rank) const {
    return layers_[static_cast<std::size_t>(layer)]
        .entries[static_cast<std::size_t>(state) * static_cast<std::size_t>(k_) + static_cast<std::size_t>(rank)];
  }

  bool lex_less(int layer, Entry a, Entry b) const {
    while (true) {
      if (a.type != b.type) return a.type < b.type;
      if (a.next_state == b.next_state && a.next_rank == b.next_rank) return false;
      if (a.next_state < 0 || b.next_state < 0) return false;
      ++layer;
      a = entry(layer, a.next_state, a.next_rank);
      b = entry(layer, b.next_state, b.next_rank);
    }
  }

  bool better(int layer, const Entry& a, const Entry& b) const {
    if (a.score != b.score) return a.score > b.score;
    return lex_less(layer, a, b);
  }

  int window_type(std::uint64_t key, int j) const {
    if (type_bits_ == 0) return 0;
    return static_cast<int>((key >> (window_shift_ + j * type_bits_)) & ((1ULL << type_bits_) - 1));
  }

  void step(int i) {
    const Layer& src = layers_[static_cast<std::size_t>(i) + 1];
    Layer& dst = layers_[static_cast<std::size_t>(i)];
    std::unordered_map<std::uint64_t, std::int32_t> index;
    index.reserve(src.keys.size() * static_cast<std::size_t>(M_));
    const int new_window = std::min(mem_, L_ - i);
    const int window_bits = new_window * type_bits_;
    const std::uint64_t window_mask = window_bits >= 64 ? ~0ULL : ((1ULL << window_bits) - 1);
    const int pair_range = pot_.config.order >= 2 ? pot_.config.range : 0;
    std::vector<double> gains(static_cast<std::size_t>(M_));

    for (std::size_t s = 0; s < src.keys.size(); ++s) {
      const std::uint64_t key = src.keys[s];
      for (int m = 0; m < M_; ++m) {
        double g = pot_.unary_at(i, m);
        for (int d = 1; d <= pair_range && i + d < L_; ++d) g += pot_.pair_at(d, i, m, window_type(key, d - 1));
        if (pot_.config.order >= 3 && i + 2 < L_)
          g += pot_.triplet_at(i, m, window_type(key, 0), window_type(key, 1));
        gains[static_cast<std::size_t>(m)] = g;
      }
      for (int m = 0; m < M_; ++m) {
        std::uint64_t counts = key & count_mask_;
        if (m < M_ - 1) counts += 1ULL << (m * count_bits_);
        std::uint64_t window = type_bits_ == 0 ? 0 : ((key >> window_shift_) << type_bits_);
        window = (window | static_cast<std::uint64_t>(m)) & window_mask;
        const std::uint64_t new_key = counts | (window_bits == 0 ? 0 : window << window_shift_);

        auto [it, inserted] = index.try_emplace(new_key, static_cast<std::int32_t>(dst.keys.size()));
        if (inserted) {
          dst.keys.push_back(new_key);
          dst.fill.push_back(0);
          dst.entries.resize(dst.entries.size() + static_cast<std::size_t>(k_));
        }
        const std::int32_t target = it->second;
        const std::int32_t src_fill = src.fill[s];
        for (std::int32_t r = 0; r < src_fill; ++r) {
          const Entry& from = src.entries[s * static_cast<std::size_t>(k_) + static_cast<std::size_t>(r)];
          const Entry cand{from.score + gains[static_cast<std::size_t>(m)], static_cast<std::int32_t>(s), r, m};
          if (!insert(i, target, cand)) break;  // later ranks of s are worse still
        }
      }
    }
  }

  bool insert(int layer, std::int32_t state, const Entry& cand) {
    Layer& dst = layers_[static_cast<std::size_t>(layer)];
    Entry* slots = dst.entries.data() + static_cast<std::size_t>(state) * static_cast<std::size_t>(k_);
    std::int32_t& fill = dst.fill[static_cast<std::size_t>(state)];
    if (fill == k_ && !better(layer, cand, slots[k_ - 1])) return false;
    int pos = std::min(fill, k_ - 1);
    while (pos > 0 && better(layer, cand, slots[pos - 1])) {
      slots[pos] = slots[pos - 1];
      --pos;
    }
    slots[pos] = cand;
    fill = std::min(fill + 1, k_);
    return true;
  }

  Placement trace(std::int32_t state, std::int32_t rank) const {
    std::vector<int> types;
    types.reserve(static_cast<std::size_t>(L_));
    int layer = 0;
    Entry e = entry(layer, state, rank);
    while (true) {
      types.push_back(e.type);
      if (e.next_state < 0 || layer + 1 >= L_) break;
      e = entry(++layer, e.next_state, e.next_rank);
    }
    return Placement(std::move(types));
  }

  DpResult collect() const {
    const Layer& head = layers_[0];
    std::map<std::vector<int>, std::vector<std::int32_t>> groups;
    for (std::size_t s = 0; s < head.keys.size(); ++s) {
      std::vector<int> counts(static_cast<std::size_t>(M_), 0);
      int assigned = 0;
      for (int m = 0; m + 1 < M_; ++m) {
        counts[static_cast<std::size_t>(m)] =
            static_cast<int>((head.keys[s] >> (m * count_bits_)) & ((1ULL << count_bits_) - 1));
        assigned += counts[static_cast<std::size_t>(m)];
      }
      counts.back() = L_ - assigned;
      groups[counts].push_back(static_cast<std::int32_t>(s));
    }

    DpResult out;
    out.final_state_count = head.keys.size();
    out.solutions.reserve(groups.size());
    for (const auto& [counts, states] : groups) {
      // k-way merge of per-window lists for this allocation.
      std::vector<std::pair<std::int32_t, std::int32_t>> merged;  // (state, rank)
      std::vector<std::int32_t> cursor(states.size(), 0);
      while (static_cast<int>(merged.size()) < k_) {
        int pick = -1;
        for (std::size_t g = 0; g < states.size(); ++g) {
          if (cursor[g] >= head.fill[static_cast<std::size_t>(states[g])]) continue;
          if (pick < 0 ||
              better(0, entry(0, states[g], cursor[g]),
                     entry(0, states[static_cast<std::size_t>(pick)], cursor[static_cast<std::size_t>(pick)])))
            pick = static_cast<int>(g);
        }
        if (pick < 0) break;
        merged.emplace_back(states[static_cast<std::size_t>(pick)], cursor[static_cast<std::size_t>(pick)]++);
      }
      AllocationSolution sol;
      sol.allocation = Allocation(counts);
      for (const auto& [state, rank] : merged)
        sol.best.push_back({trace(state, rank), entry(0, state, rank).score});
      out.solutions.push_back(std::move(sol));
    }
    return out;
  }

  const MRFPotentials& pot_;
  int k_;
  int L_;
  int M_;
  int mem_;
  int count_bits_ = 0;
  int type_bits_ = 0;
  int window_shift_ = 0;
  std::uint64_t count_mask_ = 0;
  std::vector<Layer> layers_;
};

}  // namespace

double estimate_dp_memory_bytes(int num_layers, int num_types, const ExpansionConfig& config, int k) {
  const int mem = config.canonical().memory();
  double states = 0.0;
  for (int j = 1; j <= num_layers; ++j) {
    const double by_counts = binomial_double(j + num_types - 1, num_types - 1) *
                             std::pow(static_cast<double>(num_types), std::min(mem, j));
    states += std::min(by_counts, std::pow(static_cast<double>(num_types), j));
  }
  return states * (static_cast<double>(k) * sizeof(Entry) + kStateOverheadBytes);
}

DpResult solve_all_allocations(const MRFPotentials& potentials, const DpOptions& options) {
  potentials.validate();
  if (options.k < 1) throw ValidationError("k must be at least 1");
  const double estimate = estimate_dp_memory_bytes(potentials.num_layers, potentials.num_types,
                                                   potentials.config, options.k);
  if (estimate > static_cast<double>(options.memory_budget_bytes)) {
    std::ostringstream msg;
    msg << "dynamic program would need about " << estimate / (1024.0 * 1024.0)
        << " MiB of state tables, over the budget of "
        << static_cast<double>(options.memory_budget_bytes) / (1024.0 * 1024.0) << " MiB";
    throw ResourceError(msg.str(), estimate);
  }
  return AllAllocationsSolver(potentials, options.k).run();
}

namespace {

bool point_better(const ParetoPoint& a, const ParetoPoint& b) {
  if (a.predicted_score != b.predicted_score) return a.predicted_score > b.predicted_score;
  return a.placement < b.placement;
}

}  // namespace

ParetoPoint constrained_optimum(const DpResult& table, const CostModel& cost_model, double budget) {
  std::optional<ParetoPoint> best;
  double min_cost = std::numeric_limits<double>::infinity();
  for (const auto& sol : table.solutions) {
    if (sol.best.empty()) continue;
    const double cost = cost_model.allocation_cost(sol.allocation);
    min_cost = std::min(min_cost, cost);
    if (!cost_within_budget(cost, budget)) continue;
    ParetoPoint pt{cost, sol.best.front().placement, sol.best.front().score, std::nullopt};
    if (!best || point_better(pt, *best)) best = std::move(pt);
  }
  if (!best) {
    std::ostringstream msg;
    msg << "no placement fits budget " << budget << "; minimum feasible cost is " << min_cost;
    throw InfeasibleError(msg.str(), min_cost);
  }
  return *best;
}

ParetoPoint constrained_optimum(const MRFPotentials& potentials, const CostModel& cost_model,
                                double budget) {
  return constrained_optimum(solve_all_allocations(potentials), cost_model, budget);
}

std::vector<ParetoPoint> non_dominated(std::vector<ParetoPoint> points) {
  std::sort(points.begin(), points.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (!costs_equal(a.cost, b.cost)) return a.cost < b.cost;
    return point_better(a, b);
  });
  std::vector<ParetoPoint> out;
  for (auto& pt : points) {
    if (!out.empty()) {
      const auto& last = out.back();
      if (costs_equal(pt.cost, last.cost) || pt.predicted_score <= last.predicted_score) continue;
    }
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<ParetoPoint> pareto_frontier(std::span<const AllocationSolution> solutions,
                                         const CostModel& cost_model) {
  if (solutions.empty()) throw ValidationError("no allocation solutions to build a frontier from");
  std::vector<ParetoPoint> points;
  points.reserve(solutions.size());
  for (const auto& sol : solutions) {
    if (sol.best.empty()) continue;
    points.push_back({cost_model.allocation_cost(sol.allocation), sol.best.front().placement,
                      sol.best.front().score, std::nullopt});
  }
  return non_dominated(std::move(points));
}

}  // namespace placeopt
