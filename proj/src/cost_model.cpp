#include "placeopt/cost_model.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "placeopt/error.hpp"

namespace placeopt {

CostModel::CostModel(std::vector<double> raw_coefficients, int reference_type,
                     std::optional<CostFitStats> fit_stats, double intercept)
    : raw_(std::move(raw_coefficients)),
      reference_(reference_type),
      stats_(fit_stats),
      intercept_(intercept) {
  if (raw_.empty()) throw ValidationError("cost model needs at least one type");
  if (reference_ < 0 || reference_ >= num_types())
    throw ValidationError("reference type out of range");
  for (std::size_t m = 0; m < raw_.size(); ++m) {
    if (!(raw_[m] > 0.0) || !std::isfinite(raw_[m]))
      throw ValidationError("cost coefficient for type " + std::to_string(m) +
                            " must be positive and finite");
  }
  normalized_.resize(raw_.size());
  const double ref = raw_[static_cast<std::size_t>(reference_)];
  for (std::size_t m = 0; m < raw_.size(); ++m) normalized_[m] = raw_[m] / ref;
  normalized_[static_cast<std::size_t>(reference_)] = 1.0;
}

CostModel CostModel::from_normalized(std::vector<double> normalized, int reference_type) {
  if (reference_type < 0 || reference_type >= static_cast<int>(normalized.size()))
    throw ValidationError("reference type out of range");
  if (normalized[static_cast<std::size_t>(reference_type)] != 1.0)
    throw ValidationError("normalized cost of the reference type must be 1");
  return CostModel(std::move(normalized), reference_type);
}

double CostModel::normalized_cost(int type) const {
  if (type < 0 || type >= num_types())
    throw ValidationError("type index " + std::to_string(type) + " not covered by cost model");
  return normalized_[static_cast<std::size_t>(type)];
}

double CostModel::placement_cost(const Placement& placement) const {
  double total = 0.0;
  for (int t : placement.assignments()) total += normalized_cost(t);
  return total;
}

double CostModel::allocation_cost(const Allocation& allocation) const {
  if (allocation.num_types() != num_types())
    throw ValidationError("allocation has " + std::to_string(allocation.num_types()) +
                          " types, cost model has " + std::to_string(num_types()));
  double total = 0.0;
  for (int m = 0; m < num_types(); ++m) total += allocation[m] * normalized_[static_cast<std::size_t>(m)];
  return total;
}

double CostModel::predicted_latency(const Allocation& allocation) const {
  if (allocation.num_types() != num_types())
    throw ValidationError("allocation type count does not match cost model");
  double total = intercept_;
  for (int m = 0; m < num_types(); ++m) total += allocation[m] * raw_[static_cast<std::size_t>(m)];
  return total;
}

CostModel fit_idealized(std::span<const double> pure_throughputs, int reference_type,
                        int num_layers) {
  if (pure_throughputs.empty()) throw ValidationError("no pure-placement throughputs given");
  if (num_layers < 1) throw ValidationError("number of layers must be positive");
  std::vector<double> raw;
  raw.reserve(pure_throughputs.size());
  for (std::size_t m = 0; m < pure_throughputs.size(); ++m) {
    const double thr = pure_throughputs[m];
    if (!(thr > 0.0) || !std::isfinite(thr))
      throw ValidationError("pure throughput for type " + std::to_string(m) +
                            " must be positive and finite");
    raw.push_back(1.0 / (num_layers * thr));
  }
  return CostModel(std::move(raw), reference_type);
}

CostModel fit_regression(std::span<const ThroughputRecord> records, int num_types,
                         const RegressionOptions& options) {
  const int cols = num_types + (options.fit_intercept ? 1 : 0);
  const auto n = static_cast<Eigen::Index>(records.size());
  if (n < cols)
    throw ValidationError("regression needs at least " + std::to_string(cols) + " records, got " +
                          std::to_string(records.size()));
  Eigen::MatrixXd design(n, cols);
  Eigen::VectorXd latency(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& rec = records[static_cast<std::size_t>(r)];
    if (rec.allocation.num_types() != num_types)
      throw ValidationError("record " + std::to_string(r) + " has the wrong number of types");
    if (!(rec.throughput > 0.0) || !std::isfinite(rec.throughput))
      throw ValidationError("record " + std::to_string(r) + " has non-positive throughput");
    for (int m = 0; m < num_types; ++m) {
      if (rec.allocation[m] < 0)
        throw ValidationError("record " + std::to_string(r) + " has a negative count");
      design(r, m) = rec.allocation[m];
    }
    if (options.fit_intercept) design(r, num_types) = 1.0;
    latency(r) = 1.0 / rec.throughput;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = sv(0) * std::max(design.rows(), design.cols()) * 1e-12;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > tol ? 1 : 0;
  if (rank < cols) {
    std::ostringstream msg;
    msg << "count design matrix is rank deficient (rank " << rank << " of " << cols
        << "); unidentifiable directions:";
    for (Eigen::Index i = rank; i < cols; ++i) {
      msg << " [";
      for (Eigen::Index j = 0; j < cols; ++j) {
        double v = svd.matrixV()(j, i);
        if (std::abs(v) < 1e-12) v = 0.0;
        msg << (j ? ", " : "") << v;
      }
      msg << "]";
    }
    throw ValidationError(msg.str());
  }
  const Eigen::VectorXd coef = svd.solve(latency);
  const Eigen::VectorXd fitted = design * coef;

  CostFitStats stats;
  stats.n_records = static_cast<int>(n);
  stats.r_squared = 1.0 - (latency - fitted).squaredNorm() / latency.squaredNorm();
  stats.mean_abs_error_frac =
      ((fitted - latency).array().abs() / latency.array()).mean();

  std::vector<double> raw(static_cast<std::size_t>(num_types));
  for (int m = 0; m < num_types; ++m) raw[static_cast<std::size_t>(m)] = coef(m);
  for (int m = 0; m < num_types; ++m) {
    if (!(raw[static_cast<std::size_t>(m)] > 0.0))
      throw ValidationError("fitted cost coefficient for type " + std::to_string(m) +
                            " is not positive (" + std::to_string(raw[static_cast<std::size_t>(m)]) +
                            "); the additive model does not fit these records");
  }
  return CostModel(std::move(raw), options.reference_type, stats,
                   options.fit_intercept ? coef(num_types) : 0.0);
}

std::vector<ThroughputRecord> filter_singletons(std::span<const ThroughputRecord> records,
                                                int min_count) {
  if (min_count < 0) throw ValidationError("min_count must be non-negative");
  std::vector<ThroughputRecord> kept;
  for (const auto& rec : records) {
    if (rec.allocation.satisfies_min_count(min_count)) kept.push_back(rec);
  }
  return kept;
}

}  // namespace placeopt
