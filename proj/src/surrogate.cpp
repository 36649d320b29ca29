#include "placeopt/surrogate.hpp"

#include <cmath>
#include <numbers>

#include "placeopt/error.hpp"

namespace placeopt {

void NIGPrior::validate() const {
  if (!(alpha > 0.0) || !(a0 > 0.0) || !(b0 > 0.0) || !std::isfinite(alpha) ||
      !std::isfinite(a0) || !std::isfinite(b0))
    throw ValidationError("NIG prior parameters must be finite and strictly positive");
}

SurrogatePosterior::SurrogatePosterior(Parts parts)
    : p_(std::move(parts)), layout_(p_.config, p_.num_layers, p_.num_types) {
  p_.config = layout_.config();
  p_.prior.validate();
  const auto d = static_cast<Eigen::Index>(layout_.dimension());
  if (p_.mean.size() != d) throw ValidationError("posterior mean has the wrong dimension");
  if (p_.cholesky_lower.rows() != d || p_.cholesky_lower.cols() != d)
    throw ValidationError("posterior factor has the wrong shape");
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(p_.cholesky_lower(i, i) > 0.0))
      throw ValidationError("posterior factor is not positive definite");
  }
  if (!(p_.a_n > 0.0) || !(p_.b_n > 0.0)) throw ValidationError("posterior a_n, b_n must be positive");
}

double SurrogatePosterior::log_det_a() const {
  return 2.0 * p_.cholesky_lower.diagonal().array().log().sum();
}

namespace {

Eigen::VectorXd dense_features(const FeatureLayout& layout, const Placement& placement) {
  const FeatureVector fv = layout.encode(placement);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fv.dimension));
  for (std::size_t k = 0; k < fv.indices.size(); ++k) phi(fv.indices[k]) = fv.values[k];
  return phi;
}

}  // namespace

Prediction SurrogatePosterior::predict(const Placement& placement) const {
  const Eigen::VectorXd phi = dense_features(layout_, placement);
  const Eigen::VectorXd z =
      p_.cholesky_lower.triangularView<Eigen::Lower>().solve(phi);
  return {p_.mean.dot(phi), std::sqrt(noise_scale2() * (1.0 + z.squaredNorm()))};
}

std::vector<Prediction> SurrogatePosterior::predict_batch(std::span<const Placement> placements) const {
  std::vector<Prediction> out;
  out.reserve(placements.size());
  constexpr std::size_t kBlock = 256;
  const auto d = static_cast<Eigen::Index>(layout_.dimension());
  for (std::size_t start = 0; start < placements.size(); start += kBlock) {
    const std::size_t count = std::min(kBlock, placements.size() - start);
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(count));
    for (std::size_t j = 0; j < count; ++j) {
      const FeatureVector fv = layout_.encode(placements[start + j]);
      for (std::size_t k = 0; k < fv.indices.size(); ++k)
        phi(fv.indices[k], static_cast<Eigen::Index>(j)) = fv.values[k];
    }
    const Eigen::VectorXd means = phi.transpose() * p_.mean;
    p_.cholesky_lower.triangularView<Eigen::Lower>().solveInPlace(phi);
    const Eigen::VectorXd quad = phi.colwise().squaredNorm().transpose();
    for (std::size_t j = 0; j < count; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      out.push_back({means(jj), std::sqrt(noise_scale2() * (1.0 + quad(jj)))});
    }
  }
  return out;
}

Prediction SurrogatePosterior::to_raw(const Prediction& fitted) const {
  if (p_.order == NormalizeOrder::kFitThenNormalize) return fitted;
  const auto& n = p_.normalization;
  return {n.invert(fitted.mean), fitted.scale / n.scale_factor()};
}

Prediction SurrogatePosterior::to_normalized(const Prediction& fitted) const {
  if (p_.order == NormalizeOrder::kNormalizeThenFit) return fitted;
  const auto& n = p_.normalization;
  return {n.apply(fitted.mean), fitted.scale * n.scale_factor()};
}

SurrogatePosterior SurrogatePosterior::with_mean(Eigen::VectorXd mean) const {
  Parts parts = p_;
  parts.mean = std::move(mean);
  return SurrogatePosterior(std::move(parts));
}

namespace {

struct Accumulated {
  Eigen::MatrixXd gram;  // X^T X
  Eigen::VectorXd xty;
  std::vector<FeatureVector> rows;
  Eigen::VectorXd y;
  int num_layers = 0;
};

Accumulated accumulate(std::span<const EvaluationRecord> records, const FeatureLayout& layout,
                       const FitOptions& options) {
  Accumulated acc;
  const auto d = static_cast<Eigen::Index>(layout.dimension());
  acc.gram = Eigen::MatrixXd::Zero(d, d);
  acc.xty = Eigen::VectorXd::Zero(d);
  acc.y.resize(static_cast<Eigen::Index>(records.size()));
  acc.rows.reserve(records.size());
  const bool normalize =
      options.normalization && options.order == NormalizeOrder::kNormalizeThenFit;
  for (std::size_t r = 0; r < records.size(); ++r) {
    double y = records[r].score;
    if (!std::isfinite(y))
      throw ValidationError("record " + std::to_string(r) + " has a non-finite score");
    if (normalize) y = options.normalization->apply(y);
    FeatureVector fv = layout.encode(records[r].placement);
    const std::size_t nnz = fv.indices.size();
    // Upper triangle only; mirrored below.
    for (std::size_t a = 0; a < nnz; ++a) {
      const double va = fv.values[a];
      const auto ia = fv.indices[a];
      acc.xty(ia) += va * y;
      for (std::size_t b = a; b < nnz; ++b) acc.gram(ia, fv.indices[b]) += va * fv.values[b];
    }
    acc.y(static_cast<Eigen::Index>(r)) = y;
    acc.rows.push_back(std::move(fv));
  }
  acc.gram.triangularView<Eigen::StrictlyLower>() = acc.gram.transpose();
  return acc;
}

void check_records(std::span<const EvaluationRecord> records, int num_types) {
  if (records.empty()) throw ValidationError("surrogate fit needs at least one record");
  if (num_types < 1) throw ValidationError("number of types must be positive");
  const int L = records.front().placement.num_layers();
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (records[r].placement.num_layers() != L)
      throw ValidationError("record " + std::to_string(r) + " has " +
                            std::to_string(records[r].placement.num_layers()) +
                            " layers, expected " + std::to_string(L));
  }
}

}  // namespace

SurrogatePosterior fit_surrogate(std::span<const EvaluationRecord> records,
                                 const ExpansionConfig& config, const NIGPrior& prior,
                                 int num_types, const FitOptions& options) {
  prior.validate();
  check_records(records, num_types);
  const int L = records.front().placement.num_layers();
  const FeatureLayout layout(config, L, num_types);
  Accumulated acc = accumulate(records, layout, options);

  Eigen::MatrixXd a = std::move(acc.gram);
  a.diagonal().array() += prior.alpha;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw Error("internal error: X^T X + alpha I is not positive definite");
  Eigen::VectorXd mu = llt.solve(acc.xty);

  // y^T y - mu^T A mu == ||y - X mu||^2 + alpha ||mu||^2; the right side
  // cannot go negative through cancellation.
  double rss = 0.0;
  for (std::size_t r = 0; r < acc.rows.size(); ++r) {
    const auto& fv = acc.rows[r];
    double pred = 0.0;
    for (std::size_t k = 0; k < fv.indices.size(); ++k) pred += fv.values[k] * mu(fv.indices[k]);
    const double e = acc.y(static_cast<Eigen::Index>(r)) - pred;
    rss += e * e;
  }
  const double n = static_cast<double>(records.size());

  SurrogatePosterior::Parts parts;
  parts.config = layout.config();
  parts.num_layers = L;
  parts.num_types = num_types;
  parts.prior = prior;
  parts.mean = std::move(mu);
  parts.cholesky_lower = llt.matrixL();
  parts.a_n = prior.a0 + 0.5 * n;
  parts.b_n = prior.b0 + 0.5 * (rss + prior.alpha * parts.mean.squaredNorm());
  parts.n_obs = static_cast<int>(records.size());
  if (options.normalization) parts.normalization = *options.normalization;
  parts.order = options.order;
  return SurrogatePosterior(std::move(parts));
}

double log_marginal_likelihood(const SurrogatePosterior& posterior) {
  const auto& pr = posterior.prior();
  const double n = posterior.n_obs();
  const double d = static_cast<double>(posterior.dimension());
  return -0.5 * n * std::log(2.0 * std::numbers::pi) + 0.5 * d * std::log(pr.alpha) -
         0.5 * posterior.log_det_a() + pr.a0 * std::log(pr.b0) -
         posterior.a_n() * std::log(posterior.b_n()) + std::lgamma(posterior.a_n()) -
         std::lgamma(pr.a0);
}

double log_marginal_likelihood(std::span<const EvaluationRecord> records,
                               const ExpansionConfig& config, const NIGPrior& prior,
                               int num_types, const FitOptions& options) {
  return log_marginal_likelihood(fit_surrogate(records, config, prior, num_types, options));
}

ExpansionSelection select_expansion(std::span<const EvaluationRecord> records,
                                    std::span<const ExpansionConfig> candidates,
                                    const NIGPrior& prior, int num_types, double guard_ratio,
                                    const FitOptions& options) {
  if (candidates.empty()) throw ValidationError("no expansion candidates given");
  check_records(records, num_types);
  const int L = records.front().placement.num_layers();
  const double n = static_cast<double>(records.size());

  ExpansionSelection out;
  std::optional<std::size_t> best;
  std::size_t smallest = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    CandidateEvidence ev;
    ev.config = candidates[c].canonical();
    ev.features = feature_count(ev.config, L, num_types);
    ev.eligible = n >= guard_ratio * static_cast<double>(ev.features);
    if (ev.eligible) {
      ev.log_evidence = log_marginal_likelihood(records, ev.config, prior, num_types, options);
      if (!best || *ev.log_evidence > *out.candidates[*best].log_evidence) best = c;
    }
    if (c == 0 || ev.features < out.candidates[smallest].features) smallest = c;
    out.candidates.push_back(ev);
  }
  if (best) {
    out.selected = out.candidates[*best].config;
  } else {
    out.selected = out.candidates[smallest].config;
    out.fell_back = true;
  }
  return out;
}

std::vector<ExpansionConfig> default_expansion_candidates(int max_order, int max_range) {
  std::vector<ExpansionConfig> out{{1, 1, true}};
  for (int order = 2; order <= max_order; ++order) {
    for (int r = 1; r <= max_range; ++r) out.push_back({order, r, true});
  }
  return out;
}

}  // namespace placeopt
