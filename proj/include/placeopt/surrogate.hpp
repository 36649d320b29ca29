#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "placeopt/cluster_expansion.hpp"
#include "placeopt/records.hpp"

namespace placeopt {

/// Normal-Inverse-Gamma prior: w | s2 ~ N(0, s2/alpha I), s2 ~ InvGamma(a0, b0).
struct NIGPrior {
  double alpha = 1.0;
  double a0 = 1e-3;
  double b0 = 1e-3;

  void validate() const;
};

enum class NormalizeOrder {
  kNormalizeThenFit,  // fit on normalized scores
  kFitThenNormalize,  // fit on raw scores, normalize predictions
};

struct FitOptions {
  /// When unset, scores are used as-is.
  std::optional<ScoreNormalization> normalization;
  NormalizeOrder order = NormalizeOrder::kNormalizeThenFit;
};

/// Student-t predictive summary in the units the posterior was fitted in.
struct Prediction {
  double mean = 0.0;
  double scale = 0.0;
};

/// Closed-form NIG posterior over cluster-expansion coefficients.
///
/// A = X^T X + alpha I is kept as its lower Cholesky factor; V_n = A^{-1} is
/// never formed.
class SurrogatePosterior {
 public:
  struct Parts {
    ExpansionConfig config;
    int num_layers = 0;
    int num_types = 0;
    NIGPrior prior;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cholesky_lower;
    double a_n = 0.0;
    double b_n = 0.0;
    int n_obs = 0;
    ScoreNormalization normalization;
    NormalizeOrder order = NormalizeOrder::kNormalizeThenFit;
  };

  /// Validates shapes and positivity; used when loading artifacts.
  explicit SurrogatePosterior(Parts parts);

  const ExpansionConfig& config() const noexcept { return p_.config; }
  int num_layers() const noexcept { return p_.num_layers; }
  int num_types() const noexcept { return p_.num_types; }
  const NIGPrior& prior() const noexcept { return p_.prior; }
  const Eigen::VectorXd& mean() const noexcept { return p_.mean; }
  const Eigen::MatrixXd& cholesky_lower() const noexcept { return p_.cholesky_lower; }
  double a_n() const noexcept { return p_.a_n; }
  double b_n() const noexcept { return p_.b_n; }
  int n_obs() const noexcept { return p_.n_obs; }
  const ScoreNormalization& normalization() const noexcept { return p_.normalization; }
  NormalizeOrder normalize_order() const noexcept { return p_.order; }
  const FeatureLayout& layout() const noexcept { return layout_; }
  std::int64_t dimension() const noexcept { return layout_.dimension(); }

  /// c = b_n / a_n.
  double noise_scale2() const noexcept { return p_.b_n / p_.a_n; }
  double log_det_a() const;

  /// mean = mu^T phi, scale = sqrt(c (1 + phi^T V_n phi)).
  Prediction predict(const Placement& placement) const;
  std::vector<Prediction> predict_batch(std::span<const Placement> placements) const;

  /// Prediction mapped to raw score units.
  Prediction to_raw(const Prediction& fitted) const;
  /// Prediction mapped to normalized score units.
  Prediction to_normalized(const Prediction& fitted) const;

  /// Same posterior with a different coefficient vector (shape must match).
  SurrogatePosterior with_mean(Eigen::VectorXd mean) const;

 private:
  Parts p_;
  FeatureLayout layout_;
};

SurrogatePosterior fit_surrogate(std::span<const EvaluationRecord> records,
                                 const ExpansionConfig& config, const NIGPrior& prior,
                                 int num_types, const FitOptions& options = {});

/// log p(y | alpha, a0, b0) under the given expansion.
double log_marginal_likelihood(std::span<const EvaluationRecord> records,
                               const ExpansionConfig& config, const NIGPrior& prior,
                               int num_types, const FitOptions& options = {});

/// Evidence of an already-fitted posterior.
double log_marginal_likelihood(const SurrogatePosterior& posterior);

struct CandidateEvidence {
  ExpansionConfig config;
  std::int64_t features = 0;
  bool eligible = false;
  std::optional<double> log_evidence;  // computed only for eligible candidates
};

struct ExpansionSelection {
  ExpansionConfig selected;
  bool fell_back = false;  // no candidate passed the feature guard
  std::vector<CandidateEvidence> candidates;
};

/// Max-evidence candidate among those with n >= guard_ratio * features.
/// With no eligible candidate, the one with the fewest features is returned.
/// Ties keep the earlier candidate.
ExpansionSelection select_expansion(std::span<const EvaluationRecord> records,
                                    std::span<const ExpansionConfig> candidates,
                                    const NIGPrior& prior, int num_types,
                                    double guard_ratio = 2.0, const FitOptions& options = {});

/// o1, o2r1..o2r{max_range}, o3r1..o3r{max_range}.
std::vector<ExpansionConfig> default_expansion_candidates(int max_order = 3, int max_range = 3);

}  // namespace placeopt
