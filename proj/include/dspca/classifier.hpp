#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dspca/dataset.hpp"
#include "dspca/kernel.hpp"
#include "dspca/spectral.hpp"

namespace dspca {

enum class Variant { lda, qda };

/// Which moments the reduced-space rule is built from: the projected kernel
/// estimates at the query index, or plain sample moments of the projected
/// training points.
enum class MomentSource { kernel, projected_sample };

const char* to_string(Variant v) noexcept;
Variant parse_variant(const std::string& name);
const char* to_string(MomentSource m) noexcept;
MomentSource parse_moment_source(const std::string& name);

struct Hyperparameters {
  Bandwidths bandwidths;
  double rho = 1.0;
  Eigen::Index K = 1;
  Variant variant = Variant::lda;
  EigenStrategy strategy = EigenStrategy::automatic;
  MomentSource moments = MomentSource::kernel;

  void validate() const;
};

void to_json(nlohmann::json& j, const Hyperparameters& hp);
void from_json(const nlohmann::json& j, Hyperparameters& hp);

/// Ridge schedule for projected covariances: eps * (trace / K) * I with eps
/// starting at kRidgeStart and growing tenfold up to kRidgeMax.
constexpr double kRidgeStart = 1e-8;
constexpr double kRidgeMax = 1e-2;

/// Reduced-space discriminant at one query index. Only the covariances the
/// variant needs are populated.
struct DiscriminantRule {
  double u = 0.0;
  Variant variant = Variant::lda;
  ProjectionBasis basis;
  Eigen::VectorXd proj_mu1;
  Eigen::VectorXd proj_mu2;
  Eigen::MatrixXd proj_sigma_pooled;
  Eigen::MatrixXd proj_sigma1;
  Eigen::MatrixXd proj_sigma2;
  double log_prior_ratio = 0.0;

  // Factorizations of the regularized covariances.
  Eigen::LLT<Eigen::MatrixXd> pooled_llt;
  Eigen::LLT<Eigen::MatrixXd> llt1;
  Eigen::LLT<Eigen::MatrixXd> llt2;
  double log_det1 = 0.0;
  double log_det2 = 0.0;
  Eigen::VectorXd lda_direction;  // (regularized pooled)^{-1} (proj_mu1 - proj_mu2)

  Eigen::Index dim() const noexcept { return proj_mu1.size(); }
};

/// Regularized Cholesky factor of a symmetric K x K matrix; throws
/// not_positive_definite once the ridge schedule is exhausted.
Eigen::LLT<Eigen::MatrixXd> regularized_cholesky(const Eigen::MatrixXd& s, Eigen::MatrixXd* regularized = nullptr);

/// Builds a rule from projected moments, factorizing what `variant` needs.
DiscriminantRule make_rule(ProjectionBasis basis, Eigen::VectorXd proj_mu1, Eigen::VectorXd proj_mu2,
                           Eigen::MatrixXd proj_sigma_pooled, Eigen::MatrixXd proj_sigma1,
                           Eigen::MatrixXd proj_sigma2, double log_prior_ratio, Variant variant);

double lda_score(const DiscriminantRule& rule, const Eigen::Ref<const Eigen::VectorXd>& x);
double qda_score(const DiscriminantRule& rule, const Eigen::Ref<const Eigen::VectorXd>& x);
double score(const DiscriminantRule& rule, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Scores already-projected coordinates (length dim()).
double score_projected(const DiscriminantRule& rule, const Eigen::Ref<const Eigen::VectorXd>& projected);

inline int label_from_score(double s) noexcept { return s >= 0.0 ? kClassOne : kClassTwo; }

/// Projected moments for the leading columns of one basis. Rules for any
/// K <= dim() come from the leading blocks, so a K_max basis serves every
/// smaller K.
struct ProjectedMoments {
  ProjectionBasis basis;
  Eigen::VectorXd mu1;
  Eigen::VectorXd mu2;
  Eigen::MatrixXd pooled;
  Eigen::MatrixXd sigma1;
  Eigen::MatrixXd sigma2;
  double log_prior_ratio = 0.0;

  DiscriminantRule rule(Eigen::Index k, Variant variant) const;
};

/// Kernel estimates at one query index plus what the eigen step needs,
/// reusable across rho and K.
class LocalEstimate {
 public:
  LocalEstimate(const Dataset& train, double u, const Bandwidths& bw,
                EigenStrategy strategy = EigenStrategy::automatic);

  double u() const noexcept { return u_; }
  const Eigen::VectorXd& mu1() const noexcept { return mu1_; }
  const Eigen::VectorXd& mu2() const noexcept { return mu2_; }
  const Eigen::VectorXd& delta() const noexcept { return delta_; }
  bool uses_factor_path() const noexcept { return factor_path_; }

  ProjectionBasis basis(double rho, Eigen::Index k) const;
  ProjectedMoments project(const ProjectionBasis& basis, MomentSource source = MomentSource::kernel) const;

 private:
  const Dataset* train_;
  double u_;
  bool factor_path_;
  Eigen::VectorXd mu1_, mu2_, delta_;
  Eigen::MatrixXd factor_;   // n x p, pooled covariance factor
  Eigen::MatrixXd pooled_;   // p x p, direct path only
  Eigen::MatrixXd gram_;     // n x n, factor path only
  Eigen::VectorXd factor_delta_;
};

/// Steps 1-2b and the reduced-space rule at query index u.
DiscriminantRule local_rule(const Dataset& train, double u, const Hyperparameters& hp);

struct Prediction {
  double u = 0.0;
  double score = 0.0;
  int label = kClassOne;
};

struct QueryFailure {
  Eigen::Index query = 0;
  ErrorKind kind = ErrorKind::internal;
  std::string message;
};

struct PredictionBatch {
  std::vector<std::optional<Prediction>> predictions;
  std::vector<QueryFailure> failures;
  std::size_t distinct_indices = 0;
};

/// One rule per distinct query index (keyed by exact bits), built at most
/// once. Per-query failures are collected; the batch throws only when every
/// query fails. `threads` > 1 builds rules concurrently with identical output.
PredictionBatch predict(const Dataset& train, const Eigen::MatrixXd& features, const Eigen::VectorXd& index,
                        const Hyperparameters& hp, unsigned threads = 1);

}  // namespace dspca
