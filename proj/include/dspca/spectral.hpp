#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "dspca/dataset.hpp"
#include "dspca/error.hpp"
#include "dspca/kernel.hpp"

namespace dspca {

/// Nonzero-eigenvalue threshold, relative to the largest eigenvalue, on the
/// factor path.
constexpr double kRankTolerance = 1e-12;

struct TotalCovariance {
  Eigen::MatrixXd matrix;
  double rho = 0.0;
  double u = 0.0;
};

/// (n+1) x p matrix A with A^T A equal to the total covariance.
struct FactorMatrix {
  Eigen::MatrixXd rows;
  double rho = 0.0;
  double u = 0.0;
};

struct ProjectionBasis {
  Eigen::MatrixXd vectors;      // p x K, orthonormal columns
  Eigen::VectorXd eigenvalues;  // K, descending
  double u = 0.0;
  double rho = 0.0;

  Eigen::Index dim() const noexcept { return vectors.cols(); }
  /// First `k` columns; valid only when k <= dim().
  ProjectionBasis truncated(Eigen::Index k) const;
};

void to_json(nlohmann::json& j, const ProjectionBasis& b);

enum class EigenStrategy { direct, factor, automatic };

const char* to_string(EigenStrategy s) noexcept;
EigenStrategy parse_strategy(const std::string& name);

/// Sigma(u) + rho * delta delta^T.
TotalCovariance total_cov(const LocalMoments& m, double rho);

/// n x p matrix W with W^T W equal to the pooled kernel covariance: row i is
/// sqrt((n_c / n) * w_i) * (x_i - mu_c(u)) with w_i the normalized class
/// weight at the covariance bandwidth and mu_c(u) the mean at that same
/// bandwidth. Rows follow dataset order.
Eigen::MatrixXd pooled_cov_factor(const Dataset& ds, double u, const Bandwidths& bw);

/// Pooled factor stacked over sqrt(rho) * delta^T.
FactorMatrix factor_matrix(const Dataset& ds, const LocalMoments& m, double rho);

/// Largest-magnitude coordinate of each column made positive; ties go to
/// the lowest index.
void normalize_signs(Eigen::MatrixXd& vectors);

/// Direct path: dense symmetric decomposition of the p x p matrix.
ProjectionBasis top_eigenvectors(const TotalCovariance& tc, Eigen::Index k);

/// Either path from the factor. `automatic` picks the factor path when
/// p > n + 1.
ProjectionBasis top_eigenvectors(const FactorMatrix& fm, Eigen::Index k,
                                 EigenStrategy strategy = EigenStrategy::automatic);

/// Lower-level entry points used when the caller already holds the pieces.
ProjectionBasis top_eigenvectors_direct(const Eigen::MatrixXd& symmetric, Eigen::Index k);
ProjectionBasis top_eigenvectors_factored(const Eigen::MatrixXd& factor, const Eigen::MatrixXd& factor_gram,
                                          Eigen::Index k);

/// Spectral norm of B1 B1^T - B2 B2^T for column-orthonormal B1, B2.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar subspace_distance(const Eigen::MatrixBase<DerivedA>& b1,
                                            const Eigen::MatrixBase<DerivedB>& b2) {
  using Scalar = typename DerivedA::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (b1.rows() != b2.rows()) throw Error(ErrorKind::shape, "subspace_distance: ambient dimensions differ");
  auto check = [](const auto& b) {
    const Matrix gram = b.transpose() * b;
    if ((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > Scalar(1e-6))
      throw Error(ErrorKind::domain, "subspace_distance: basis is not column-orthonormal");
  };
  check(b1);
  check(b2);

  // P1 - P2 vanishes off span[B1 B2]; compress onto an orthonormal basis of
  // that span and take the largest |eigenvalue| of the small difference.
  Matrix joint(b1.rows(), b1.cols() + b2.cols());
  joint << b1, b2;
  const Eigen::Index r = std::min(joint.rows(), joint.cols());
  Eigen::HouseholderQR<Matrix> qr(joint);
  const Matrix q = qr.householderQ() * Matrix::Identity(joint.rows(), r);
  const Matrix c1 = q.transpose() * b1;
  const Matrix c2 = q.transpose() * b2;
  const Matrix diff = c1 * c1.transpose() - c2 * c2.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(diff, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace dspca
