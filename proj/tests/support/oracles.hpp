#pragma once

// Reference implementations used only by tests. Each one is written from the
// textbook definition with no shortcuts shared with the library.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "dspca/dataset.hpp"

namespace oracle {

inline double normal_pdf(double x) {
  const long double z = x;
  return static_cast<double>(std::exp(-0.5L * z * z) / std::sqrt(2.0L * std::numbers::pi_v<long double>));
}

struct Loocv {
  double mean = 0.0;
  double cov = 0.0;
};

/// Rebuilds every leave-one-out estimator from scratch, covariance in raw
/// moment form.
inline Loocv brute_force_loocv(const dspca::Dataset& ds, int label, double h) {
  const auto& rows = ds.class_rows(label);
  const auto p = static_cast<double>(ds.p());
  Loocv out;
  for (auto i : rows) {
    double total = 0.0;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(ds.p());
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(ds.p(), ds.p());
    for (auto j : rows) {
      if (j == i) continue;
      const double w = normal_pdf((ds.index()(j) - ds.index()(i)) / h) / h;
      const Eigen::VectorXd x = ds.features().row(j).transpose();
      total += w;
      mu += w * x;
      second += w * x * x.transpose();
    }
    mu /= total;
    second /= total;
    const Eigen::MatrixXd sigma = second - mu * mu.transpose();
    const Eigen::VectorXd r = ds.features().row(i).transpose() - mu;
    out.mean += r.squaredNorm();
    out.cov += (r * r.transpose() - sigma).squaredNorm();
  }
  const double scale = p * p * static_cast<double>(rows.size());
  out.mean /= scale;
  out.cov /= scale;
  return out;
}

/// Plain LDA log-odds with an explicit inverse.
inline double textbook_lda(const Eigen::VectorXd& x, const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2,
                           const Eigen::MatrixXd& sigma, double log_prior_ratio) {
  const Eigen::MatrixXd inv = sigma.inverse();
  return (x - 0.5 * (mu1 + mu2)).transpose() * inv * (mu1 - mu2) + log_prior_ratio;
}

/// Gaussian log-density ratio with explicit inverses and determinants.
inline double textbook_qda(const Eigen::VectorXd& x, const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2,
                           const Eigen::MatrixXd& sigma1, const Eigen::MatrixXd& sigma2, double log_prior_ratio) {
  const Eigen::VectorXd r1 = x - mu1;
  const Eigen::VectorXd r2 = x - mu2;
  const double q1 = r1.dot(sigma1.inverse() * r1);
  const double q2 = r2.dot(sigma2.inverse() * r2);
  return -0.5 * q1 + 0.5 * q2 - 0.5 * std::log(sigma1.determinant()) + 0.5 * std::log(sigma2.determinant()) +
         log_prior_ratio;
}

/// Static supervised PCA followed by LDA: global class moments (divisor
/// n_c), pooled with weights n_c / n, full eigendecomposition of the total
/// covariance, and the same 1e-8 * trace / K ridge as the library rule.
inline std::vector<int> static_spca_lda(const dspca::Dataset& train, const Eigen::MatrixXd& queries, double rho,
                                        Eigen::Index k) {
  const Eigen::Index p = train.p();
  const double n = static_cast<double>(train.n());
  Eigen::VectorXd mu[2];
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(p, p);
  for (int c = 0; c < 2; ++c) {
    const Eigen::MatrixXd& x = train.class_features(c + 1);
    mu[c] = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - mu[c].transpose();
    pooled += (centered.transpose() * centered) / n;  // (n_c / n) * scatter / n_c
  }
  const Eigen::VectorXd delta = mu[0] - mu[1];
  const Eigen::MatrixXd total = pooled + rho * delta * delta.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(total);
  const Eigen::MatrixXd r = eig.eigenvectors().rightCols(k).rowwise().reverse();
  Eigen::MatrixXd s = r.transpose() * pooled * r;
  s.diagonal().array() += 1e-8 * s.trace() / static_cast<double>(k);
  const double log_prior = std::log(static_cast<double>(train.n1()) / static_cast<double>(train.n2()));
  std::vector<int> labels;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    const Eigen::VectorXd z = r.transpose() * queries.row(q).transpose();
    const double score = textbook_lda(z, r.transpose() * mu[0], r.transpose() * mu[1], s, log_prior);
    labels.push_back(score >= 0.0 ? 1 : 2);
  }
  return labels;
}

/// Random orthonormal p x m matrix.
inline Eigen::MatrixXd random_orthonormal(std::mt19937_64& rng, Eigen::Index p, Eigen::Index m) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(p, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < p; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(p, m);
}

/// sigma2 * I + V diag(spikes) V^T with orthonormal V.
inline Eigen::MatrixXd spiked_covariance(const Eigen::MatrixXd& v, const Eigen::VectorXd& spikes, double sigma2) {
  Eigen::MatrixXd s = v * spikes.asDiagonal() * v.transpose();
  s.diagonal().array() += sigma2;
  return 0.5 * (s + s.transpose());
}

}  // namespace oracle
