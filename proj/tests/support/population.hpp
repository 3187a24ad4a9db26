#pragma once

// Population-level constructions with known spiked structure. Everything is
// exact: no sampling, so the subspace identities hold to rounding error.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "dspca/classifier.hpp"
#include "dspca/spectral.hpp"
#include "oracles.hpp"

namespace population {

/// Sigma = V diag(spikes) V^T + sigma2 I with rank-k V, random class means.
/// Returns ||(I - R1 R1^T) beta|| / ||beta|| for the top k+1 eigenvectors
/// R1 of Sigma + rho delta delta^T and beta = Sigma^{-1} delta.
inline double containment_residual(std::mt19937_64& rng, Eigen::Index p, Eigen::Index k, double rho) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> spike(1.0, 10.0);
  std::uniform_real_distribution<double> noise(0.5, 2.0);
  const Eigen::MatrixXd v = oracle::random_orthonormal(rng, p, k);
  Eigen::VectorXd spikes(k);
  for (auto& s : spikes) s = spike(rng);
  dspca::LocalMoments m;
  m.sigma_pooled = oracle::spiked_covariance(v, spikes, noise(rng));
  Eigen::VectorXd mu1(p), mu2(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    mu1(i) = normal(rng);
    mu2(i) = normal(rng);
  }
  m.delta = mu1 - mu2;
  const Eigen::VectorXd beta = m.sigma_pooled.ldlt().solve(m.delta);
  const dspca::ProjectionBasis r1 = dspca::top_eigenvectors(dspca::total_cov(m, rho), k + 1);
  return (beta - r1.vectors * (r1.vectors.transpose() * beta)).norm() / beta.norm();
}

/// Two classes with spikes of rank k1 and k2 on a shared noise floor.
/// Compares the full-space Gaussian log-likelihood ratio with the library's
/// QDA score on the top k1+k2+1 coordinates (unregularized population
/// moments) at `queries` random points; returns the largest
/// |difference| / max(1, |full score|).
inline double qda_sufficiency_gap(std::mt19937_64& rng, Eigen::Index p, Eigen::Index k1, Eigen::Index k2,
                                  double rho, int queries) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> spike(1.0, 10.0);
  const double a = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
  auto spiked = [&](Eigen::Index k) {
    const Eigen::MatrixXd v = oracle::random_orthonormal(rng, p, k);
    Eigen::VectorXd s(k);
    for (auto& x : s) x = spike(rng);
    return oracle::spiked_covariance(v, s, a);
  };
  const Eigen::MatrixXd sigma1 = spiked(k1);
  const Eigen::MatrixXd sigma2 = spiked(k2);
  Eigen::VectorXd mu1(p), mu2(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    mu1(i) = normal(rng);
    mu2(i) = normal(rng);
  }

  dspca::LocalMoments m;
  m.sigma_pooled = 0.5 * (sigma1 + sigma2);
  m.delta = mu1 - mu2;
  const Eigen::Index k = k1 + k2 + 1;
  const dspca::ProjectionBasis r1 = dspca::top_eigenvectors(dspca::total_cov(m, rho), k);

  dspca::DiscriminantRule rule;
  rule.variant = dspca::Variant::qda;
  rule.basis = r1;
  rule.proj_mu1 = r1.vectors.transpose() * mu1;
  rule.proj_mu2 = r1.vectors.transpose() * mu2;
  rule.proj_sigma1 = r1.vectors.transpose() * sigma1 * r1.vectors;
  rule.proj_sigma2 = r1.vectors.transpose() * sigma2 * r1.vectors;
  rule.llt1.compute(rule.proj_sigma1);
  rule.llt2.compute(rule.proj_sigma2);
  rule.log_det1 = 2.0 * rule.llt1.matrixLLT().diagonal().array().log().sum();
  rule.log_det2 = 2.0 * rule.llt2.matrixLLT().diagonal().array().log().sum();

  const Eigen::LLT<Eigen::MatrixXd> full1(sigma1), full2(sigma2);
  const double log_det1 = 2.0 * full1.matrixLLT().diagonal().array().log().sum();
  const double log_det2 = 2.0 * full2.matrixLLT().diagonal().array().log().sum();

  double worst = 0.0;
  for (int q = 0; q < queries; ++q) {
    Eigen::VectorXd x(p);
    for (auto& c : x) c = 2.0 * normal(rng);
    x += q % 2 == 0 ? mu1 : mu2;
    const double q1 = full1.matrixL().solve(x - mu1).squaredNorm();
    const double q2 = full2.matrixL().solve(x - mu2).squaredNorm();
    const double full = -0.5 * (q1 + log_det1) + 0.5 * (q2 + log_det2);
    const double reduced = dspca::score(rule, x);
    worst = std::max(worst, std::abs(full - reduced) / std::max(1.0, std::abs(full)));
  }
  return worst;
}

}  // namespace population
