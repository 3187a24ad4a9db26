#pragma once

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <vector>

#include "dspca/dataset.hpp"

namespace fixtures {

/// Two Gaussian classes whose means drift with u; u ~ U[0, 1].
inline dspca::Dataset drifting_classes(std::mt19937_64& rng, Eigen::Index n1, Eigen::Index n2, Eigen::Index p,
                                       double separation = 1.0) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Eigen::Index n = n1 + n2;
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd u(n);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = i < n1 ? 1 : 2;
    y[static_cast<std::size_t>(i)] = label;
    u(i) = unif(rng);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double shift = label == 1 ? separation * std::cos(3.0 * u(i) + 0.3 * static_cast<double>(j)) : 0.0;
      x(i, j) = shift + (1.0 + 0.5 * u(i)) * normal(rng);
    }
  }
  return {std::move(x), std::move(u), std::move(y)};
}

}  // namespace fixtures
