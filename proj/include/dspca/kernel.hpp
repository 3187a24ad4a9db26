#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "dspca/dataset.hpp"
#include "dspca/error.hpp"

namespace dspca {

/// Weight sums below this are treated as out of bandwidth reach.
constexpr double kWeightFloor = 1e-300;

enum class KernelFamily { gaussian };

/// K_h(d) = K(d / h) / h with K the standard normal density.
template <typename Scalar>
Scalar kernel_weight(Scalar diff, Scalar h) {
  if (!(h > Scalar(0))) throw Error(ErrorKind::domain, "kernel bandwidth must be positive");
  const Scalar z = diff / h;
  return std::exp(Scalar(-0.5) * z * z) / (h * Scalar(std::sqrt(2.0 * std::numbers::pi)));
}

struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double h = 1.0;

  double operator()(double diff) const { return kernel_weight(diff, h); }
};

/// Per-class bandwidths for the mean and covariance smoothers, indexed by
/// class slot.
struct Bandwidths {
  std::array<double, 2> mean_h{1.0, 1.0};
  std::array<double, 2> cov_h{1.0, 1.0};

  static Bandwidths uniform(double h) { return {{h, h}, {h, h}}; }
  double mean(int label) const { return mean_h[static_cast<std::size_t>(slot(label))]; }
  double cov(int label) const { return cov_h[static_cast<std::size_t>(slot(label))]; }
  void validate() const;
};

void to_json(nlohmann::json& j, const Bandwidths& bw);
void from_json(const nlohmann::json& j, Bandwidths& bw);

/// Kernel-smoothed class moments at one query index.
struct LocalMoments {
  double u = 0.0;
  Eigen::VectorXd mu1;
  Eigen::VectorXd mu2;
  Eigen::MatrixXd sigma1;
  Eigen::MatrixXd sigma2;
  Eigen::MatrixXd sigma_pooled;
  Eigen::VectorXd delta;
  std::array<double, 2> class_weight_sums{0.0, 0.0};
  Bandwidths bandwidths;
};

/// Normalized kernel weights of class `label` observations at `u`, in
/// class-row order. Throws BandwidthUnderflow when the raw weight sum is
/// below kWeightFloor.
Eigen::VectorXd class_kernel_weights(const Dataset& ds, int label, double u, double h,
                                     double* raw_sum = nullptr);

Eigen::VectorXd nw_mean(const Dataset& ds, int label, double u, double h);

/// Weighted class covariance in centered form, symmetrized.
Eigen::MatrixXd nw_class_cov(const Dataset& ds, int label, double u, double h);

LocalMoments local_moments(const Dataset& ds, double u, const Bandwidths& bw);

/// Leave-one-out mean criterion: sum_i ||x_i - mu_{-i}(u_i)||^2 / (p^2 n_c).
double loocv_mean_error(const Dataset& ds, int label, double h);

/// Leave-one-out covariance criterion: sum_i ||r_i r_i^T - Sigma_{-i}(u_i)||_F^2 / (p^2 n_c)
/// with r_i = x_i - mu_{-i}(u_i).
double loocv_cov_error(const Dataset& ds, int label, double h);

struct LoocvErrors {
  double mean = 0.0;
  double cov = 0.0;
};

/// Both criteria from one pass over the class Gram matrix.
LoocvErrors loocv_errors(const Dataset& ds, int label, double h);

/// 20 log-spaced bandwidths on [0.02, 1] for a unit-interval index.
std::vector<double> default_bandwidth_grid();

enum class Criterion { mean, cov };

struct BandwidthChoice {
  int label = kClassOne;
  Criterion criterion = Criterion::mean;
  double h = 0.0;
  double criterion_value = 0.0;
};

struct BandwidthSelection {
  Bandwidths bandwidths;
  std::vector<BandwidthChoice> choices;
  /// Criterion values per grid point; NaN where the grid value failed.
  std::vector<double> grid;
  std::array<std::array<std::vector<double>, 2>, 2> curves;  // [class slot][criterion]
};

void to_json(nlohmann::json& j, const BandwidthSelection& sel);

/// LOOCV argmin per class and criterion; ties go to the smaller h and grid
/// values that underflow are skipped.
BandwidthSelection select_bandwidths(const Dataset& ds, std::vector<double> grid);

}  // namespace dspca
