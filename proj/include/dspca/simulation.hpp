#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dspca/classifier.hpp"
#include "dspca/dataset.hpp"
#include "dspca/spectral.hpp"
#include "dspca/tuning.hpp"

namespace dspca {

/// Dense u^|i-j| matrix.
Eigen::MatrixXd ar_covariance(Eigen::Index p, double a);
/// u 11^T + (1 - u) I.
Eigen::MatrixXd equicorrelation_covariance(Eigen::Index p, double u);

/// Population model: class means and covariances as functions of the index.
/// When `factor` is set it maps a standard normal vector of length
/// factor_width to a draw from N(0, Sigma_c(u)); otherwise draws use a
/// Cholesky factor of cov_fn.
struct SimulationModelSpec {
  int model_id = 0;
  Eigen::Index p = 0;
  std::function<Eigen::VectorXd(int label, double u)> mean_fn;
  std::function<Eigen::MatrixXd(int label, double u)> cov_fn;
  bool equal_cov = true;

  using FactorFn = std::function<void(int label, double u, const Eigen::Ref<const Eigen::VectorXd>& z,
                                      Eigen::Ref<Eigen::VectorXd> out)>;
  FactorFn factor;
  Eigen::Index factor_width = 0;

  Eigen::VectorXd mean(int label, double u) const { return mean_fn(label, u); }
  Eigen::MatrixXd cov(int label, double u) const { return cov_fn(label, u); }

  /// Materialized noise factor F with F F^T = Sigma_c(u).
  Eigen::MatrixXd factor_matrix(int label, double u) const;
};

/// Models 1-6 of the simulation study. Models 1-4 and 6 need p >= 20.
SimulationModelSpec model_spec(int model_id, Eigen::Index p);

/// Class 1 rows first, then class 2; u ~ U[0, 1). Deterministic in seed.
Dataset generate(const SimulationModelSpec& spec, Eigen::Index n1, Eigen::Index n2, std::uint64_t seed);

/// Bayes log-likelihood ratio with the true parameters and equal priors:
/// linear for equal-covariance models, quadratic otherwise.
double oracle_score(const SimulationModelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x, double u);

std::vector<int> oracle_predict(const SimulationModelSpec& spec, const Eigen::MatrixXd& features,
                                const Eigen::VectorXd& index);

enum class Method { oracle, dspca_lda, dspca_qda };

const char* to_string(Method m) noexcept;
Method parse_method(const std::string& name);

struct BenchmarkConfig {
  int model_id = 1;
  Eigen::Index p = 100;
  Eigen::Index n1 = 100;
  Eigen::Index n2 = 100;
  int reps = 100;
  std::vector<Method> methods{Method::oracle, Method::dspca_lda, Method::dspca_qda};
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<double> bandwidth_grid = default_bandwidth_grid();
  TuningGrid tuning = default_grid();
  EigenStrategy strategy = EigenStrategy::automatic;
  MomentSource moments = MomentSource::kernel;

  void validate() const;
};

void to_json(nlohmann::json& j, const BenchmarkConfig& c);
void from_json(const nlohmann::json& j, BenchmarkConfig& c);

struct MethodSummary {
  Method method = Method::oracle;
  double mean = 0.0;
  double se = 0.0;
  double mean_seconds = 0.0;
  std::vector<double> errors;   // per replicate; NaN where the replicate failed
  std::vector<double> seconds;
  int failed = 0;
};

struct BenchmarkResult {
  BenchmarkConfig config;
  std::vector<MethodSummary> methods;
  std::vector<std::string> warnings;

  const MethodSummary& method(Method m) const;
};

void to_json(nlohmann::json& j, const BenchmarkResult& r);

/// CSV with one row per result: "p,<method>,..." and cells "mean(SE)".
std::string benchmark_table(const std::vector<BenchmarkResult>& results);

/// Replicate r draws train and test sets from sub-seeds of (seed, r); the
/// DSPCA methods share one bandwidth selection and one CV pass. Replicates
/// run concurrently with results independent of scheduling.
BenchmarkResult run_benchmark(const BenchmarkConfig& config);

}  // namespace dspca
