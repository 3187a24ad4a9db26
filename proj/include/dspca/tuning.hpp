#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "dspca/classifier.hpp"
#include "dspca/dataset.hpp"
#include "dspca/kernel.hpp"

namespace dspca {

struct TuningGrid {
  std::vector<double> rhos;
  Eigen::Index k_max = 5;
  int folds = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// rho in {e^-1, ..., e^6}, K in {1, ..., 5}, 5 folds.
TuningGrid default_grid();

struct CellChoice {
  Eigen::Index rho_index = 0;
  Eigen::Index k = 1;
};

/// Argmin over a rho x K table (column j holds K = j + 1); NaN marks an
/// inadmissible cell. Among minimal cells the smallest K wins, then the
/// smallest rho (rows are ascending in rho).
CellChoice select_cell(const Eigen::MatrixXd& table);

/// Fold id per dataset row: each class is shuffled, then dealt round-robin.
std::vector<int> stratified_folds(const Dataset& ds, int folds, std::uint64_t seed);

struct CvOptions {
  EigenStrategy strategy = EigenStrategy::automatic;
  MomentSource moments = MomentSource::kernel;
  unsigned threads = 1;
};

struct CvReport {
  Variant variant = Variant::lda;
  std::vector<double> rhos;
  Eigen::Index k_max = 0;
  int folds = 0;
  std::uint64_t seed = 0;
  Eigen::Index held_out = 0;
  /// Held-out misclassification per (rho, K), averaged over folds; NaN where
  /// inadmissible.
  Eigen::MatrixXd error_table;
  double chosen_rho = 0.0;
  Eigen::Index chosen_K = 0;
};

void to_json(nlohmann::json& j, const CvReport& r);

/// Cross-validated (rho, K) for each requested variant from one pass: per
/// held-out query and rho the K_max basis is computed once and every
/// K <= K_max reuses its leading columns. Bandwidths stay fixed.
std::vector<CvReport> cv_select(const Dataset& train, const Bandwidths& bw, const TuningGrid& grid,
                                std::span<const Variant> variants, const CvOptions& options = {});

CvReport cv_select(const Dataset& train, const Bandwidths& bw, const TuningGrid& grid, Variant variant,
                   const CvOptions& options = {});

/// Fills chosen_rho / chosen_K from error_table.
void choose(CvReport& report);

}  // namespace dspca
